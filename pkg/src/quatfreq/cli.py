"""Command-line front end: simulate, estimate, accept, bench.

Exit codes: 0 on success, 1 when an acceptance criterion or a filtering
run fails, 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from quatfreq.accept import format_report, run_acceptance
from quatfreq.config import (
    ConfigError,
    load_estimator_config_file,
    load_scenario_file,
)
from quatfreq.pipeline import (
    EstimationError,
    EstimateRecord,
    EstimatorConfig,
    run,
    summarize,
)
from quatfreq.signal import (
    BUILTIN_SCENARIO_NAMES,
    CsvFormatError,
    ScenarioError,
    ScenarioSpec,
    balanced_scenario,
    builtin_scenario,
    embed,
    generate,
    load_csv,
    load_truth_csv,
    save_csv,
    save_truth_csv,
)

RECORD_HEADER = ["n", "t", "dtheta", "f_hat", "r_hat", "qplus_mag",
                 "qminus_mag", "innov_mag", "warmup"]


def truth_sidecar_path(csv_path) -> Path:
    path = Path(csv_path)
    return path.with_suffix(".truth.csv")


def write_records_csv(records: list[EstimateRecord], path) -> None:
    """Estimate CSV; the magnitude columns carry the fundamental bank."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_HEADER)
        for r in records:
            fundamental = r.banks[0]
            writer.writerow([
                r.n, repr(r.t), repr(r.delta_theta), repr(r.freq_hz),
                repr(r.rocof_hz_per_s), repr(fundamental.q_plus_mag),
                repr(fundamental.q_minus_mag), repr(r.innovation_mag),
                int(r.warmup),
            ])


def read_records_csv(path) -> list[dict]:
    """Estimate CSV rows as dicts (testing and downstream tooling)."""
    rows: list[dict] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RECORD_HEADER:
            raise CsvFormatError(
                f"expected header {','.join(RECORD_HEADER)!r}, got {header!r}",
                line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RECORD_HEADER):
                raise CsvFormatError(
                    f"expected {len(RECORD_HEADER)} columns, got {len(row)}",
                    line=lineno)
            try:
                rows.append({
                    "n": int(row[0]),
                    "t": float(row[1]),
                    "dtheta": float(row[2]),
                    "f_hat": float(row[3]),
                    "r_hat": float(row[4]),
                    "qplus_mag": float(row[5]),
                    "qminus_mag": float(row[6]),
                    "innov_mag": float(row[7]),
                    "warmup": bool(int(row[8])),
                })
            except ValueError as exc:
                raise CsvFormatError(str(exc), line=lineno) from exc
    return rows


def resolve_scenario(name_or_path: str, seed: int | None) -> ScenarioSpec:
    if name_or_path in BUILTIN_SCENARIO_NAMES:
        return builtin_scenario(name_or_path, seed=seed if seed is not None else 0)
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(
            f"{name_or_path!r} is neither a bundled scenario "
            f"({', '.join(BUILTIN_SCENARIO_NAMES)}) nor an existing file")
    spec = load_scenario_file(path)
    if seed is not None:
        spec = ScenarioSpec(spec.sample_rate_hz, spec.segments, seed)
    return spec


def infer_sample_rate(samples) -> float:
    if len(samples) < 2:
        raise ConfigError("cannot infer the sample rate from fewer than two "
                          "samples; provide a config file")
    steps = np.diff([s.t for s in samples])
    dt = float(np.median(steps))
    if dt <= 0 or np.abs(steps - dt).max() > 1e-9 + 1e-6 * dt:
        raise ConfigError("input timestamps are not uniformly spaced")
    return 1.0 / dt


def cmd_simulate(args) -> int:
    spec = resolve_scenario(args.scenario, args.seed)
    samples = generate(spec)
    save_csv(samples, args.out)
    truth_path = args.truth or truth_sidecar_path(args.out)
    save_truth_csv(spec, truth_path)
    print(f"wrote {len(samples)} samples to {args.out}")
    print(f"wrote truth trajectory to {truth_path}")
    return 0


def cmd_estimate(args) -> int:
    waveform = load_csv(args.input)
    if not waveform:
        raise ConfigError(f"{args.input}: no samples")
    fs = infer_sample_rate(waveform)
    if args.config:
        config = load_estimator_config_file(args.config, sample_rate_hz=fs)
        if abs(config.sample_rate_hz - fs) > 1e-6 * fs:
            raise ConfigError(
                f"config sample_rate_hz {config.sample_rate_hz} disagrees "
                f"with the input spacing ({fs:.6g} Hz)")
    else:
        config = EstimatorConfig(sample_rate_hz=fs)

    samples = [embed(s) for s in waveform]
    started = time.perf_counter()
    records = run(samples, config)
    elapsed = time.perf_counter() - started
    write_records_csv(records, args.out)
    print(f"wrote {len(records)} estimates to {args.out}")

    truth_path = Path(args.truth) if args.truth else truth_sidecar_path(args.input)
    if truth_path.exists():
        f_true, r_true = load_truth_csv(truth_path)
        if f_true.size == len(records):
            summary = summarize(records, f_true, r_true,
                                samples_per_sec=len(records) / elapsed)
            print(summary.format())
        else:
            print(f"truth sidecar {truth_path} has {f_true.size} rows for "
                  f"{len(records)} samples; skipping the summary",
                  file=sys.stderr)
    return 0


def cmd_accept(args) -> int:
    results = run_acceptance()
    report = format_report(results)
    print(report)
    if args.report:
        Path(args.report).write_text(report + "\n", encoding="utf-8")
    return 0 if all(r.passed for r in results) else 1


def cmd_bench(args) -> int:
    orders = tuple(int(tok) for tok in args.orders.split(","))
    spec = balanced_scenario(duration_s=args.samples / 1000.0,
                             snr_db=30.0, seed=args.seed or 0)
    samples = [embed(s) for s in generate(spec)]
    config = EstimatorConfig(sample_rate_hz=1000.0, harmonic_orders=orders)
    started = time.perf_counter()
    records = run(samples, config)
    elapsed = time.perf_counter() - started
    print(f"filtered {len(records)} samples with banks {orders} in "
          f"{elapsed:.2f} s ({len(records) / elapsed:.0f} samples/s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quatfreq",
        description="Quaternion two-stage frequency and ROCOF estimation "
                    "for three-phase power systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate",
                           help="generate a synthetic three-phase waveform")
    p_sim.add_argument("scenario",
                       help=f"bundled name ({', '.join(BUILTIN_SCENARIO_NAMES)}) "
                            f"or scenario file path")
    p_sim.add_argument("--out", required=True, help="waveform CSV to write")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="noise seed override")
    p_sim.add_argument("--truth", default=None,
                       help="truth CSV path (default: <out>.truth.csv)")
    p_sim.set_defaults(func=cmd_simulate)

    p_est = sub.add_parser("estimate",
                           help="run the estimator over a waveform CSV")
    p_est.add_argument("input", help="waveform CSV (n,t,va,vb,vc)")
    p_est.add_argument("--config", default=None,
                       help="estimator configuration file")
    p_est.add_argument("--out", required=True, help="estimate CSV to write")
    p_est.add_argument("--truth", default=None,
                       help="truth CSV (default: <input>.truth.csv if present)")
    p_est.set_defaults(func=cmd_estimate)

    p_acc = sub.add_parser("accept", help="run the acceptance suite")
    p_acc.add_argument("--report", default=None,
                       help="also write the report to this file")
    p_acc.set_defaults(func=cmd_accept)

    p_bench = sub.add_parser("bench", help="measure filtering throughput")
    p_bench.add_argument("--samples", type=int, default=100_000,
                         help="number of samples to filter")
    p_bench.add_argument("--orders", default="1,3",
                         help="comma-separated harmonic orders")
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CsvFormatError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
