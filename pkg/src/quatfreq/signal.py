"""Synthetic three-phase voltage generation and quaternion embedding.

A scenario is a list of segments, each holding per-phase amplitudes and
phase offsets, a starting frequency, a linear frequency ramp, odd
harmonics, and an optional signal-to-noise ratio. The electrical angle
is accumulated recursively (``theta[n+1] = theta[n] + 2*pi*f[n]*dT``),
which keeps the waveform phase-continuous across segment boundaries and
correct under frequency ramps, where evaluating ``sin(2*pi*f*n*dT)``
directly would double the effective ramp rate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from quatfreq.quaternion import Quaternion

__all__ = [
    "ThreePhaseSample",
    "PureQuatSample",
    "Harmonic",
    "Segment",
    "ScenarioSpec",
    "ScenarioError",
    "CsvFormatError",
    "generate",
    "truth_trajectory",
    "embed",
    "add_noise",
    "save_csv",
    "load_csv",
    "save_truth_csv",
    "load_truth_csv",
    "builtin_scenario",
    "BUILTIN_SCENARIO_NAMES",
]

# fixed phase-b / phase-c offsets of the three-phase pattern
PHASE_OFFSETS = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)

WAVEFORM_HEADER = ["n", "t", "va", "vb", "vc"]
TRUTH_HEADER = ["n", "t", "f_true", "r_true"]


class ScenarioError(ValueError):
    """A scenario description violates its own constraints."""


class CsvFormatError(ValueError):
    """CSV input does not match the expected schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, slots=True)
class ThreePhaseSample:
    """One sampled instant of the three phase voltages (per-unit)."""

    n: int
    t: float
    va: float
    vb: float
    vc: float


@dataclass(frozen=True, slots=True)
class PureQuatSample:
    """A voltage sample embedded as the pure quaternion i*va + j*vb + k*vc."""

    n: int
    q: Quaternion


@dataclass(frozen=True, slots=True)
class Harmonic:
    """Odd harmonic riding on the fundamental.

    ``fraction`` scales each phase's own fundamental amplitude; the
    per-phase overrides allow unbalanced harmonic content.
    """

    order: int
    fraction: float
    fraction_a: float | None = None
    fraction_b: float | None = None
    fraction_c: float | None = None

    def phase_fractions(self) -> tuple[float, float, float]:
        return (
            self.fraction if self.fraction_a is None else self.fraction_a,
            self.fraction if self.fraction_b is None else self.fraction_b,
            self.fraction if self.fraction_c is None else self.fraction_c,
        )


@dataclass(frozen=True, slots=True)
class Segment:
    """One piece of a scenario with fixed amplitudes and a linear ramp."""

    duration_s: float
    amp_a: float = 1.0
    amp_b: float = 1.0
    amp_c: float = 1.0
    phase_a_rad: float = 0.0
    phase_b_rad: float = 0.0
    phase_c_rad: float = 0.0
    start_freq_hz: float = 50.0
    rocof_hz_per_s: float = 0.0
    harmonics: tuple[Harmonic, ...] = ()
    snr_db: float | None = None


@dataclass(frozen=True, slots=True)
class ScenarioSpec:
    sample_rate_hz: float
    segments: tuple[Segment, ...]
    seed: int = 0

    def validate(self) -> None:
        if self.sample_rate_hz <= 0.0:
            raise ScenarioError("sample_rate_hz must be positive")
        if not self.segments:
            raise ScenarioError("scenario needs at least one segment")
        for idx, seg in enumerate(self.segments):
            where = f"segment {idx}"
            if seg.duration_s <= 0.0:
                raise ScenarioError(f"{where}: duration_s must be positive")
            for name, amp in (("amp_a", seg.amp_a), ("amp_b", seg.amp_b),
                              ("amp_c", seg.amp_c)):
                if amp <= 0.0:
                    raise ScenarioError(f"{where}: {name} must be positive")
            f_end = seg.start_freq_hz + seg.rocof_hz_per_s * seg.duration_s
            f_max = max(abs(seg.start_freq_hz), abs(f_end))
            max_order = 1
            for h in seg.harmonics:
                if h.order < 3 or h.order % 2 == 0:
                    raise ScenarioError(
                        f"{where}: harmonic order must be an odd integer >= 3")
                for frac in h.phase_fractions():
                    if not 0.0 <= frac < 1.0:
                        raise ScenarioError(
                            f"{where}: harmonic fraction must be in [0, 1)")
                max_order = max(max_order, h.order)
            if self.sample_rate_hz <= 2.0 * max_order * f_max:
                raise ScenarioError(
                    f"{where}: sample rate {self.sample_rate_hz} Hz violates the "
                    f"Nyquist guard for order {max_order} at {f_max} Hz")
            if seg.snr_db is not None and not math.isfinite(seg.snr_db):
                raise ScenarioError(f"{where}: snr_db must be finite")

    def segment_sample_counts(self) -> list[int]:
        return [int(round(seg.duration_s * self.sample_rate_hz))
                for seg in self.segments]

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz


def _segment_waveform(seg: Segment, theta: np.ndarray) -> tuple[np.ndarray, ...]:
    """Phase voltages of one segment given its electrical angle samples."""
    amps = (seg.amp_a, seg.amp_b, seg.amp_c)
    phases = (seg.phase_a_rad, seg.phase_b_rad, seg.phase_c_rad)
    out = []
    for amp, ph, off in zip(amps, phases, PHASE_OFFSETS):
        arg = theta + ph + off
        v = amp * np.sin(arg)
        for h in seg.harmonics:
            frac = h.phase_fractions()[len(out)]
            if frac > 0.0:
                v = v + frac * amp * np.sin(h.order * arg)
        out.append(v)
    return tuple(out)


def generate(spec: ScenarioSpec) -> list[ThreePhaseSample]:
    """Produce the scenario's samples, with seeded per-segment noise."""
    spec.validate()
    dt = spec.dt
    rng = np.random.default_rng(spec.seed)
    samples: list[ThreePhaseSample] = []
    theta0 = 0.0
    n0 = 0
    for seg, count in zip(spec.segments, spec.segment_sample_counts()):
        freqs = seg.start_freq_hz + seg.rocof_hz_per_s * dt * np.arange(count)
        # theta[k] carries the accumulated angle up to sample k
        increments = 2.0 * math.pi * dt * freqs
        theta = theta0 + np.concatenate(([0.0], np.cumsum(increments[:-1])))
        va, vb, vc = _segment_waveform(seg, theta)
        if seg.snr_db is not None:
            va, vb, vc = _add_noise_arrays((va, vb, vc), seg.snr_db, rng)
        for k in range(count):
            n = n0 + k
            samples.append(ThreePhaseSample(n, n * dt, float(va[k]),
                                            float(vb[k]), float(vc[k])))
        theta0 += float(np.sum(increments))
        n0 += count
    return samples


def truth_trajectory(spec: ScenarioSpec) -> tuple[np.ndarray, np.ndarray]:
    """The scenario's exact piecewise-linear frequency and ramp arrays."""
    spec.validate()
    dt = spec.dt
    f_parts = []
    r_parts = []
    for seg, count in zip(spec.segments, spec.segment_sample_counts()):
        f_parts.append(seg.start_freq_hz + seg.rocof_hz_per_s * dt * np.arange(count))
        r_parts.append(np.full(count, seg.rocof_hz_per_s))
    return np.concatenate(f_parts), np.concatenate(r_parts)


def embed(sample: ThreePhaseSample) -> PureQuatSample:
    """Map the voltage triple onto a pure quaternion."""
    return PureQuatSample(sample.n,
                          Quaternion(0.0, sample.va, sample.vb, sample.vc))


def _add_noise_arrays(phases, snr_db: float, rng) -> tuple[np.ndarray, ...]:
    out = []
    for v in phases:
        power = float(np.mean(v * v))
        sigma = math.sqrt(power / (10.0 ** (snr_db / 10.0)))
        out.append(v + rng.normal(0.0, sigma, size=v.shape))
    return tuple(out)


def add_noise(samples: list[ThreePhaseSample], snr_db: float | None,
              seed: int) -> list[ThreePhaseSample]:
    """Add white Gaussian noise at the given per-phase SNR.

    Each phase's noise variance is its own mean-square value over the
    record divided by ``10^(snr_db/10)``. ``snr_db=None`` is the
    noise-free sentinel and returns the input unchanged.
    """
    if snr_db is None or not samples:
        return list(samples)
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite (use None for noise-free)")
    va = np.array([s.va for s in samples])
    vb = np.array([s.vb for s in samples])
    vc = np.array([s.vc for s in samples])
    rng = np.random.default_rng(seed)
    va, vb, vc = _add_noise_arrays((va, vb, vc), snr_db, rng)
    return [ThreePhaseSample(s.n, s.t, float(va[k]), float(vb[k]), float(vc[k]))
            for k, s in enumerate(samples)]


# ----------------------------------------------------------------------
# CSV round-trip (waveform and truth sidecar)
# ----------------------------------------------------------------------

def save_csv(samples: list[ThreePhaseSample], path) -> None:
    """Write `n,t,va,vb,vc` rows; float repr keeps values lossless."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WAVEFORM_HEADER)
        for s in samples:
            writer.writerow([s.n, repr(s.t), repr(s.va), repr(s.vb), repr(s.vc)])


def load_csv(path) -> list[ThreePhaseSample]:
    """Read a waveform CSV, enforcing the schema row by row."""
    samples: list[ThreePhaseSample] = []
    prev_n: int | None = None
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != WAVEFORM_HEADER:
            raise CsvFormatError(
                f"expected header {','.join(WAVEFORM_HEADER)!r}, got {header!r}",
                line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise CsvFormatError(
                    f"expected 5 columns, got {len(row)}", line=lineno)
            try:
                n = int(row[0])
                t, va, vb, vc = (float(c) for c in row[1:])
            except ValueError as exc:
                raise CsvFormatError(str(exc), line=lineno) from exc
            if prev_n is not None and n <= prev_n:
                raise CsvFormatError(
                    f"sample index {n} does not increase past {prev_n}",
                    line=lineno)
            prev_n = n
            samples.append(ThreePhaseSample(n, t, va, vb, vc))
    return samples


def save_truth_csv(spec: ScenarioSpec, path) -> None:
    f_true, r_true = truth_trajectory(spec)
    dt = spec.dt
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRUTH_HEADER)
        for n, (f, r) in enumerate(zip(f_true, r_true)):
            writer.writerow([n, repr(n * dt), repr(float(f)), repr(float(r))])


def load_truth_csv(path) -> tuple[np.ndarray, np.ndarray]:
    f_vals: list[float] = []
    r_vals: list[float] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRUTH_HEADER:
            raise CsvFormatError(
                f"expected header {','.join(TRUTH_HEADER)!r}, got {header!r}",
                line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CsvFormatError(
                    f"expected 4 columns, got {len(row)}", line=lineno)
            try:
                f_vals.append(float(row[2]))
                r_vals.append(float(row[3]))
            except ValueError as exc:
                raise CsvFormatError(str(exc), line=lineno) from exc
    return np.array(f_vals), np.array(r_vals)


# ----------------------------------------------------------------------
# bundled benchmark scenarios
# ----------------------------------------------------------------------

SAG_PHASE_SHIFT_RAD = math.radians(20.0)


def sag_scenario(seed: int = 0, snr_db: float | None = 30.0) -> ScenarioSpec:
    """Voltage-sag benchmark at 1 kHz sampling.

    Balanced 1 pu / 50 Hz operation for 0.5 s, then an 80% amplitude fall
    on phase a with 20 degree shifts on phases b and c, a balanced 10%
    third harmonic, and a 0.2 Hz frequency drop, held for 1.5 s.
    """
    return ScenarioSpec(
        sample_rate_hz=1000.0,
        seed=seed,
        segments=(
            Segment(duration_s=0.5, start_freq_hz=50.0, snr_db=snr_db),
            Segment(
                duration_s=1.5,
                amp_a=0.2,
                phase_b_rad=SAG_PHASE_SHIFT_RAD,
                phase_c_rad=SAG_PHASE_SHIFT_RAD,
                start_freq_hz=49.8,
                harmonics=(Harmonic(order=3, fraction=0.1),),
                snr_db=snr_db,
            ),
        ),
    )


def ramp_scenario(rate_hz_per_s: float = 0.5, seed: int = 0,
                  snr_db: float | None = 30.0) -> ScenarioSpec:
    """Frequency-ramp benchmark at 1 kHz sampling.

    The system runs unbalanced (sagged phase a, shifted b/c, 10% third
    harmonic) at 50 Hz for 0.5 s, then the frequency ramps at the given
    rate for 1.5 s.
    """
    unbalanced = dict(
        amp_a=0.2,
        phase_b_rad=SAG_PHASE_SHIFT_RAD,
        phase_c_rad=SAG_PHASE_SHIFT_RAD,
        harmonics=(Harmonic(order=3, fraction=0.1),),
        snr_db=snr_db,
    )
    return ScenarioSpec(
        sample_rate_hz=1000.0,
        seed=seed,
        segments=(
            Segment(duration_s=0.5, start_freq_hz=50.0, **unbalanced),
            Segment(duration_s=1.5, start_freq_hz=50.0,
                    rocof_hz_per_s=rate_hz_per_s, **unbalanced),
        ),
    )


def balanced_scenario(freq_hz: float = 50.0, duration_s: float = 1.0,
                      seed: int = 0, snr_db: float | None = None,
                      sample_rate_hz: float = 1000.0) -> ScenarioSpec:
    """Balanced constant-frequency reference scenario."""
    return ScenarioSpec(
        sample_rate_hz=sample_rate_hz,
        seed=seed,
        segments=(Segment(duration_s=duration_s, start_freq_hz=freq_hz,
                          snr_db=snr_db),),
    )


_BUILTINS = {
    "experiment1": sag_scenario,
    "sag": sag_scenario,
    "experiment2": lambda seed=0, snr_db=30.0: ramp_scenario(0.5, seed, snr_db),
    "ramp-rise": lambda seed=0, snr_db=30.0: ramp_scenario(0.5, seed, snr_db),
    "experiment2-fall": lambda seed=0, snr_db=30.0: ramp_scenario(-0.5, seed, snr_db),
    "ramp-fall": lambda seed=0, snr_db=30.0: ramp_scenario(-0.5, seed, snr_db),
    "balanced": lambda seed=0, snr_db=None: balanced_scenario(seed=seed, snr_db=snr_db),
}

BUILTIN_SCENARIO_NAMES = tuple(sorted(_BUILTINS))


def builtin_scenario(name: str, seed: int = 0) -> ScenarioSpec:
    """Look up a bundled scenario by name."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ScenarioError(
            f"unknown scenario {name!r}; bundled names: "
            f"{', '.join(BUILTIN_SCENARIO_NAMES)}") from None
    return factory(seed=seed)
