"""Acceptance suite: one callable check per shipped guarantee.

Every criterion is self-contained, seeded, and returns a deterministic
result line, so two runs of the suite produce byte-identical reports
(that determinism is itself the final criterion). Wall-clock figures are
deliberately kept out of the report; ``bench`` exists for that purpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from quatfreq import qekf
from quatfreq.oracles import (
    dense_kalman_step,
    fft_frequency_oracle,
    finite_difference_jacobian,
    fit_counter_rotating,
)
from quatfreq.pipeline import EstimatorConfig, run
from quatfreq.qekf import QekfNoise
from quatfreq.quaternion import Quaternion, involution
from quatfreq.signal import (
    Segment,
    ScenarioSpec,
    balanced_scenario,
    embed,
    generate,
    ramp_scenario,
    sag_scenario,
    truth_trajectory,
)

__all__ = ["CriterionResult", "run_acceptance", "format_report"]

FS = 1000.0
SAG_SEED = 1
RAMP_SEED = 1
SAG_TIME_S = 0.5
CONVERGENCE_BAND_HZ = 0.05


@dataclass(frozen=True, slots=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str

    def format_line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{self.index}/9] {mark} {self.name}: {self.detail}"


def _fmt(x: float) -> str:
    return f"{x:.6e}"


def _estimator_config(orders=(1, 3)) -> EstimatorConfig:
    return EstimatorConfig(sample_rate_hz=FS, harmonic_orders=orders)


def _run_freq(spec: ScenarioSpec, orders):
    """(f_hat, r_hat, f_true, r_true) arrays for one estimation run."""
    samples = [embed(s) for s in generate(spec)]
    records = run(samples, _estimator_config(orders))
    f_true, r_true = truth_trajectory(spec)
    f_hat = np.array([r.freq_hz for r in records])
    r_hat = np.array([r.rocof_hz_per_s for r in records])
    return f_hat, r_hat, f_true, r_true


def _convergence_time(f_hat, f_true, start_idx: int) -> float:
    err = np.abs(f_hat - f_true)
    for k in range(start_idx, len(err)):
        if np.all(err[k:] < CONVERGENCE_BAND_HZ):
            return (k - start_idx) / FS
    return math.inf


def check_algebra_identities() -> CriterionResult:
    rng = np.random.default_rng(101)
    basis = (Quaternion(0, 1, 0, 0), Quaternion(0, 0, 1, 0),
             Quaternion(0, 0, 0, 1))
    worst = 0.0
    for _ in range(1000):
        q = Quaternion(*rng.standard_normal(4))
        qi, qj, qk = (involution(q, eta) for eta in basis)
        recovered = (
            (0.25 * (q + qi + qj + qk), q.w),
            (-0.25 * (basis[0] * (q + qi - qj - qk)), q.x),
            (-0.25 * (basis[1] * (q - qi + qj - qk)), q.y),
            (-0.25 * (basis[2] * (q - qi - qj + qk)), q.z),
        )
        for got, want in recovered:
            worst = max(worst, (got - Quaternion(want, 0, 0, 0)).norm())
        conj = 0.5 * (qi + qj + qk - q)
        worst = max(worst, (conj - q.conjugate()).norm())
    passed = worst < 1e-13
    return CriterionResult(1, "component-recovery and conjugate identities",
                           passed, f"max error {_fmt(worst)} (tol 1e-13, "
                           f"1000 random quaternions)")


def check_jacobian_certification() -> CriterionResult:
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        x = qekf.state_from_vec(rng.standard_normal(12))
        jac = qekf.qss_jacobian(x)
        fd = finite_difference_jacobian(
            lambda v: qekf.state_to_vec(qekf.qss_transition(
                qekf.state_from_vec(v))), qekf.state_to_vec(x))
        worst = max(worst, float(np.abs(jac - fd).max()))
    passed = worst < 1e-6
    return CriterionResult(2, "transition Jacobian vs central differences",
                           passed, f"max deviation {_fmt(worst)} (tol 1e-6, "
                           f"100 random states)")


def check_oracle_equivalence() -> CriterionResult:
    rng = np.random.default_rng(103)
    noise = QekfNoise()
    h_mat = np.hstack([np.zeros((4, 4)), np.eye(4), np.eye(4)])
    worst_x = worst_p = 0.0
    for _ in range(100):
        x = qekf.state_from_vec(rng.standard_normal(12))
        a = rng.standard_normal((12, 12))
        cov = (a @ a.T) / 12 + 0.05 * np.eye(12)
        z = rng.standard_normal(4)
        x_prior, cov_prior = qekf.predict(x, cov, noise)
        innovation = Quaternion.from_vec(z - h_mat @ qekf.state_to_vec(x_prior))
        x_post, cov_post = qekf.update(x_prior, cov_prior,
                                       Quaternion.from_vec(z), innovation,
                                       noise)
        xo, po = dense_kalman_step(
            qekf.state_to_vec(x), cov, qekf.qss_jacobian(x), h_mat,
            noise.process_matrix(), noise.observation_matrix(), z,
            predict_mean=lambda v: qekf.state_to_vec(
                qekf.qss_transition(qekf.state_from_vec(v))))
        xo[0:4] /= np.linalg.norm(xo[0:4])
        worst_x = max(worst_x, float(np.abs(qekf.state_to_vec(x_post) - xo).max()))
        worst_p = max(worst_p, float(np.abs(cov_post - po).max()))
    passed = worst_x < 1e-10 and worst_p < 1e-10
    return CriterionResult(3, "filter step vs dense real-lift oracle", passed,
                           f"max state diff {_fmt(worst_x)}, max covariance "
                           f"diff {_fmt(worst_p)} (tol 1e-10, 100 instances)")


def check_ellipse_exactness() -> CriterionResult:
    rng = np.random.default_rng(104)
    worst_rel = 0.0
    for _ in range(20):
        freq = rng.uniform(45.0, 55.0)
        seg = Segment(
            duration_s=0.25,
            amp_a=rng.uniform(0.2, 1.5), amp_b=rng.uniform(0.2, 1.5),
            amp_c=rng.uniform(0.2, 1.5),
            phase_a_rad=rng.uniform(-math.pi, math.pi),
            phase_b_rad=rng.uniform(-math.pi, math.pi),
            phase_c_rad=rng.uniform(-math.pi, math.pi),
            start_freq_hz=freq)
        samples = [embed(s) for s in generate(ScenarioSpec(FS, (seg,)))]
        fit = fit_counter_rotating(samples, freq, FS)
        rms = math.sqrt(float(np.mean([s.q.norm_sq() for s in samples])))
        worst_rel = max(worst_rel, fit.residual_rms / rms)

    balanced = [embed(s) for s in generate(balanced_scenario(duration_s=0.25))]
    fit = fit_counter_rotating(balanced, 50.0, FS)
    ratio = fit.q_minus0.norm() / fit.q_plus0.norm()
    passed = worst_rel < 1e-9 and ratio < 1e-9
    return CriterionResult(4, "counter-rotating decomposition exactness",
                           passed, f"max relative residual {_fmt(worst_rel)} "
                           f"(tol 1e-9, 20 unbalanced triples); balanced "
                           f"|q-|/|q+| {_fmt(ratio)} (tol 1e-9)")


def check_sag_benchmark() -> CriterionResult:
    spec = sag_scenario(seed=SAG_SEED)
    f_hat, _, f_true, _ = _run_freq(spec, (1, 3))
    sag_idx = int(SAG_TIME_S * FS)
    steady = slice(sag_idx + int(0.3 * FS), len(f_hat))
    err = f_hat[steady] - f_true[steady]
    conv = _convergence_time(f_hat, f_true, sag_idx)

    waveform = generate(spec)
    vb = np.array([s.vb for s in waveform[sag_idx:]])
    f_fft = fft_frequency_oracle(vb, FS)
    fft_gap = abs(float(f_hat[steady].mean()) - f_fft)

    mean_err = abs(float(err.mean()))
    std_err = float(err.std())
    passed = (mean_err < 0.02 and std_err < 0.02 and conv < 0.3
              and fft_gap < 0.02)
    return CriterionResult(5, "voltage-sag benchmark (two banks, 30 dB)",
                           passed,
                           f"post-sag |mean error| {_fmt(mean_err)} Hz, "
                           f"std {_fmt(std_err)} Hz (tol 0.02 each); "
                           f"convergence {conv:.3f} s (tol 0.3); "
                           f"FFT cross-check gap {_fmt(fft_gap)} Hz (tol 0.02)")


def check_ramp_benchmark() -> CriterionResult:
    details = []
    passed = True
    for rate in (0.5, -0.5):
        spec = ramp_scenario(rate, seed=RAMP_SEED)
        f_hat, r_hat, f_true, r_true = _run_freq(spec, (1, 3))
        steady = slice(int(1.0 * FS), len(f_hat))
        rate_err = abs(float((r_hat[steady] - r_true[steady]).mean()))
        track_err = float(np.abs(f_hat[steady] - f_true[steady]).mean())
        passed = passed and rate_err < 0.05 and track_err < 0.05
        details.append(f"rate {rate:+.1f}: |mean rate error| {_fmt(rate_err)} "
                       f"Hz/s, mean |freq error| {_fmt(track_err)} Hz")
    return CriterionResult(6, "frequency-ramp benchmark, both signs", passed,
                           "; ".join(details) + " (tol 0.05 each)")


def check_harmonic_rejection_ordering() -> CriterionResult:
    spec = sag_scenario(seed=SAG_SEED)
    f13, _, f_true, _ = _run_freq(spec, (1, 3))
    f1, _, _, _ = _run_freq(spec, (1,))
    steady = slice(int((SAG_TIME_S + 0.3) * FS), len(f13))
    var13 = float((f13[steady] - f_true[steady]).var())
    var1 = float((f1[steady] - f_true[steady]).var())
    passed = var13 < var1
    return CriterionResult(7, "harmonic-rejection variance ordering", passed,
                           f"steady variance two banks {_fmt(var13)} Hz^2 < "
                           f"single bank {_fmt(var1)} Hz^2 "
                           f"(ratio {var1 / var13:.3f})")


def check_noise_free_sanity() -> CriterionResult:
    spec = balanced_scenario(duration_s=0.8)
    f_hat, r_hat, f_true, _ = _run_freq(spec, (1,))
    tail = slice(int(0.3 * FS), len(f_hat))
    worst_f = float(np.abs(f_hat[tail] - 50.0).max())
    worst_r = float(np.abs(r_hat[tail]).max())
    passed = worst_f < 1e-4 and worst_r < 1e-3
    return CriterionResult(8, "noise-free balanced sanity", passed,
                           f"max |freq - 50| {_fmt(worst_f)} Hz (tol 1e-4), "
                           f"max |rate| {_fmt(worst_r)} Hz/s (tol 1e-3) "
                           f"after 0.3 s")


_CHECKS: tuple[Callable[[], CriterionResult], ...] = (
    check_algebra_identities,
    check_jacobian_certification,
    check_oracle_equivalence,
    check_ellipse_exactness,
    check_sag_benchmark,
    check_ramp_benchmark,
    check_harmonic_rejection_ordering,
    check_noise_free_sanity,
)


def _run_core() -> list[CriterionResult]:
    return [check() for check in _CHECKS]


def format_report(results: list[CriterionResult]) -> str:
    lines = [r.format_line() for r in results]
    n_pass = sum(r.passed for r in results)
    lines.append(f"ACCEPTANCE: {n_pass}/{len(results)} criteria passed")
    return "\n".join(lines)


def run_acceptance() -> list[CriterionResult]:
    """Run all criteria; the ninth re-runs the suite and compares bytes."""
    first = _run_core()
    second = _run_core()
    report_a = format_report(first)
    report_b = format_report(second)
    identical = report_a.encode() == report_b.encode()
    first.append(CriterionResult(
        9, "determinism of repeated runs", identical,
        "second full pass produced a byte-identical report" if identical
        else "reports differ between passes"))
    return first
