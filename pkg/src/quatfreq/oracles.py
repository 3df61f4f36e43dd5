"""Independent verification machinery for the filtering stages.

Everything here is deliberately written without touching the filter
implementations: the dense Kalman step is the plain textbook recursion
over explicit matrices, Jacobians come from central differences, and the
counter-rotating fit is a direct least-squares reconstruction. Agreement
between these and the production code is what the test suite certifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from quatfreq.quaternion import Quaternion, exp_pure, left_mul_matrix, unit_pure
from quatfreq.signal import PureQuatSample

__all__ = [
    "OracleError",
    "dense_kalman_step",
    "finite_difference_jacobian",
    "EllipseFit",
    "fit_counter_rotating",
    "fft_frequency_oracle",
]


class OracleError(ValueError):
    """An oracle was invoked outside its domain of validity."""


def dense_kalman_step(x: np.ndarray, cov: np.ndarray, f_mat: np.ndarray,
                      h_mat: np.ndarray, q_mat: np.ndarray, r_mat: np.ndarray,
                      z: np.ndarray,
                      predict_mean: Callable[[np.ndarray], np.ndarray] | None = None,
                      ) -> tuple[np.ndarray, np.ndarray]:
    """One textbook predict+update over explicit real matrices.

    ``predict_mean`` optionally replaces the linear mean propagation
    ``f_mat @ x`` (the extended-filter convention where the mean runs
    through the nonlinear model while ``f_mat`` is its linearization);
    covariance propagation always uses ``f_mat``.
    """
    x = np.asarray(x, dtype=float)
    cov = np.asarray(cov, dtype=float)
    z = np.atleast_1d(np.asarray(z, dtype=float))

    x_prior = f_mat @ x if predict_mean is None else np.asarray(predict_mean(x), float)
    cov_prior = f_mat @ cov @ f_mat.T + q_mat

    s_mat = h_mat @ cov_prior @ h_mat.T + r_mat
    if np.linalg.cond(s_mat) > 1e12:
        raise OracleError("singular innovation covariance")
    gain = cov_prior @ h_mat.T @ np.linalg.inv(s_mat)
    x_post = x_prior + gain @ (z - h_mat @ x_prior)
    cov_post = (np.eye(len(x)) - gain @ h_mat) @ cov_prior
    return x_post, cov_post


def finite_difference_jacobian(func: Callable[[np.ndarray], np.ndarray],
                               x0: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued function."""
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(func(x0), dtype=float)
    jac = np.empty((f0.size, x0.size))
    for k in range(x0.size):
        step = np.zeros_like(x0)
        step[k] = h
        jac[:, k] = (np.asarray(func(x0 + step)) - np.asarray(func(x0 - step))) / (2 * h)
    return jac


# ----------------------------------------------------------------------
# counter-rotating circle decomposition
# ----------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class EllipseFit:
    """Least-squares decomposition of a planar quaternion trajectory.

    The reconstruction is ``exp(axis*n*dtheta) * q_plus0 +
    exp(-axis*n*dtheta) * q_minus0``; ``residual_rms`` is the root mean
    square reconstruction error per sample and is always reported.
    """

    axis: Quaternion
    q_plus0: Quaternion
    q_minus0: Quaternion
    delta_theta: float
    residual_rms: float

    def reconstruct(self, n: int) -> Quaternion:
        rot = exp_pure(self.axis, n * self.delta_theta)
        return rot * self.q_plus0 + rot.conjugate() * self.q_minus0


def _component_lstsq(vecs: np.ndarray, axis: Quaternion,
                     dtheta: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve for the two rotating components given a fixed axis."""
    count = len(vecs)
    design = np.zeros((4 * count, 8))
    target = vecs.reshape(-1)
    for n in range(count):
        rot = exp_pure(axis, n * dtheta)
        design[4 * n:4 * n + 4, 0:4] = left_mul_matrix(rot)
        design[4 * n:4 * n + 4, 4:8] = left_mul_matrix(rot.conjugate())
    sol, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ sol
    rms = math.sqrt(float(np.mean(np.sum(resid.reshape(count, 4) ** 2, axis=1))))
    return sol[0:4], sol[4:8], rms


def _tilted_axis(axis: Quaternion, alpha: float, beta: float) -> Quaternion:
    """Tilt a unit axis by two small angles in its tangent plane."""
    a = np.array([axis.x, axis.y, axis.z])
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(a)))] = 1.0
    u = np.cross(a, ref)
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    tilted = a + alpha * u + beta * v
    return unit_pure(*tilted)


def fit_counter_rotating(samples: Sequence[PureQuatSample], freq_hz: float,
                         sample_rate_hz: float) -> EllipseFit:
    """Fit two counter-rotating circular components to a sample window.

    The frequency must be known and constant over the window. The plane
    normal is seeded analytically from the sine/cosine quadrature of the
    trajectory and polished by a local pattern search; the component
    amplitudes then come from a linear least-squares solve in the real
    four-vector domain. For any noise-free sinusoidal three-phase window
    the model is exact, so the reported residual doubles as a
    correctness certificate.
    """
    if sample_rate_hz <= 0.0 or freq_hz <= 0.0:
        raise OracleError("frequency and sample rate must be positive")
    count = len(samples)
    cycle = sample_rate_hz / freq_hz
    if count < max(8, int(math.ceil(cycle))):
        raise OracleError(
            f"window of {count} samples is under-determined; need at least "
            f"one full cycle ({cycle:.1f} samples)")

    dtheta = 2.0 * math.pi * freq_hz / sample_rate_hz
    vecs = np.array([s.q.to_vec() for s in samples])
    signal_rms = math.sqrt(float(np.mean(np.sum(vecs ** 2, axis=1))))
    if signal_rms == 0.0:
        raise OracleError("window is identically zero")

    # quadrature fit v_n ~ A sin(n*dtheta) + B cos(n*dtheta) gives the
    # trajectory plane; its normal seeds the axis search
    angles = dtheta * np.arange(count)
    basis = np.column_stack([np.sin(angles), np.cos(angles)])
    coef, *_ = np.linalg.lstsq(basis, vecs[:, 1:4], rcond=None)
    a_vec, b_vec = coef[0], coef[1]
    normal = np.cross(b_vec, a_vec)
    if np.linalg.norm(normal) < 1e-12 * (np.linalg.norm(a_vec) * np.linalg.norm(b_vec) + 1e-300):
        # degenerate (line) trajectory: any plane containing it works
        ref = np.zeros(3)
        ref[int(np.argmin(np.abs(a_vec)))] = 1.0
        normal = np.cross(a_vec, ref)
    axis = unit_pure(*normal)

    plus, minus, rms = _component_lstsq(vecs, axis, dtheta)
    # pattern-search refinement engages only when the analytic seed is
    # not already at the exact optimum (noisy windows)
    step = 0.05
    while rms > 1e-12 * signal_rms and step > 1e-12:
        improved = False
        for alpha, beta in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
            cand_axis = _tilted_axis(axis, alpha, beta)
            c_plus, c_minus, c_rms = _component_lstsq(vecs, cand_axis, dtheta)
            if c_rms < rms:
                axis, plus, minus, rms = cand_axis, c_plus, c_minus, c_rms
                improved = True
                break
        if not improved:
            step *= 0.5

    q_plus0 = Quaternion.from_vec(plus)
    q_minus0 = Quaternion.from_vec(minus)
    # canonical orientation: the dominant component rotates positively
    if q_minus0.norm() > q_plus0.norm():
        axis = -axis
        q_plus0, q_minus0 = q_minus0, q_plus0
    return EllipseFit(axis, q_plus0, q_minus0, dtheta, rms)


# ----------------------------------------------------------------------
# spectral frequency reference
# ----------------------------------------------------------------------

def fft_frequency_oracle(values, sample_rate_hz: float,
                         min_cycles: float = 10.0) -> float:
    """Spectral-peak frequency of a real scalar record.

    Hann-windowed FFT peak, refined by a golden-section maximization of
    the windowed DTFT magnitude within one bin either side. Intended as
    an independent reference for constant-frequency windows.
    """
    v = np.asarray(values, dtype=float).ravel()
    count = v.size
    if count < 32:
        raise OracleError("window too short for a spectral estimate")
    window = np.hanning(count)
    spectrum = np.abs(np.fft.rfft(v * window))
    if spectrum.size < 3:
        raise OracleError("window too short for a spectral estimate")
    k_peak = int(np.argmax(spectrum[1:])) + 1
    total = float(np.sum(spectrum))
    if total <= 0.0 or spectrum[k_peak] < 1e-9 * total:
        raise OracleError("no spectral peak (constant or empty input)")

    bin_hz = sample_rate_hz / count
    t = np.arange(count) / sample_rate_hz
    wv = window * v

    def power(freq_hz: float) -> float:
        phasor = np.exp(-2j * math.pi * freq_hz * t)
        return abs(np.dot(wv, phasor))

    lo = max(bin_hz * (k_peak - 1), bin_hz * 0.5)
    hi = min(bin_hz * (k_peak + 1), sample_rate_hz / 2)
    ratio = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = power(c), power(d)
    for _ in range(90):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = power(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = power(d)
    freq = 0.5 * (a + b)
    if freq * count / sample_rate_hz < min_cycles:
        raise OracleError(
            f"window holds {freq * count / sample_rate_hz:.1f} cycles; "
            f"need at least {min_cycles}")
    return freq
