"""Second-stage filter: frequency and rate-of-change from phase increments.

State is the pair (rate, freq) with the linear model::

    rate[n+1] = rate[n]
    freq[n+1] = freq[n] + rate[n] * dT

observed through ``z = freq + rate * dT`` where ``z`` is the first
stage's phase increment divided by ``2*pi*dT``. Both equations are
linear, so the recursion is an ordinary Kalman filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FreqState",
    "FreqNoise",
    "transition_matrix",
    "freq_predict",
    "delta_theta_to_observation",
    "freq_update",
    "in_plausible_band",
]


@dataclass(frozen=True, slots=True)
class FreqState:
    """Rate of change (Hz/s) and frequency (Hz), in that order."""

    rate: float
    freq: float

    def to_vec(self) -> np.ndarray:
        return np.array([self.rate, self.freq])

    @classmethod
    def from_vec(cls, v) -> "FreqState":
        return cls(float(v[0]), float(v[1]))


@dataclass(frozen=True, slots=True)
class FreqNoise:
    """Process and observation noise intensities (desk-scale defaults).

    ``obs_var`` reflects the phase-increment noise actually delivered by
    the first stage at 30 dB SNR rather than an idealized sensor figure;
    ``rate_var`` is sized so a 0.5 Hz/s ramp is acquired within a few
    tenths of a second at 1 kHz sampling.
    """

    rate_var: float = 1e-4
    freq_var: float = 1e-7
    obs_var: float = 3e-4

    def __post_init__(self):
        if min(self.rate_var, self.freq_var, self.obs_var) <= 0.0:
            raise ValueError("noise intensities must be positive")

    def process_matrix(self) -> np.ndarray:
        return np.diag([self.rate_var, self.freq_var])


def transition_matrix(dt_s: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [dt_s, 1.0]])


def freq_predict(state: FreqState, cov: np.ndarray, dt_s: float,
                 noise: FreqNoise) -> tuple[FreqState, np.ndarray]:
    f_mat = transition_matrix(dt_s)
    prior = FreqState(state.rate, state.freq + state.rate * dt_s)
    cov_prior = f_mat @ cov @ f_mat.T + noise.process_matrix()
    return prior, 0.5 * (cov_prior + cov_prior.T)


def delta_theta_to_observation(delta_theta: float, dt_s: float) -> float:
    """Phase increment (rad/sample) to frequency observation (Hz)."""
    if dt_s <= 0.0:
        raise ValueError("sampling interval must be positive")
    return delta_theta / (2.0 * math.pi * dt_s)


def freq_update(prior: FreqState, cov_prior: np.ndarray, z_hz: float,
                dt_s: float, noise: FreqNoise) -> tuple[FreqState, np.ndarray]:
    """Scalar-observation update with row ``[dt, 1]`` on (rate, freq)."""
    if not math.isfinite(z_hz):
        raise ValueError("non-finite frequency observation")
    h_row = np.array([dt_s, 1.0])
    s_var = float(h_row @ cov_prior @ h_row) + noise.obs_var
    if s_var <= 0.0:
        raise ValueError("non-positive innovation variance")
    gain = (cov_prior @ h_row) / s_var
    innov = z_hz - (prior.freq + prior.rate * dt_s)
    post = FreqState.from_vec(prior.to_vec() + gain * innov)
    cov_post = cov_prior - np.outer(gain, h_row @ cov_prior)
    return post, 0.5 * (cov_post + cov_post.T)


def in_plausible_band(state: FreqState, nominal_freq_hz: float,
                      half_width_hz: float = 15.0) -> bool:
    """Sanity band around nominal; a False result is a warning, not an error."""
    return abs(state.freq - nominal_freq_hz) <= half_width_hz
