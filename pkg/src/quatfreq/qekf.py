"""Quaternion extended Kalman filter over the rotating-component model.

State per harmonic bank: a unit phase-incrementing quaternion ``phi``
and two counter-rotating pure-quaternion components ``q_plus`` and
``q_minus``. One time step advances them as::

    phi      -> phi
    q_plus   -> phi * q_plus
    q_minus  -> conj(phi) * q_minus

and the observation is ``q_plus + q_minus`` (observation row [0 1 1]
over the quaternion 3-vector). The per-sample rotation angle is read off
as the imaginary logarithm of ``phi``.

Covariance is propagated in the exact real-lifted 12-dimensional domain
(four real coordinates per quaternion). The lift is necessary because
the transition depends on ``phi`` through a *right* multiplication by
``q_plus``, which no left quaternion-matrix action can express; in the
real lift the full linearization is available in closed form and is
certified against finite differences in the test suite. The quaternion-
facing view of the covariance is available via ``covariance_quat_view``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from quatfreq.quaternion import (
    ONE,
    Quaternion,
    conjugation_matrix,
    exp_pure,
    left_mul_matrix,
    polar,
    right_mul_matrix,
    unit_pure,
)

__all__ = [
    "QssState",
    "QekfNoise",
    "PhaseIncrement",
    "FilterDivergenceError",
    "BALANCED_ROTATION_AXIS",
    "STATE_DIM",
    "state_to_vec",
    "state_from_vec",
    "qss_transition",
    "qss_jacobian",
    "predict",
    "update",
    "predicted_observation",
    "phase_increment",
    "set_phase_increment",
    "initial_state",
    "initial_covariance",
    "covariance_quat_view",
]

STATE_DIM = 12

# Rotation axis of a balanced a-b-c set under the sin(theta + 0/120/240 deg)
# convention: the trajectory advances about -(i+j+k)/sqrt(3), not +.
BALANCED_ROTATION_AXIS = unit_pure(-1.0, -1.0, -1.0)


class FilterDivergenceError(RuntimeError):
    """The innovation covariance became numerically unusable."""


@dataclass(frozen=True, slots=True)
class QssState:
    """Per-bank filter state for the harmonic of order ``m``."""

    phi: Quaternion
    q_plus: Quaternion
    q_minus: Quaternion
    m: int = 1


@dataclass(frozen=True, slots=True)
class QekfNoise:
    """Noise intensities, lifted isotropically onto the real 12-dim state.

    Defaults are desk-scale tuning for a fundamental bank at 1 kHz
    sampling of per-unit signals; every value is configurable. Harmonic
    banks track small, slowly varying components and want a much smaller
    ``component_var`` (see the pipeline defaults).
    """

    phi_var: float = 1e-6
    component_var: float = 1e-3
    obs_var: float = 1e-2

    def __post_init__(self):
        if min(self.phi_var, self.component_var, self.obs_var) <= 0.0:
            raise ValueError("noise intensities must be positive")

    def process_matrix(self) -> np.ndarray:
        return _process_matrix_cached(self.phi_var, self.component_var)

    def observation_matrix(self) -> np.ndarray:
        return _observation_matrix_cached(self.obs_var)


@lru_cache(maxsize=64)
def _process_matrix_cached(phi_var: float, component_var: float) -> np.ndarray:
    d = np.empty(STATE_DIM)
    d[0:4] = phi_var
    d[4:12] = component_var
    mat = np.diag(d)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=64)
def _observation_matrix_cached(obs_var: float) -> np.ndarray:
    mat = obs_var * np.eye(4)
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True, slots=True)
class PhaseIncrement:
    """Per-sample rotation angle with its (possibly unreliable) axis."""

    angle: float
    axis: Quaternion
    axis_reliable: bool


def state_to_vec(x: QssState) -> np.ndarray:
    v = np.empty(STATE_DIM)
    v[0:4] = x.phi.to_vec()
    v[4:8] = x.q_plus.to_vec()
    v[8:12] = x.q_minus.to_vec()
    return v


def state_from_vec(v: np.ndarray, m: int = 1) -> QssState:
    return QssState(
        Quaternion.from_vec(v[0:4]),
        Quaternion.from_vec(v[4:8]),
        Quaternion.from_vec(v[8:12]),
        m,
    )


def qss_transition(x: QssState) -> QssState:
    """One model step: rotate the two components by ``phi`` either way."""
    return replace(x, q_plus=x.phi * x.q_plus,
                   q_minus=x.phi.conjugate() * x.q_minus)


def qss_jacobian(x: QssState) -> np.ndarray:
    """Exact derivative of the real-lifted transition at ``x``.

    Block layout (4x4 blocks over [phi, q_plus, q_minus]):

        [ I            0       0        ]
        [ R(q_plus)    L(phi)  0        ]
        [ R(q_minus)C  0       L(phi*)  ]

    The R-blocks carry the sensitivity of the rotated components to the
    rotation element itself; conjugation enters as the diagonal sign
    matrix C, which is the real-lift counterpart of the -1/2 conjugate
    derivative rule of the quaternion calculus.
    """
    jac = np.zeros((STATE_DIM, STATE_DIM))
    jac[0:4, 0:4] = np.eye(4)
    jac[4:8, 0:4] = right_mul_matrix(x.q_plus)
    jac[4:8, 4:8] = left_mul_matrix(x.phi)
    jac[8:12, 0:4] = right_mul_matrix(x.q_minus) @ conjugation_matrix()
    jac[8:12, 8:12] = left_mul_matrix(x.phi.conjugate())
    return jac


def predict(x: QssState, cov: np.ndarray,
            noise: QekfNoise) -> tuple[QssState, np.ndarray]:
    """A priori state and covariance for the next sample.

    The mean is propagated through the full nonlinear transition; the
    covariance uses the exact linearization at the current mean.
    """
    if not (x.phi.is_finite() and x.q_plus.is_finite() and x.q_minus.is_finite()):
        raise ValueError("non-finite filter state")
    x_prior = qss_transition(x)
    jac = qss_jacobian(x)
    cov_prior = jac @ cov @ jac.T + noise.process_matrix()
    return x_prior, 0.5 * (cov_prior + cov_prior.T)


def predicted_observation(x: QssState) -> Quaternion:
    return x.q_plus + x.q_minus


def update(x_prior: QssState, cov_prior: np.ndarray, q_obs: Quaternion,
           innovation: Quaternion, noise: QekfNoise, *,
           joseph: bool = False, cond_limit: float = 1e12,
           renormalize_phi: bool = True) -> tuple[QssState, np.ndarray]:
    """Measurement update against a caller-supplied innovation.

    The innovation is an argument (rather than derived from ``q_obs``)
    because in a multi-bank configuration it is shared: the caller
    subtracts every bank's predicted observation from ``q_obs`` once and
    hands the same residual to each bank's update.
    """
    if not q_obs.is_finite() or not innovation.is_finite():
        raise ValueError("non-finite observation")
    # observation row [0 1 1] makes H a pair of identity blocks, so all
    # H products reduce to block sums
    s_mat = (cov_prior[4:8, 4:8] + cov_prior[4:8, 8:12]
             + cov_prior[8:12, 4:8] + cov_prior[8:12, 8:12]
             + noise.observation_matrix())
    # S is symmetric by construction, so the eigenvalue ratio is its
    # 2-norm condition number
    eigs = np.abs(np.linalg.eigvalsh(s_mat))
    if not np.all(np.isfinite(eigs)) or eigs[0] * cond_limit < eigs[-1]:
        raise FilterDivergenceError(
            f"innovation covariance condition number exceeds {cond_limit:g}")
    cov_ht = cov_prior[:, 4:8] + cov_prior[:, 8:12]            # P H^T
    gain = np.linalg.solve(s_mat.T, cov_ht.T).T                # P H^T S^-1

    x_vec = state_to_vec(x_prior) + gain @ innovation.to_vec()

    if joseph:
        igh = np.eye(STATE_DIM)
        igh[:, 4:8] -= gain
        igh[:, 8:12] -= gain
        cov_post = igh @ cov_prior @ igh.T + gain @ noise.observation_matrix() @ gain.T
    else:
        h_cov = cov_prior[4:8, :] + cov_prior[8:12, :]         # H P
        cov_post = cov_prior - gain @ h_cov                    # (I - G H) P
    cov_post = 0.5 * (cov_post + cov_post.T)

    x_post = state_from_vec(x_vec, x_prior.m)
    if renormalize_phi:
        norm = x_post.phi.norm()
        if norm <= 1e-9:
            raise FilterDivergenceError("phase element collapsed to zero")
        x_post = replace(x_post, phi=x_post.phi / norm)
    return x_post, cov_post


def phase_increment(x: QssState) -> PhaseIncrement:
    """Rotation angle per sample from ``phi``, axis flagged when degenerate."""
    if x.phi.norm() <= 1e-9:
        raise ValueError("phase element is numerically zero")
    form = polar(x.phi)
    return PhaseIncrement(form.angle, form.axis, form.axis_reliable)


def set_phase_increment(x: QssState, freq_hz: float, dt_s: float,
                        fallback_axis: Quaternion | None = None) -> QssState:
    """Overwrite ``phi`` to rotate at ``m * freq_hz`` about its own axis.

    Used by the feedback loop: the fused frequency estimate dictates the
    rotation rate while the axis estimate is retained. When the current
    axis is degenerate the caller's remembered axis is used instead.
    """
    angle = 2.0 * math.pi * x.m * freq_hz * dt_s
    form = polar(x.phi)
    axis = form.axis if form.axis_reliable else fallback_axis
    if axis is None:
        if abs(math.sin(angle)) < 1e-15:
            return replace(x, phi=ONE * math.copysign(1.0, math.cos(angle)))
        raise ValueError("no usable rotation axis for the phase element")
    return replace(x, phi=exp_pure(axis, angle))


def initial_state(m: int, nominal_freq_hz: float, dt_s: float,
                  first_obs: Quaternion | None = None,
                  axis: Quaternion = BALANCED_ROTATION_AXIS) -> QssState:
    """Bank start state: nominal rotation, first observation as q_plus.

    Only the fundamental bank (m == 1) claims the first observation;
    harmonic banks start from zero so the shared innovation is not
    double-counted.
    """
    phi0 = exp_pure(axis, 2.0 * math.pi * m * nominal_freq_hz * dt_s)
    q_plus0 = first_obs if (m == 1 and first_obs is not None) else Quaternion(0, 0, 0, 0)
    return QssState(phi0, q_plus0, Quaternion(0, 0, 0, 0), m)


def initial_covariance(scale: float = 0.1,
                       component_scale: float | None = None) -> np.ndarray:
    """Diagonal start covariance; components may differ from the phi block."""
    if component_scale is None:
        component_scale = scale
    if scale <= 0.0 or component_scale <= 0.0:
        raise ValueError("covariance scale must be positive")
    d = np.empty(STATE_DIM)
    d[0:4] = scale
    d[4:12] = component_scale
    return np.diag(d)


def covariance_quat_view(cov: np.ndarray) -> list[list[Quaternion]]:
    """Hermitian 3x3 quaternion view ``E[x_a x_b*]`` of the lifted covariance.

    Entry (a, b) contracts the real 4x4 cross block of state quaternions
    a and b against the product table of ``e_p * conj(e_q)`` for the
    basis (1, i, j, k). Diagnostic only; the filter itself runs on the
    real lift.
    """
    if cov.shape != (STATE_DIM, STATE_DIM):
        raise ValueError(f"expected {STATE_DIM}x{STATE_DIM} covariance")
    view: list[list[Quaternion]] = []
    for a in range(3):
        row = []
        for b in range(3):
            r = cov[4 * a:4 * a + 4, 4 * b:4 * b + 4]
            row.append(Quaternion(
                r[0, 0] + r[1, 1] + r[2, 2] + r[3, 3],
                r[1, 0] - r[0, 1] + r[3, 2] - r[2, 3],
                r[2, 0] - r[0, 2] + r[1, 3] - r[3, 1],
                r[3, 0] - r[0, 3] + r[2, 1] - r[1, 2],
            ))
        view.append(row)
    return view
