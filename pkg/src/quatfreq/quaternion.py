"""Quaternion algebra with the maps needed for real-lifted covariance work.

Conventions used throughout the package:

* A quaternion is ``w + x*i + y*j + z*k`` with Hamilton products
  ``ij = k``, ``jk = i``, ``ki = j`` and ``i^2 = j^2 = k^2 = -1``.
* The real-vector form of ``q`` is ``[w, x, y, z]``; ``left_mul_matrix``
  and ``right_mul_matrix`` give the 4x4 real matrices of left and right
  Hamilton multiplication in that basis.
* A "unit pure" quaternion has zero scalar part and unit norm; such
  elements square to -1 and serve as rotation axes.

All values are immutable; every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Quaternion",
    "PolarForm",
    "ZERO",
    "ONE",
    "I",
    "J",
    "K",
    "pure",
    "unit_pure",
    "involution",
    "exp_pure",
    "ln_unit",
    "polar",
    "left_mul_matrix",
    "right_mul_matrix",
    "conjugation_matrix",
    "conjugate_transpose",
    "is_hermitian",
]

# Relative imaginary magnitude below which a rotation axis is treated as
# numerically undefined (the value is a normative default, overridable
# where it appears as a keyword argument).
NEAR_REAL_RTOL = 1e-9


@dataclass(frozen=True, slots=True)
class Quaternion:
    """Immutable quaternion ``w + x*i + y*j + z*k``."""

    w: float
    x: float
    y: float
    z: float

    # ------------------------------------------------------------------
    # ring structure
    # ------------------------------------------------------------------
    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.w + other.w, self.x + other.x,
                          self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.w - other.w, self.x - other.x,
                          self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        """Hamilton product; real scalars broadcast componentwise."""
        if isinstance(other, Quaternion):
            aw, ax, ay, az = self.w, self.x, self.y, self.z
            bw, bx, by, bz = other.w, other.x, other.y, other.z
            return Quaternion(
                aw * bw - ax * bx - ay * by - az * bz,
                aw * bx + ax * bw + ay * bz - az * by,
                aw * by - ax * bz + ay * bw + az * bx,
                aw * bz + ax * by - ay * bx + az * bw,
            )
        if isinstance(other, (int, float)):
            s = float(other)
            return Quaternion(self.w * s, self.x * s, self.y * s, self.z * s)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            s = float(other)
            return Quaternion(self.w * s, self.x * s, self.y * s, self.z * s)
        return NotImplemented

    def __truediv__(self, scalar):
        if isinstance(scalar, (int, float)):
            s = float(scalar)
            return Quaternion(self.w / s, self.x / s, self.y / s, self.z / s)
        return NotImplemented

    # ------------------------------------------------------------------
    # involutive / metric structure
    # ------------------------------------------------------------------
    def conjugate(self) -> "Quaternion":
        """Scalar part minus imaginary part."""
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm_sq(self) -> float:
        return self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def __abs__(self) -> float:
        return self.norm()

    def inverse(self) -> "Quaternion":
        n2 = self.norm_sq()
        if n2 == 0.0:
            raise ZeroDivisionError("zero quaternion has no inverse")
        return self.conjugate() / n2

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n == 0.0:
            raise ZeroDivisionError("cannot normalize the zero quaternion")
        return self / n

    # ------------------------------------------------------------------
    # structure queries
    # ------------------------------------------------------------------
    def imag(self) -> "Quaternion":
        """Pure (imaginary) part."""
        return Quaternion(0.0, self.x, self.y, self.z)

    def imag_norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def is_pure(self, tol: float = 0.0) -> bool:
        return abs(self.w) <= tol

    def is_finite(self) -> bool:
        return (math.isfinite(self.w) and math.isfinite(self.x)
                and math.isfinite(self.y) and math.isfinite(self.z))

    # ------------------------------------------------------------------
    # real-vector duality
    # ------------------------------------------------------------------
    def to_vec(self) -> np.ndarray:
        """Real 4-vector ``[w, x, y, z]``."""
        return np.array([self.w, self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_vec(cls, v) -> "Quaternion":
        w, x, y, z = (float(c) for c in v)
        return cls(w, x, y, z)

    def __repr__(self) -> str:  # compact, sign-aware
        return (f"Quaternion({self.w:g}, {self.x:g}, "
                f"{self.y:g}, {self.z:g})")


ZERO = Quaternion(0.0, 0.0, 0.0, 0.0)
ONE = Quaternion(1.0, 0.0, 0.0, 0.0)
I = Quaternion(0.0, 1.0, 0.0, 0.0)
J = Quaternion(0.0, 0.0, 1.0, 0.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def pure(x: float, y: float, z: float) -> Quaternion:
    """Pure quaternion ``x*i + y*j + z*k``."""
    return Quaternion(0.0, float(x), float(y), float(z))


def unit_pure(x: float, y: float, z: float) -> Quaternion:
    """Normalized pure quaternion; rejects the zero direction."""
    n = math.sqrt(x * x + y * y + z * z)
    if n == 0.0:
        raise ValueError("direction must be nonzero")
    return Quaternion(0.0, x / n, y / n, z / n)


def _check_unit_pure(axis: Quaternion, tol: float = 1e-9) -> None:
    if abs(axis.w) > tol or abs(axis.imag_norm() - 1.0) > tol:
        raise ValueError(f"axis must be unit pure, got {axis!r}")


def involution(q: Quaternion, eta: Quaternion) -> Quaternion:
    """Involution of ``q`` around ``eta``: ``eta * q * eta^-1``.

    For unit pure ``eta`` this is a self-inverse reflection that fixes
    the scalar part and the ``eta`` component of ``q``.
    """
    n2 = eta.norm_sq()
    if n2 == 0.0:
        raise ValueError("involution axis must be nonzero")
    return eta * q * eta.conjugate() / n2


def exp_pure(axis: Quaternion, angle: float, *, axis_tol: float = 1e-9) -> Quaternion:
    """Unit quaternion ``cos(angle) + axis*sin(angle)`` for a unit pure axis."""
    _check_unit_pure(axis, axis_tol)
    c = math.cos(angle)
    s = math.sin(angle)
    return Quaternion(c, axis.x * s, axis.y * s, axis.z * s)


def ln_unit(q: Quaternion, *, norm_tol: float = 1e-6,
            antipode_tol: float = 1e-9) -> Quaternion:
    """Principal logarithm of a unit quaternion, as a pure quaternion.

    Returns ``axis * theta`` with ``theta = atan2(|Im q|, Re q)`` in
    ``[0, pi)``; the rotation direction lives entirely in the axis sign.
    Raises for non-unit input and near the antipode ``-1``, where the
    axis is undefined.
    """
    n = q.norm()
    if abs(n - 1.0) > norm_tol:
        raise ValueError(f"ln_unit requires a unit quaternion, |q| = {n:.9g}")
    if (q - (-ONE)).norm() <= antipode_tol:
        raise ValueError("ln_unit is singular at -1 (axis undefined)")
    im = q.imag_norm()
    theta = math.atan2(im, q.w)
    if im == 0.0:
        return ZERO
    return q.imag() * (theta / im)


@dataclass(frozen=True, slots=True)
class PolarForm:
    """Polar decomposition ``q = magnitude * (cos(angle) + axis*sin(angle))``.

    ``axis_reliable`` is False when the imaginary part is too small to
    define a direction; the axis is then an arbitrary placeholder and
    ``angle`` is 0 or pi.
    """

    magnitude: float
    axis: Quaternion
    angle: float
    axis_reliable: bool

    def reconstruct(self) -> Quaternion:
        return self.magnitude * exp_pure(self.axis, self.angle)


def polar(q: Quaternion, *, near_real_rtol: float = NEAR_REAL_RTOL) -> PolarForm:
    """Polar form of a nonzero quaternion.

    Near-real inputs (``|Im q| < near_real_rtol * |q|``) do not fail:
    they come back with an arbitrary axis flagged unreliable, so callers
    holding a better axis estimate can substitute their own.
    """
    mag = q.norm()
    if mag == 0.0:
        raise ValueError("polar form of the zero quaternion is undefined")
    im = q.imag_norm()
    theta = math.atan2(im, q.w)
    if im < near_real_rtol * mag:
        return PolarForm(mag, I, theta, False)
    return PolarForm(mag, q.imag() / im, theta, True)


# ----------------------------------------------------------------------
# real 4x4 representations
# ----------------------------------------------------------------------

def left_mul_matrix(a: Quaternion) -> np.ndarray:
    """Matrix ``L(a)`` with ``L(a) @ vec(q) == vec(a * q)`` for all q."""
    w, x, y, z = a.w, a.x, a.y, a.z
    return np.array([
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ])


def right_mul_matrix(b: Quaternion) -> np.ndarray:
    """Matrix ``R(b)`` with ``R(b) @ vec(q) == vec(q * b)`` for all q."""
    w, x, y, z = b.w, b.x, b.y, b.z
    return np.array([
        [w, -x, -y, -z],
        [x, w, z, -y],
        [y, -z, w, x],
        [z, y, -x, w],
    ])


def conjugation_matrix() -> np.ndarray:
    """Matrix of quaternion conjugation in the real 4-vector basis."""
    return np.diag([1.0, -1.0, -1.0, -1.0])


# ----------------------------------------------------------------------
# small quaternion-matrix helpers (diagnostic views only)
# ----------------------------------------------------------------------

def conjugate_transpose(mat) -> list[list[Quaternion]]:
    """Entrywise conjugate of the transpose of a nested quaternion matrix."""
    rows = len(mat)
    cols = len(mat[0])
    return [[mat[r][c].conjugate() for r in range(rows)] for c in range(cols)]


def is_hermitian(mat, tol: float = 1e-10) -> bool:
    """True when ``mat`` equals its conjugate transpose within ``tol``."""
    ct = conjugate_transpose(mat)
    for r, row in enumerate(mat):
        for c, q in enumerate(row):
            if (q - ct[r][c]).norm() > tol:
                return False
    return True
