"""Shared types, symplectic linear algebra and precision handling."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

EPS_POLE = 1e-8
NU_CLAMP = 1e-10


class SingularCoordinatesError(ValueError):
    """Raised when a point sits inside the pole guard band of the (theta, phi) chart."""


@dataclass(frozen=True)
class PrecisionConfig:
    mode: str = "machine"
    digits: int = 15

    def __post_init__(self):
        if self.mode not in ("machine", "extended"):
            raise ValueError(f"unknown precision mode {self.mode!r}")
        if self.digits < 1:
            raise ValueError("digits must be positive")
        if self.mode == "extended" and self.digits < 15:
            raise ValueError("extended precision needs at least 15 digits")

    @classmethod
    def extended(cls, digits=400):
        return cls("extended", int(digits))

    @property
    def is_extended(self):
        return self.mode == "extended"

    def context(self):
        """Context manager setting the mpmath working precision (no-op scale for machine mode)."""
        return mpmath.workdps(self.digits if self.is_extended else 15)

    def fd_epsilon(self):
        return 1e-6 if not self.is_extended else mpmath.mpf(10) ** (-(self.digits // 3))


MACHINE = PrecisionConfig()


@dataclass(frozen=True)
class SpinConfig:
    N: int
    s: Fraction = Fraction(1, 2)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        s = Fraction(self.s)
        if s <= 0 or (2 * s).denominator != 1:
            raise ValueError("s must be a positive half-integer")
        object.__setattr__(self, "s", s)

    @property
    def hbar_eff(self):
        return 1.0 / self.N

    @property
    def S(self):
        """Total (maximal) collective spin length N*s."""
        return float(self.N * self.s)


def _lib(x):
    return mpmath if isinstance(x, (mpmath.mpf, mpmath.mpc)) else np


@dataclass(frozen=True)
class BlochAngles:
    theta: float
    phi: float

    def __post_init__(self):
        lib = _lib(self.theta)
        object.__setattr__(self, "phi", self.phi % (2 * lib.pi))

    @property
    def cos_theta(self):
        return _lib(self.theta).cos(self.theta)

    def check_pole(self, eps=EPS_POLE):
        if abs(_lib(self.theta).sin(self.theta)) < eps:
            raise SingularCoordinatesError(
                f"|sin(theta)| < {eps:g} at theta={float(self.theta):.3e}")
        return self

    def Z(self):
        return rotating_frame(self.theta, self.phi)[2]

    def frame(self):
        return rotating_frame(self.theta, self.phi)


def rotating_frame(theta, phi):
    """Orthonormal frame (X, Y, Z) attached to the spin direction Z(theta, phi)."""
    lib = _lib(theta)
    st, ct, sp, cp = lib.sin(theta), lib.cos(theta), lib.sin(phi), lib.cos(phi)
    if lib is np:
        Z = np.array([st * cp, st * sp, ct])
        X = np.array([ct * cp, ct * sp, -st])
        Y = np.array([-sp, cp, np.zeros_like(cp)])
        return X, Y, Z
    return ([ct * cp, ct * sp, -st], [-sp, cp, mpmath.mpf(0)], [st * cp, st * sp, ct])


def angles_from_vector(v):
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v)
    return BlochAngles(float(np.arccos(np.clip(v[2] / r, -1, 1))), float(np.arctan2(v[1], v[0])))


def symplectic_unit(n):
    if n < 1:
        raise ValueError("n must be >= 1")
    J = np.zeros((2 * n, 2 * n))
    for k in range(n):
        J[2 * k, 2 * k + 1] = 1.0
        J[2 * k + 1, 2 * k] = -1.0
    return J


def symplectic_unit_blocks(n):
    """J in the (q_1..q_n, p_1..p_n) block layout [[0, I], [-I, 0]]."""
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, I], [-I, Z]])


def vacuum_correlation(n):
    if n < 1:
        raise ValueError("n must be >= 1")
    return 0.5 * np.eye(2 * n)


def check_correlation(G, tol=1e-12):
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] % 2:
        raise ValueError(f"correlation matrix must be 2n x 2n, got {G.shape}")
    if not np.allclose(G, G.T, atol=tol * max(1.0, np.abs(G).max())):
        raise ValueError("correlation matrix is not symmetric")
    return 0.5 * (G + G.T)


def symplectic_eigenvalues(G):
    """Symplectic eigenvalues of 2G, sorted descending.

    Pairs are ordered (q1, p1, q2, p2, ...), i.e. J from symplectic_unit.
    """
    G = check_correlation(G)
    n = G.shape[0] // 2
    if n == 1:
        d = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
        if d <= 0 or G[0, 0] <= 0:
            raise ValueError("correlation matrix is not positive definite")
        return np.array([2.0 * np.sqrt(d)])
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise ValueError("correlation matrix is not positive definite") from None
    ev = np.linalg.eigvals(-2.0 * G @ symplectic_unit(n))
    nu = np.sort(np.abs(ev.imag))[::-1]
    return nu[::2].copy()


def is_symplectic(U, tol=1e-8):
    return symplectic_residual(U) < tol


def symplectic_residual(U):
    U = np.asarray(U, dtype=float)
    J = symplectic_unit(U.shape[0] // 2)
    return float(np.abs(U.T @ J @ U - J).max())


def random_symplectic(n, rng, scale=1.0):
    """exp(J H) with H a random symmetric matrix; symplectic by construction."""
    from scipy.linalg import expm

    H = rng.normal(scale=scale, size=(2 * n, 2 * n))
    H = 0.5 * (H + H.T)
    return expm(symplectic_unit(n) @ H)
