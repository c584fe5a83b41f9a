"""Finite-time Lyapunov spectra by periodic Gram-Schmidt re-orthonormalisation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _dopri
from .classical import DickeState, IntegrationAborted
from .core import EPS_POLE, BlochAngles, SingularCoordinatesError

log = logging.getLogger(__name__)

ALPHA_MIN = 1e-250


class RankDeficiencyError(ValueError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass
class LyapunovSeries:
    r_values: np.ndarray
    exponents: np.ndarray  # (len(r_values), K)
    K: int
    s: float
    events: list = field(default_factory=list)

    def __post_init__(self):
        self.r_values = np.asarray(self.r_values, dtype=float)
        self.exponents = np.asarray(self.exponents, dtype=float)
        if np.any(np.diff(self.r_values) <= 0):
            raise ValueError("r values must be strictly increasing")

    @property
    def final(self):
        return self.exponents[-1]


def gram_schmidt(vectors):
    """Classical Gram-Schmidt on the columns of `vectors`.

    Returns the orthonormal columns and the residual norms alpha_k before normalisation.
    """
    V = np.array(vectors, dtype=float)
    if V.ndim != 2:
        raise ValueError("vectors must be a 2-D array with one vector per column")
    n, K = V.shape
    W = np.empty_like(V)
    alpha = np.empty(K)
    for k in range(K):
        v = V[:, k].copy()
        for j in range(k):
            v -= (W[:, j] @ V[:, k]) * W[:, j]
        a = np.linalg.norm(v)
        scale = max(np.linalg.norm(V[:, k]), 1e-300)
        if a < ALPHA_MIN or a < 4 * np.finfo(float).eps * scale:
            raise RankDeficiencyError(f"vector {k} is linearly dependent on the previous ones", k)
        alpha[k] = a
        W[:, k] = v / a
    return W, alpha


@njit(cache=True)
def _kt_block(theta, phi, alpha, beta, W, n_kicks, eps_pole):
    """Advance (theta, phi) and the tangent columns W by n_kicks kicks."""
    ca, sa = np.cos(alpha), np.sin(alpha)
    twopi = 2 * np.pi
    for _ in range(n_kicks):
        st = np.sin(theta)
        if abs(st) < eps_pole:
            return theta, phi, W, 1
        cphi = np.cos(phi)
        phm = np.arctan(np.tan(phi) * ca - sa / (np.tan(theta) * cphi))
        if cphi < 0:
            phm += np.pi
        ct = np.cos(theta) * ca + st * np.sin(phi) * sa
        ct = min(1.0, max(-1.0, ct))
        thm = np.arccos(ct)
        stm = np.sin(thm)
        if abs(stm) < eps_pole:
            return theta, phi, W, 1
        psi0 = np.arctan2(np.sin(phi), -np.cos(theta) * cphi)
        psi1 = np.arctan2(np.sin(phm), -ct * np.cos(phm))
        d = psi0 - psi1
        c, s = np.cos(d), np.sin(d)
        b = beta * stm * stm
        for j in range(W.shape[1]):
            q, p = W[0, j], W[1, j]
            q2 = c * q + s * p
            p2 = -s * q + c * p
            W[0, j] = q2
            W[1, j] = p2 - b * q2
        theta = thm
        phi = (phm + beta * ct) % twopi
    return theta, phi, W, 0


def _random_frame(rng, dim, K):
    V = rng.uniform(-1.0, 1.0, size=(dim, K))
    return gram_schmidt(V)[0]


def _renormalise(W, rng, events, step):
    V = W.copy()
    for _ in range(V.shape[1]):
        try:
            return gram_schmidt(V)
        except RankDeficiencyError as exc:
            log.debug("step %d: %s; re-randomising it", step, exc)
            events.append({"step": int(step), "event": "rank_deficiency", "vector": exc.index})
            k = exc.index
            v = rng.uniform(-1.0, 1.0, size=V.shape[0])
            V[:, k] = v / np.linalg.norm(v) * max(np.linalg.norm(V[:, k]), 1.0)
    return gram_schmidt(V)


def benettin_spectrum(system, x0, K, s, n_steps, params, rng_seed, tol=1e-14,
                      eps_pole=EPS_POLE, W0=None):
    """Benettin loop: evolve K tangent vectors over intervals of length s, then re-orthonormalise.

    lambda_k^(n) = (1/(n s)) sum_i ln alpha_k^(i). For the kicked top s is a number of kicks.
    """
    rng = np.random.default_rng(rng_seed)
    if system == "kicked_top":
        dim = 2
        s = int(s)
        if s < 1:
            raise ValueError("s must be a positive number of kicks")
    elif system == "dicke":
        dim = 4
    else:
        raise ValueError(f"unknown system {system!r}")
    if not 1 <= K <= dim:
        raise ValueError(f"K must be in [1, {dim}]")
    if s <= 0:
        raise ValueError("s must be positive")
    W = _random_frame(rng, dim, K) if W0 is None else gram_schmidt(W0)[0]
    acc = np.zeros(K)
    out = np.empty((n_steps, K))
    events = []
    if system == "kicked_top":
        a = x0 if isinstance(x0, BlochAngles) else BlochAngles(*x0)
        th, ph = float(a.theta), float(a.phi)
        for i in range(n_steps):
            th, ph, W, status = _kt_block(th, ph, float(params.alpha), float(params.beta),
                                          W, s, eps_pole)
            if status:
                raise SingularCoordinatesError(f"orbit entered the pole band at step {i}")
            W, alpha = _renormalise(W, rng, events, i)
            acc += np.log(alpha)
            out[i] = acc / ((i + 1) * s)
    else:
        y = x0.as_array() if isinstance(x0, DickeState) else np.asarray(x0, dtype=float)
        t_out = np.array([0.0, float(s)])
        for i in range(n_steps):
            y0 = np.concatenate([y[:4], W.ravel()])
            Y, _, status, _ = _dopri.integrate(y0, t_out, params.omega, params.omega0,
                                               params.gamma, tol, tol, eps_pole, 10**9)
            if status != _dopri.OK:
                raise IntegrationAborted(f"Dicke integration aborted at step {i} (status {status})")
            y = Y[-1]
            W, alpha = _renormalise(y[4:].reshape(4, K), rng, events, i)
            acc += np.log(alpha)
            out[i] = acc / ((i + 1) * s)
    r = s * np.arange(1, n_steps + 1, dtype=float)
    return LyapunovSeries(r, out, K, float(s), events)


def lyapunov_estimate(series: LyapunovSeries, decades=2.0):
    """Mean and standard deviation of lambda_k^(r) over the last `decades` decades of r."""
    r = series.r_values
    if r[-1] / r[0] < 10 ** (decades + 1) * (1 - 1e-9):
        raise ValueError(f"series spans {np.log10(r[-1] / r[0]):.2f} decades; "
                         f"need at least {decades + 1:g}")
    mask = r >= r[-1] / 10**decades
    sel = series.exponents[mask]
    return sel.mean(axis=0), sel.std(axis=0)


def ks_rate(lam, uncertainty=None, floor=1e-3):
    """Sum of exponents that exceed max(uncertainty, floor)."""
    lam = np.asarray(lam, dtype=float)
    unc = np.zeros_like(lam) if uncertainty is None else np.broadcast_to(uncertainty, lam.shape)
    thr = np.maximum(unc, floor)
    return float(lam[lam > thr].sum())


def log_volume(U, K):
    """ln of the K-volume spanned by the first K columns of U."""
    B = np.asarray(U, dtype=float)[:, :K]
    r = np.linalg.qr(B, mode="r")
    return float(np.sum(np.log(np.abs(np.diag(r)))))
