"""Tangent propagators U(t) and correlation matrices G(t) along classical trajectories.

Coordinates are the local fluctuation quadratures: for a spin, the components
(dq, dp) of the displacement along the rotating frame vectors (X, Y); for the
Dicke model the layout is (dQ, dP, dq, dp), boson pair first.
Propagators act on column vectors, dxi(t) = U dxi(0), so G(t) = U G(0) U^T.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np

from . import _dopri
from .classical import (DickeParams, DickeState, IntegrationAborted, KickedTopParams,
                        Trajectory, integrate_dicke, kicked_top_step)
from .core import (EPS_POLE, MACHINE, BlochAngles, PrecisionConfig, _lib,
                   symplectic_unit, vacuum_correlation)


@dataclass
class TangentFrame:
    vectors: np.ndarray  # 2n x K, one tangent vector per column
    base_point: object = None

    def __post_init__(self):
        v = np.asarray(self.vectors)
        if v.ndim != 2 or v.shape[1] > v.shape[0]:
            raise ValueError("need K <= 2n column vectors")
        self.vectors = v


@dataclass
class Propagator:
    matrix: np.ndarray
    t: float = 0.0

    def residual(self):
        return symplectic_residual_rel(self.matrix)


def symplectic_residual_rel(U):
    """||U^T J U - J||_max scaled by max(1, ||U||_2^2), the round-off floor of the product."""
    U = np.asarray(U, dtype=float)
    J = symplectic_unit(U.shape[0] // 2)
    scale = max(1.0, np.linalg.norm(U, 2) ** 2)
    return float(np.abs(U.T @ J @ U - J).max() / scale)


# kicked top ----------------------------------------------------------------

def kicked_top_psi(theta, phi):
    """Frame angle psi = -arctan(tan(phi)/cos(theta)), defined modulo pi."""
    lib = _lib(theta)
    return -lib.atan(lib.tan(phi) / lib.cos(theta)) if lib is mpmath else \
        -np.arctan(np.tan(phi) / np.cos(theta))


def kicked_top_psi_branch(theta, phi):
    """psi on the branch fixed by the sign of the frame vectors (modulo 2 pi)."""
    lib = _lib(theta)
    if lib is mpmath:
        return mpmath.atan2(mpmath.sin(phi), -mpmath.cos(theta) * mpmath.cos(phi))
    return np.arctan2(np.sin(phi), -np.cos(theta) * np.cos(phi))


def _check(a: BlochAngles, eps):
    a.check_pole(eps)


def kicked_top_fluct_step(G, a: BlochAngles, a_mid: BlochAngles, beta, eps_pole=EPS_POLE):
    """Map G over one kick: frame rotation by psi - psi', then the shear beta sin^2(theta').

    Works on float arrays or object arrays of mpf entries.
    """
    _check(a, eps_pole)
    _check(a_mid, eps_pole)
    lib = _lib(a.theta)
    if lib is mpmath:
        beta = mpmath.mpf(beta)
    d = kicked_top_psi(a.theta, a.phi) - kicked_top_psi(a_mid.theta, a_mid.phi)
    c2, s2 = lib.cos(d) ** 2, lib.sin(d) ** 2
    sn2, cs2 = lib.sin(2 * d), lib.cos(2 * d)
    gqq, gqp, gpp = G[0][0], G[0][1], G[1][1]
    qq = c2 * gqq + sn2 * gqp + s2 * gpp
    pp = s2 * gqq - sn2 * gqp + c2 * gpp
    qp = -sn2 * gqq / 2 + cs2 * gqp + sn2 * gpp / 2
    b = beta * lib.sin(a_mid.theta) ** 2
    out = np.empty((2, 2), dtype=object if lib is mpmath else float)
    out[0, 0] = qq
    out[0, 1] = out[1, 0] = qp - b * qq
    out[1, 1] = pp - 2 * b * qp + b * b * qq
    return out


def kicked_top_tangent(a: BlochAngles, a_mid: BlochAngles, beta, eps_pole=EPS_POLE):
    """2x2 one-kick tangent matrix in the (X, Y) frames at the start and end points."""
    _check(a, eps_pole)
    _check(a_mid, eps_pole)
    lib = _lib(a.theta)
    d = kicked_top_psi_branch(a.theta, a.phi) - kicked_top_psi_branch(a_mid.theta, a_mid.phi)
    c, s = lib.cos(d), lib.sin(d)
    b = beta * lib.sin(a_mid.theta) ** 2
    M = np.empty((2, 2), dtype=object if lib is mpmath else float)
    M[0, 0], M[0, 1] = c, s
    M[1, 0], M[1, 1] = -s - b * c, c - b * s
    return M


@dataclass
class KickedTopRun:
    trajectory: Trajectory
    U: np.ndarray  # (n+1, 2, 2)
    G: np.ndarray  # (n+1, 2, 2), propagated by the direct G map
    precision: PrecisionConfig
    aborted_at: Optional[int] = None

    @property
    def times(self):
        return self.trajectory.times

    def as_float(self):
        return (self.U.astype(float), self.G.astype(float))


def propagate_kicked_top(a0: BlochAngles, p: KickedTopParams, n_kicks,
                         precision: PrecisionConfig = MACHINE, G0=None, eps_pole=EPS_POLE):
    """Orbit, tangent propagator and correlation matrix for n_kicks periods.

    In extended precision all quantities are mpf at precision.digits. A pole hit truncates
    the run and records the kick index in aborted_at.
    """
    ext = precision.is_extended
    dtype = object if ext else float
    with precision.context():
        if ext:
            a = BlochAngles(mpmath.mpf(a0.theta), mpmath.mpf(a0.phi))
            alpha, beta = mpmath.mpf(p.alpha), mpmath.mpf(p.beta)
            one, half = mpmath.mpf(1), mpmath.mpf(1) / 2
        else:
            a = BlochAngles(float(a0.theta), float(a0.phi))
            alpha, beta = p.alpha, p.beta
            one, half = 1.0, 0.5
        states = np.empty((n_kicks + 1, 2), dtype=dtype)
        U = np.empty((n_kicks + 1, 2, 2), dtype=dtype)
        G = np.empty((n_kicks + 1, 2, 2), dtype=dtype)
        states[0] = (a.theta, a.phi)
        U[0] = np.array([[one, 0 * one], [0 * one, one]], dtype=dtype)
        if G0 is None:
            G[0] = np.array([[half, 0 * one], [0 * one, half]], dtype=dtype)
        else:
            G[0] = np.array(G0, dtype=dtype) if not ext else \
                np.array([[mpmath.mpf(x) for x in row] for row in np.asarray(G0)], dtype=object)
        pk = KickedTopParams(alpha, beta)
        aborted = None
        for k in range(n_kicks):
            try:
                mid, nxt = kicked_top_step(a, pk, eps_pole)
                M = kicked_top_tangent(a, mid, beta, eps_pole)
                G[k + 1] = kicked_top_fluct_step(G[k], a, mid, beta, eps_pole)
            except ValueError:
                aborted = k
                break
            U[k + 1] = M.dot(U[k])
            states[k + 1] = (nxt.theta, nxt.phi)
            a = nxt
        n = n_kicks + 1 if aborted is None else aborted + 1
        traj = Trajectory(np.arange(n), states[:n], params=p,
                          status="ok" if aborted is None else "pole")
        return KickedTopRun(traj, U[:n], G[:n], precision, aborted)


# Dicke ---------------------------------------------------------------------

def dicke_stability_matrix(x: DickeState, p: DickeParams, eps_pole=EPS_POLE):
    """Linearised flow matrix for (dQ, dP, dq, dp) at the classical point x (spin 1/2 per site)."""
    x.angles.check_pole(eps_pole)
    return _dopri.stability_matrix(x.Q, x.angles.phi, x.angles.theta, p.omega, p.gamma)


def dicke_local_scaling(theta, s=0.5):
    """D with (dQ, dP, dq, dp) = D (dQ, dP, dphi, dtheta)."""
    D = np.zeros((4, 4))
    D[0, 0] = D[1, 1] = 1.0
    D[2, 3] = np.sqrt(s)
    D[3, 2] = np.sqrt(s) * np.sin(theta)
    return D


def kicked_top_local_scaling(theta):
    """D with (dq, dp) = D (dphi, dcos(theta))."""
    st = np.sin(theta)
    return np.array([[0.0, -1.0 / st], [st, 0.0]])


@dataclass
class DickeRun:
    trajectory: Trajectory
    U: np.ndarray  # (nt, 4, 4)

    @property
    def times(self):
        return self.trajectory.times


def propagate_dicke(x0: DickeState, p: DickeParams, t_final, sample_dt=0.05, tol=1e-14,
                    frame0=None, method="dopri"):
    """Co-integrate the Dicke trajectory and dU/dt = A(t) U (U(0) = I or frame0)."""
    W0 = np.eye(4) if frame0 is None else np.asarray(frame0, dtype=float)
    traj = integrate_dicke(x0, p, t_final, tol=tol, sample_dt=sample_dt, tangent=W0,
                           method=method)
    return DickeRun(traj, traj.tangent)


def propagate_tangent(system, x0, frame0: Optional[TangentFrame], t_final, params,
                      precision: PrecisionConfig = MACHINE, sample_dt=0.05, tol=1e-14):
    """Trajectory, evolved frame samples and propagator samples for either model.

    Kicked top: t_final is the number of kicks. Returns (trajectory, frames, propagators).
    """
    if system == "kicked_top":
        run = propagate_kicked_top(x0, params, int(t_final), precision)
        U = run.U
        traj = run.trajectory
    elif system == "dicke":
        run = propagate_dicke(x0, params, t_final, sample_dt=sample_dt, tol=tol)
        U = run.U
        traj = run.trajectory
    else:
        raise ValueError(f"unknown system {system!r}")
    W0 = None if frame0 is None else frame0.vectors
    frames = [TangentFrame(U[i].dot(W0) if W0 is not None else U[i], traj.state(i))
              for i in range(len(U))]
    props = [Propagator(U[i], traj.times[i]) for i in range(len(U))]
    return traj, frames, props


def correlation_evolve(G0, U):
    """G(t) = U G0 U^T for column-vector propagators."""
    U = U.matrix if isinstance(U, Propagator) else U
    return U.dot(G0).dot(U.T)


def reduced_correlation(G, subsystem):
    """Principal submatrix on whole conjugate pairs; subsystem lists coordinate indices."""
    idx = np.asarray(sorted(subsystem), dtype=int)
    pairs = set(idx // 2)
    if len(idx) != 2 * len(pairs) or any((2 * k not in idx or 2 * k + 1 not in idx) for k in pairs):
        raise ValueError(f"index set {list(idx)} does not select whole conjugate pairs")
    G = np.asarray(G)
    return G[np.ix_(idx, idx)]


def excitation_number(G):
    G = np.asarray(G)
    if G.shape != (2, 2):
        raise ValueError("excitation_number needs a single-mode 2x2 matrix")
    return (G[0, 0] + G[1, 1] - 1) / 2


def jacobian_fd(f, x, eps=1e-6):
    """Central-difference Jacobian of f at x."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        dx = np.zeros_like(x)
        dx[j] = eps
        J[:, j] = (np.asarray(f(x + dx), dtype=float) - np.asarray(f(x - dx), dtype=float)) / (2 * eps)
    return J


class FactoredPropagator:
    """U = exp(L) Q R with Q orthogonal and R upper triangular of unit max-entry.

    Accumulates per-interval propagators without overflow; reduced determinants are
    taken from a QR of the selected rows so that they survive |U| ~ 1/eps.
    """

    def __init__(self, dim):
        self.Q = np.eye(dim)
        self.R = np.eye(dim)
        self.log_scale = 0.0

    def update(self, M):
        Q, R = np.linalg.qr(M @ self.Q)
        self.Q = Q
        R = R @ self.R
        m = np.abs(R).max()
        self.R = R / m
        self.log_scale += np.log(m)
        return self

    def matrix(self):
        return np.exp(self.log_scale) * self.Q @ self.R

    def log_det_gram(self, rows):
        """ln det(U_A U_A^T) for the row subset A."""
        B = (self.Q[rows] @ self.R).T
        r = np.linalg.qr(B, mode="r")
        return 2 * np.sum(np.log(np.abs(np.diag(r)))) + 2 * len(rows) * self.log_scale

    def log_singular_values(self):
        sv = np.linalg.svd(self.R, compute_uv=False)
        return np.log(sv) + self.log_scale


def log_det_gram(U, rows):
    """ln det(U_A U_A^T) = ln det(2 G_A) for G(0) = I/2, via QR of the selected rows."""
    B = np.asarray(U, dtype=float)[list(rows)].T
    r = np.linalg.qr(B, mode="r")
    return 2 * float(np.sum(np.log(np.abs(np.diag(r)))))


def vacuum_for(system):
    return vacuum_correlation(1 if system == "kicked_top" else 2)
