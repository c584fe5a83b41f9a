"""Classical limits: kicked-top map on the sphere and the Dicke spin-boson flow."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np

from . import _dopri
from .core import EPS_POLE, BlochAngles, _lib


@dataclass(frozen=True)
class KickedTopParams:
    alpha: float = np.pi / 2
    beta: float = 8.0
    tau: float = 1.0

    def __post_init__(self):
        if self.tau != 1.0:
            raise ValueError("the kicked top is defined with tau = 1")


@dataclass(frozen=True)
class DickeParams:
    omega: float = 1.0
    omega0: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.omega <= 0 or self.omega0 <= 0:
            raise ValueError("omega and omega0 must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    @property
    def gamma_c(self):
        return 0.5 * np.sqrt(self.omega * self.omega0)


@dataclass(frozen=True)
class DickeState:
    Q: float
    P: float
    angles: BlochAngles

    def as_array(self):
        """Internal integration layout (Q, P, phi, theta)."""
        return np.array([self.Q, self.P, self.angles.phi, self.angles.theta], dtype=float)

    @classmethod
    def from_array(cls, y):
        return cls(float(y[0]), float(y[1]), BlochAngles(float(y[3]), float(y[2])))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    energy: Optional[np.ndarray] = None
    tangent: Optional[np.ndarray] = None
    params: object = None
    status: str = "ok"
    n_steps: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times)
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if self.energy is not None and len(self.energy) != len(self.times):
            raise ValueError("energy and times differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times.astype(float)) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def state(self, i):
        y = self.states[i]
        if len(y) == 2:
            return BlochAngles(y[0], y[1])
        return DickeState.from_array(y)


class IntegrationAborted(RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


# kicked top ----------------------------------------------------------------

def _precess(theta, phi, alpha, lib):
    if lib is np:
        cphi = np.cos(phi)
        php = np.arctan(np.tan(phi) * np.cos(alpha)
                        - np.sin(alpha) / (np.tan(theta) * cphi)) + np.pi * (cphi < 0)
        ct = np.cos(theta) * np.cos(alpha) + np.sin(theta) * np.sin(phi) * np.sin(alpha)
        return np.arccos(np.clip(ct, -1.0, 1.0)), np.mod(php, 2 * np.pi), ct
    cphi = mpmath.cos(phi)
    php = mpmath.atan(mpmath.tan(phi) * mpmath.cos(alpha)
                      - mpmath.sin(alpha) / (mpmath.tan(theta) * cphi))
    if cphi < 0:
        php += mpmath.pi
    ct = mpmath.cos(theta) * mpmath.cos(alpha) + mpmath.sin(theta) * mpmath.sin(phi) * mpmath.sin(alpha)
    ct = min(max(ct, -1), 1)
    return mpmath.acos(ct), php % (2 * mpmath.pi), ct


def kicked_top_map(theta, phi, alpha, beta):
    """Vectorised map on arrays of angles; returns (theta', phi', theta'', phi'')."""
    lib = _lib(theta)
    thm, phm, ct = _precess(theta, phi, alpha, lib)
    ph2 = (phm + beta * ct) % (2 * lib.pi)
    return thm, phm, thm, ph2


def kicked_top_step(a: BlochAngles, p: KickedTopParams, eps_pole=EPS_POLE):
    """One period: precession by alpha about x, then the twist phi -> phi + beta cos(theta).

    Returns the intermediate (post-precession) and final angles.
    """
    a.check_pole(eps_pole)
    lib = _lib(a.theta)
    alpha, beta = p.alpha, p.beta
    if lib is mpmath:
        alpha, beta = mpmath.mpf(alpha), mpmath.mpf(beta)
    thm, phm, _, ph2 = kicked_top_map(a.theta, a.phi, alpha, beta)
    return BlochAngles(thm, phm), BlochAngles(thm, ph2)


def kicked_top_inverse_step(a: BlochAngles, p: KickedTopParams, eps_pole=EPS_POLE):
    """Inverse of kicked_top_step: undo the twist, then precess by -alpha."""
    a.check_pole(eps_pole)
    lib = _lib(a.theta)
    phm = (a.phi - p.beta * lib.cos(a.theta)) % (2 * lib.pi)
    th, ph, _ = _precess(a.theta, phm, -p.alpha, lib)
    return BlochAngles(th, ph)


def kicked_top_orbit(a0: BlochAngles, p: KickedTopParams, n_kicks, eps_pole=EPS_POLE):
    """Stroboscopic orbit; states are (theta, phi) rows (object dtype in extended precision)."""
    ext = isinstance(a0.theta, mpmath.mpf)
    states = np.empty((n_kicks + 1, 2), dtype=object if ext else float)
    states[0] = (a0.theta, a0.phi)
    a = a0
    for k in range(n_kicks):
        _, a = kicked_top_step(a, p, eps_pole)
        states[k + 1] = (a.theta, a.phi)
    return Trajectory(np.arange(n_kicks + 1), states, params=p)


# Dicke ---------------------------------------------------------------------

def dicke_rhs(x: DickeState, p: DickeParams, eps_pole=EPS_POLE):
    """Time derivatives (dQ/dt, dP/dt, dphi/dt, dtheta/dt)."""
    x.angles.check_pole(eps_pole)
    out = np.empty(4)
    _dopri.flow(x.as_array(), p.omega, p.omega0, p.gamma, out)
    return out


def dicke_energy(x, p: DickeParams):
    """Classical energy per spin; x is a DickeState or an (..., 4) array (Q, P, phi, theta)."""
    if isinstance(x, DickeState):
        Q, P, phi, theta = x.as_array()
    else:
        x = np.asarray(x, dtype=float)
        Q, P, phi, theta = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    return (p.omega0 * np.cos(theta) / 2 + p.omega * (Q * Q + P * P) / 2
            + p.gamma * Q * np.sin(theta) * np.cos(phi) / 2)


def dicke_point_from_energy(E, angles: BlochAngles, p: DickeParams, return_branch=False):
    """Initial condition (Q0, P=0, angles) on the energy shell E.

    Takes the positive root of the quadratic in Q when there is one, else the larger root.
    """
    a = p.omega / 2
    b = p.gamma * np.sin(angles.theta) * np.cos(angles.phi) / 2
    c = p.omega0 * np.cos(angles.theta) / 2 - E
    disc = b * b - 4 * a * c
    if disc < -1e-14 * max(1.0, b * b):
        raise ValueError(f"energy E={E} is unreachable at theta={angles.theta}, phi={angles.phi}")
    disc = max(disc, 0.0)
    r_hi = (-b + np.sqrt(disc)) / (2 * a)
    if disc == 0.0:
        Q, branch = r_hi, "double"
    elif r_hi > 0:
        Q, branch = r_hi, "positive"
    else:
        Q, branch = r_hi, "larger"
    state = DickeState(float(Q), 0.0, angles)
    return (state, branch) if return_branch else state


def integrate_dicke(x0: DickeState, p: DickeParams, t_final, tol=1e-14, sample_dt=0.05,
                    tangent=None, method="dopri", max_steps=10**9, eps_pole=EPS_POLE):
    """Adaptive Runge-Kutta integration of the Dicke flow.

    tangent: optional 4 x m matrix of tangent vectors in local (dQ, dP, dq, dp)
    coordinates, co-integrated with the trajectory under the same error control.
    Samples land exactly on multiples of sample_dt (plus t_final).
    """
    if tol <= 0 or sample_dt <= 0:
        raise ValueError("tol and sample_dt must be positive")
    x0.angles.check_pole(eps_pole)
    times = sample_dt * np.arange(int(np.floor(t_final / sample_dt + 1e-9)) + 1)
    if times[-1] < t_final - 1e-12:
        times = np.append(times, t_final)
    y0 = x0.as_array()
    m = 0
    if tangent is not None:
        W = np.asarray(tangent, dtype=float)
        m = W.shape[1]
        y0 = np.concatenate([y0, W.ravel()])
    if method == "dopri":
        Y, n_ok, status, steps = _dopri.integrate(y0, times, p.omega, p.omega0, p.gamma,
                                                  tol, tol, eps_pole, max_steps)
    elif method == "scipy":
        Y, n_ok, status, steps = _integrate_scipy(y0, times, p, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    Y = Y[:n_ok + (1 if status == _dopri.POLE else 0)][:len(times)]
    traj = Trajectory(times[:len(Y)], Y[:, :4], energy=dicke_energy(Y[:, :4], p),
                      tangent=Y[:, 4:].reshape(len(Y), 4, m) if m else None,
                      params=p, n_steps=int(steps))
    if status != _dopri.OK:
        traj.status = {_dopri.POLE: "pole", _dopri.UNDERFLOW: "underflow",
                       _dopri.MAXSTEPS: "max_steps"}[status]
        raise IntegrationAborted(
            f"Dicke integration aborted ({traj.status}) at t={traj.times[-1]:.6g}", traj)
    return traj


def _integrate_scipy(y0, times, p, tol):
    from scipy.integrate import solve_ivp

    def f(t, y):
        out = np.empty_like(y)
        _dopri.flow(y, p.omega, p.omega0, p.gamma, out)
        return out

    sol = solve_ivp(f, (times[0], times[-1]), y0, method="DOP853", t_eval=times,
                    rtol=tol, atol=tol)
    Y = sol.y.T
    return Y, len(Y), (_dopri.OK if sol.success else _dopri.UNDERFLOW), int(sol.nfev)


def poincare_section(traj: Trajectory, params: DickeParams = None):
    """Crossings of P = 0 with Q > 0, as (phi mod 2pi, cos(theta)) pairs.

    Each crossing is bracketed by a sign change of P between samples, located on the
    cubic Hermite interpolant of P(t) and refined by one Newton step.
    """
    p = params if params is not None else traj.params
    X = np.asarray(traj.states, dtype=float)
    t = np.asarray(traj.times, dtype=float)
    if len(t) < 2:
        return []
    if p is None:
        raise ValueError("Dicke parameters are needed for the crossing refinement")
    D = np.empty_like(X)
    out = np.empty(4)
    for i in range(len(X)):
        _dopri.flow(X[i], p.omega, p.omega0, p.gamma, out)
        D[i] = out
    P = X[:, 1]
    idx = np.nonzero((np.sign(P[:-1]) != np.sign(P[1:])) & (P[:-1] != 0))[0]
    idx = np.concatenate([idx, np.nonzero(P == 0)[0]]) if np.any(P == 0) else idx
    pts = []
    for i in np.unique(idx):
        if P[i] == 0:
            if X[i, 0] > 0 and (i == 0 or P[i - 1] != 0):
                pts.append((X[i, 2] % (2 * np.pi), np.cos(X[i, 3])))
            continue
        if i + 1 >= len(t):
            continue
        h = t[i + 1] - t[i]
        j = i + 1
        s = P[i] / (P[i] - P[j])
        s = s - _hermite(X[i, 1], X[j, 1], D[i, 1], D[j, 1], h, s) / \
            _hermite_ds(X[i, 1], X[j, 1], D[i, 1], D[j, 1], h, s)
        s = min(max(s, 0.0), 1.0)
        Q = _hermite(X[i, 0], X[j, 0], D[i, 0], D[j, 0], h, s)
        if Q <= 0:
            continue
        ph = _hermite(X[i, 2], X[j, 2], D[i, 2], D[j, 2], h, s)
        th = _hermite(X[i, 3], X[j, 3], D[i, 3], D[j, 3], h, s)
        pts.append((ph % (2 * np.pi), np.cos(th)))
    return pts


def _hermite(y0, y1, d0, d1, h, s):
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def _hermite_ds(y0, y1, d0, d1, h, s):
    return ((6 * s**2 - 6 * s) * y0 + (3 * s**2 - 4 * s + 1) * h * d0
            + (-6 * s**2 + 6 * s) * y1 + (3 * s**2 - 2 * s) * h * d1)


