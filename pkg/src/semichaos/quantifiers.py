"""Gaussian entanglement and scrambling quantifiers built from G(t) and U(t)."""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
import numpy as np

from .core import NU_CLAMP, _lib, rotating_frame, symplectic_eigenvalues
from .fluctuations import excitation_number, log_det_gram

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class BipartitionSpec:
    kind: str = "spin_fraction"
    f_A: float = 0.5
    pairs: tuple = ()

    def __post_init__(self):
        if self.kind == "spin_fraction":
            if not 0 < self.f_A < 1:
                raise ValueError("f_A must lie in (0, 1)")
        elif self.kind == "subsystem_pairs":
            if not self.pairs:
                raise ValueError("subsystem_pairs needs a non-empty pair index set")
        else:
            raise ValueError(f"unknown bipartition kind {self.kind!r}")

    @property
    def f_B(self):
        return 1.0 - self.f_A

    def coordinates(self):
        return [c for k in sorted(self.pairs) for c in (2 * k, 2 * k + 1)]


@dataclass
class QuantifierSeries:
    times: np.ndarray
    S_A: np.ndarray
    S2_A: np.ndarray
    f_Q: np.ndarray
    xi2: np.ndarray
    c_ab: np.ndarray
    extra: dict = field(default_factory=dict)

    def columns(self):
        cols = {"t": self.times, "S_A": self.S_A, "S2_A": self.S2_A, "f_Q": self.f_Q,
                "xi2": self.xi2, "c_zz": self.c_ab}
        cols.update(self.extra)
        return cols


def _entropy_nu(nu):
    """Entropy of one thermal mode with symplectic eigenvalue nu (nu >= 1)."""
    lib = _lib(nu)
    if nu <= 1:
        return 0 * nu
    return _entropy_ab(lib, (nu + 1) / 2, (nu - 1) / 2)


def _entropy_ab(lib, a, b):
    # a ln a - b ln b with a - b = 1, rewritten so large nu does not cancel
    return lib.log(a) + b * lib.log1p(1 / b)


def renyi2_entropy(G_A):
    """1/2 ln det(2 G_A)."""
    G_A = np.asarray(G_A)
    if G_A.dtype == object:
        d = mpmath.det(mpmath.matrix((2 * G_A).tolist()))
        if d <= 0:
            raise ValueError("det(2 G_A) must be positive")
        return mpmath.log(d) / 2
    sign, logdet = np.linalg.slogdet(2.0 * G_A)
    if sign <= 0:
        raise ValueError("det(2 G_A) must be positive")
    return 0.5 * logdet


def vn_entropy(G_A, tol=NU_CLAMP):
    """Sum of single-mode entropies over the symplectic eigenvalues of 2 G_A."""
    nu = symplectic_eigenvalues(G_A)
    if np.any(nu < 1 - tol):
        raise ValueError(f"symplectic eigenvalue {nu.min():.3e} below the Heisenberg bound")
    return float(sum(_entropy_nu(max(v, 1.0)) for v in nu))


def vn_entropy_from_det(det_GA, tol=NU_CLAMP):
    """Single-mode entropy as a function of d = det(G_A).

    Equal to 2 sqrt(d) arccoth(2 sqrt(d)) + ln(d - 1/4)/2; evaluated through
    nu - 1 = (4d - 1) / (nu + 1), nu = 2 sqrt(d), because the closed form cancels two
    large logarithms as d -> 1/4.
    """
    lib = _lib(det_GA)
    if det_GA < 0.25 - tol:
        raise ValueError(f"det G_A = {det_GA} violates the Heisenberg bound 1/4")
    if det_GA <= 0.25:
        return 0 * det_GA
    nu = 2 * lib.sqrt(det_GA)
    a = (nu + 1) / 2
    b = (4 * det_GA - 1) / (2 * (nu + 1))
    return _entropy_ab(lib, a, b)


def vn_entropy_from_logdet(logdet_2GA):
    """Single-mode entropy from ln det(2 G_A); stays finite where det itself would overflow."""
    if logdet_2GA > 60:
        # nu = exp(logdet/2); S = ln(nu/2) + 1 + O(nu^-2)
        return logdet_2GA / 2 - np.log(2.0) + 1.0
    return float(vn_entropy_from_det(np.exp(logdet_2GA) / 4))


def det_GA_spin(f_A, n_exc):
    if not 0 < f_A < 1:
        raise ValueError("f_A must lie in (0, 1)")
    if n_exc < 0:
        raise ValueError("n_exc must be non-negative")
    return 0.25 + f_A * (1 - f_A) * n_exc


def qfi_from_correlation(G):
    """4 times the largest eigenvalue of G (raw, no spin-length normalisation)."""
    return 4.0 * float(np.linalg.eigvalsh(np.asarray(G, dtype=float))[-1])


def qfi_direction(G_spin, theta, phi):
    """Lab-frame unit vector maximising the transverse variance, from the top eigenvector of G."""
    w, v = np.linalg.eigh(np.asarray(G_spin, dtype=float))
    X, Y, _ = rotating_frame(theta, phi)
    n = v[0, -1] * X + v[1, -1] * Y
    return n / np.linalg.norm(n)


def qfi_spin(n_exc):
    lib = _lib(n_exc)
    return 1 + 2 * n_exc + 2 * lib.sqrt(n_exc * (n_exc + 1))


def squeezing_spin(n_exc):
    """1 + 2n - 2 sqrt(n (n + 1)), evaluated as 1 / qfi_spin(n) to avoid the cancellation."""
    return 1 / qfi_spin(n_exc)


def qfi_density(G_spin, s=0.5):
    """Spin QFI density 4 s lambda_max(G_spin) from the 2x2 spin block."""
    return 4 * s * float(np.linalg.eigvalsh(np.asarray(G_spin, dtype=float))[-1])


def squeezing_density(G_spin, s=0.5):
    return 4 * s * float(np.linalg.eigvalsh(np.asarray(G_spin, dtype=float))[0])


def square_commutator_semiclassical(U, frame0, frame_t, alpha="z", beta="z"):
    """c_ab(t) from the spin-sector tangent propagator and the rotating frames at 0 and t.

    frames are (X, Y, Z) triples of 3-vectors; alpha, beta are axis names or indices.
    """
    a = AXES.get(alpha, alpha)
    b = AXES.get(beta, beta)
    X0, Y0 = frame0[0][b], frame0[1][b]
    Xt, Yt = frame_t[0][a], frame_t[1][a]
    U = np.asarray(U)
    val = Xt * (U[0, 0] * Y0 - U[0, 1] * X0) + Yt * (U[1, 0] * Y0 - U[1, 1] * X0)
    return val * val


# series --------------------------------------------------------------------

def kicked_top_quantifiers(run, f_A=0.5, axes=("z", "z")):
    """Quantifier time series along a kicked-top run (from fluctuations.propagate_kicked_top)."""
    states = run.trajectory.states
    n = len(states)
    out = {k: np.empty(n) for k in ("S_A", "S2_A", "f_Q", "xi2", "c", "n_exc")}
    ext = run.G.dtype == object
    with run.precision.context():
        fA = mpmath.mpf(f_A) if ext else f_A
        fr0 = rotating_frame(float(states[0][0]), float(states[0][1]))
        for i in range(n):
            G = run.G[i]
            nx = excitation_number(G)
            nx = max(nx, 0 * nx)
            d = det_GA_spin(fA, nx)
            out["S_A"][i] = float(vn_entropy_from_det(d))
            out["S2_A"][i] = float((mpmath.log if ext else np.log)(4 * d) / 2)
            out["f_Q"][i] = float(qfi_spin(nx))
            out["xi2"][i] = float(squeezing_spin(nx))
            out["n_exc"][i] = float(nx)
            frt = rotating_frame(float(states[i][0]), float(states[i][1]))
            out["c"][i] = float(square_commutator_semiclassical(
                np.asarray(run.U[i], dtype=float), fr0, frt, *axes))
    return QuantifierSeries(np.asarray(run.trajectory.times, dtype=float), out["S_A"],
                            out["S2_A"], out["f_Q"], out["xi2"], out["c"],
                            extra={"n_exc": out["n_exc"]})


def dicke_quantifiers(run, axes=("z", "z")):
    """Atom-cavity entanglement, spin QFI/squeezing and c_zz along a Dicke run.

    G(0) = I/2; S_A uses ln det(2 G_spin) from a QR of the spin rows of U, which stays
    accurate after G itself has lost its small eigenvalues to round-off.
    """
    traj = run.trajectory
    n = len(traj)
    S, S2, fQ, xi2, c, fQall = (np.empty(n) for _ in range(6))
    X = traj.states
    fr0 = rotating_frame(X[0, 3], X[0, 2])
    for i in range(n):
        U = run.U[i]
        ld = log_det_gram(U, [2, 3])
        S2[i] = 0.5 * ld
        S[i] = vn_entropy_from_logdet(ld)
        G = 0.5 * U @ U.T
        Gs = G[2:, 2:]
        fQ[i] = qfi_density(Gs)
        xi2[i] = squeezing_density(Gs)
        fQall[i] = 2 * float(np.linalg.eigvalsh(G)[-1])
        frt = rotating_frame(X[i, 3], X[i, 2])
        c[i] = square_commutator_semiclassical(U[2:, 2:], fr0, frt, *axes)
    return QuantifierSeries(np.asarray(traj.times, dtype=float), S, S2, fQ, xi2, c,
                            extra={"f_Q_all_quadratures": fQall})


# regime fits ---------------------------------------------------------------

def trailing_mean(t, y):
    """Mean of y over [t/2, t] at every sample (suppresses quasi-periodic oscillations)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    cs = np.concatenate([[0.0], np.cumsum(y)])
    lo = np.searchsorted(t, t / 2, side="left")
    hi = np.arange(1, len(t) + 1)
    return (cs[hi] - cs[lo]) / (hi - lo)


def _lsq_slope(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ coef
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1 - np.sum((y - yhat) ** 2) / ss if ss > 0 else 1.0
    return coef[0], coef[1], r2


def fit_power_law(t, y, window):
    """Log-log slope of y(t) over the window; returns (slope, r2)."""
    t, y = np.asarray(t, float), np.asarray(y, float)
    m = (t >= window[0]) & (t <= window[1]) & (y > 0)
    k, _, r2 = _lsq_slope(np.log(t[m]), np.log(y[m]))
    return k, r2


def fit_exponential_rate(t, y, window):
    """Slope of ln y(t) over the window; returns (rate, r2)."""
    t, y = np.asarray(t, float), np.asarray(y, float)
    m = (t >= window[0]) & (t <= window[1]) & (y > 0)
    k, _, r2 = _lsq_slope(t[m], np.log(y[m]))
    return k, r2


def fit_linear(t, y, window):
    t, y = np.asarray(t, float), np.asarray(y, float)
    m = (t >= window[0]) & (t <= window[1])
    k, _, r2 = _lsq_slope(t[m], y[m])
    return k, r2


def fit_log_growth(t, y, window):
    """Coefficient c of y ~ c ln t over the window; returns (c, r2)."""
    t, y = np.asarray(t, float), np.asarray(y, float)
    m = (t >= window[0]) & (t <= window[1])
    k, _, r2 = _lsq_slope(np.log(t[m]), y[m])
    return k, r2


def finite_time_lambda(t, U, window):
    """Finite-time exponent: slope of ln sigma_max(U(t)) over the window."""
    t = np.asarray(t, float)
    ls = np.array([np.log(np.linalg.svd(np.asarray(u, dtype=float), compute_uv=False)[0])
                   for u in U])
    k, _ = fit_linear(t, ls, window)
    return k


def saturation_onset(t, q_exact, q_semi, rel=0.1):
    """First time the relative deviation between the two curves exceeds rel (None if never)."""
    q_exact, q_semi = np.asarray(q_exact, float), np.asarray(q_semi, float)
    dev = np.abs(q_exact - q_semi) / np.maximum(np.abs(q_semi), 1e-300)
    idx = np.nonzero(dev > rel)[0]
    return None if len(idx) == 0 else float(np.asarray(t)[idx[0]])


def chaotic_window(lam1, t_end, t_sat=None):
    """[5/lambda_1, min(t_end, t_sat)]."""
    end = t_end if t_sat is None else min(t_end, t_sat)
    return (5.0 / lam1, end)


def relative_deviation(q_exact, q_semi, floor=0.0):
    q_exact, q_semi = np.asarray(q_exact, float), np.asarray(q_semi, float)
    return np.abs(q_exact - q_semi) / np.maximum(np.abs(q_semi), floor)


def curve_deviation(q_exact, q_semi):
    """max |q_exact - q_semi| / max |q_semi| over the sampled window.

    Unlike the pointwise ratio this stays finite where the reference curve passes
    close to zero (recurrence dips, t = 0).
    """
    q_exact, q_semi = np.asarray(q_exact, float), np.asarray(q_semi, float)
    scale = np.abs(q_semi).max()
    if scale == 0:
        return float(np.abs(q_exact).max())
    return float(np.abs(q_exact - q_semi).max() / scale)


def ehrenfest_time(N, lam1=None, prefactor=1.0):
    """ln N / (2 lambda_1) for chaotic motion, prefactor * sqrt(N) for regular (lam1=None)."""
    if lam1 is None:
        return prefactor * np.sqrt(N)
    if lam1 <= 0:
        raise ValueError("lam1 must be positive for the chaotic estimate")
    return np.log(N) / (2.0 * lam1)


def ehrenfest_time_finite(N, t, U):
    """Chaotic Ehrenfest time with the finite-time exponent along the orbit.

    Returns the first sampled t with t >= ln N / (2 lam(t)), where
    lam(t) = ln sigma_max(U(t)) / t is the time-averaged stretching rate up to t.
    None if the window never closes on the sampled range.
    """
    t = np.asarray(t, float)
    target = 0.5 * np.log(N)
    for ti, u in zip(t, U):
        if ti <= 0:
            continue
        if np.log(np.linalg.svd(np.asarray(u, dtype=float), compute_uv=False)[0]) >= target:
            return float(ti)
    return None
