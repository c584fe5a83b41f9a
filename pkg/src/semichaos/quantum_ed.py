"""Exact finite-N dynamics in the symmetric subspace (kicked top) and spin x boson (Dicke)."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.special import gammaln

log = logging.getLogger(__name__)

MAX_DIM = 30000
EIG_FLOOR = 1e-12


class CutoffError(ValueError):
    pass


@dataclass(frozen=True)
class CollectiveSpinOps:
    N: int
    Sx: np.ndarray
    Sy: np.ndarray
    Sz: np.ndarray

    @property
    def dimension(self):
        return self.N + 1

    @property
    def S(self):
        return self.N / 2


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    basis: str = "spin"
    N: int = 0
    N_cut: int = 0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.basis not in ("spin", "spin_boson"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.basis == "spin_boson" and self.N_cut < 1:
            raise ValueError("composite basis needs N_cut >= 1")

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


def collective_spin_matrices(N):
    """Sx, Sy, Sz for spin S = N/2 in the basis |S, M>, M = S, S-1, ..., -S."""
    if N < 1:
        raise ValueError("N must be >= 1")
    S = N / 2
    M = S - np.arange(N + 1)
    # <M+1| S+ |M> sits just above the diagonal because M decreases with the index
    sp = np.diag(np.sqrt(S * (S + 1) - M[1:] * (M[1:] + 1)), 1)
    Sx = (sp + sp.T) / 2
    Sy = (sp - sp.T) / 2j
    Sz = np.diag(M)
    return CollectiveSpinOps(N, Sx, Sy, Sz.astype(float))


def _rotation(op, angle):
    w, v = np.linalg.eigh(op)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def spin_coherent_state(N, theta0, phi0, ops=None):
    """Rotation of |S, S> onto Z(theta0, phi0): exp(-i phi0 Sz) exp(-i theta0 Sy) |S, S>."""
    ops = ops or collective_spin_matrices(N)
    top = np.zeros(N + 1, dtype=complex)
    top[0] = 1.0
    v = _rotation(ops.Sy, theta0) @ top
    v = np.exp(-1j * phi0 * np.diag(ops.Sz)) * v
    return QuantumState(v, "spin", N)


def spin_expectations(psi, ops):
    v = psi.amplitudes if isinstance(psi, QuantumState) else psi
    return np.array([np.vdot(v, O @ v).real for O in (ops.Sx, ops.Sy, ops.Sz)])


@dataclass
class FloquetOperator:
    matrix: np.ndarray

    def unitarity_residual(self):
        U = self.matrix
        return float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())


def kicked_top_floquet(N, alpha, beta, s=0.5, ops=None):
    """U = exp(-i beta/(2 N s) Sz^2) exp(-i alpha Sx)."""
    ops = ops or collective_spin_matrices(N)
    Rx = _rotation(ops.Sx, alpha)
    kick = np.exp(-1j * beta / (2 * N * s) * np.diag(ops.Sz) ** 2)
    return FloquetOperator(kick[:, None] * Rx)


def _log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def spin_bipartition_rdm(state, N_A):
    """Reduced density matrix of N_A of the N spins for a state in the symmetric subspace."""
    c = state.amplitudes if isinstance(state, QuantumState) else np.asarray(state, dtype=complex)
    N = len(c) - 1
    if not 1 <= N_A < N:
        raise ValueError(f"N_A must be in [1, {N - 1}]")
    N_B = N - N_A
    kA = np.arange(N_A + 1)[:, None]
    kB = np.arange(N_B + 1)[None, :]
    k = kA + kB
    w = np.exp(0.5 * (_log_binom(N_A, kA) + _log_binom(N_B, kB) - _log_binom(N, k)))
    Mx = c[k] * w
    return Mx @ Mx.conj().T


def entropy_of(rho):
    ev = np.linalg.eigvalsh(rho)
    if ev.min() < -EIG_FLOOR:
        log.warning("density matrix eigenvalue %.3e below the floor", ev.min())
    ev = ev[ev > EIG_FLOOR]
    return float(-np.sum(ev * np.log(ev)))


def page_entropy(m, n):
    """Mean entropy of the m-dimensional part of a random pure state on C^m x C^n (m <= n)."""
    m, n = min(m, n), max(m, n)
    return np.log(m) - m / (2 * n)


def spin_covariance(state, ops):
    """2 <{S_mu, S_nu}> - 4 <S_mu><S_nu> on a spin-basis state or a spin density matrix."""
    A = state.amplitudes if isinstance(state, QuantumState) else np.asarray(state)
    ops_l = (ops.Sx, ops.Sy, ops.Sz)
    if A.ndim == 1:
        mean = lambda O: np.vdot(A, O @ A)
    else:
        mean = lambda O: np.trace(A @ O)
    m = np.array([mean(O).real for O in ops_l])
    C = np.empty((3, 3))
    for i, a in enumerate(ops_l):
        for j, b in enumerate(ops_l):
            C[i, j] = 2 * mean(a @ b + b @ a).real - 4 * m[i] * m[j]
    return C


def qfi_exact(state, ops):
    """f_Q = lambda_max(covariance) / N for a pure spin state."""
    C = spin_covariance(state, ops)
    return float(np.linalg.eigvalsh(C)[-1] / ops.N)


def square_commutator_exact(state0, U, t, ops, normalization="semiclassical"):
    """-<[Sz(t), Sz]^2> with Sz(t) = U^-t Sz U^t.

    normalization="semiclassical" divides by S^2 (the scale of the Gaussian prediction);
    "unit" uses A = B = Sz/S, i.e. divides by S^4.
    """
    psi0 = state0.amplitudes if isinstance(state0, QuantumState) else state0
    Um = U.matrix if isinstance(U, FloquetOperator) else U
    sz = np.diag(ops.Sz)
    a = sz * psi0
    b = psi0.copy()
    for _ in range(t):
        a = Um @ a
        b = Um @ b
    a = sz * a
    b = sz * b
    Ud = Um.conj().T
    for _ in range(t):
        a = Ud @ a
        b = Ud @ b
    v = a - sz * b
    val = float(np.vdot(v, v).real)
    S = ops.S
    return val / S**2 if normalization == "semiclassical" else val / S**4


@dataclass
class KickedTopEDSeries:
    times: np.ndarray
    S_A: np.ndarray
    f_Q: np.ndarray
    c: np.ndarray


def kicked_top_ed_series(N, alpha, beta, theta0, phi0, n_kicks, N_A=None, with_otoc=True,
                         otoc_kicks=None):
    """S_A (N_A spins), f_Q and c_zz at every kick for the finite-N kicked top."""
    ops = collective_spin_matrices(N)
    U = kicked_top_floquet(N, alpha, beta, ops=ops).matrix
    N_A = N // 2 if N_A is None else N_A
    psi = spin_coherent_state(N, theta0, phi0, ops).amplitudes
    S = np.empty(n_kicks + 1)
    F = np.empty(n_kicks + 1)
    C = np.full(n_kicks + 1, np.nan)
    n_c = n_kicks if otoc_kicks is None else min(n_kicks, otoc_kicks)
    sz = np.diag(ops.Sz)
    # c(t): forward images of psi0 and Sz psi0, then pull back through stored powers
    if with_otoc:
        fwd_a = sz * psi
        fwd_b = psi.copy()
        Ud = U.conj().T
    for t in range(n_kicks + 1):
        S[t] = entropy_of(spin_bipartition_rdm(psi, N_A))
        F[t] = qfi_exact(psi, ops)
        if with_otoc and t <= n_c:
            a, b = sz * fwd_a, sz * fwd_b
            for _ in range(t):
                a = Ud @ a
                b = Ud @ b
            v = a - sz * b
            C[t] = float(np.vdot(v, v).real) / ops.S**2
            fwd_a = U @ fwd_a
            fwd_b = U @ fwd_b
        psi = U @ psi
    return KickedTopEDSeries(np.arange(n_kicks + 1, dtype=float), S, F, C)


# Dicke ---------------------------------------------------------------------

def boson_ops(N_cut):
    a = np.diag(np.sqrt(np.arange(1, N_cut)), 1)
    return a


def dicke_hamiltonian(N, N_cut, p, max_dim=MAX_DIM):
    """omega0 Sz + omega b^dag b + gamma/sqrt(N) Sx (b + b^dag)/sqrt(2), spin index major."""
    if N_cut < 2:
        raise ValueError("N_cut must be >= 2")
    dim = (N + 1) * N_cut
    if dim > max_dim:
        raise MemoryError(f"Hilbert space dimension {dim} exceeds the cap {max_dim}")
    ops = collective_spin_matrices(N)
    a = boson_ops(N_cut)
    Ib = np.eye(N_cut)
    Is = np.eye(N + 1)
    H = (p.omega0 * np.kron(ops.Sz, Ib) + p.omega * np.kron(Is, np.diag(np.arange(N_cut)))
         + p.gamma / np.sqrt(N) * np.kron(ops.Sx.real, (a + a.T) / np.sqrt(2)))
    return H


def boson_coherent(alpha, N_cut):
    n = np.arange(N_cut)
    if alpha == 0:
        c = np.zeros(N_cut, dtype=complex)
        c[0] = 1.0
        return c
    logmag = -abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def dicke_initial_state(theta0, phi0, Q0, P0, N, N_cut, tail_tol=1e-8):
    """Spin coherent state x boson coherent state with alpha = sqrt(N) (Q0 + i P0) / sqrt(2)."""
    alpha = np.sqrt(N) * (Q0 + 1j * P0) / np.sqrt(2)
    nbar = abs(alpha) ** 2
    if nbar + 5 * np.sqrt(nbar) >= N_cut:
        raise CutoffError(f"<n> = {nbar:.1f} too close to the cutoff N_cut = {N_cut}")
    b = boson_coherent(alpha, N_cut)
    tail = 1 - np.vdot(b, b).real
    if tail > tail_tol:
        raise CutoffError(f"truncated boson norm deficit {tail:.2e} exceeds {tail_tol:g}")
    b /= np.linalg.norm(b)
    s = spin_coherent_state(N, theta0, phi0).amplitudes
    return QuantumState(np.kron(s, b), "spin_boson", N, N_cut)


def parity_sectors(N, N_cut):
    """Index sets of the two sectors of exp(i pi (b^dag b + S - Sz))."""
    k = np.repeat(np.arange(N + 1), N_cut)
    n = np.tile(np.arange(N_cut), N + 1)
    par = (k + n) % 2
    return [np.nonzero(par == 0)[0], np.nonzero(par == 1)[0]]


class DickeEvolver:
    """One-time eigendecomposition of H per parity sector, then phase evolution."""

    def __init__(self, H, N, N_cut):
        self.N, self.N_cut = N, N_cut
        self.dim = H.shape[0]
        self.blocks = []
        for idx in parity_sectors(N, N_cut):
            Hb = H[np.ix_(idx, idx)]
            if np.abs(H[np.ix_(idx, np.setdiff1d(np.arange(self.dim), idx))]).max(initial=0) > 0:
                raise ValueError("Hamiltonian does not conserve parity")
            w, v = eigh(Hb, overwrite_a=True, check_finite=False, driver="evd")
            self.blocks.append((idx, w, v))

    def evolve(self, psi0, times):
        psi0 = psi0.amplitudes if isinstance(psi0, QuantumState) else psi0
        coeffs = [(idx, w, v, v.T @ psi0[idx]) for idx, w, v in self.blocks]
        for t in times:
            out = np.empty(self.dim, dtype=complex)
            for idx, w, v, c in coeffs:
                out[idx] = v @ (np.exp(-1j * w * t) * c)
            yield t, out


def spin_reduced(psi, N, N_cut):
    M = psi.reshape(N + 1, N_cut)
    return M @ M.conj().T


def boson_tail(psi, N, N_cut, width=None):
    """Probability in the top `width` boson levels (default N_cut // 10)."""
    width = width or max(1, N_cut // 10)
    M = np.abs(psi.reshape(N + 1, N_cut)) ** 2
    return float(M[:, -width:].sum())


def evolve_and_entropy_dicke(state0, H, times, evolver=None, tail_warn=1e-6, with_qfi=False):
    """Atom-cavity entanglement entropy S_A(t) (and optionally the spin covariance f_Q)."""
    N, N_cut = state0.N, state0.N_cut
    ev = evolver or DickeEvolver(H, N, N_cut)
    S = []
    F = []
    tails = []
    ops = collective_spin_matrices(N) if with_qfi else None
    for t, psi in ev.evolve(state0, times):
        rho = spin_reduced(psi, N, N_cut)
        S.append(entropy_of(rho))
        tails.append(boson_tail(psi, N, N_cut))
        if with_qfi:
            F.append(qfi_exact(rho, ops))
    tails = np.array(tails)
    if tails.max() > tail_warn:
        log.warning("boson occupation approaches the cutoff: tail mass %.2e", tails.max())
    out = {"S_A": np.array(S), "tail": tails}
    if with_qfi:
        out["f_Q"] = np.array(F)
    return out


def suggest_cutoff(traj, N, margin=5.0, delta_max=8.0):
    """N_cut from the classical trajectory: N max((Q^2+P^2)/2) plus `margin` standard deviations."""
    X = np.asarray(traj.states, dtype=float)
    r = np.max((X[:, 0] ** 2 + X[:, 1] ** 2) / 2)
    nbar = N * r
    n_cut = int(np.ceil(nbar + margin * np.sqrt(nbar + 1) + 10))
    if n_cut > delta_max * N:
        log.warning("cutoff %d exceeds delta_max * N = %d", n_cut, int(delta_max * N))
    return n_cut
