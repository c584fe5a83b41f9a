import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import semichaos.fluctuations as fl
from semichaos.classical import (DickeParams, DickeState, KickedTopParams, dicke_point_from_energy,
                                 kicked_top_map, kicked_top_step)
from semichaos.core import (BlochAngles, PrecisionConfig, symplectic_eigenvalues,
                            symplectic_residual)
from semichaos.fluctuations import (FactoredPropagator, Propagator, TangentFrame,
                                    correlation_evolve, dicke_local_scaling,
                                    dicke_stability_matrix, excitation_number, jacobian_fd,
                                    kicked_top_fluct_step, kicked_top_local_scaling,
                                    kicked_top_tangent, log_det_gram, propagate_dicke,
                                    propagate_kicked_top, propagate_tangent, reduced_correlation,
                                    symplectic_residual_rel)
from semichaos.lyapunov import benettin_spectrum

from .conftest import random_physical_G

CHAOTIC_DICKE = (1.5, DickeParams(gamma=5.0))
X0_ANGLES = BlochAngles(np.arccos(0.1), 1.4)


def kt_coords(alpha, beta):
    """Kicked-top map in canonical (phi, cos(theta)) coordinates."""
    def f(y):
        _, _, th, ph = kicked_top_map(np.arccos(y[1]), y[0], alpha, beta)
        # keep phi continuous around the input for differencing
        ph = y[0] + np.mod(ph - y[0] + np.pi, 2 * np.pi) - np.pi
        return np.array([ph, np.cos(th)])
    return f


def test_fluct_step_identity():
    G = np.array([[0.7, 0.1], [0.1, 0.9]])
    a = BlochAngles(1.0, 0.4)
    assert np.allclose(kicked_top_fluct_step(G, a, a, 0.0), G, atol=1e-15)


@pytest.mark.parametrize("a, beta, expected", [
    ((np.pi / 4, 0.0), 8.0, [[0.5, -4.0], [-4.0, 32.5]]),
    ((1.0, 2.0), 8.0, [[0.4999999999200181, -1.6581978172722076],
                       [-1.6581978172722076, 5.999240003368653]]),
    ((np.pi / 4, 0.0), 0.5, [[0.5, -0.25], [-0.25, 0.625]]),
])
def test_fluct_step_frozen_fd_oracle(a, beta, expected):
    # expected values: 1/2 M M^T with M the finite-difference Jacobian of the rotation
    # oracle transported to the local frames
    A = BlochAngles(*a)
    mid, _ = kicked_top_step(A, KickedTopParams(np.pi / 2, beta))
    G = kicked_top_fluct_step(0.5 * np.eye(2), A, mid, beta)
    assert np.allclose(G, expected, atol=1e-8)


@given(st.floats(0.05, np.pi - 0.05), st.floats(0, 2 * np.pi), st.floats(-np.pi, np.pi),
       st.floats(-10, 10), st.integers(0, 2**31))
def test_fluct_step_preserves_det(theta, phi, alpha, beta, seed):
    a = BlochAngles(theta, phi)
    mid, _ = kicked_top_step(a, KickedTopParams(alpha, beta))
    if np.sin(mid.theta) < 1e-3:
        return
    G = random_physical_G(np.random.default_rng(seed), 1, 0.7)
    G2 = kicked_top_fluct_step(G, a, mid, beta)
    assert np.linalg.det(G2) == pytest.approx(np.linalg.det(G), rel=1e-9)


@given(st.floats(0.05, np.pi - 0.05), st.floats(0, 2 * np.pi), st.floats(-10, 10),
       st.sampled_from([(1, 0), (0, 1), (1, 1)]))
def test_fluct_step_frame_ambiguity(theta, phi, beta, shift, ):
    a = BlochAngles(theta, phi)
    mid, _ = kicked_top_step(a, KickedTopParams(np.pi / 2, beta))
    if np.sin(mid.theta) < 1e-3:
        return
    G = np.array([[0.8, -0.3], [-0.3, 0.6]])
    ref = kicked_top_fluct_step(G, a, mid, beta)
    orig = fl.kicked_top_psi
    calls = []

    def shifted(th, ph):
        k = len(calls)
        calls.append(1)
        return orig(th, ph) + np.pi * shift[k % 2]

    fl.kicked_top_psi = shifted
    try:
        out = kicked_top_fluct_step(G, a, mid, beta)
    finally:
        fl.kicked_top_psi = orig
    assert np.allclose(out, ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("a, alpha, beta", [
    ((np.pi / 4, 0.0), np.pi / 2, 8.0), ((1.0, 2.0), np.pi / 2, 2.3), ((2.2, 4.0), 0.9, -3.0),
    ((0.6, 3.3), np.pi / 2, 0.5)])
def test_tangent_equals_transported_fd_jacobian(a, alpha, beta):
    A = BlochAngles(*a)
    mid, fin = kicked_top_step(A, KickedTopParams(alpha, beta))
    J = jacobian_fd(kt_coords(alpha, beta), [A.phi, np.cos(A.theta)])
    M_fd = kicked_top_local_scaling(fin.theta) @ J @ np.linalg.inv(kicked_top_local_scaling(A.theta))
    M = kicked_top_tangent(A, mid, beta)
    assert np.allclose(M, M_fd, atol=1e-7)


def test_fd_jacobian_area_preservation():
    J = jacobian_fd(kt_coords(np.pi / 2, 0.5), [0.0, np.cos(np.pi / 4)])
    assert abs(np.linalg.det(J) - 1) < 1e-6
    assert np.allclose(jacobian_fd(lambda x: x, np.arange(3.0)), np.eye(3), atol=1e-9)


@pytest.mark.parametrize("beta, n", [(0.5, 60), (2.3, 40), (8.0, 12)])
def test_direct_G_map_equals_congruence(beta, n):
    run = propagate_kicked_top(BlochAngles(np.pi / 4, 0.3), KickedTopParams(np.pi / 2, beta), n)
    for U, G in zip(run.U, run.G):
        Gu = correlation_evolve(0.5 * np.eye(2), U)
        assert np.allclose(Gu, G, rtol=1e-8, atol=1e-8 * np.abs(G).max())


def test_beta_zero_is_rotation():
    run = propagate_kicked_top(BlochAngles(1.0, 0.5), KickedTopParams(np.pi / 2, 0.0), 50)
    for U in run.U:
        assert np.allclose(U @ U.T, np.eye(2), atol=1e-12)
        assert np.linalg.norm(U, 2) == pytest.approx(1.0, abs=1e-12)


def test_machine_precision_det_short_runs():
    run = propagate_kicked_top(BlochAngles(np.pi / 4, 0.0), KickedTopParams(np.pi / 2, 0.5), 30)
    dets = np.array([4 * np.linalg.det(G) for G in run.G])
    assert np.max(np.abs(dets - 1)) < 1e-8


def test_extended_precision_det():
    prec = PrecisionConfig.extended(400)
    run = propagate_kicked_top(BlochAngles(np.pi / 4, 0.0), KickedTopParams(np.pi / 2, 8.0), 100,
                               prec)
    assert run.aborted_at is None
    with prec.context():
        worst = max(abs(4 * (G[0, 0] * G[1, 1] - G[0, 1] ** 2) - 1) for G in run.G)
        assert worst < mpmath.mpf(10) ** -100


def test_extended_matches_machine_early():
    p = KickedTopParams(np.pi / 2, 8.0)
    a = BlochAngles(np.pi / 4, 0.0)
    m = propagate_kicked_top(a, p, 8)
    e = propagate_kicked_top(a, p, 8, PrecisionConfig.extended(60))
    Ue, Ge = e.as_float()
    assert np.allclose(Ge, m.G, rtol=1e-6)


def test_pole_truncates_run():
    # alpha = pi/2 maps the equator point (pi/2, pi/2) onto the north pole
    run = propagate_kicked_top(BlochAngles(np.pi / 2, np.pi / 2), KickedTopParams(np.pi / 2, 1.0), 5)
    assert run.aborted_at == 0 and len(run.U) == 1


# Dicke ---------------------------------------------------------------------

def test_stability_matrix_decoupled():
    A = dicke_stability_matrix(DickeState(0.3, 0.1, BlochAngles(1.0, 0.2)), DickeParams(gamma=0.0))
    assert np.allclose(A[:2, 2:], 0) and np.allclose(A[2:, :2], 0)
    assert np.allclose(A[:2, :2], [[0, 1], [-1, 0]])
    assert np.allclose(A[2:, 2:], -A[2:, 2:].T)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 3.09), st.floats(0, 6.28),
       st.floats(0, 6))
def test_stability_matrix_hamiltonian(Q, P, theta, phi, gamma):
    A = dicke_stability_matrix(DickeState(Q, P, BlochAngles(theta, phi)),
                               DickeParams(1.0, 1.0, gamma))
    assert abs(np.trace(A)) < 1e-12
    J = fl.symplectic_unit(2)
    # A = J S with S symmetric
    S = -J @ A
    assert np.allclose(S, S.T, atol=1e-12)


def test_propagator_matches_fd_flow_oracle():
    # oracle: DOP853 on Hamilton equations derived symbolically, central differences,
    # transported to the local quadratures
    E, p = CHAOTIC_DICKE
    x0 = dicke_point_from_energy(E, X0_ANGLES, p)
    run = propagate_dicke(x0, p, 0.5, sample_dt=0.5)
    U_oracle = np.array([
        [0.8523567490703599, 0.47680580816944484, 0.038632581999829, 0.4265056342902924],
        [-0.6694010201147016, 0.8547274374381963, 0.2610674386066965, 1.6473073997332954],
        [1.6421562251750876, 0.4250449754047031, -0.9351771662613473, 0.5653606323712324],
        [0.28512242190499015, 0.04474778802720089, -0.31362623000053, -0.9307274604254189]])
    assert np.allclose(run.U[-1], U_oracle, atol=1e-7)
    assert np.allclose(run.trajectory.states[-1],
                       [1.1435132692910719, -0.7499486649195005, -1.3516133826880485,
                        1.6771952828201717], atol=1e-10)


def test_local_scaling_matches_integrated_tangent():
    E, p = CHAOTIC_DICKE
    x0 = dicke_point_from_energy(E, X0_ANGLES, p)
    from semichaos.classical import integrate_dicke

    def flow(z):
        st_ = DickeState(z[0], z[1], BlochAngles(z[3], z[2]))
        y = integrate_dicke(st_, p, 0.3, sample_dt=0.3).states[-1]
        return np.array([y[0], y[1], z[2] + np.mod(y[2] - z[2] + np.pi, 2 * np.pi) - np.pi, y[3]])

    z0 = x0.as_array()
    J = jacobian_fd(flow, z0)
    zt = flow(z0)
    U_fd = dicke_local_scaling(zt[3]) @ J @ np.linalg.inv(dicke_local_scaling(z0[3]))
    U = propagate_dicke(x0, p, 0.3, sample_dt=0.3).U[-1]
    assert np.allclose(U, U_fd, atol=1e-7)


def test_dicke_symplecticity_and_purity():
    E, p = CHAOTIC_DICKE
    run = propagate_dicke(dicke_point_from_energy(E, X0_ANGLES, p), p, 30.0, sample_dt=0.5)
    assert max(symplectic_residual_rel(U) for U in run.U) < 1e-8
    # det(2G) = det(U)^2 for G(0) = I/2; it is resolvable while cond(U) eps << tol
    checked = [U for U in run.U if np.linalg.cond(U) < 1e6]
    assert len(checked) >= 10
    assert max(symplectic_residual(U) for U in checked) < 1e-8
    assert max(abs(np.linalg.det(U) ** 2 - 1) for U in checked) < 1e-8
    for U in checked:
        Gs = reduced_correlation(correlation_evolve(0.5 * np.eye(4), U), [2, 3])
        assert symplectic_eigenvalues(Gs)[0] >= 1 - 1e-10
    # Heisenberg bound on the full run from the QR form of det(2 G_A)
    assert min(log_det_gram(U, [2, 3]) for U in run.U) >= -1e-10


def test_propagate_tangent_interface():
    p = KickedTopParams(np.pi / 2, 0.0)
    frame = TangentFrame(np.eye(2)[:, :1])
    traj, frames, props = propagate_tangent("kicked_top", BlochAngles(1.0, 0.5), frame, 10, p)
    assert np.array_equal(props[0].matrix, np.eye(2))
    assert all(np.linalg.norm(f.vectors) == pytest.approx(1.0) for f in frames)
    E, pd = CHAOTIC_DICKE
    traj, frames, props = propagate_tangent("dicke", dicke_point_from_energy(E, X0_ANGLES, pd),
                                            None, 1.0, pd, sample_dt=0.25)
    assert np.allclose(props[0].matrix, np.eye(4))
    assert all(isinstance(q, Propagator) and q.residual() < 1e-10 for q in props)
    with pytest.raises(ValueError):
        propagate_tangent("rotor", None, None, 1.0, pd)
    with pytest.raises(ValueError):
        TangentFrame(np.ones((2, 3)))


def test_correlation_helpers():
    U = np.array([[2.0, 1.0], [1.0, 1.0]])
    assert np.allclose(correlation_evolve(0.5 * np.eye(2), np.eye(2)), 0.5 * np.eye(2))
    assert np.allclose(correlation_evolve(0.5 * np.eye(2), U), 0.5 * U @ U.T)
    assert np.linalg.det(2 * correlation_evolve(0.5 * np.eye(2), U)) == pytest.approx(1.0)
    G4 = 0.5 * np.eye(4)
    assert np.array_equal(reduced_correlation(G4, range(4)), G4)
    assert np.array_equal(reduced_correlation(G4, [0, 1]), 0.5 * np.eye(2))
    with pytest.raises(ValueError):
        reduced_correlation(G4, [0, 2])
    assert excitation_number(0.5 * np.eye(2)) == 0
    assert excitation_number(np.eye(2)) == 0.5
    with pytest.raises(ValueError):
        excitation_number(G4)


def test_excitation_number_grows_with_beta():
    a = BlochAngles(np.pi / 4, 0.0)
    peaks = []
    for beta in (0.0, 0.5, 1.0, 2.0, 4.0):
        run = propagate_kicked_top(a, KickedTopParams(np.pi / 2, beta), 5)
        peaks.append(max(excitation_number(G) for G in run.G))
    assert all(np.diff(peaks) >= 0)


def test_factored_propagator(rng):
    fp = FactoredPropagator(4)
    U = np.eye(4)
    for _ in range(20):
        M = fl.symplectic_unit(2) @ rng.normal(size=(4, 4)) * 0.1 + np.eye(4)
        fp.update(M)
        U = M @ U
    assert np.allclose(fp.matrix(), U, rtol=1e-9)
    assert fp.log_det_gram([2, 3]) == pytest.approx(log_det_gram(U, [2, 3]), rel=1e-9)
    assert np.allclose(np.sort(fp.log_singular_values()),
                       np.sort(np.log(np.linalg.svd(U, compute_uv=False))), rtol=1e-9)


def test_growth_rate_consistency_dicke():
    E, p = CHAOTIC_DICKE
    x0 = dicke_point_from_energy(E, X0_ANGLES, p)
    T = 40.0
    run = propagate_dicke(x0, p, T, sample_dt=T)
    G = correlation_evolve(0.5 * np.eye(4), run.U[-1])
    rate = np.log(np.trace(G)) / (2 * T)
    ser = benettin_spectrum("dicke", x0, 1, 0.5, int(T / 0.5), p, rng_seed=1)
    assert rate == pytest.approx(ser.exponents[-1, 0], rel=0.05)


def test_growth_rate_consistency_kicked_top():
    # the machine-precision Benettin orbit shadows the 100-digit one for ~25 kicks at
    # lambda ~ 1.2, which bounds the common window
    p = KickedTopParams(np.pi / 2, 8.0)
    a = BlochAngles(np.pi / 4, 0.0)
    prec = PrecisionConfig.extended(100)
    run = propagate_kicked_top(a, p, 25, prec)
    ser = benettin_spectrum("kicked_top", a, 1, 1, 25, p, rng_seed=1)
    with prec.context():
        for n in (10, 15, 20, 25):
            G = run.G[n]
            rate = float(mpmath.log(G[0, 0] + G[1, 1]) / (2 * n))
            assert rate == pytest.approx(ser.exponents[n - 1, 0], rel=0.05)
