from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semichaos.core import (BlochAngles, PrecisionConfig, SingularCoordinatesError, SpinConfig,
                            random_symplectic, rotating_frame, symplectic_eigenvalues,
                            symplectic_residual, symplectic_unit, symplectic_unit_blocks,
                            vacuum_correlation)


def test_symplectic_unit_n1():
    assert np.array_equal(symplectic_unit(1), [[0, 1], [-1, 0]])


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_symplectic_unit_algebra(n):
    J = symplectic_unit(n)
    assert np.array_equal(J @ J, -np.eye(2 * n))
    assert np.array_equal(J.T, -J)
    assert np.array_equal(J.T @ J, np.eye(2 * n))


def test_block_layout_is_a_permutation_of_pair_layout():
    n = 3
    perm = [0, 2, 4, 1, 3, 5]
    P = np.eye(2 * n)[perm]
    assert np.array_equal(P @ symplectic_unit(n) @ P.T, symplectic_unit_blocks(n))


def test_symplectic_unit_rejects_zero():
    with pytest.raises(ValueError):
        symplectic_unit(0)


def test_vacuum():
    G = vacuum_correlation(1)
    assert G[0, 0] == G[1, 1] == 0.5 and G[0, 1] == 0
    assert np.array_equal(vacuum_correlation(2), 0.5 * np.eye(4))
    assert np.allclose(symplectic_eigenvalues(vacuum_correlation(3)), [1, 1, 1])


@pytest.mark.parametrize("G, nu", [
    (0.5 * np.eye(2), 1.0),
    (np.diag([2.0, 1 / 8]), 1.0),
    (np.eye(2), 2.0),
])
def test_symplectic_eigenvalues_single_mode(G, nu):
    assert symplectic_eigenvalues(G)[0] == pytest.approx(nu, rel=1e-14)


def test_symplectic_eigenvalues_general_path_matches_shortcut(rng):
    # thermal product state: nu_i = 2 * sqrt(det of each block)
    G = np.diag([1.0, 1.0, 0.5, 2.0])
    nu = symplectic_eigenvalues(G)
    assert np.allclose(nu, [2.0, 2.0])


def test_symplectic_eigenvalues_rejects_indefinite():
    with pytest.raises(ValueError):
        symplectic_eigenvalues(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        symplectic_eigenvalues(np.diag([1.0, -1.0, 1.0, 1.0]))


@given(st.integers(1, 3), st.integers(0, 2**31), st.floats(0.05, 0.8))
def test_symplectic_congruence_invariance(n, seed, scale):
    rng = np.random.default_rng(seed)
    S0 = random_symplectic(n, rng, 0.5)
    thermal = np.repeat(1 + rng.uniform(0, 3, n), 2) / 2
    G = S0 @ np.diag(thermal) @ S0.T
    S = random_symplectic(n, rng, scale)
    a = symplectic_eigenvalues(G)
    b = symplectic_eigenvalues(S.T @ G @ S)
    assert np.allclose(a, b, rtol=1e-8)
    assert np.allclose(np.sort(a), np.sort(2 * thermal[::2]), rtol=1e-8)


@given(st.integers(1, 4), st.integers(0, 2**31))
def test_random_symplectic_is_symplectic(n, seed):
    S = random_symplectic(n, np.random.default_rng(seed), 0.5)
    assert symplectic_residual(S) < 1e-10
    assert np.linalg.det(S) == pytest.approx(1.0, rel=1e-9)


def test_precision_config():
    assert not PrecisionConfig().is_extended
    p = PrecisionConfig.extended(50)
    assert p.is_extended and p.digits == 50
    with pytest.raises(ValueError):
        PrecisionConfig("extended", 10)
    with pytest.raises(ValueError):
        PrecisionConfig("quad", 30)
    with p.context():
        assert mpmath.mp.dps == 50
    assert PrecisionConfig.extended(30).fd_epsilon() == mpmath.mpf(10) ** -10


def test_precision_levels_agree():
    # a well-conditioned computation at two precisions agrees to ~the lower one
    vals = []
    for d in (30, 60):
        with PrecisionConfig.extended(d).context():
            vals.append(mpmath.exp(mpmath.mpf(1) / 3) * mpmath.sin(mpmath.mpf(2)))
    assert abs(vals[0] - vals[1]) < mpmath.mpf(10) ** -28


def test_spin_config():
    sc = SpinConfig(40)
    assert sc.hbar_eff * sc.N == 1
    assert sc.s == Fraction(1, 2) and sc.S == 20
    assert SpinConfig(4, Fraction(3, 2)).S == 6
    for bad in [dict(N=0), dict(N=3, s=Fraction(1, 3)), dict(N=2.5)]:
        with pytest.raises(ValueError):
            SpinConfig(**bad)


def test_bloch_angles_reduce_phi_and_unit_norm(rng):
    a = BlochAngles(1.0, 7.0)
    assert 0 <= a.phi < 2 * np.pi and a.phi == pytest.approx(7.0 - 2 * np.pi)
    th = rng.uniform(0.01, np.pi - 0.01, 1000)
    ph = rng.uniform(-10, 10, 1000)
    X, Y, Z = rotating_frame(th, ph)
    for v in (X, Y, Z):
        assert np.allclose(np.sum(v * v, axis=0), 1.0, atol=1e-14)
    assert np.allclose(np.sum(X * Y, axis=0), 0, atol=1e-14)
    assert np.allclose(np.cross(X.T, Y.T).T, Z, atol=1e-14)


def test_pole_guard():
    with pytest.raises(SingularCoordinatesError):
        BlochAngles(1e-10, 0.0).check_pole()
    BlochAngles(1e-3, 0.0).check_pole()


def test_mp_frame_unit_norm():
    with mpmath.workdps(60):
        a = BlochAngles(mpmath.mpf(1) / 3, mpmath.mpf(2))
        Z = a.Z()
        assert abs(sum(z * z for z in Z) - 1) < mpmath.mpf(10) ** -58
