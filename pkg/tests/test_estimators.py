import numpy as np
import pytest
from sklearn.base import clone

from semichaos.estimators import (ExactDynamics, GaussianQuantifiers, LyapunovSpectrum,
                                  SemiclassicalDynamics)
from semichaos.quantifiers import qfi_spin, vn_entropy


def test_clone_and_params_round_trip():
    est = LyapunovSpectrum(K=2, s=1, n_steps=500, beta=3.0)
    c = clone(est)
    assert c.get_params() == est.get_params()
    c.set_params(beta=4.0)
    assert est.beta == 3.0 and c.beta == 4.0


def test_lyapunov_fit_transform():
    X = [[np.pi / 4, 0.5], [1.0, 2.0]]
    est = LyapunovSpectrum(K=2, s=1, n_steps=2000, beta=0.0, rng_seed=1)
    out = est.fit_transform(X)
    assert out.shape == (2, 2)
    # pure rotation: no stretching
    np.testing.assert_allclose(out, 0, atol=0.02)
    np.testing.assert_array_equal(est.transform(X), out)
    assert est.ks_rate_.shape == (2,)


def test_lyapunov_kicked_top_chaotic_positive():
    est = LyapunovSpectrum(K=2, s=1, n_steps=2000, beta=8.0).fit([[np.pi / 4, 0.0]])
    lam = est.exponents_[0]
    assert lam[0] > 0.8
    assert lam.sum() == pytest.approx(0, abs=1e-6)


@pytest.mark.parametrize("X, system", [([[0.0, 1.0]], "kicked_top"), ([[1.0, 2.0, 3.0]],
                                                                       "kicked_top"),
                                       ([[0, 0, 0, 4.0]], "dicke"), ([[1.0, 1.0]], "rotor")])
def test_rejects_bad_input(X, system):
    with pytest.raises(ValueError):
        LyapunovSpectrum(system=system, n_steps=10).fit(X)


def test_semiclassical_table_shape():
    est = SemiclassicalDynamics(t_final=5, beta=0.0).fit([[1.0, 0.3]])
    tab = est.table()
    assert tab.shape == (6, 6)
    np.testing.assert_allclose(tab[:, 1], 0, atol=1e-12)
    np.testing.assert_allclose(tab[:, 3], 1, atol=1e-12)


def test_semiclassical_requires_single_row():
    with pytest.raises(ValueError):
        SemiclassicalDynamics().fit([[1.0, 0.0], [1.0, 1.0]])


def test_exact_matches_semiclassical_at_first_kick():
    X = [[np.pi / 4, 0.0]]
    ed = ExactDynamics(N=400, t_final=1).fit(X)
    sc = SemiclassicalDynamics(t_final=1).fit(X)
    assert ed.S_A_[1] == pytest.approx(sc.table()[1, 1], rel=1e-2)


def test_exact_dicke_runs():
    est = ExactDynamics(system="dicke", N=4, t_final=0.5, sample_dt=0.25, gamma=0.0)
    est.fit([[0.5, 0.0, 0.3, 1.2]])
    np.testing.assert_allclose(est.S_A_, 0, atol=1e-8)
    assert est.boson_tail_.shape == (3,)


def test_gaussian_quantifiers_transform():
    G = np.array([0.5 * np.eye(2), [[1.0, 0.2], [0.2, 0.5]]])
    out = GaussianQuantifiers().fit_transform(G)
    assert out.shape == (2, 4)
    np.testing.assert_allclose(out[0], [0, 0, 1, 1], atol=1e-12)
    # f_Q * xi2 = 1 for any single-mode Gaussian state
    np.testing.assert_allclose(out[:, 2] * out[:, 3], 1, rtol=1e-12)
    assert out[1, 2] == pytest.approx(qfi_spin(0.5 * (1.0 + 0.5) - 0.5))
    with pytest.raises(ValueError):
        GaussianQuantifiers(f_A=1.5).fit(G)
    with pytest.raises(ValueError):
        GaussianQuantifiers().fit([[[1.0, 0.3], [0.0, 1.0]]])
    assert vn_entropy(0.5 * np.eye(2)) == 0
