"""scikit-learn style wrappers around the functional modules.

Rows of X are initial conditions: (theta, phi) for the kicked top and (Q, P, phi, theta)
for the Dicke model. Hyper-parameters live in __init__ so get_params/set_params/clone
work as usual; results are stored in trailing-underscore attributes after fit.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import (check_correlation_stack, check_initial_conditions, check_positive,
                          check_system)
from .classical import DickeParams, DickeState, KickedTopParams
from .core import BlochAngles, PrecisionConfig
from .fluctuations import excitation_number, propagate_dicke, propagate_kicked_top
from .lyapunov import benettin_spectrum, ks_rate, lyapunov_estimate
from .quantifiers import (det_GA_spin, dicke_quantifiers, kicked_top_quantifiers, qfi_spin,
                          squeezing_spin, vn_entropy_from_det)
from .quantum_ed import (DickeEvolver, dicke_hamiltonian, dicke_initial_state,
                         evolve_and_entropy_dicke, kicked_top_ed_series)


class _ModelMixin:
    def _params(self):
        if self.system == "kicked_top":
            return KickedTopParams(self.alpha, self.beta)
        return DickeParams(self.omega, self.omega0, self.gamma)

    def _state(self, row):
        if self.system == "kicked_top":
            return BlochAngles(row[0], row[1])
        return DickeState(row[0], row[1], BlochAngles(row[3], row[2]))


class LyapunovSpectrum(_ModelMixin, TransformerMixin, BaseEstimator):
    """Benettin spectrum per initial condition; transform returns the K exponents."""

    def __init__(self, system="kicked_top", K=2, s=10, n_steps=10000, rng_seed=0,
                 alpha=np.pi / 2, beta=8.0, omega=1.0, omega0=1.0, gamma=0.0, decades=2.0):
        self.system = system
        self.K = K
        self.s = s
        self.n_steps = n_steps
        self.rng_seed = rng_seed
        self.alpha = alpha
        self.beta = beta
        self.omega = omega
        self.omega0 = omega0
        self.gamma = gamma
        self.decades = decades

    def fit(self, X, y=None):
        check_system(self.system)
        check_positive("K", self.K, integer=True)
        check_positive("s", self.s)
        check_positive("n_steps", self.n_steps, integer=True)
        X = check_initial_conditions(X, self.system)
        self.n_features_in_ = X.shape[1]
        self.series_, self.exponents_, self.uncertainty_ = [], [], []
        for row in X:
            ser = benettin_spectrum(self.system, self._state(row), self.K, self.s, self.n_steps,
                                    self._params(), self.rng_seed)
            lam, unc = lyapunov_estimate(ser, self.decades)
            self.series_.append(ser)
            self.exponents_.append(lam)
            self.uncertainty_.append(unc)
        self.exponents_ = np.array(self.exponents_)
        self.uncertainty_ = np.array(self.uncertainty_)
        self.ks_rate_ = np.array([ks_rate(l, u) for l, u in zip(self.exponents_,
                                                                 self.uncertainty_)])
        self._fit_X = X
        return self

    def transform(self, X):
        check_is_fitted(self, "exponents_")
        X = check_initial_conditions(X, self.system)
        if X.shape == self._fit_X.shape and np.array_equal(X, self._fit_X):
            return self.exponents_.copy()
        return self.fit(X).exponents_.copy()


class SemiclassicalDynamics(_ModelMixin, BaseEstimator):
    """Propagates G(t) along one classical trajectory and records the quantifiers.

    t_final is a number of kicks for the kicked top. digits > 0 switches the kicked top
    to extended precision.
    """

    def __init__(self, system="kicked_top", t_final=40, sample_dt=0.05, digits=0, f_A=0.5,
                 alpha=np.pi / 2, beta=8.0, omega=1.0, omega0=1.0, gamma=0.0):
        self.system = system
        self.t_final = t_final
        self.sample_dt = sample_dt
        self.digits = digits
        self.f_A = f_A
        self.alpha = alpha
        self.beta = beta
        self.omega = omega
        self.omega0 = omega0
        self.gamma = gamma

    def fit(self, X, y=None):
        X = check_initial_conditions(X, self.system)
        if X.shape[0] != 1:
            raise ValueError("SemiclassicalDynamics follows a single initial condition")
        self.n_features_in_ = X.shape[1]
        x0 = self._state(X[0])
        if self.system == "kicked_top":
            prec = PrecisionConfig.extended(self.digits) if self.digits else PrecisionConfig()
            self.run_ = propagate_kicked_top(x0, self._params(),
                                             check_positive("t_final", self.t_final, True), prec)
            self.quantifiers_ = kicked_top_quantifiers(self.run_, self.f_A)
        else:
            self.run_ = propagate_dicke(x0, self._params(), check_positive("t_final", self.t_final),
                                        sample_dt=self.sample_dt)
            self.quantifiers_ = dicke_quantifiers(self.run_)
        return self

    def table(self):
        """(n_times, 6) array: t, S_A, S2_A, f_Q, xi2, c_zz."""
        check_is_fitted(self, "quantifiers_")
        q = self.quantifiers_
        return np.column_stack([q.times, q.S_A, q.S2_A, q.f_Q, q.xi2, q.c_ab])


class ExactDynamics(_ModelMixin, BaseEstimator):
    """Finite-N exact evolution (Floquet powers or Dicke eigendecomposition)."""

    def __init__(self, system="kicked_top", N=50, t_final=10, sample_dt=0.05, delta=8,
                 alpha=np.pi / 2, beta=8.0, omega=1.0, omega0=1.0, gamma=0.0):
        self.system = system
        self.N = N
        self.t_final = t_final
        self.sample_dt = sample_dt
        self.delta = delta
        self.alpha = alpha
        self.beta = beta
        self.omega = omega
        self.omega0 = omega0
        self.gamma = gamma

    def fit(self, X, y=None):
        X = check_initial_conditions(X, self.system)
        if X.shape[0] != 1:
            raise ValueError("ExactDynamics follows a single initial condition")
        self.n_features_in_ = X.shape[1]
        N = check_positive("N", self.N, integer=True)
        row = X[0]
        if self.system == "kicked_top":
            ed = kicked_top_ed_series(N, self.alpha, self.beta, row[0], row[1],
                                      check_positive("t_final", self.t_final, True))
            self.times_, self.S_A_, self.f_Q_ = ed.times, ed.S_A, ed.f_Q
            self.c_ = ed.c
        else:
            N_cut = int(round(check_positive("delta", self.delta) * N))
            t = np.arange(0.0, self.t_final + 0.5 * self.sample_dt, self.sample_dt)
            H = dicke_hamiltonian(N, N_cut, self._params())
            st = dicke_initial_state(row[3], row[2], row[0], row[1], N, N_cut)
            out = evolve_and_entropy_dicke(st, H, t, evolver=DickeEvolver(H, N, N_cut),
                                           with_qfi=True)
            self.times_, self.S_A_, self.f_Q_ = t, out["S_A"], out["f_Q"]
            self.boson_tail_ = out["tail"]
        return self


class GaussianQuantifiers(TransformerMixin, BaseEstimator):
    """Maps a stack of single-spin 2x2 correlation matrices to (S_A, S2_A, f_Q, xi2)."""

    def __init__(self, f_A=0.5):
        self.f_A = f_A

    def fit(self, X, y=None):
        if not 0 < self.f_A < 1:
            raise ValueError("f_A must lie in (0, 1)")
        check_correlation_stack(X)
        self.n_features_in_ = 4
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        G = check_correlation_stack(X)
        out = np.empty((len(G), 4))
        for i, g in enumerate(G):
            n = max(excitation_number(g), 0.0)
            d = det_GA_spin(self.f_A, n)
            out[i] = (vn_entropy_from_det(d), 0.5 * np.log(4 * d), qfi_spin(n), squeezing_spin(n))
        return out
