"""Input checks shared by the estimator wrappers."""
import numpy as np
from sklearn.utils.validation import check_array

N_FEATURES = {"kicked_top": 2, "dicke": 4}


def check_system(system):
    if system not in N_FEATURES:
        raise ValueError(f"system must be one of {sorted(N_FEATURES)}, got {system!r}")
    return system


def check_initial_conditions(X, system):
    """2-D float array, one initial condition per row.

    Kicked top rows are (theta, phi); Dicke rows are (Q, P, phi, theta).
    """
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    n = N_FEATURES[check_system(system)]
    if X.shape[1] != n:
        raise ValueError(f"{system} initial conditions need {n} columns, got {X.shape[1]}")
    theta = X[:, 0] if system == "kicked_top" else X[:, 3]
    if np.any((theta <= 0) | (theta >= np.pi)):
        raise ValueError("theta must lie strictly inside (0, pi)")
    return X


def check_correlation_stack(X, dim=2):
    """Stack of symmetric dim x dim matrices, shape (n, dim, dim)."""
    X = check_array(np.asarray(X, dtype=float).reshape(len(X), -1), dtype=np.float64)
    if X.shape[1] != dim * dim:
        raise ValueError(f"expected {dim}x{dim} matrices")
    G = X.reshape(-1, dim, dim)
    if not np.allclose(G, np.swapaxes(G, 1, 2), rtol=1e-10, atol=1e-12):
        raise ValueError("correlation matrices must be symmetric")
    return G


def check_positive(name, value, integer=False):
    if integer and int(value) != value:
        raise ValueError(f"{name} must be an integer")
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return int(value) if integer else float(value)
