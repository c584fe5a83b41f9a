"""Jitted Dormand-Prince 5(4) integrator for the Dicke flow and its variational equation.

State layout: y = (Q, P, phi, theta, W.ravel()) with W a 4 x m block of tangent
vectors in the local (dQ, dP, dq, dp) coordinates, m = (len(y) - 4) // 4.
"""
import numpy as np
from numba import njit

OK, POLE, UNDERFLOW, MAXSTEPS = 0, 1, 2, 3

A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1 = 71 / 57600
E3 = -71 / 16695
E4 = 71 / 1920
E5 = -17253 / 339200
E6 = 22 / 525
E7 = -1 / 40


@njit(cache=True)
def stability_matrix(Q, phi, theta, omega, gamma):
    r = gamma / np.sqrt(2.0)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    k = gamma * Q * cp / st
    A = np.zeros((4, 4))
    A[0, 1] = omega
    A[1, 0] = -omega
    A[1, 2] = -r * ct * cp
    A[1, 3] = r * sp
    A[2, 0] = -r * sp
    A[2, 3] = -k
    A[3, 0] = -r * ct * cp
    A[3, 2] = k
    return A


@njit(cache=True)
def flow(y, omega, omega0, gamma, out):
    Q, P, phi, theta = y[0], y[1], y[2], y[3]
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    out[0] = omega * P
    out[1] = -omega * Q - 0.5 * gamma * st * cp
    out[2] = omega0 - gamma * Q * cp * ct / st
    out[3] = -gamma * Q * sp
    m = (y.shape[0] - 4) // 4
    if m > 0:
        A = stability_matrix(Q, phi, theta, omega, gamma)
        for i in range(4):
            for j in range(m):
                acc = 0.0
                for k in range(4):
                    acc += A[i, k] * y[4 + k * m + j]
                out[4 + i * m + j] = acc


@njit(cache=True)
def integrate(y0, t_out, omega, omega0, gamma, rtol, atol, eps_pole, max_steps):
    """Integrate from t_out[0] through every t_out[i], landing exactly on each.

    Returns (samples, n_filled, status, n_steps).
    """
    n = y0.shape[0]
    nt = t_out.shape[0]
    Y = np.empty((nt, n))
    Y[0] = y0
    y = y0.copy()
    t = t_out[0]
    k1 = np.empty(n); k2 = np.empty(n); k3 = np.empty(n); k4 = np.empty(n)
    k5 = np.empty(n); k6 = np.empty(n); k7 = np.empty(n)
    yt = np.empty(n); ynew = np.empty(n)
    flow(y, omega, omega0, gamma, k1)
    # initial step from the usual norm heuristic
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (k1[i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, 0.1)
    steps = 0
    for idx in range(1, nt):
        t_end = t_out[idx]
        while t < t_end:
            if steps >= max_steps:
                return Y, idx, MAXSTEPS, steps
            last = False
            if t + h >= t_end:
                h_use = t_end - t
                last = True
            else:
                h_use = h
            if h_use < 1e-13 * max(1.0, abs(t)):
                if last:
                    t = t_end
                    break
                return Y, idx, UNDERFLOW, steps
            for i in range(n):
                yt[i] = y[i] + h_use * A21 * k1[i]
            flow(yt, omega, omega0, gamma, k2)
            for i in range(n):
                yt[i] = y[i] + h_use * (A31 * k1[i] + A32 * k2[i])
            flow(yt, omega, omega0, gamma, k3)
            for i in range(n):
                yt[i] = y[i] + h_use * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            flow(yt, omega, omega0, gamma, k4)
            for i in range(n):
                yt[i] = y[i] + h_use * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            flow(yt, omega, omega0, gamma, k5)
            for i in range(n):
                yt[i] = y[i] + h_use * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                        + A64 * k4[i] + A65 * k5[i])
            flow(yt, omega, omega0, gamma, k6)
            for i in range(n):
                ynew[i] = y[i] + h_use * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                          + B5 * k5[i] + B6 * k6[i])
            flow(ynew, omega, omega0, gamma, k7)
            err = 0.0
            for i in range(n):
                e = h_use * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                             + E6 * k6[i] + E7 * k7[i])
                sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                err += (e / sc) ** 2
            err = np.sqrt(err / n)
            steps += 1
            if err <= 1.0:
                t = t_end if last else t + h_use
                for i in range(n):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                if abs(np.sin(y[3])) < eps_pole:
                    Y[idx] = y
                    return Y, idx, POLE, steps
                fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
                if not last:
                    h = h_use * fac
            else:
                h = h_use * max(0.2, 0.9 * err ** -0.2)
        Y[idx] = y
    return Y, nt, OK, steps
