"""Independent reference computations used only by the tests."""

import numpy as np
from scipy import integrate


def rk4_modes(lams, m1_sq, m2_sq, chi, t0, t1, dt):
    """Fixed-step classical RK4 for T'' + omega^2(t) T = 0, vectorized over lambda.

    Starts from the mass-m1 plane wave at t0; returns (T, T_dot) at t1.
    """
    lams = np.asarray(lams, float)
    n = int(round((t1 - t0) / dt))
    h = (t1 - t0) / n
    stage_t = t0 + 0.5 * h * np.arange(2 * n + 1)
    w2 = lams[None, :] ** 2 + m1_sq + (m2_sq - m1_sq) * np.asarray(chi(stage_t))[:, None]
    w1 = np.sqrt(lams ** 2 + m1_sq)
    T = np.exp(-1j * w1 * t0) / np.sqrt(2 * w1)
    Td = -1j * w1 * T
    for i in range(n):
        a, b, c = w2[2 * i], w2[2 * i + 1], w2[2 * i + 2]
        k1x, k1v = Td, -a * T
        k2x, k2v = Td + 0.5 * h * k1v, -b * (T + 0.5 * h * k1x)
        k3x, k3v = Td + 0.5 * h * k2v, -b * (T + 0.5 * h * k2x)
        k4x, k4v = Td + h * k3v, -c * (T + h * k3x)
        T = T + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        Td = Td + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return T, Td


def constant_propagate(omega, t0, T0, Td0, t):
    dt = np.asarray(t) - t0
    return T0 * np.cos(omega * dt) + Td0 * np.sin(omega * dt) / omega


def bump_quad(func, lo, hi):
    """Adaptive quadrature of a smooth function on a compact interval."""
    re = integrate.quad(lambda s: np.real(func(s)), lo, hi, epsabs=1e-15, epsrel=1e-13, limit=400)[0]
    im = integrate.quad(lambda s: np.imag(func(s)), lo, hi, epsabs=1e-15, epsrel=1e-13, limit=400)[0]
    return re + 1j * im


def dense_solve_retarded(lattice_module, V, f):
    """Retarded solution by a dense linear solve of the interior rows."""
    lat = f.lattice
    A = lattice_module.dense_retarded_matrix(V, lat)
    rhs = f.values[1:-1].ravel()
    sol = np.linalg.solve(A, rhs)
    out = np.zeros(lat.shape)
    out[2:] = sol.reshape(lat.n_t - 2, lat.n_x)
    return out
