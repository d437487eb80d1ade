"""Compiled inner loops: cutoff evaluation and the Dormand-Prince 5(4) mode integrator.

Everything here takes plain scalars/arrays so it can run under ``nogil`` from
worker threads. The Python-facing wrappers live in :mod:`moller.cutoff` and
:mod:`moller.modes`.
"""

import numpy as np
from numba import njit

KIND_BUMP = 1
KIND_SMOOTHSTEP = 2

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


@njit(cache=True, nogil=True)
def _bump(u):
    if u <= -1.0 or u >= 1.0:
        return 0.0
    return np.exp(-1.0 / (1.0 - u * u))


@njit(cache=True, nogil=True)
def _bump_integral(lo, hi):
    # 64-point Gauss-Legendre on a sub-interval of [-1, 1]; the bump is flat
    # to all orders at the ends, so this is accurate to ~1e-15 absolute.
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    s = 0.0
    for i in range(_GL_X.shape[0]):
        s += _GL_W[i] * _bump(mid + half * _GL_X[i])
    return half * s


@njit(cache=True, nogil=True)
def _binom(n, k):
    r = 1.0
    for i in range(1, k + 1):
        r = r * (n - k + i) / i
    return r


@njit(cache=True, nogil=True)
def canonical_value(kind, order, norm, u):
    """Cutoff on the canonical ramp [-1, 1]."""
    if u <= -1.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    if kind == KIND_BUMP:
        if u <= 0.0:
            val = _bump_integral(-1.0, u) / norm
        else:
            val = 1.0 - _bump_integral(u, 1.0) / norm
    else:
        v = 0.5 * (u + 1.0)
        n = 2 * order + 1
        val = 0.0
        for j in range(order + 1, n + 1):
            val += _binom(n, j) * v ** j * (1.0 - v) ** (n - j)
    if val < 0.0:
        return 0.0
    if val > 1.0:
        return 1.0
    return val


@njit(cache=True, nogil=True)
def canonical_density(kind, order, norm, u):
    """d(value)/du and d^2(value)/du^2 on the canonical ramp."""
    if u <= -1.0 or u >= 1.0:
        return 0.0, 0.0
    if kind == KIND_BUMP:
        g = _bump(u) / norm
        q = 1.0 - u * u
        return g, g * (-2.0 * u / (q * q))
    v = 0.5 * (u + 1.0)
    c = 1.0 / _beta_int(order)
    d1 = c * v ** order * (1.0 - v) ** order
    if order == 0:
        d2 = 0.0
    else:
        d2 = c * order * (v ** (order - 1) * (1.0 - v) ** order
                          - v ** order * (1.0 - v) ** (order - 1))
    return 0.5 * d1, 0.25 * d2


@njit(cache=True, nogil=True)
def _beta_int(p):
    # B(p+1, p+1) = (p!)^2 / (2p+1)!
    r = 1.0
    for i in range(1, p + 1):
        r *= i / (p + i)
    return r / (2 * p + 1)


@njit(cache=True, nogil=True)
def cutoff_eval(kind, order, norm, a, b, t):
    """chi(t), chi'(t), chi''(t) for a ramp [a, b] in time units."""
    if t <= a:
        return 0.0, 0.0, 0.0
    if t >= b:
        return 1.0, 0.0, 0.0
    s = 2.0 / (b - a)
    u = s * t - (a + b) / (b - a)
    val = canonical_value(kind, order, norm, u)
    d1, d2 = canonical_density(kind, order, norm, u)
    return val, d1 * s, d2 * s * s


@njit(cache=True, nogil=True)
def omega_sq(lam_sq, m1_sq, dm_sq, kind, order, norm, a, b, t):
    """omega^2(t) and its first two time derivatives."""
    c0, c1, c2 = cutoff_eval(kind, order, norm, a, b, t)
    return lam_sq + m1_sq + dm_sq * c0, dm_sq * c1, dm_sq * c2


# Dormand-Prince 5(4) tableau.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# 5th minus embedded 4th order weights
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0


@njit(cache=True, nogil=True)
def _rhs(y, w2, out):
    out[0] = y[2]
    out[1] = y[3]
    out[2] = -w2 * y[0]
    out[3] = -w2 * y[1]


@njit(cache=True, nogil=True)
def dopri5_mode(y0, checkpoints, lam_sq, m1_sq, dm_sq, kind, order, norm, a, b,
                rtol, atol, h0, max_steps):
    """Integrate T'' + omega^2(t) T = 0 through sorted ``checkpoints``.

    State layout is (Re T, Im T, Re T', Im T'). Steps are clipped so that every
    checkpoint is hit exactly; returns the states there plus accepted and
    rejected step counts. ``ok`` is False if ``max_steps`` was exhausted.
    """
    n_out = checkpoints.shape[0]
    out = np.empty((n_out, 4))
    y = y0.copy()
    out[0] = y
    t = checkpoints[0]
    h = h0
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    k5 = np.empty(4)
    k6 = np.empty(4)
    k7 = np.empty(4)
    ytmp = np.empty(4)
    ynew = np.empty(4)
    n_acc = 0
    n_rej = 0
    w2 = omega_sq(lam_sq, m1_sq, dm_sq, kind, order, norm, a, b, t)[0]
    _rhs(y, w2, k1)
    for idx in range(1, n_out):
        target = checkpoints[idx]
        while t < target:
            if n_acc + n_rej >= max_steps:
                return out, n_acc, n_rej, False
            last = False
            step = h
            if t + step >= target:
                step = target - t
                last = True
            for i in range(4):
                ytmp[i] = y[i] + step * _A21 * k1[i]
            _rhs(ytmp, omega_sq(lam_sq, m1_sq, dm_sq, kind, order, norm, a, b, t + _C2 * step)[0], k2)
            for i in range(4):
                ytmp[i] = y[i] + step * (_A31 * k1[i] + _A32 * k2[i])
            _rhs(ytmp, omega_sq(lam_sq, m1_sq, dm_sq, kind, order, norm, a, b, t + _C3 * step)[0], k3)
            for i in range(4):
                ytmp[i] = y[i] + step * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            _rhs(ytmp, omega_sq(lam_sq, m1_sq, dm_sq, kind, order, norm, a, b, t + _C4 * step)[0], k4)
            for i in range(4):
                ytmp[i] = y[i] + step * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
            _rhs(ytmp, omega_sq(lam_sq, m1_sq, dm_sq, kind, order, norm, a, b, t + _C5 * step)[0], k5)
            for i in range(4):
                ytmp[i] = y[i] + step * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                         + _A64 * k4[i] + _A65 * k5[i])
            _rhs(ytmp, omega_sq(lam_sq, m1_sq, dm_sq, kind, order, norm, a, b, t + step)[0], k6)
            for i in range(4):
                ynew[i] = y[i] + step * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                         + _B5 * k5[i] + _B6 * k6[i])
            t_new = target if last else t + step
            _rhs(ynew, omega_sq(lam_sq, m1_sq, dm_sq, kind, order, norm, a, b, t_new)[0], k7)
            err = 0.0
            for i in range(4):
                e = step * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                            + _E6 * k6[i] + _E7 * k7[i])
                sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                err += (e / sc) ** 2
            err = np.sqrt(err / 4.0)
            if err <= 1.0:
                t = t_new
                for i in range(4):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                n_acc += 1
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                if not last:
                    h = step * fac
                elif fac < 1.0:
                    h = min(h, step * fac)
            else:
                n_rej += 1
                h = step * max(0.2, 0.9 * err ** -0.2)
        out[idx] = y
    return out, n_acc, n_rej, True


@njit(cache=True, nogil=True)
def cutoff_eval_array(kind, order, norm, a, b, ts, which):
    out = np.empty(ts.shape[0])
    for i in range(ts.shape[0]):
        out[i] = cutoff_eval(kind, order, norm, a, b, ts[i])[which]
    return out
