"""Temporal mode functions of a field whose squared mass is switched from m1^2 to m2^2.

For a spatial eigenvalue ``lambda_k`` the mode obeys

    T'' + omega^2(t) T = 0,   omega^2(t) = lambda_k^2 + m1^2 + (m2^2 - m1^2) chi(t),

starting from the positive-frequency plane wave of mass m1 before the ramp.
Outside the ramp omega is constant and the solution is propagated in closed
form; across the ramp it is integrated with an adaptive Dormand-Prince 5(4)
pair. Also here: the WKB auxiliary mode, its Dyson series, the a-priori WKB
error bound, Bogoliubov coefficients and mode energies.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels
from .cutoff import CutoffProfile
from .quadrature import cumulative_integral, lobatto_integration

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
WRONSKIAN_TOL = 1e-8


class ModeError(ValueError):
    """Mode problem outside the supported regime."""


class IntegrationError(RuntimeError):
    """The integrator failed or violated the Wronskian normalization."""


@dataclasses.dataclass(frozen=True)
class FrequencyProfile:
    lambda_k: float
    m1_sq: float
    m2_sq: float
    cutoff: CutoffProfile

    def __post_init__(self):
        if self.lambda_k < 0 or self.m1_sq < 0 or self.m2_sq < 0:
            raise ModeError("lambda_k, m1^2 and m2^2 must be non-negative")

    @property
    def dm_sq(self) -> float:
        return self.m2_sq - self.m1_sq

    @property
    def omega1(self) -> float:
        return float(np.sqrt(self.lambda_k ** 2 + self.m1_sq))

    @property
    def omega2(self) -> float:
        return float(np.sqrt(self.lambda_k ** 2 + self.m2_sq))

    @property
    def kernel_args(self) -> tuple:
        return (self.lambda_k ** 2, self.m1_sq, self.dm_sq) + self.cutoff.kernel_args

    def check_positive(self):
        if self.lambda_k == 0 and self.m1_sq == 0:
            raise ModeError("zero-frequency initial mode: lambda_k = 0 with m1 = 0 "
                            "has no positive-frequency splitting")
        if min(self.omega1, self.omega2) <= 0:
            raise ModeError("omega^2 vanishes on the window (lambda_k = 0 with m2 = 0)")

    def omega_derivs(self, t):
        """omega, d omega/dt, d^2 omega/dt^2 from the analytic cutoff derivatives."""
        t = np.asarray(t, dtype=float)
        chi = self.cutoff
        w2 = self.lambda_k ** 2 + self.m1_sq + self.dm_sq * chi(t)
        w2d = self.dm_sq * chi.density(t)
        w2dd = self.dm_sq * chi.density_derivative(t)
        w = np.sqrt(w2)
        wd = w2d / (2 * w)
        wdd = (w2dd - 2 * wd * wd) / (2 * w)
        return w, wd, wdd

    def omega(self, t):
        return self.omega_derivs(t)[0]

    def omega_sq(self, t):
        return self.lambda_k ** 2 + self.m1_sq + self.dm_sq * self.cutoff(t)


def plane_wave(omega: float, t):
    """e^{-i omega t} / sqrt(2 omega) and its time derivative."""
    t = np.asarray(t, dtype=float)
    T = np.exp(-1j * omega * t) / np.sqrt(2 * omega)
    return T, -1j * omega * T


def wronskian(T, T_dot):
    return np.conj(T_dot) * T - np.conj(T) * T_dot


@dataclasses.dataclass(frozen=True, eq=False)
class ModeSolution:
    freq: FrequencyProfile
    t_grid: np.ndarray
    T: np.ndarray
    T_dot: np.ndarray
    solver_meta: dict
    # (t, T, T_dot) where the ramp (or the window) is left; the solution past
    # that point is a closed-form combination of omega2 plane waves.
    exit_state: tuple = None

    @property
    def wronskian_drift(self) -> float:
        return float(np.max(np.abs(wronskian(self.T, self.T_dot) - 1j)))

    def omega(self):
        return self.freq.omega(self.t_grid)

    def evaluate(self, t):
        """T and T_dot at arbitrary times inside the solve window."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        meta = self.solver_meta
        t_init, t_final = meta["window"]
        if np.any(t < t_init - 1e-12) or np.any(t > t_final + 1e-12):
            raise ModeError("evaluation time outside the solved window")
        a, b = self.freq.cutoff.support
        T = np.empty(t.shape, complex)
        Td = np.empty(t.shape, complex)
        pre = t <= a
        T[pre], Td[pre] = plane_wave(self.freq.omega1, t[pre])
        post = t >= b
        if np.any(post):
            T[post], Td[post] = _propagate_constant(self.freq.omega2, *self.exit_state, t[post])
        mid = ~(pre | post)
        if np.any(mid):
            order = np.argsort(t[mid])
            ts = t[mid][order]
            checkpoints = np.concatenate([[a], ts])
            states = _integrate(self.freq, checkpoints, plane_wave(self.freq.omega1, a),
                                meta["rtol"], meta["atol"])[0][1:]
            vals = states[:, 0] + 1j * states[:, 1]
            dvals = states[:, 2] + 1j * states[:, 3]
            idx = np.flatnonzero(mid)[order]
            T[idx], Td[idx] = vals, dvals
        return T, Td


def _propagate_constant(omega, t0, T0, Td0, t):
    """Exact solution of T'' + omega^2 T = 0 through (t0, T0, Td0)."""
    dt = np.asarray(t) - t0
    c, s = np.cos(omega * dt), np.sin(omega * dt)
    return T0 * c + Td0 * s / omega, -T0 * omega * s + Td0 * c


def _integrate(freq, checkpoints, init, rtol, atol, max_steps=50_000_000):
    T0, Td0 = init
    y0 = np.array([T0.real, T0.imag, Td0.real, Td0.imag], dtype=float)
    w_max = max(freq.omega1, freq.omega2)
    span = checkpoints[-1] - checkpoints[0]
    h0 = min(0.01 / w_max, span) if span > 0 else 1e-3
    states, n_acc, n_rej, ok = _kernels.dopri5_mode(
        y0, np.ascontiguousarray(checkpoints, dtype=float), *freq.kernel_args,
        float(rtol), float(atol), float(h0), int(max_steps))
    if not ok:
        raise IntegrationError("step budget exhausted across the ramp")
    return states, n_acc, n_rej


def report_grid(window, n_report: int) -> np.ndarray:
    t_init, t_final = map(float, window)
    if not t_final > t_init:
        raise ModeError(f"empty window [{t_init}, {t_final}]")
    return np.linspace(t_init, t_final, int(n_report))


def solve_mode(freq: FrequencyProfile, window, tol: float = DEFAULT_RTOL, *,
               atol: float = DEFAULT_ATOL, n_report: int = 801,
               wronskian_tol: float = WRONSKIAN_TOL, refinements: int = 2) -> ModeSolution:
    """Positive-frequency mode of mass m1 evolved through the switching ramp.

    If the Wronskian drifts past ``wronskian_tol`` the solve is repeated with
    both tolerances divided by 10, at most ``refinements`` times.
    """
    freq.check_positive()
    t_grid = report_grid(window, n_report)
    if t_grid[0] > freq.cutoff.support[0]:
        raise ModeError(f"window must start before the ramp ({t_grid[0]} > {freq.cutoff.support[0]})")
    for attempt in range(refinements + 1):
        sol = _solve_once(freq, t_grid, tol, atol)
        drift = sol.wronskian_drift
        sol.solver_meta.update(wronskian_drift=drift, refinements=attempt)
        if drift <= wronskian_tol:
            return sol
        tol, atol = tol / 10, atol / 10
    raise IntegrationError(f"Wronskian drift {drift:.3e} exceeds {wronskian_tol:.1e} "
                           f"(lambda_k={freq.lambda_k}, scale={freq.cutoff.scale})")


def _solve_once(freq, t_grid, tol, atol):
    t_init, t_final = t_grid[0], t_grid[-1]
    a, b = freq.cutoff.support
    T = np.empty(t_grid.shape, complex)
    Td = np.empty(t_grid.shape, complex)
    pre = t_grid <= a
    T[pre], Td[pre] = plane_wave(freq.omega1, t_grid[pre])

    ramp_end = min(b, t_final)
    inside = (t_grid > a) & (t_grid < ramp_end)
    checkpoints = np.concatenate([[a], t_grid[inside], [ramp_end]])
    states, n_acc, n_rej = _integrate(freq, checkpoints, plane_wave(freq.omega1, a), tol, atol)
    vals = states[:, 0] + 1j * states[:, 1]
    dvals = states[:, 2] + 1j * states[:, 3]
    T[inside], Td[inside] = vals[1:-1], dvals[1:-1]
    exit_state = (ramp_end, vals[-1], dvals[-1])
    post = t_grid >= ramp_end
    if ramp_end < b:
        # window ends inside the ramp: the last checkpoint is the last report point
        T[post], Td[post] = vals[-1], dvals[-1]
    else:
        T[post], Td[post] = _propagate_constant(freq.omega2, *exit_state, t_grid[post])

    meta = {"method": "dopri5(4)", "rtol": tol, "atol": atol, "steps": n_acc,
            "rejected": n_rej, "window": (t_init, t_final), "t0": t_init}
    return ModeSolution(freq, t_grid, T, Td, meta, exit_state)


def thread_count() -> int:
    env = os.environ.get("MOLLER_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def solve_modes(freqs, window, workers: int | None = None, **kwargs) -> list[ModeSolution]:
    """Solve independent modes in parallel; output order follows ``freqs``."""
    freqs = list(freqs)
    workers = workers or thread_count()
    if workers == 1 or len(freqs) < 2:
        return [solve_mode(f, window, **kwargs) for f in freqs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda f: solve_mode(f, window, **kwargs), freqs))


def delta_potential(freq: FrequencyProfile, t):
    """delta = omega''/(2 omega) - 3 omega'^2 / (4 omega^2); zero off the ramp."""
    w, wd, wdd = freq.omega_derivs(t)
    return 0.5 * wdd / w - 0.75 * wd * wd / (w * w)


def _phase_edges(freq, t_grid):
    """Report points plus the ramp endpoints, so integrands are smooth per panel."""
    a, b = freq.cutoff.support
    extra = [x for x in (a, b) if t_grid[0] < x < t_grid[-1]]
    return np.unique(np.concatenate([t_grid, extra]))


def wkb_phase(freq: FrequencyProfile, t_grid, rtol: float = 1e-12) -> np.ndarray:
    """Integral of omega from ``t_grid[0]`` to each grid point."""
    t_grid = np.asarray(t_grid, dtype=float)
    edges = _phase_edges(freq, t_grid)
    cum = cumulative_integral(freq.omega, edges, rtol=rtol)
    return cum[np.searchsorted(edges, t_grid)]


def wkb_mode(freq: FrequencyProfile, window, *, n_report: int = 801) -> ModeSolution:
    """Auxiliary mode (2 omega)^{-1/2} exp(-i(omega1 t0 + int_{t0}^t omega)).

    The constant phase ``omega1 * t0`` (t0 = window start) makes it coincide with
    the exact mode before the ramp.
    """
    freq.check_positive()
    t_grid = report_grid(window, n_report)
    phase = freq.omega1 * t_grid[0] + wkb_phase(freq, t_grid)
    w, wd, _ = freq.omega_derivs(t_grid)
    T = np.exp(-1j * phase) / np.sqrt(2 * w)
    Td = (-1j * w - wd / (2 * w)) * T
    meta = {"method": "wkb", "phase_rtol": 1e-12, "window": (t_grid[0], t_grid[-1]), "t0": t_grid[0]}
    return ModeSolution(freq, t_grid, T, Td, meta)


def wkb_error_bound(freq: FrequencyProfile, window, *, n_report: int = 801) -> np.ndarray:
    """(2 sqrt(omega(t)))^{-1} |exp(int |delta|/omega) - 1| on the report grid.

    The integral runs over the whole time axis, which here is the ramp since
    delta vanishes elsewhere.
    """
    t_grid = report_grid(window, n_report)
    return np.abs(np.expm1(adiabaticity(freq))) / (2 * np.sqrt(freq.omega(t_grid)))


def adiabaticity(freq: FrequencyProfile, upto=None):
    """int |delta| / omega over the ramp, or running from the ramp start to ``upto``."""
    a, b = freq.cutoff.support
    integrand = lambda s: np.abs(delta_potential(freq, s)) / freq.omega(s)
    if upto is None:
        return float(cumulative_integral(integrand, np.linspace(a, b, 65), rtol=1e-10, atol=1e-16)[-1])
    upto = np.clip(np.asarray(upto, dtype=float), a, b)
    edges = np.unique(np.concatenate([[a], upto.ravel(), [b]]))
    cum = cumulative_integral(integrand, edges, rtol=1e-10, atol=1e-16)
    return cum[np.searchsorted(edges, upto)]


def dyson_solve(freq: FrequencyProfile, window, order: int, *, n_report: int = 801,
                nodes_per_panel: int = 24, panel_phase: float = 1.0, sign: int = 1) -> ModeSolution:
    """Order-``order`` partial sum of the Dyson series around the WKB mode.

    The series solves T = T_a + K[delta T] with K the retarded propagator built
    from the WKB phase, so T^(L) = sum_{l<=L} (K delta)^l T_a. Iterates are
    propagated on Chebyshev-Lobatto panels (each at most ``panel_phase``
    radians of phase long) covering the ramp, and continued in closed form
    after it.
    """
    if order < 0:
        raise ModeError("Dyson order must be >= 0")
    base = wkb_mode(freq, window, n_report=n_report)
    meta = dict(base.solver_meta, method="dyson", order=order)
    if order == 0:
        return dataclasses.replace(base, solver_meta=meta)
    t_grid = base.t_grid
    a, b = freq.cutoff.support
    if t_grid[0] > a:
        raise ModeError("Dyson series needs the window to start before the ramp")
    lo, hi = a, min(b, t_grid[-1])
    if hi <= lo:
        return dataclasses.replace(base, solver_meta=meta)

    # panels: report points inside the ramp, refined to bound the phase per panel
    breaks = np.unique(np.concatenate([[lo], t_grid[(t_grid > lo) & (t_grid < hi)], [hi]]))
    w_max = max(freq.omega1, freq.omega2)
    pieces = []
    for left, right in zip(breaks[:-1], breaks[1:]):
        m = max(1, int(np.ceil((right - left) * w_max / panel_phase)))
        pieces.append(np.linspace(left, right, m + 1)[:-1])
    panel_edges = np.concatenate(pieces + [[hi]])
    x, integ = lobatto_integration(nodes_per_panel)
    half = 0.5 * np.diff(panel_edges)
    nodes = (0.5 * (panel_edges[1:] + panel_edges[:-1]))[:, None] + half[:, None] * x  # (P, p)

    w, wd, _ = freq.omega_derivs(nodes)
    delta = delta_potential(freq, nodes)
    # phase relative to lo, accumulated panel by panel
    local = (integ @ w.T).T * half[:, None]
    offsets = np.concatenate([[0.0], np.cumsum(local[:, -1])[:-1]])
    phi = local + offsets[:, None]
    phase0 = freq.omega1 * lo
    T_a = np.exp(-1j * (phase0 + phi)) / np.sqrt(2 * w)
    cos_p, sin_p, rw = np.cos(phi), np.sin(phi), 1 / np.sqrt(w)

    total = T_a.copy()
    total_d = (-1j * w - wd / (2 * w)) * T_a
    term = T_a
    C_end = S_end = 0.0
    sums_C = np.zeros(order + 1, complex)
    sums_S = np.zeros(order + 1, complex)
    for ell in range(1, order + 1):
        h = delta * term * rw
        C = _running(integ, cos_p * h, half)
        S = _running(integ, sin_p * h, half)
        term = (sin_p * C - cos_p * S) * rw
        dterm = np.sqrt(w) * (cos_p * C + sin_p * S) - wd / (2 * w) * term
        coef = sign ** ell
        total = total + coef * term
        total_d = total_d + coef * dterm
        sums_C[ell], sums_S[ell] = coef * C[-1, -1], coef * S[-1, -1]
    C_end, S_end = sums_C.sum(), sums_S.sum()

    T = base.T.copy()
    Td = base.T_dot.copy()
    # report points in the ramp are panel left edges (node 0 of some panel)
    inside = (t_grid > lo) & (t_grid < hi)
    idx = np.searchsorted(panel_edges, t_grid[inside])
    T[inside] = total[idx, 0]
    Td[inside] = total_d[idx, 0]
    post = t_grid >= hi
    if np.any(post):
        phi_end = phi[-1, -1]
        w_end = freq.omega(hi)
        ts = t_grid[post]
        phi_t = phi_end + w_end * (ts - hi)
        corr = (np.sin(phi_t) * C_end - np.cos(phi_t) * S_end) / np.sqrt(w_end)
        dcorr = np.sqrt(w_end) * (np.cos(phi_t) * C_end + np.sin(phi_t) * S_end)
        T[post] = base.T[post] + corr
        Td[post] = base.T_dot[post] + dcorr
    meta["panels"] = len(panel_edges) - 1
    return ModeSolution(freq, t_grid, T, Td, meta)


def _running(integ, vals, half):
    """Running integral over concatenated panels of nodal values (P, p)."""
    local = (integ @ vals.T).T * half[:, None]
    offsets = np.concatenate([[0.0], np.cumsum(local[:, -1])[:-1]])
    return local + offsets[:, None]


@dataclasses.dataclass(frozen=True)
class BogoliubovPair:
    alpha: complex
    beta: complex

    @property
    def normalization_defect(self) -> float:
        return abs(abs(self.alpha) ** 2 - abs(self.beta) ** 2 - 1.0)


def bogoliubov(sol: ModeSolution, t_late: float | None = None, m2: float | None = None) -> BogoliubovPair:
    """Match T at ``t_late`` onto alpha u + beta conj(u), u the mass-m2 plane wave."""
    freq = sol.freq
    a, b = freq.cutoff.support
    t_final = sol.solver_meta["window"][1]
    if t_late is None:
        t_late = 0.5 * (b + t_final)
    if t_late < b:
        raise ModeError(f"t_late={t_late} lies inside the ramp (ends at {b})")
    m2_sq = freq.m2_sq if m2 is None else m2 * m2
    omega2 = float(np.sqrt(freq.lambda_k ** 2 + m2_sq))
    T, Td = (v[0] for v in sol.evaluate(t_late))
    u, ud = plane_wave(omega2, t_late)
    mat = np.array([[u, np.conj(u)], [ud, np.conj(ud)]])
    alpha, beta = np.linalg.solve(mat, np.array([T, Td]))
    return BogoliubovPair(complex(alpha), complex(beta))


def mode_energy(sol: ModeSolution, t=None):
    """|T'|^2 + omega^2 |T|^2, on the report grid or at given times."""
    if t is None:
        T, Td, w2 = sol.T, sol.T_dot, sol.freq.omega_sq(sol.t_grid)
    else:
        T, Td = sol.evaluate(t)
        w2 = sol.freq.omega_sq(np.atleast_1d(t))
    return np.abs(Td) ** 2 + w2 * np.abs(T) ** 2
