"""Mode-sum two-point functions of ground and deformed states.

A smeared two-point function is assembled as

    omega2(u, v) = sum_k w_k A_k[u] conj(A_k[v]),
    A_k[u] = int dt dx T_k(t) psi_k(x) u(t, x),

over the nodes ``k`` of a spectral measure. The spatial eigenfunctions are
plane waves ``psi_k = exp(i k x)`` (radially averaged for ``radial3d``).
Positivity of ``omega2(u, u)`` is manifest, and ``2 Im omega2(u, v)`` equals
the smeared commutator ``sigma(u, v) = <u, G v>`` with the retarded-minus-advanced
kernel ``-sin(omega (t - t')) / omega``.
"""

from __future__ import annotations

import dataclasses
import math
from functools import cached_property

import numpy as np

from .cutoff import CutoffProfile
from .lattice import CausalLattice, PotentialProfile, causal_propagator, pairing
from .modes import FrequencyProfile, bogoliubov, solve_modes
from .quadrature import gauss_legendre, panel_rule

MEASURE_KINDS = ("circle", "line", "radial3d", "custom")


class StateError(ValueError):
    """Invalid measure, test function or support placement."""


# ---------------------------------------------------------------------------
# spectral measures


@dataclasses.dataclass(frozen=True)
class SpectralMeasure:
    """Eigenvalue nodes and weights of the spatial operator K.

    ``circle``: lambda_j = 2 pi j / L for j = 0..j_max, each of +k and -k
    carried as a separate node of weight 1/L. ``line`` and ``radial3d`` use
    Gauss-Legendre panels on ``[k_min, k_max]`` with densities 1/(2 pi) (both
    signs of k) and k^2/(2 pi^2). ``custom`` takes (lambda, weight) pairs.
    """

    kind: str
    circumference: float = 2 * math.pi
    j_max: int = 32
    k_max: float = 32.0
    k_min: float = 0.0
    panels: int = 16
    order: int = 16
    table: tuple = ()
    include_zero_mode: bool = True

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise StateError(f"unknown measure kind {self.kind!r}; expected one of {MEASURE_KINDS}")
        if self.kind == "circle":
            if not self.circumference > 0 or self.j_max < 0:
                raise StateError("circle needs circumference > 0 and j_max >= 0")
        elif self.kind in ("line", "radial3d"):
            if not 0 <= self.k_min < self.k_max:
                raise StateError(f"need 0 <= k_min < k_max, got [{self.k_min}, {self.k_max}]")
            if self.panels < 1 or self.order < 1:
                raise StateError("panels and order must be positive")
            if self.kind == "line" and self.k_min == 0:
                raise StateError("line measure needs k_min > 0 (1/k is not integrable at 0)")
        else:
            if not self.table:
                raise StateError("custom measure needs at least one (lambda, weight) pair")
            for lam, w in self.table:
                if lam < 0 or not w > 0:
                    raise StateError(f"custom node ({lam}, {w}) violates lambda >= 0, weight > 0")

    def density(self, k):
        """Weight per unit k for the continuous kinds (both signs included for ``line``)."""
        k = np.asarray(k, dtype=float)
        if self.kind == "line":
            return np.full(k.shape, 2.0 / (2 * np.pi))
        if self.kind == "radial3d":
            return k * k / (2 * np.pi ** 2)
        raise StateError(f"{self.kind} measure has no density")

    def _edges(self, lo, hi):
        if lo > 0:
            return np.geomspace(lo, hi, self.panels + 1)
        return np.linspace(lo, hi, self.panels + 1)

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(signed k, lambda = |k|, weight), sorted by ascending lambda."""
        if self.kind == "circle":
            j0 = 0 if self.include_zero_mode else 1
            lam = 2 * np.pi * np.arange(j0, self.j_max + 1) / self.circumference
            k = np.concatenate([[x] if x == 0 else [x, -x] for x in lam]) if lam.size else lam
            w = np.full(k.shape, 1.0 / self.circumference)
        elif self.kind == "custom":
            lam = np.array([p[0] for p in self.table], float)
            w = np.array([p[1] for p in self.table], float)
            order = np.argsort(lam, kind="stable")
            k, w = lam[order], w[order]
        else:
            k, w = panel_rule(self._edges(self.k_min, self.k_max), self.order)
            w = w * self.density(k)
            if self.kind == "line":
                k, w = np.repeat(k, 2) * np.tile([1.0, -1.0], k.size), np.repeat(w / 2, 2)
        lam = np.abs(k)
        for arr in (k, lam, w):
            arr.flags.writeable = False
        return k, lam, w

    @property
    def has_zero_mode(self) -> bool:
        return bool(np.any(self.nodes[1] == 0))

    def distinct_lambdas(self) -> np.ndarray:
        return np.unique(self.nodes[1])

    def integrate_over(self, func, lo: float, hi: float) -> float:
        """int_{lo}^{hi} func(lambda) dmu restricted to lo < lambda < hi."""
        if self.kind in ("circle", "custom"):
            _, lam, w = self.nodes
            sel = (lam > lo) & (lam < hi)
            return float(np.sum(w[sel] * func(lam[sel])))
        lo = max(lo, self.k_min)
        if not hi > lo:
            return 0.0
        k, wk = panel_rule(self._edges(lo, hi), self.order)
        return float(np.sum(wk * self.density(k) * func(k)))

    def metadata(self) -> dict:
        out = {"measure.kind": self.kind, "measure.include_zero_mode": self.include_zero_mode}
        if self.kind == "circle":
            out.update({"measure.circumference": self.circumference, "measure.j_max": self.j_max})
        elif self.kind in ("line", "radial3d"):
            out.update({"measure.k_min": self.k_min, "measure.k_max": self.k_max,
                        "measure.panels": self.panels, "measure.order": self.order})
        return out


# ---------------------------------------------------------------------------
# test functions


def bump(u):
    """exp(-1/(1-u^2)) on (-1, 1), zero elsewhere."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclasses.dataclass(frozen=True)
class TestFunctionSpec:
    """Separable bump u(t, x) = b((t - t_center)/(t_width/2)) b((x - x_center)/(x_width/2)).

    ``spatial_table`` replaces the spatial bump by explicit transforms, one
    complex value per measure node (in the order of ``SpectralMeasure.nodes``).
    """

    __test__ = False  # not a pytest class

    t_center: float
    t_width: float
    x_center: float = 0.0
    x_width: float = 1.0
    amplitude: float = 1.0
    spatial_table: tuple = ()

    def __post_init__(self):
        if not (self.t_width > 0 and self.x_width > 0):
            raise StateError("test function widths must be positive")

    @property
    def t_support(self) -> tuple[float, float]:
        h = 0.5 * self.t_width
        return self.t_center - h, self.t_center + h

    def translated(self, tau: float) -> "TestFunctionSpec":
        return dataclasses.replace(self, t_center=self.t_center + tau)

    def temporal(self, t):
        return self.amplitude * bump((np.asarray(t) - self.t_center) / (0.5 * self.t_width))

    def spatial(self, x, circumference: float | None = None):
        d = np.asarray(x, dtype=float) - self.x_center
        if circumference:
            d = (d + 0.5 * circumference) % circumference - 0.5 * circumference
        return bump(d / (0.5 * self.x_width))

    def temporal_rule(self, panels: int = 16, order: int = 24):
        lo, hi = self.t_support
        t, w = panel_rule(np.linspace(lo, hi, panels + 1), order)
        return t, w * self.temporal(t)

    def spatial_transform(self, measure: SpectralMeasure, panels: int = 16, order: int = 24) -> np.ndarray:
        """int dx psi_k(x) u_x(x) at every measure node."""
        k = measure.nodes[0]
        if self.spatial_table:
            table = np.asarray(self.spatial_table, dtype=complex)
            if table.shape != k.shape:
                raise StateError(f"spatial_table has {table.size} entries, measure has {k.size} nodes")
            return table
        h = 0.5 * self.x_width
        if measure.kind == "circle" and self.x_width > measure.circumference:
            raise StateError("spatial bump wider than the circle")
        if measure.kind == "radial3d":
            r, w = panel_rule(np.linspace(0.0, h, panels + 1), order)
            prof = w * 4 * np.pi * r * r * bump(r / h)
            return np.sinc(np.outer(k, r) / np.pi) @ prof + 0j
        x, w = panel_rule(np.linspace(-h, h, panels + 1), order)
        prof = w * bump(x / h)
        return np.exp(1j * k * self.x_center) * (np.exp(1j * np.outer(k, x)) @ prof)


# ---------------------------------------------------------------------------
# assembly


@dataclasses.dataclass(frozen=True)
class StateEvaluation:
    value: complex
    # rows (k, lambda, weight, contribution), ascending lambda
    components: np.ndarray
    truncation_estimate: float
    meta: dict = dataclasses.field(default_factory=dict)

    def component_rows(self):
        for row in self.components:
            yield float(row["k"]), float(row["lam"]), float(row["weight"]), complex(row["contribution"])


_COMPONENT_DTYPE = np.dtype([("k", float), ("lam", float), ("weight", float), ("contribution", complex)])


def _evaluation(measure, contrib, meta) -> StateEvaluation:
    k, lam, w = measure.nodes
    comps = np.empty(k.size, _COMPONENT_DTYPE)
    comps["k"], comps["lam"], comps["weight"], comps["contribution"] = k, lam, w, contrib
    value = complex(np.sum(contrib))  # fixed order: ascending lambda
    top = lam >= lam.max() - 1e-12 * max(1.0, lam.max())
    return StateEvaluation(value, comps, float(np.sum(np.abs(contrib[top]))), meta)


def _plane_wave_transform(omega, test: TestFunctionSpec):
    t, wu = test.temporal_rule()
    return np.exp(-1j * np.outer(omega, t)) @ wu / np.sqrt(2 * omega)


def _check_zero_mode(measure: SpectralMeasure, m: float):
    if m == 0 and measure.has_zero_mode:
        raise StateError("zero mode present: lambda_k = 0 with vanishing mass has no ground state")


def _bilinear(measure, A_u, A_v):
    return measure.nodes[2] * A_u * np.conj(A_v)


def vacuum_two_point(m: float, measure: SpectralMeasure, u: TestFunctionSpec,
                     v: TestFunctionSpec) -> StateEvaluation:
    """Ground-state two-point function of mass ``m``."""
    _check_zero_mode(measure, m)
    lam = measure.nodes[1]
    omega = np.sqrt(lam ** 2 + m * m)
    A_u = _plane_wave_transform(omega, u) * u.spatial_transform(measure)
    A_v = _plane_wave_transform(omega, v) * v.spatial_transform(measure)
    return _evaluation(measure, _bilinear(measure, A_u, A_v), {"mass": m})


def _check_flat_support(chi: CutoffProfile, *tests):
    b = chi.support[1]
    for test in tests:
        if test.t_support[0] < b:
            raise StateError(f"test function support starts at {test.t_support[0]} inside the "
                             f"ramp (flat from {b}); the deformed state is not defined by modes there")


@dataclasses.dataclass(frozen=True)
class DeformedModes:
    """Mode solutions of one scaled cutoff, shared by every smeared evaluation."""

    n: float
    m1: float
    m2: float
    chi: CutoffProfile
    measure: SpectralMeasure
    t_end: float
    solutions: dict

    def transform(self, test: TestFunctionSpec) -> np.ndarray:
        _check_flat_support(self.chi.scaled(self.n), test)
        if test.t_support[1] > self.t_end:
            raise StateError("test function support extends past the solved window")
        t, wu = test.temporal_rule()
        lam = self.measure.nodes[1]
        out = np.empty(lam.size, complex)
        for lk in np.unique(lam):
            T, _ = self.solutions[float(lk)].evaluate(t)
            out[lam == lk] = T @ wu
        return out * test.spatial_transform(self.measure)

    def bogoliubov(self) -> dict:
        return {lk: bogoliubov(sol) for lk, sol in self.solutions.items()}

    @property
    def wronskian_drift(self) -> float:
        return max(sol.wronskian_drift for sol in self.solutions.values())


def solve_deformed_modes(n: float, m1: float, m2: float, chi: CutoffProfile, measure: SpectralMeasure,
                         t_end: float, *, tol: float = 1e-10, atol: float = 1e-12,
                         wronskian_tol: float = 1e-8, workers: int | None = None) -> DeformedModes:
    _check_zero_mode(measure, m1)
    scaled = chi.scaled(n)
    a, b = scaled.support
    if t_end <= b:
        raise StateError(f"t_end={t_end} must lie after the ramp end {b}")
    lams = measure.distinct_lambdas()
    freqs = [FrequencyProfile(float(lk), m1 * m1, m2 * m2, scaled) for lk in lams]
    sols = solve_modes(freqs, (a, t_end), workers=workers, tol=tol, atol=atol,
                       n_report=2, wronskian_tol=wronskian_tol)
    return DeformedModes(n, m1, m2, chi, measure, t_end, {float(lk): s for lk, s in zip(lams, sols)})


def deformed_two_point(n: float, m1: float, m2: float, chi: CutoffProfile, measure: SpectralMeasure,
                       u: TestFunctionSpec, v: TestFunctionSpec, *, modes: DeformedModes | None = None,
                       **solver) -> StateEvaluation:
    """Two-point function of the m1 ground state deformed by the ramp chi(t/n).

    u and v must sit where chi(t/n) = 1; only there does the mode form apply.
    """
    _check_flat_support(chi.scaled(n), u, v)
    if modes is None:
        t_end = max(u.t_support[1], v.t_support[1])
        modes = solve_deformed_modes(n, m1, m2, chi, measure, t_end, **solver)
    contrib = _bilinear(measure, modes.transform(u), modes.transform(v))
    return _evaluation(measure, contrib, {"n": n, "m1": m1, "m2": m2,
                                          "wronskian_drift": modes.wronskian_drift})


# ---------------------------------------------------------------------------
# commutator and CCR


def mode_commutator(m: float, measure: SpectralMeasure, u: TestFunctionSpec, v: TestFunctionSpec) -> float:
    """sigma(u, v) = int u G v with the mass-m kernel -sin(omega (t - t'))/omega, summed over modes."""
    lam = measure.nodes[1]
    omega = np.sqrt(lam ** 2 + m * m)
    if np.any(omega == 0):
        raise StateError("zero frequency in the commutator sum")
    tu, wu = u.temporal_rule()
    tv, wv = v.temporal_rule()
    Cu, Su = np.cos(np.outer(omega, tu)) @ wu, np.sin(np.outer(omega, tu)) @ wu
    Cv, Sv = np.cos(np.outer(omega, tv)) @ wv, np.sin(np.outer(omega, tv)) @ wv
    spatial = u.spatial_transform(measure) * np.conj(v.spatial_transform(measure))
    terms = measure.nodes[2] * spatial * (-(Su * Cv - Cu * Sv) / omega)
    return float(np.sum(terms).real)


def ccr_residual(omega_uv: complex, omega_vu: complex, sigma: float) -> float:
    """|omega(u,v) - omega(v,u) - i sigma| relative to max(|sigma|, |omega(u,v)|)."""
    scale = max(abs(sigma), abs(omega_uv), np.finfo(float).tiny)
    return abs((omega_uv - omega_vu) - 1j * sigma) / scale


def sample_on_lattice(test: TestFunctionSpec, lat: CausalLattice):
    circ = lat.n_x * lat.dx if lat.topology == "circle" else None
    vals = np.outer(test.temporal(lat.times), test.spatial(lat.positions, circ))
    return lat.field(vals)


def lattice_commutator(m: float, lat: CausalLattice, u: TestFunctionSpec, v: TestFunctionSpec) -> float:
    """sigma(u, v) from the lattice causal propagator of the mass-m operator."""
    f, g = sample_on_lattice(u, lat), sample_on_lattice(v, lat)
    return pairing(f, causal_propagator(PotentialProfile.free(m * m), g))


# ---------------------------------------------------------------------------
# adiabatic sweep


def fitted_decay_order(ns, diffs) -> float:
    """Slope p of log|diff| = c - p log n by least squares (nan if < 2 usable points)."""
    ns, diffs = np.asarray(ns, float), np.asarray(diffs, float)
    ok = diffs > 0
    if ok.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.log(ns[ok]), np.log(diffs[ok]), 1)[0]
    return float(-slope)


@dataclasses.dataclass(frozen=True)
class SweepRow:
    n: float
    value: complex
    difference: float
    translated_value: complex
    translation_difference: float
    positivity_min: float
    ccr_residual: float
    wronskian_drift: float


@dataclasses.dataclass(frozen=True)
class SweepTable:
    rows: tuple
    target: complex
    fitted_order: float
    tau: float

    @property
    def differences(self) -> np.ndarray:
        return np.array([r.difference for r in self.rows])

    def decreasing_beyond(self, n0: float = 2) -> bool:
        d = [r.difference for r in self.rows if r.n >= n0]
        return all(b < a for a, b in zip(d, d[1:]))

    def translation_decreasing(self) -> bool:
        d = [r.translation_difference for r in self.rows]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def final_ratio(self) -> float:
        d = self.differences
        return float(d[-1] / d[0]) if d[0] > 0 else 0.0

    @property
    def worst_ccr(self) -> float:
        return max(r.ccr_residual for r in self.rows)

    @property
    def worst_positivity(self) -> float:
        return min(r.positivity_min for r in self.rows)


def adiabatic_sweep(n_list, m1: float, m2: float, chi: CutoffProfile, measure: SpectralMeasure,
                    u: TestFunctionSpec, v: TestFunctionSpec, *, tau: float = 0.5, **solver) -> SweepTable:
    """omega_{2,n}(u, v) for every n, against the mass-m2 ground state.

    The translated pair (u + tau, v + tau) feeds the time-translation proxy:
    |omega_n(u_tau, v_tau) - omega_n(u, v)| should shrink as n grows.
    """
    n_list = sorted(float(n) for n in n_list)
    u_tau, v_tau = u.translated(tau), v.translated(tau)
    t_end = max(s.t_support[1] for s in (u, v, u_tau, v_tau))
    target = vacuum_two_point(m2, measure, u, v).value
    sigma = mode_commutator(m2, measure, u, v)
    rows = []
    for n in n_list:
        _check_flat_support(chi.scaled(n), u, v, u_tau, v_tau)
        modes = solve_deformed_modes(n, m1, m2, chi, measure, t_end, **solver)
        Au, Av = modes.transform(u), modes.transform(v)
        val = complex(np.sum(_bilinear(measure, Au, Av)))
        val_vu = complex(np.sum(_bilinear(measure, Av, Au)))
        pos = min(np.sum(_bilinear(measure, Au, Au)).real, np.sum(_bilinear(measure, Av, Av)).real)
        shifted = complex(np.sum(_bilinear(measure, modes.transform(u_tau), modes.transform(v_tau))))
        rows.append(SweepRow(n, val, abs(val - target), shifted, abs(shifted - val), float(pos),
                             ccr_residual(val, val_vu, sigma), modes.wronskian_drift))
    tail = [(r.n, r.difference) for r in rows if r.n >= 2] or [(r.n, r.difference) for r in rows]
    order = fitted_decay_order(*zip(*tail))
    return SweepTable(tuple(rows), target, order, tau)


# ---------------------------------------------------------------------------
# spectral condition


@dataclasses.dataclass(frozen=True)
class SpectralVerdict:
    passed: bool
    reason: str
    eps: tuple
    values: tuple
    refined_values: tuple
    slope: float


def check_spectral_condition(measure: SpectralMeasure, eps_list, *, threshold: float = 1e-3,
                             refine: float = 10.0) -> SpectralVerdict:
    """I(eps) = int_{0 < lambda < eps} dmu / lambda and whether it tends to 0.

    For continuous measures the lower cutoff k_min is lowered by ``refine``;
    a change in I larger than ``threshold`` means I depends on the cutoff,
    i.e. it diverges as k_min -> 0.
    """
    eps = tuple(float(e) for e in eps_list)
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise StateError("eps_list must be positive and strictly decreasing")
    if measure.has_zero_mode:
        return SpectralVerdict(False, "zero eigenvalue", eps, (), (), float("nan"))
    inv = lambda lam: 1.0 / lam  # noqa: E731
    values = tuple(measure.integrate_over(inv, 0.0, e) for e in eps)
    refined = values
    if measure.kind in ("line", "radial3d") and measure.k_min > 0:
        finer = dataclasses.replace(measure, k_min=measure.k_min / refine)
        refined = tuple(finer.integrate_over(inv, 0.0, e) for e in eps)
    if max(abs(a - b) for a, b in zip(values, refined)) > threshold:
        return SpectralVerdict(False, "logarithmic divergence: I(eps) grows as the lower cutoff "
                               "is refined", eps, values, refined, float("nan"))
    positive = [(e, v) for e, v in zip(eps, values) if v > 0]
    if not positive:
        return SpectralVerdict(True, "spectral gap: no eigenvalues below eps", eps, values, refined, float("inf"))
    slope = fitted_decay_order(*zip(*positive)) * -1 if len(positive) >= 2 else float("nan")
    if values[-1] >= threshold:
        return SpectralVerdict(False, f"I(eps) = {values[-1]:.3e} does not fall below {threshold:g}",
                               eps, values, refined, slope)
    if len(positive) >= 2 and not slope > 0:
        return SpectralVerdict(False, f"non-positive log-log slope {slope:.3g}", eps, values, refined, slope)
    return SpectralVerdict(True, "I(eps) -> 0", eps, values, refined, slope)


# ---------------------------------------------------------------------------
# Hadamard proxy


@dataclasses.dataclass(frozen=True)
class ProxyReport:
    lambdas: np.ndarray
    betas: np.ndarray
    p: float
    passed: bool
    reason: str
    fit_lambdas: np.ndarray


def hadamard_proxy(n: float, m1: float, m2: float, chi: CutoffProfile, measure: SpectralMeasure, *,
                   p_min: float = 3.0, floor: float = 1e-9, **solver) -> ProxyReport:
    """Decay of |beta_k| over the measure's lambda grid, fitted as lambda^-p on the upper half.

    Points below ``floor`` (integrator noise) are left out of the fit. If every
    upper-half point is below the floor the decay is faster than any fitted
    power and the proxy passes with p = inf.
    """
    scaled = chi.scaled(n)
    b = scaled.support[1]
    if m1 == 0 and measure.kind == "circle":
        measure = dataclasses.replace(measure, include_zero_mode=False)
    modes = solve_deformed_modes(n, m1, m2, chi, measure, b + 1.0, **solver)
    lams = measure.distinct_lambdas()
    betas = np.array([abs(bogoliubov(modes.solutions[float(lk)]).beta) for lk in lams])
    if m1 == m2:
        ok = bool(np.all(betas <= 1e-8))
        return ProxyReport(lams, betas, float("inf"), ok, "undeformed: beta_k = 0", lams[:0])
    upper = lams >= np.median(lams)
    sel = upper & (betas > floor) & (lams > 0)
    if sel.sum() < 2:
        if np.all(betas[upper] <= floor):
            return ProxyReport(lams, betas, float("inf"), True,
                               "upper half below the noise floor (faster than any power)", lams[:0])
        return ProxyReport(lams, betas, float("nan"), False, "too few points above the noise floor", lams[sel])
    p = fitted_decay_order(lams[sel], betas[sel])
    passed = p >= p_min
    return ProxyReport(lams, betas, p, passed, f"fitted p = {p:.3g} ({'>=' if passed else '<'} {p_min:g})",
                       lams[sel])
