"""Scenario execution: run suites, collect checks, write CSV tables and report.txt."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import lattice as L
from .config import SUITES, Scenario
from .cutoff import make_cutoff
from .modes import (FrequencyProfile, adiabaticity, bogoliubov, dyson_solve, mode_energy, solve_mode,
                    thread_count, wkb_error_bound, wkb_mode)
from .states import (SpectralMeasure, TestFunctionSpec, adiabatic_sweep, ccr_residual,
                     check_spectral_condition, deformed_two_point, hadamard_proxy, lattice_commutator,
                     mode_commutator, solve_deformed_modes, vacuum_two_point)

log = logging.getLogger("moller")


@dataclasses.dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""


@dataclasses.dataclass
class SuiteResult:
    suite: str
    checks: list
    tables: dict  # file name -> (header, rows)
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and all(c.passed for c in self.checks)


@dataclasses.dataclass
class RunResult:
    scenario: Scenario
    suites: list
    files: list

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1


# ---------------------------------------------------------------------------
# scenario -> domain objects


def cutoff_of(s: Scenario):
    c = s.cutoff
    return make_cutoff((c.t_on, c.t_off), c.kind, c.order).scaled(c.scale)


def lattice_of(s: Scenario, n_t: int | None = None, n_x: int | None = None) -> L.CausalLattice:
    la = s.lattice
    n_x = n_x or la.n_x
    dx = la.circumference / n_x
    return L.CausalLattice(n_t or la.n_t, n_x, la.courant * dx, dx, la.topology, la.t_min)


def measure_of(s: Scenario) -> SpectralMeasure:
    me = s.measure
    table = tuple(tuple(float(x) for x in item.split(":")) for item in me.table)
    return SpectralMeasure(me.kind, me.circumference, me.j_max, me.k_max, me.k_min, me.panels, me.order,
                           table, me.include_zero_mode)


def test_functions(s: Scenario) -> tuple[TestFunctionSpec, TestFunctionSpec]:
    sw = s.sweep
    u = TestFunctionSpec(sw.u_t_center, sw.u_t_width, sw.u_x_center, sw.u_x_width)
    v = TestFunctionSpec(sw.v_t_center, sw.v_t_width, sw.v_x_center, sw.v_x_width)
    return u, v


def _rng(s: Scenario, suite: str) -> np.random.Generator:
    return np.random.default_rng([s.seed, SUITES.index(suite)])


# ---------------------------------------------------------------------------
# suites


def _max_check(suite, name, values, tol, detail="") -> Check:
    worst = float(np.max(values)) if len(values) else 0.0
    return Check(suite, name, worst <= tol, worst, tol, detail)


def suite_verify_operators(s: Scenario) -> SuiteResult:
    suite = "verify-operators"
    tol = s.tolerances
    lat = lattice_of(s)
    chi = cutoff_of(s)
    m1_sq, m2_sq = s.masses.m1 ** 2, s.masses.m2 ** 2
    Vp = L.PotentialProfile(m1_sq, m2_sq, chi)
    free, full = Vp.free_part, L.PotentialProfile(m1_sq, m2_sq)
    rng = _rng(s, suite)
    rows, results, tols = [], {}, {}

    def record(name, sample, residual, tolerance):
        rows.append((name, s.seed, sample, residual, tolerance, residual <= tolerance))
        results.setdefault(name, []).append(residual)
        tols[name] = tolerance

    def compact():
        v = rng.standard_normal(lat.shape)
        v[:2] = v[-2:] = 0.0
        return lat.field(v)

    for k in range(s.lattice.identity_samples):
        phi, f = lat.field(rng.standard_normal(lat.shape)), compact()
        record("R_Rinv", k, L.relative_residual(L.moller_apply(Vp, L.moller_inverse_apply(Vp, phi)), phi), tol.identity)
        record("Rinv_R", k, L.relative_residual(L.moller_inverse_apply(Vp, L.moller_apply(Vp, phi)), phi), tol.identity)
        record("intertwining", k, L.relative_residual(L.apply_p(Vp, L.moller_apply(Vp, phi)), L.apply_p(free, phi)),
               tol.identity)
        a, b = L.pairing(L.moller_apply(Vp, phi), f), L.pairing(phi, L.dual_moller_apply(Vp, f))
        record("dual_pairing", k, abs(a - b) / max(abs(a), abs(b), np.finfo(float).tiny), tol.identity)
        record("dual_inverse", k, L.relative_residual(L.dual_moller_inverse_apply(Vp, L.dual_moller_apply(Vp, f)), f),
               tol.identity)
        rep = L.compose_green_identity_check(Vp, f)
        record("R_Gret", k, rep.retarded_rel, tol.identity)
        record("R_G_Rdual", k, rep.causal_rel, tol.identity)

    for k in range(s.lattice.causality_samples):
        i0, j0 = int(rng.integers(2, lat.n_t - 2)), int(rng.integers(0, lat.n_x))
        src = lat.zeros().values
        src[i0, j0] = 1.0 / (lat.dt * lat.dx)
        src = lat.field(src)
        ret, adv = L.retarded_solve(full, src).values, L.advanced_solve(full, src).values
        leak_r = np.abs(ret[~L.discrete_cone_mask(lat, i0, j0, True)]).max(initial=0.0)
        leak_a = np.abs(adv[~L.discrete_cone_mask(lat, i0, j0, False)]).max(initial=0.0)
        record("causality_retarded", k, float(leak_r), 0.0)
        record("causality_advanced", k, float(leak_a), 0.0)

    band = L.BandSpec(s.lattice.band_t_a, s.lattice.band_t_b)
    band.validate(lat, chi)
    for k in range(s.lattice.timeslice_samples):
        phi, psi = L.causal_propagator(full, compact()), L.causal_propagator(full, compact())
        ts_phi = L.time_slice(full, band, phi)
        record("timeslice_reconstruction", k, L.relative_residual(L.causal_propagator(full, ts_phi), phi),
               tol.timeslice)
        a, b = L.pairing(psi, ts_phi), -L.pairing(L.time_slice(full, band, psi), phi)
        record("timeslice_dual", k, abs(a - b) / max(abs(a), abs(b), np.finfo(float).tiny), tol.timeslice)

    mask = band.row_mask(lat)[:, None]
    for k in range(s.lattice.symplectic_samples):
        f = lat.field(rng.standard_normal(lat.shape) * mask)
        g = lat.field(rng.standard_normal(lat.shape) * mask)
        s_def = L.symplectic_form(free, L.composite_dual_moller(Vp, band, f), L.composite_dual_moller(Vp, band, g))
        s_ref = L.symplectic_form(full, f, g)
        record("symplectic", k, abs(s_def - s_ref) / max(1.0, abs(s_ref)), tol.symplectic)

    checks = [_max_check(suite, name, vals, tols[name]) for name, vals in results.items()]
    header = ("identity", "seed", "sample", "residual", "tolerance", "pass")
    return SuiteResult(suite, checks, {"operators.csv": (header, rows)})


def _mode_window(s: Scenario, chi):
    a = chi.support[0]
    return (a - 1.0, max(s.modes.window_end, chi.support[1] + 1.0))


def _battery_row(s: Scenario, lam: float, n: float):
    tol = s.tolerances
    chi = cutoff_of(s).scaled(n)
    freq = FrequencyProfile(lam, s.masses.m1 ** 2, s.masses.m2 ** 2, chi)
    window = _mode_window(s, chi)
    sol = solve_mode(freq, window, tol.rtol, atol=tol.atol, n_report=s.modes.n_report, wronskian_tol=tol.wronskian)
    wkb = wkb_mode(freq, window, n_report=s.modes.n_report)
    bound = wkb_error_bound(freq, window, n_report=s.modes.n_report)
    err = np.abs(sol.T - wkb.T)
    violations = int(np.sum(err > bound))
    wkb_ratio = float(np.max(err / np.where(bound > 0, bound, np.inf)))
    adiab = float(adiabaticity(freq))
    dyson_err = float("nan")
    if adiab <= tol.dyson_adiabaticity:
        dy = dyson_solve(freq, window, s.modes.dyson_order, n_report=s.modes.n_report)
        dyson_err = float(np.max(np.abs(dy.T - sol.T)))
    ratio = mode_energy(sol) / freq.omega_sq(sol.t_grid)
    direction = np.sign(s.masses.m2 - s.masses.m1) or 1.0
    energy_slack = float(max(0.0, np.max(direction * np.diff(ratio))))
    massless = float("nan")
    if s.masses.m1 == 0 and lam > 0:
        massless = float(np.max(np.abs(sol.T) ** 2) - 1.0 / lam)
    pair = bogoliubov(sol)
    return dict(lam=lam, n=n, drift=sol.wronskian_drift, wkb_ratio=wkb_ratio, wkb_violations=violations,
                adiabaticity=adiab, dyson=dyson_err, energy_slack=energy_slack, massless=massless,
                alpha=pair.alpha, beta=pair.beta, defect=pair.normalization_defect,
                steps=sol.solver_meta["steps"], refinements=sol.solver_meta["refinements"])


def suite_solve_modes(s: Scenario) -> SuiteResult:
    suite = "solve-modes"
    tol = s.tolerances
    lams = s.mode_lambdas()
    if s.masses.m1 == 0:
        lams = tuple(x for x in lams if x > 0)
    jobs = [(lam, n) for n in s.modes.n_list for lam in lams]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        rows = list(pool.map(lambda job: _battery_row(s, *job), jobs))

    table = [(r["lam"], r["n"], r["drift"], r["wkb_ratio"], r["wkb_violations"], r["adiabaticity"], r["dyson"],
              r["energy_slack"], r["massless"], r["alpha"].real, r["alpha"].imag, r["beta"].real, r["beta"].imag,
              abs(r["beta"]), r["defect"], r["steps"], r["refinements"]) for r in rows]
    header = ("lambda", "n", "wronskian_drift", "wkb_max_ratio", "wkb_violations", "adiabaticity",
              "dyson_error", "energy_slack", "massless_excess", "alpha_re", "alpha_im", "beta_re", "beta_im",
              "beta_abs", "normalization_defect", "steps", "refinements")
    checks = [
        _max_check(suite, "wronskian", [r["drift"] for r in rows], tol.wronskian),
        Check(suite, "wkb_bound", sum(r["wkb_violations"] for r in rows) == 0,
              max(r["wkb_ratio"] for r in rows), 1.0, "worst |T - T_a| / bound; zero violations required"),
        _max_check(suite, "energy_monotone", [r["energy_slack"] for r in rows], tol.energy_slack),
        _max_check(suite, "bogoliubov_normalization", [r["defect"] for r in rows], tol.wronskian),
    ]
    dy = [r["dyson"] for r in rows if not math.isnan(r["dyson"])]
    checks.append(_max_check(suite, "dyson_order", dy, tol.dyson,
                             f"{len(dy)} of {len(rows)} modes have adiabaticity <= {tol.dyson_adiabaticity:g}"))
    if s.masses.m1 == 0:
        checks.append(_max_check(suite, "massless_bound", [r["massless"] for r in rows], tol.energy_slack))

    tables = {"modes.csv": (header, table)}
    if s.masses.m1 != s.masses.m2 and s.modes.decay_check:
        decay = _beta_decay(s)
        tables["beta_decay.csv"] = (("lambda", "n", "beta_re", "beta_im", "beta_abs"),
                                    [(s.modes.decay_lambda, n, b.real, b.imag, abs(b)) for n, b in decay])
        betas = [abs(b) for n, b in decay]
        tail = [abs(b) for n, b in decay if n >= 2]
        mono = all(y < x for x, y in zip(tail, tail[1:]))
        checks.append(Check(suite, "beta_decreasing_beyond_2", mono, float(mono is False), 0.0,
                            "|beta(n)| strictly decreasing for n >= 2"))
        ratio = betas[-1] / betas[0] if betas[0] > 0 else 0.0
        checks.append(Check(suite, "beta_decay_ratio", ratio <= tol.beta_ratio, ratio, tol.beta_ratio,
                            f"|beta(n_max)| / |beta(n_min)| at lambda = {s.modes.decay_lambda:g}"))
    return SuiteResult(suite, checks, tables)


def _beta_decay(s: Scenario):
    out = []
    for n in sorted(s.modes.n_list):
        chi = cutoff_of(s).scaled(n)
        freq = FrequencyProfile(s.modes.decay_lambda, s.masses.m1 ** 2, s.masses.m2 ** 2, chi)
        sol = solve_mode(freq, _mode_window(s, chi), s.tolerances.rtol, atol=s.tolerances.atol, n_report=3,
                         wronskian_tol=s.tolerances.wronskian)
        out.append((n, bogoliubov(sol).beta))
    return out


def suite_deform_state(s: Scenario) -> SuiteResult:
    suite = "deform-state"
    tol = s.tolerances
    m1, m2, n = s.masses.m1, s.masses.m2, s.sweep.state_n
    measure, chi = measure_of(s), cutoff_of(s)
    u, v = test_functions(s)
    checks = []
    t_end = max(u.t_support[1], v.t_support[1])
    modes = solve_deformed_modes(n, m1, m2, chi, measure, t_end, tol=tol.rtol, atol=tol.atol,
                                 wronskian_tol=tol.wronskian)
    deformed = {(a, b): deformed_two_point(n, m1, m2, chi, measure, x, y, modes=modes)
                for a, x in (("u", u), ("v", v)) for b, y in (("u", u), ("v", v))}
    vac2 = vacuum_two_point(m2, measure, u, v)
    vac2_vu = vacuum_two_point(m2, measure, v, u)
    sigma = mode_commutator(m2, measure, u, v)

    d_uv, d_vu = deformed["u", "v"].value, deformed["v", "u"].value
    positivity = min(deformed["u", "u"].value.real, deformed["v", "v"].value.real)
    imag_diag = max(abs(deformed[k, k].value.imag) / abs(deformed[k, k].value) for k in ("u", "v"))
    checks.append(Check(suite, "positivity", positivity >= -tol.positivity, positivity, -tol.positivity,
                        "minimum of omega(u,u), omega(v,v); must not fall below the tolerance"))
    checks.append(_max_check(suite, "diagonal_real", [imag_diag], tol.hermiticity))
    herm = abs(d_uv - np.conj(d_vu)) / abs(d_uv)
    checks.append(_max_check(suite, "hermiticity", [herm], tol.hermiticity))
    checks.append(_max_check(suite, "ccr_deformed", [ccr_residual(d_uv, d_vu, sigma)], tol.ccr))
    checks.append(_max_check(suite, "ccr_vacuum", [ccr_residual(vac2.value, vac2_vu.value, sigma)], tol.ccr))
    if m1 == m2:
        rel = abs(d_uv - vacuum_two_point(m1, measure, u, v).value) / abs(d_uv)
        checks.append(_max_check(suite, "undeformed_equals_vacuum", [rel], 1e-8))

    tables = {}
    comp = deformed["u", "v"].components
    tables["state_components.csv"] = (
        ("k", "lambda", "weight", "deformed_re", "deformed_im", "vacuum_m2_re", "vacuum_m2_im"),
        [(r["k"], r["lam"], r["weight"], r["contribution"].real, r["contribution"].imag, c.real, c.imag)
         for r, c in zip(comp, vac2.components["contribution"])])
    summary = [("deformed_uv", d_uv.real, d_uv.imag), ("deformed_vu", d_vu.real, d_vu.imag),
               ("deformed_uu", deformed["u", "u"].value.real, deformed["u", "u"].value.imag),
               ("vacuum_m2_uv", vac2.value.real, vac2.value.imag), ("sigma_m2", sigma, 0.0),
               ("truncation_estimate", deformed["u", "v"].truncation_estimate, 0.0)]

    if measure.kind == "circle" and s.lattice.topology == "circle" and \
            abs(measure.circumference - s.lattice.circumference) < 1e-12:
        sig_modes = mode_commutator(m1, measure, u, v)
        errs = []
        for N in (s.sweep.ccr_lattice_n // 2, s.sweep.ccr_lattice_n):
            lat = L.CausalLattice.on_circle(N, N, s.lattice.circumference, s.lattice.courant, 0.0)
            sig_lat = lattice_commutator(m1, lat, u, v)
            errs.append(abs(sig_lat - sig_modes) / abs(sig_modes))
            summary.append((f"sigma_lattice_{N}", sig_lat, 0.0))
        summary.append(("sigma_modes_m1", sig_modes, 0.0))
        checks.append(_max_check(suite, "lattice_ccr_agreement", [errs[1]], tol.lattice_ccr,
                                 f"{s.sweep.ccr_lattice_n}^2 lattice vs mode sum, mass m1"))
        checks.append(_max_check(suite, "lattice_ccr_refinement", [errs[1] / errs[0]], tol.lattice_ccr_refinement,
                                 "error ratio under halving dt and dx"))
    tables["state_summary.csv"] = (("quantity", "re", "im"), summary)

    if chi.density_kind == "compact-bump" or m1 == m2:
        proxy = hadamard_proxy(s.sweep.proxy_n, m1, m2, chi, measure, p_min=tol.proxy_p,
                               tol=tol.rtol, atol=tol.atol, wronskian_tol=tol.wronskian)
        fit = set(map(float, proxy.fit_lambdas))
        tables["hadamard_proxy.csv"] = (("lambda", "beta_abs", "in_fit", "fitted_p"),
                                        [(lk, b, float(lk) in fit, proxy.p) for lk, b in zip(proxy.lambdas, proxy.betas)])
        checks.append(Check(suite, "hadamard_proxy", proxy.passed, proxy.p, tol.proxy_p,
                            proxy.reason + "; worst is the fitted exponent, a lower bound"))
    return SuiteResult(suite, checks, tables)


def suite_adiabatic_sweep(s: Scenario) -> SuiteResult:
    suite = "adiabatic-sweep"
    tol = s.tolerances
    u, v = test_functions(s)
    sweep = adiabatic_sweep(s.sweep.n_list, s.masses.m1, s.masses.m2, cutoff_of(s),
                            measure_of(s), u, v, tau=s.sweep.tau, tol=tol.rtol, atol=tol.atol,
                            wronskian_tol=tol.wronskian)
    rows = [(r.n, r.value.real, r.value.imag, r.difference, r.translated_value.real, r.translated_value.imag,
             r.translation_difference, r.positivity_min, r.ccr_residual, r.wronskian_drift,
             sweep.target.real, sweep.target.imag, sweep.fitted_order) for r in sweep.rows]
    header = ("n", "value_re", "value_im", "abs_difference", "translated_re", "translated_im",
              "translation_difference", "positivity_min", "ccr_residual", "wronskian_drift",
              "target_re", "target_im", "fitted_order")
    checks = [
        Check(suite, "positivity", sweep.worst_positivity >= -tol.positivity, sweep.worst_positivity,
              -tol.positivity, "minimum over n of omega_n(u,u), omega_n(v,v); must not fall below the tolerance"),
        _max_check(suite, "ccr", [r.ccr_residual for r in sweep.rows], tol.ccr),
    ]
    if s.masses.m1 == s.masses.m2:
        checks.append(_max_check(suite, "undeformed_differences", sweep.differences, 1e-8))
    else:
        mono = sweep.decreasing_beyond(2)
        checks.append(Check(suite, "decreasing_beyond_2", mono, float(not mono), 0.0,
                            "differences to the m2 vacuum strictly decreasing for n >= 2"))
        checks.append(Check(suite, "final_ratio", sweep.final_ratio <= tol.sweep_ratio, sweep.final_ratio,
                            tol.sweep_ratio, f"fitted decay order {sweep.fitted_order:.3g}"))
        tr = sweep.translation_decreasing()
        checks.append(Check(suite, "time_translation_proxy", tr, float(not tr), 0.0,
                            f"|omega_n(u_tau, v_tau) - omega_n(u, v)| decreasing in n, tau = {s.sweep.tau:g}"))
    return SuiteResult(suite, checks, {"sweep.csv": (header, rows)})


def suite_spectral_condition(s: Scenario) -> SuiteResult:
    suite = "check-spectral-condition"
    measure = measure_of(s)
    verdict = check_spectral_condition(measure, s.measure.eps, threshold=s.tolerances.spectral_threshold)
    closed = []
    for e in verdict.eps:
        if measure.kind == "radial3d":
            lo = measure.k_min
            closed.append((e * e - lo * lo) / (4 * np.pi ** 2))
        elif measure.kind == "line":
            closed.append(math.log(e / measure.k_min) / np.pi if e > measure.k_min else 0.0)
        else:
            closed.append(float("nan"))
    rows = [(e, i, r, c) for e, i, r, c in
            zip(verdict.eps, verdict.values or [float("nan")] * len(verdict.eps),
                verdict.refined_values or [float("nan")] * len(verdict.eps), closed)]
    expected = s.measure.expect == "pass"
    checks = [Check(suite, "verdict", verdict.passed == expected, float(verdict.passed), float(expected),
                    f"{'PASS' if verdict.passed else 'FAIL'} ({verdict.reason}); expected {s.measure.expect.upper()}")]
    if measure.kind == "radial3d" and verdict.values:
        err = [abs(i - c) / max(abs(c), np.finfo(float).tiny) for i, c in zip(verdict.values, closed)]
        checks.append(_max_check(suite, "closed_form", err, 1e-10, "I(eps) vs eps^2 / (4 pi^2)"))
    header = ("eps", "I", "I_refined_cutoff", "closed_form")
    tables = {"spectral_condition.csv": (header, rows),
              "spectral_verdict.csv": (("verdict", "reason", "slope"),
                                       [("PASS" if verdict.passed else "FAIL", verdict.reason, verdict.slope)])}
    return SuiteResult(suite, checks, tables)


SUITE_FUNCS = {
    "verify-operators": suite_verify_operators,
    "solve-modes": suite_solve_modes,
    "deform-state": suite_deform_state,
    "adiabatic-sweep": suite_adiabatic_sweep,
    "check-spectral-condition": suite_spectral_condition,
}


# ---------------------------------------------------------------------------
# output


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(x) for x in row])


def _fmt(x: float) -> str:
    return f"{x:.3e}" if isinstance(x, float) and math.isfinite(x) and x != 0 else str(x)


def render_report(result: RunResult) -> str:
    s = result.scenario
    lines = [f"scenario: {s.name}", f"seed: {s.seed}", ""]
    for suite in result.suites:
        lines.append(f"[{'PASS' if suite.passed else 'FAIL'}] {suite.suite}")
        if suite.error:
            lines.append(f"    error: {suite.error}")
        for c in suite.checks:
            detail = f"  ({c.detail})" if c.detail else ""
            lines.append(f"    [{'PASS' if c.passed else 'FAIL'}] {c.name}: worst {_fmt(c.worst)}, "
                         f"tolerance {_fmt(c.tolerance)}{detail}")
        lines.append("")
    failed = sum(not c.passed for suite in result.suites for c in suite.checks) + \
        sum(bool(suite.error) for suite in result.suites)
    lines.append(f"overall: {'PASS' if result.passed else 'FAIL'} ({failed} failing check(s))")
    return "\n".join(lines) + "\n"


def plan(s: Scenario, suites=None) -> str:
    suites = list(suites or s.scenario.suites)
    lines = [f"scenario {s.name} (seed {s.seed}), output to {s.output.dir}"]
    for name in suites:
        if name == "verify-operators":
            la = s.lattice
            what = (f"{la.n_t}x{la.n_x} {la.topology} lattice: {la.identity_samples} identity inputs, "
                    f"{la.causality_samples} point sources, {la.timeslice_samples} time-slice solutions, "
                    f"{la.symplectic_samples} symplectic pairs")
        elif name == "solve-modes":
            what = f"{len(s.mode_lambdas())} lambdas x scales {list(s.modes.n_list)}"
        elif name == "deform-state":
            what = f"{s.measure.kind} measure, scale n = {s.sweep.state_n:g}, lattice CCR at {s.sweep.ccr_lattice_n}^2"
        elif name == "adiabatic-sweep":
            what = f"scales {list(s.sweep.n_list)}, tau = {s.sweep.tau:g}"
        else:
            what = f"{s.measure.kind} measure, eps {list(s.measure.eps)}, expect {s.measure.expect}"
        lines.append(f"  {name}: {what}")
    return "\n".join(lines)


def run_scenario(s: Scenario, suites=None, out_dir=None) -> RunResult:
    """Run the selected suites (default: those listed in the scenario) and write artifacts."""
    suites = list(suites or s.scenario.suites)
    out = Path(out_dir or s.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for name in suites:
        start = time.perf_counter()
        try:
            res = SUITE_FUNCS[name](s)
        except Exception as exc:  # noqa: BLE001 - reported with suite attribution
            log.exception("suite %s failed", name)
            res = SuiteResult(name, [], {}, f"{type(exc).__name__}: {exc}")
        log.info("%s: %s in %.2f s", name, "pass" if res.passed else "FAIL", time.perf_counter() - start)
        results.append(res)
    files = []
    for res in results:
        for fname, (header, rows) in res.tables.items():
            write_csv(out / fname, header, rows)
            files.append(out / fname)
    result = RunResult(s, results, files)
    (out / "report.txt").write_text(render_report(result))
    files.append(out / "report.txt")
    return result
