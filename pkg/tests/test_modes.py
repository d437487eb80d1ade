import numpy as np
import pytest

from moller import modes as M
from moller.cutoff import make_cutoff
from oracles import constant_propagate, rk4_modes

CHI = make_cutoff((-2.0, -1.0))


def freq(lam, m1=1.0, m2=2.0, chi=CHI, n=1.0):
    return M.FrequencyProfile(lam, m1 * m1, m2 * m2, chi.scaled(n))


def test_initial_plane_wave_and_wronskian():
    f = freq(1.0)
    sol = M.solve_mode(f, (-3.0, 1.0), n_report=201)
    pre = sol.t_grid <= -2.0
    T, Td = M.plane_wave(f.omega1, sol.t_grid[pre])
    assert np.array_equal(sol.T[pre], T) and np.array_equal(sol.T_dot[pre], Td)
    assert sol.wronskian_drift <= 1e-8
    assert np.max(np.abs(M.wronskian(T, Td) - 1j)) < 1e-14


@pytest.mark.parametrize("n", [1.0, 4.0])
def test_matches_fixed_step_rk4(n):
    lams = np.array([0.0, 0.5, 1.0, 3.0])
    chi = CHI.scaled(n)
    a, b = chi.support
    T_ref, Td_ref = rk4_modes(lams, 1.0, 4.0, chi, a, b, 1e-4 if n > 1 else 1e-5)
    for lam, tr, tdr in zip(lams, T_ref, Td_ref):
        sol = M.solve_mode(M.FrequencyProfile(lam, 1.0, 4.0, chi), (a - 0.5, 0.5), n_report=11)
        T, Td = sol.evaluate(b)
        assert abs(T[0] - tr) < 1e-8 and abs(Td[0] - tdr) < 1e-8


def test_post_ramp_is_closed_form():
    f = freq(0.7)
    sol = M.solve_mode(f, (-3.0, 2.0), n_report=501)
    t_exit, T0, Td0 = sol.exit_state
    post = sol.t_grid > -1.0
    ref = constant_propagate(f.omega2, t_exit, T0, Td0, sol.t_grid[post])
    assert np.max(np.abs(sol.T[post] - ref)) < 1e-14


def test_evaluate_inside_ramp_matches_report_grid():
    f = freq(2.0)
    sol = M.solve_mode(f, (-2.5, 0.0), n_report=251)
    inside = (sol.t_grid > -2) & (sol.t_grid < -1)
    T, _ = sol.evaluate(sol.t_grid[inside])
    assert np.max(np.abs(T - sol.T[inside])) < 1e-9


def test_zero_frequency_rejected():
    with pytest.raises(M.ModeError, match="zero-frequency"):
        M.solve_mode(freq(0.0, m1=0.0), (-3.0, 0.0))
    with pytest.raises(M.ModeError):
        M.FrequencyProfile(-1.0, 1.0, 1.0, CHI)


def test_window_must_start_before_ramp():
    with pytest.raises(M.ModeError):
        M.solve_mode(freq(1.0), (-1.5, 0.0))


def test_wronskian_failure_is_reported():
    with pytest.raises(M.IntegrationError, match="Wronskian"):
        M.solve_mode(freq(5.0), (-3.0, 0.0), tol=1e-3, atol=1e-3, wronskian_tol=1e-14, refinements=0)


def test_tolerance_refinement_recovers():
    # at rtol 1e-8 this stretched ramp drifts by ~3e-7; one tenfold refinement fixes it
    f = M.FrequencyProfile(5.0, 1.0, 4.0, make_cutoff((-2.0, -1.0)).scaled(8.0))
    sol = M.solve_mode(f, (-17.0, 0.0), tol=1e-8, atol=1e-8, wronskian_tol=1e-7)
    assert sol.solver_meta["refinements"] == 1
    assert sol.wronskian_drift <= 1e-7
    with pytest.raises(M.IntegrationError):
        M.solve_mode(f, (-17.0, 0.0), tol=1e-8, atol=1e-8, wronskian_tol=1e-7, refinements=0)


def test_undeformed_mode_is_plane_wave():
    f = freq(1.3, m2=1.0)
    sol = M.solve_mode(f, (-3.0, 1.0), n_report=101)
    T, _ = M.plane_wave(f.omega1, sol.t_grid)
    assert np.max(np.abs(sol.T - T)) < 1e-10
    pair = M.bogoliubov(sol)
    assert abs(pair.beta) < 1e-10 and abs(pair.alpha - 1) < 1e-10


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0, 2.0])
def test_sudden_limit(lam):
    chi = make_cutoff((-1.0e-3, 0.0))
    f = M.FrequencyProfile(lam, 1.0, 4.0, chi)
    pair = M.bogoliubov(M.solve_mode(f, (-0.5, 0.5), n_report=11))
    # the jump happens at t ~ -5e-4, so phases are referenced there
    w1, w2 = f.omega1, f.omega2
    t_j = -5e-4
    a_ref = (w1 + w2) / (2 * np.sqrt(w1 * w2)) * np.exp(1j * (w2 - w1) * t_j)
    b_ref = (w2 - w1) / (2 * np.sqrt(w1 * w2)) * np.exp(-1j * (w2 + w1) * t_j)
    assert abs(abs(pair.alpha) - abs(a_ref)) <= 0.01 * abs(a_ref)
    assert abs(abs(pair.beta) - abs(b_ref)) <= 0.01 * abs(b_ref)
    assert abs(pair.alpha - a_ref) <= 0.01 * abs(a_ref)


def test_bogoliubov_normalization_and_late_time_choice():
    sol = M.solve_mode(freq(1.0), (-3.0, 2.0), n_report=11)
    p1, p2 = M.bogoliubov(sol), M.bogoliubov(sol, t_late=1.7)
    assert p1.normalization_defect < 1e-8
    assert abs(p1.alpha - p2.alpha) < 1e-10 and abs(p1.beta - p2.beta) < 1e-10
    with pytest.raises(M.ModeError):
        M.bogoliubov(sol, t_late=-1.5)


def test_adiabatic_beta_decreases():
    betas = []
    for n in (1, 2, 4, 8):
        f = freq(1.0, n=n)
        a, b = f.cutoff.support
        betas.append(abs(M.bogoliubov(M.solve_mode(f, (a - 1, 1.0), n_report=3)).beta))
    assert all(y < x for x, y in zip(betas, betas[1:]))


@pytest.mark.parametrize("m1,m2", [(1.0, 2.0), (2.0, 1.0)])
def test_energy_over_omega_sq_monotone(m1, m2):
    sol = M.solve_mode(freq(0.8, m1, m2), (-3.0, 1.0), n_report=801)
    ratio = M.mode_energy(sol) / sol.freq.omega_sq(sol.t_grid)
    sign = np.sign(m2 - m1)
    assert np.max(sign * np.diff(ratio)) <= 1e-8


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_massless_start_bound(lam):
    sol = M.solve_mode(freq(lam, m1=0.0, m2=1.0), (-3.0, 2.0), n_report=801)
    assert np.max(np.abs(sol.T) ** 2) <= 1 / lam + 1e-8


def test_wkb_mode_exact_before_ramp_and_bound():
    f = freq(0.8)
    window = (-3.0, 1.0)
    sol, wkb = M.solve_mode(f, window, n_report=401), M.wkb_mode(f, window, n_report=401)
    pre = sol.t_grid <= -2.0
    assert np.max(np.abs(sol.T[pre] - wkb.T[pre])) < 1e-12
    bound = M.wkb_error_bound(f, window, n_report=401)
    assert np.all(np.abs(sol.T - wkb.T) <= bound)
    assert np.max(np.abs(M.wronskian(wkb.T, wkb.T_dot) - 1j)) < 1e-12


def test_delta_vanishes_off_ramp():
    f = freq(1.0)
    t = np.array([-3.0, -2.5, -0.5, 0.0])
    assert np.all(M.delta_potential(f, t) == 0)
    assert M.adiabaticity(f) > 0
    running = M.adiabaticity(f, np.array([-2.0, -1.5, -1.0]))
    assert running[0] == 0 and running[-1] == pytest.approx(M.adiabaticity(f), rel=1e-9)


def test_dyson_converges_to_direct_solve():
    f = freq(2.0, n=2.0)
    a = f.cutoff.support[0]
    window = (a - 0.5, 1.0)
    assert M.adiabaticity(f) < 0.1
    sol = M.solve_mode(f, window, n_report=201)
    errs = [np.max(np.abs(M.dyson_solve(f, window, L, n_report=201).T - sol.T)) for L in range(4)]
    assert all(y < x for x, y in zip(errs, errs[1:]))
    assert errs[3] < 1e-6


def test_parallel_map_is_ordered_and_deterministic(monkeypatch):
    fs = [freq(lam) for lam in np.linspace(0.2, 4, 9)]
    monkeypatch.setenv("MOLLER_THREADS", "1")
    assert M.thread_count() == 1
    serial = M.solve_modes(fs, (-3.0, 0.5), n_report=21)
    monkeypatch.setenv("MOLLER_THREADS", "4")
    assert M.thread_count() == 4
    parallel = M.solve_modes(fs, (-3.0, 0.5), n_report=21)
    for s, p in zip(serial, parallel):
        assert s.freq == p.freq and np.array_equal(s.T, p.T)
