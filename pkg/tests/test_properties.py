"""Randomized invariants (hypothesis)."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from moller import config as C
from moller import lattice as L
from moller import modes as M
from moller import states as S
from moller.cutoff import make_cutoff

finite = dict(allow_nan=False, allow_infinity=False)
# the cutoff must reach 1 by t = 0
ramps = st.tuples(st.floats(-6, -0.01, **finite), st.floats(0.01, 1, **finite)).map(
    lambda p: (p[0], p[0] * (1 - p[1])))
masses = st.floats(0.1, 3.0, **finite)


@settings(max_examples=40, deadline=None)
@given(ramps, st.sampled_from(["compact-bump", "smoothstep-poly"]), st.integers(0, 4))
def test_cutoff_is_monotone_step(ramp, kind, order):
    chi = make_cutoff(ramp, kind, order)
    t = np.linspace(ramp[0] - 1, ramp[1] + 1, 401)
    y = chi(t)
    assert np.all((y >= 0) & (y <= 1))
    assert np.all(np.diff(y) >= -1e-14)
    assert np.all(y[t <= ramp[0]] == 0) and np.all(y[t >= ramp[1]] == 1)


LAT = L.CausalLattice.on_circle(40, 32, t_min=-3.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 2.0, **finite), st.floats(0.1, 2.0, **finite), st.integers(0, 2 ** 31))
def test_moller_roundtrip_and_causality(m1, m2, seed):
    rng = np.random.default_rng(seed)
    Vp = L.PotentialProfile(m1 * m1, m2 * m2, make_cutoff((-2.0, -1.0)))
    phi = LAT.field(rng.standard_normal(LAT.shape))
    back = L.moller_inverse_apply(Vp, L.moller_apply(Vp, phi))
    assert L.relative_residual(back, phi) <= 1e-9
    src = np.zeros(LAT.shape)
    i, j = rng.integers(2, LAT.n_t), rng.integers(LAT.n_x)
    src[i, j] = 1.0
    out = L.retarded_solve(Vp.free_part, LAT.field(src)).values
    assert np.all(out[: i + 1] == 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 20.0, **finite), masses, masses, st.floats(0.05, 3.0, **finite))
def test_wronskian_is_conserved(lam, m1, m2, width):
    f = M.FrequencyProfile(lam, m1 * m1, m2 * m2, make_cutoff((-1.0 - width, -1.0)))
    sol = M.solve_mode(f, (-4.5, 0.5), n_report=51)
    assert sol.wronskian_drift <= 1e-8
    bog = M.bogoliubov(sol)
    assert abs(abs(bog.alpha) ** 2 - abs(bog.beta) ** 2 - 1) <= 1e-8


tests = st.builds(S.TestFunctionSpec, st.floats(-2, 2, **finite), st.floats(0.1, 2, **finite),
                  x_center=st.floats(0, 2 * math.pi, **finite), x_width=st.floats(0.1, 4, **finite),
                  amplitude=st.floats(0.1, 3, **finite) | st.floats(-3, -0.1, **finite))
SMALL = S.SpectralMeasure("circle", j_max=12)


@settings(max_examples=40, deadline=None)
@given(tests, tests, masses)
def test_vacuum_positive_hermitian_ccr(u, v, m):
    uu = S.vacuum_two_point(m, SMALL, u, u).value
    vv = S.vacuum_two_point(m, SMALL, v, v).value
    uv = S.vacuum_two_point(m, SMALL, u, v).value
    vu = S.vacuum_two_point(m, SMALL, v, u).value
    assert uu.real >= 0 and vv.real >= 0
    scale = math.sqrt(uu.real * vv.real)  # Cauchy-Schwarz bound on |uv|
    assert abs(uv) <= scale * (1 + 1e-12)
    assert abs(uv - np.conj(vu)) <= 1e-13 * scale
    sigma = S.mode_commutator(m, SMALL, u, v)
    assert abs(2 * uv.imag - sigma) <= 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(masses, masses, st.integers(0, 2 ** 31), st.integers(32, 96))
def test_config_round_trip(m1, m2, seed, n):
    text = (f"[scenario]\nname = prop\nseed = {seed}\n[cutoff]\nt_on = -2\nt_off = -1\n"
            f"[masses]\nm1 = {m1!r}\nm2 = {m2!r}\n[lattice]\nn_t = {n}\nn_x = {n}\n")
    s = C.parse_text(text)
    assert s.masses.m1 == m1 and s.seed == seed
    assert C.parse_text(C.serialize(s)) == s
