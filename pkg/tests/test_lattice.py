import json
from pathlib import Path

import numpy as np
import pytest

from moller import lattice as L
from moller.cutoff import make_cutoff
from oracles import dense_solve_retarded

FIXTURES = json.loads((Path(__file__).parent / "fixtures" / "lattice_regression.json").read_text())
PROBES = ((38, 5), (40, 32), (45, 60), (63, 63))


@pytest.fixture(scope="module")
def setup():
    lat = L.CausalLattice.on_circle(64, 64, t_min=-3.0)
    Vp = L.PotentialProfile(1.0, 4.0, make_cutoff((-2.0, -1.0)))
    return lat, Vp, Vp.free_part, L.PotentialProfile(1.0, 4.0)


def compact(rng, lat, margin=2):
    v = rng.standard_normal(lat.shape)
    v[:margin] = v[-margin:] = 0.0
    return lat.field(v)


def summary_close(values, ref, rtol=1e-11):
    v = np.asarray(values)
    assert abs(v.sum() - ref["sum"]) <= rtol * max(1.0, abs(ref["sum"])) * 10
    assert abs(np.sqrt((v * v).sum()) - ref["l2"]) <= rtol * ref["l2"]
    for (i, j), r in zip(PROBES, ref["probe"]):
        assert abs(v[i, j] - r) <= rtol * max(1.0, abs(r))


# --- construction -----------------------------------------------------------

def test_cfl_and_size_validation():
    with pytest.raises(L.LatticeError):
        L.CausalLattice(10, 10, 0.2, 0.1)
    with pytest.raises(L.LatticeError):
        L.CausalLattice(2, 10, 0.1, 0.1)
    with pytest.raises(L.LatticeError):
        L.CausalLattice(10, 10, 0.1, 0.1, topology="torus")
    L.CausalLattice(10, 10, 0.1, 0.1)


def test_field_shape_checked():
    lat = L.CausalLattice.on_circle(8, 8)
    with pytest.raises(L.LatticeError):
        lat.field(np.zeros((8, 7)))


def test_mismatched_lattices_rejected():
    a, b = L.CausalLattice.on_circle(8, 8), L.CausalLattice.on_circle(8, 9)
    with pytest.raises(L.LatticeError):
        L.pairing(a.zeros(), b.zeros())


# --- apply_p -------------------------------------------------------------------

def test_discrete_dispersion_is_exact():
    lat = L.CausalLattice.on_circle(40, 32, courant=0.8)
    m2, j = 1.5, 3
    k = 2 * np.pi * j / (lat.n_x * lat.dx)
    lam2 = (2 - 2 * np.cos(k * lat.dx)) / lat.dx ** 2
    w = np.arccos(1 - 0.5 * lat.dt ** 2 * (lam2 + m2)) / lat.dt
    t, x = np.meshgrid(lat.times, lat.positions, indexing="ij")
    res = L.apply_p(L.PotentialProfile.free(m2), lat.field(np.cos(w * t) * np.cos(k * x)))
    assert res.norm() < 1e-10
    assert np.all(res.values[[0, -1]] == 0)


def test_continuum_dispersion_residual_is_second_order():
    m2, j, errs = 1.0, 2, []
    for n in (32, 64, 128):
        lat = L.CausalLattice.on_circle(n, n, courant=0.5)
        w = np.sqrt(j * j + m2)
        t, x = np.meshgrid(lat.times, lat.positions, indexing="ij")
        res = L.apply_p(L.PotentialProfile.free(m2), lat.field(np.cos(w * t) * np.cos(j * x)))
        errs.append(np.max(np.abs(res.interior())))
    ratios = np.array(errs[1:]) / np.array(errs[:-1])
    assert np.all(np.abs(ratios - 0.25) < 0.02)


def test_apply_p_linear(setup, rng):
    lat, Vp, _, _ = setup
    a, b = lat.field(rng.standard_normal(lat.shape)), lat.field(rng.standard_normal(lat.shape))
    assert L.apply_p(Vp, lat.zeros()).norm() == 0
    assert L.relative_residual(L.apply_p(Vp, a + b), L.apply_p(Vp, a) + L.apply_p(Vp, b)) < 1e-12


# --- Green operators -------------------------------------------------------------

@pytest.mark.parametrize("topology", ["circle", "line-dirichlet"])
def test_retarded_matches_dense_solve(topology, rng):
    lat = L.CausalLattice(8, 8, 0.1, 0.12, topology, t_min=-0.5)
    V = L.PotentialProfile(1.0, 4.0, make_cutoff((-0.4, -0.2)))
    f = compact(rng, lat)
    ours = L.retarded_solve(V, f).values
    assert np.max(np.abs(ours - dense_solve_retarded(L, V, f))) <= 1e-10 * np.max(np.abs(ours))


def test_green_inverse_laws(setup, rng):
    lat, Vp, _, full = setup
    for V in (Vp, full):
        f = compact(rng, lat)
        assert L.relative_residual(L.apply_p(V, L.retarded_solve(V, f)), f, slice(1, -1)) < 1e-9
        assert L.relative_residual(L.apply_p(V, L.advanced_solve(V, f)), f, slice(1, -1)) < 1e-9
        g = L.causal_propagator(V, f)
        assert np.max(np.abs(L.apply_p(V, g).values)) <= 1e-9 * f.norm()


def test_causal_propagator_kills_image_of_p(setup, rng):
    lat, _, _, full = setup
    h = compact(rng, lat, margin=3)
    out = L.causal_propagator(full, L.apply_p(full, h))
    assert out.norm() <= 1e-9 * h.norm()


def test_causal_form_is_skew(setup, rng):
    lat, _, _, full = setup
    f = compact(rng, lat)
    scale = abs(L.pairing(f, L.retarded_solve(full, f)))
    assert abs(L.pairing(f, L.causal_propagator(full, f))) <= 1e-9 * scale


def test_point_source_cones_are_exact(setup, rng):
    lat, _, _, full = setup
    for _ in range(5):
        i0, j0 = int(rng.integers(2, lat.n_t - 2)), int(rng.integers(lat.n_x))
        src = lat.zeros().values
        src[i0, j0] = 1.0
        src = lat.field(src)
        ret = L.retarded_solve(full, src).values
        adv = L.advanced_solve(full, src).values
        assert np.all(ret[~L.discrete_cone_mask(lat, i0, j0, True)] == 0.0)
        assert np.all(adv[~L.discrete_cone_mask(lat, i0, j0, False)] == 0.0)
        assert np.any(ret[L.discrete_cone_mask(lat, i0, j0, True)] != 0.0)


def test_boundary_sources_rejected(setup):
    lat, _, _, full = setup
    bad = lat.zeros().values
    bad[1, 3] = 1.0
    with pytest.raises(L.PreconditionError):
        L.retarded_solve(full, lat.field(bad))
    bad = lat.zeros().values
    bad[-2, 3] = 1.0
    with pytest.raises(L.PreconditionError):
        L.advanced_solve(full, lat.field(bad))
    with pytest.raises(L.PreconditionError):
        L.causal_propagator(full, lat.field(bad))


# --- Moller maps --------------------------------------------------------------------

def test_moller_identities(setup, rng):
    lat, Vp, free, _ = setup
    for _ in range(5):
        phi, f = lat.field(rng.standard_normal(lat.shape)), compact(rng, lat)
        assert L.relative_residual(L.moller_apply(Vp, L.moller_inverse_apply(Vp, phi)), phi) < 1e-9
        assert L.relative_residual(L.moller_inverse_apply(Vp, L.moller_apply(Vp, phi)), phi) < 1e-9
        assert L.relative_residual(L.apply_p(Vp, L.moller_apply(Vp, phi)), L.apply_p(free, phi)) < 1e-9
        a, b = L.pairing(L.moller_apply(Vp, phi), f), L.pairing(phi, L.dual_moller_apply(Vp, f))
        assert abs(a - b) <= 1e-9 * max(abs(a), abs(b))
        assert L.relative_residual(L.dual_moller_inverse_apply(Vp, L.dual_moller_apply(Vp, f)), f) < 1e-9
        rep = L.compose_green_identity_check(Vp, f)
        assert rep.retarded_rel < 1e-9 and rep.causal_rel < 1e-9


def test_undeformed_maps_are_identity(rng):
    lat = L.CausalLattice.on_circle(32, 32, t_min=-3.0)
    V0 = L.PotentialProfile(1.0, 1.0, make_cutoff((-2.0, -1.0)))
    phi, f = lat.field(rng.standard_normal(lat.shape)), compact(rng, lat)
    for op, x in ((L.moller_apply, phi), (L.moller_inverse_apply, phi),
                  (L.dual_moller_apply, f), (L.dual_moller_inverse_apply, f)):
        assert np.array_equal(op(V0, x).values, x.values)
    rep = L.compose_green_identity_check(V0, f)
    assert rep.retarded <= 1e-14 * f.norm() and rep.causal <= 1e-12 * f.norm()


def test_ramp_outside_window_rejected():
    lat = L.CausalLattice.on_circle(32, 32, t_min=-1.5)
    Vp = L.PotentialProfile(1.0, 4.0, make_cutoff((-2.0, -1.0)))
    with pytest.raises(L.LatticeError):
        L.moller_apply(Vp, lat.zeros())


def test_moller_regression_fixture(setup):
    lat, Vp, _, _ = setup
    t, x = np.meshgrid(lat.times, lat.positions, indexing="ij")
    phi = lat.field(np.exp(-(t ** 2 + (x - np.pi) ** 2) / (2 * 0.36)))
    summary_close(L.moller_apply(Vp, phi).values, FIXTURES["moller_apply_gaussian"])


def test_retarded_regression_fixture(setup):
    lat, Vp, _, _ = setup
    rng = np.random.default_rng(99)
    f = rng.standard_normal(lat.shape)
    f[:2] = f[-2:] = 0
    summary_close(L.retarded_solve(Vp, lat.field(f)).values, FIXTURES["retarded_deformed_seed99"], rtol=1e-10)


# --- pairing, symplectic form ---------------------------------------------------------

def test_pairing_basics(setup, rng):
    lat, Vp, _, _ = setup
    one = lat.field(np.ones(lat.shape))
    assert L.pairing(one, one) == pytest.approx(lat.n_t * lat.n_x * lat.dt * lat.dx, rel=1e-14)
    f, g = compact(rng, lat, 3), compact(rng, lat, 3)
    assert L.pairing(f, g) == L.pairing(g, f)
    a, b = L.pairing(L.apply_p(Vp, f), g), L.pairing(f, L.apply_p(Vp, g))
    assert abs(a - b) <= 1e-9 * max(abs(a), abs(b))


def test_symplectic_antisymmetry_and_gauge(setup, rng):
    lat, _, _, full = setup
    f, g, h = compact(rng, lat), compact(rng, lat), compact(rng, lat, 3)
    s = L.symplectic_form(full, f, g)
    assert abs(s + L.symplectic_form(full, g, f)) <= 1e-9 * abs(s)
    assert abs(L.symplectic_form(full, f + L.apply_p(full, h), g) - s) <= 1e-9 * max(1.0, abs(s))


# --- time slice, composite ---------------------------------------------------------------

def test_time_slice(setup, rng):
    lat, _, _, full = setup
    band = L.BandSpec(0.5, 1.5)
    phi, psi = L.causal_propagator(full, compact(rng, lat)), L.causal_propagator(full, compact(rng, lat))
    ts = L.time_slice(full, band, phi)
    assert np.all(ts.values[~band.row_mask(lat)] == 0.0)
    assert L.relative_residual(L.causal_propagator(full, ts), phi) < 1e-9
    a, b = L.pairing(psi, ts), -L.pairing(L.time_slice(full, band, psi), phi)
    assert abs(a - b) <= 1e-9 * max(abs(a), abs(b))


def test_time_slice_requires_solution(setup, rng):
    lat, _, _, full = setup
    with pytest.raises(L.PreconditionError):
        L.time_slice(full, L.BandSpec(0.5, 1.5), lat.field(rng.standard_normal(lat.shape)))


def test_composite_preserves_symplectic_form(setup, rng):
    lat, Vp, free, full = setup
    band = L.BandSpec(0.5, 1.5)
    mask = band.row_mask(lat)[:, None]
    for _ in range(5):
        f = lat.field(rng.standard_normal(lat.shape) * mask)
        g = lat.field(rng.standard_normal(lat.shape) * mask)
        lhs = L.symplectic_form(free, L.composite_dual_moller(Vp, band, f), L.composite_dual_moller(Vp, band, g))
        rhs = L.symplectic_form(full, f, g)
        assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(rhs))


def test_composite_undeformed_is_representative_change(rng):
    lat = L.CausalLattice.on_circle(32, 32, t_min=-3.0)
    V0 = L.PotentialProfile(1.0, 1.0, make_cutoff((-2.0, -1.0)))
    band = L.BandSpec(0.5, 1.5)
    mask = band.row_mask(lat)[:, None]
    f = lat.field(rng.standard_normal(lat.shape) * mask)
    diff = L.composite_dual_moller(V0, band, f) - f
    for _ in range(10):
        g = compact(rng, lat)
        assert abs(L.symplectic_form(V0.free_part, diff, g)) <= 1e-9 * max(1.0, g.norm() * f.norm())


def test_composite_regression_fixture(setup):
    lat, Vp, _, _ = setup
    rng = np.random.default_rng(99)
    f = rng.standard_normal(lat.shape)
    f[:2] = f[-2:] = 0
    band = L.BandSpec(0.5, 1.5)
    g = rng.standard_normal(lat.shape) * band.row_mask(lat)[:, None]
    summary_close(L.composite_dual_moller(Vp, band, lat.field(g)).values, FIXTURES["composite_dual_moller"], 1e-10)


def test_band_misplacement_rejected(setup, rng):
    lat, Vp, _, _ = setup
    f = lat.field(rng.standard_normal(lat.shape))
    with pytest.raises(L.LatticeError):
        L.composite_dual_moller(Vp, L.BandSpec(-1.5, 0.5), f)
    with pytest.raises(L.LatticeError):
        L.composite_dual_moller(Vp, L.BandSpec(0.5, 3.5), f)


def test_dirichlet_line_identities(rng):
    lat = L.CausalLattice(48, 64, 0.05, 0.05, "line-dirichlet", t_min=-2.5)
    Vp = L.PotentialProfile(1.0, 4.0, make_cutoff((-2.0, -1.0)))
    f = lat.zeros().values
    f[10:30, 28:36] = rng.standard_normal((20, 8))
    f = lat.field(f)
    assert not L.reflections_clear(lat, f)  # 48 steps reach a wall 29 cells away
    short = L.CausalLattice(20, 64, 0.05, 0.05, "line-dirichlet")
    assert L.reflections_clear(short, short.field(np.pad(np.ones((20, 8)), ((0, 0), (28, 28)))))
    rep = L.compose_green_identity_check(Vp, f)
    assert rep.retarded_rel < 1e-9 and rep.causal_rel < 1e-9
    phi = lat.field(rng.standard_normal(lat.shape))
    assert L.relative_residual(L.apply_p(Vp, L.moller_apply(Vp, phi)), L.apply_p(Vp.free_part, phi)) < 1e-9
