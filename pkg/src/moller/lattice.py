"""Exact causal calculus for the Klein-Gordon operator on a 1+1D lattice.

The operator is the 3-point leapfrog discretization

    (P_V phi)_i = -(phi_{i+1} - 2 phi_i + phi_{i-1}) / dt^2 + (Lap phi)_i - V_eff(t_i) phi_i

on interior time rows ``1 .. n_t - 2``. Retarded and advanced Green operators
are explicit forward/backward recursions with zero data on the first/last two
rows, which makes them exact inverses of the discrete ``P_V`` on past/future
compact sources. Every identity between Moller operators, time-slice maps and
Green operators then holds to roundoff, independent of ``dt`` and ``dx``.

"Past compact" means vanishing on rows 0 and 1, "future compact" vanishing on
rows ``n_t - 2`` and ``n_t - 1``.

Sign convention: with ``P`` the free operator of mass m1, ``P_{V+} = P + V+``
where the multiplication operator is ``V+ = -(V_eff - m1^2)``
(:meth:`PotentialProfile.coupling`).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import _kernels
from .cutoff import CutoffProfile

TOPOLOGIES = ("circle", "line-dirichlet")


class LatticeError(ValueError):
    """Invalid lattice, band or configuration."""


class PreconditionError(ValueError):
    """An input violates the support/solution requirements of an operator."""


@dataclasses.dataclass(frozen=True)
class CausalLattice:
    n_t: int
    n_x: int
    dt: float
    dx: float
    topology: str = "circle"
    t_min: float = 0.0

    def __post_init__(self):
        if self.n_t < 3 or self.n_x < 3:
            raise LatticeError(f"need n_t, n_x >= 3, got ({self.n_t}, {self.n_x})")
        if not (self.dt > 0 and self.dx > 0):
            raise LatticeError("dt and dx must be positive")
        if self.dt / self.dx > 1 + 1e-12:
            raise LatticeError(f"CFL violated: dt/dx = {self.dt / self.dx:.6g} > 1")
        if self.topology not in TOPOLOGIES:
            raise LatticeError(f"unknown topology {self.topology!r}; expected one of {TOPOLOGIES}")

    @classmethod
    def on_circle(cls, n_t: int, n_x: int, circumference: float = 2 * np.pi,
                  courant: float = 1.0, t_min: float = 0.0) -> "CausalLattice":
        dx = circumference / n_x
        return cls(n_t, n_x, courant * dx, dx, "circle", t_min)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_t, self.n_x

    @property
    def times(self) -> np.ndarray:
        return self.t_min + self.dt * np.arange(self.n_t)

    @property
    def positions(self) -> np.ndarray:
        if self.topology == "circle":
            return self.dx * np.arange(self.n_x)
        # Dirichlet walls sit one cell outside the first and last site
        return self.dx * np.arange(1, self.n_x + 1)

    @property
    def t_max(self) -> float:
        return self.t_min + self.dt * (self.n_t - 1)

    def field(self, values) -> "LatticeField":
        return LatticeField(np.asarray(values, dtype=float), self)

    def zeros(self) -> "LatticeField":
        return LatticeField(np.zeros(self.shape), self)

    def laplacian_rows(self, rows: np.ndarray) -> np.ndarray:
        """Second spatial difference along the last axis."""
        if self.topology == "circle":
            nb = np.roll(rows, 1, axis=-1) + np.roll(rows, -1, axis=-1)
        else:
            nb = np.zeros_like(rows)
            nb[..., 1:] += rows[..., :-1]
            nb[..., :-1] += rows[..., 1:]
        return (nb - 2.0 * rows) / self.dx ** 2


@dataclasses.dataclass(frozen=True, eq=False)
class LatticeField:
    values: np.ndarray
    lattice: CausalLattice
    # set by apply_p: rows 0 and n_t-1 carry no equation and are zero-filled
    boundary_rows_zeroed: bool = False

    def __post_init__(self):
        if self.values.shape != self.lattice.shape:
            raise LatticeError(f"field shape {self.values.shape} does not match lattice {self.lattice.shape}")

    def _check(self, other: "LatticeField"):
        if other.lattice != self.lattice:
            raise LatticeError("fields live on different lattices")

    def __add__(self, other):
        self._check(other)
        return LatticeField(self.values + other.values, self.lattice)

    def __sub__(self, other):
        self._check(other)
        return LatticeField(self.values - other.values, self.lattice)

    def __mul__(self, scalar: float):
        return LatticeField(self.values * scalar, self.lattice)

    __rmul__ = __mul__

    def __neg__(self):
        return LatticeField(-self.values, self.lattice)

    def norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def interior(self) -> np.ndarray:
        return self.values[1:-1]


@dataclasses.dataclass(frozen=True)
class PotentialProfile:
    """V_eff(t) = m1^2 + (m2^2 - m1^2) chi(t), or the constant m2^2 without a cutoff."""

    base_mass_sq: float
    target_mass_sq: float
    cutoff: CutoffProfile | None = None

    @classmethod
    def free(cls, mass_sq: float) -> "PotentialProfile":
        return cls(mass_sq, mass_sq, None)

    @property
    def free_part(self) -> "PotentialProfile":
        return PotentialProfile.free(self.base_mass_sq)

    def v_eff(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.cutoff is None:
            return np.full(t.shape, float(self.target_mass_sq))
        return self.base_mass_sq + (self.target_mass_sq - self.base_mass_sq) * np.asarray(self.cutoff(t))

    def coupling(self, t) -> np.ndarray:
        """The multiplication operator V with P_V = P_free + V."""
        return -(self.v_eff(t) - self.base_mass_sq)

    @property
    def is_free(self) -> bool:
        return self.target_mass_sq == self.base_mass_sq


@dataclasses.dataclass(frozen=True)
class BandSpec:
    """Time band [t_a, t_b] with a smooth step eta+ rising inside it."""

    t_a: float
    t_b: float

    def __post_init__(self):
        if not self.t_a < self.t_b:
            raise LatticeError(f"band needs t_a < t_b, got [{self.t_a}, {self.t_b}]")

    def validate(self, lattice: CausalLattice, cutoff: CutoffProfile | None = None):
        t = lattice.times
        if not (self.t_a > t[1] and self.t_b < t[-2]):
            raise LatticeError(f"band [{self.t_a}, {self.t_b}] must lie strictly inside "
                               f"the window ({t[1]}, {t[-2]})")
        if self.t_b - self.t_a <= 3 * lattice.dt:
            raise LatticeError("band must span more than three time steps")
        if cutoff is not None and self.t_a < cutoff.support[1]:
            raise LatticeError(f"band starts at {self.t_a}, before the cutoff settles at "
                               f"{cutoff.support[1]}; it must lie where chi+ == 1")

    def eta(self, lattice: CausalLattice) -> np.ndarray:
        """eta+ per time row. The step is pulled in by one row on each side so
        that P_V(eta+ phi) is supported inside [t_a, t_b]."""
        lo, hi = self.t_a + lattice.dt, self.t_b - lattice.dt
        from .cutoff import _bump_norm
        return _kernels.cutoff_eval_array(_kernels.KIND_BUMP, 0, _bump_norm(), lo, hi,
                                          np.ascontiguousarray(lattice.times), 0)

    def row_mask(self, lattice: CausalLattice) -> np.ndarray:
        t = lattice.times
        return (t >= self.t_a - 1e-12 * lattice.dt) & (t <= self.t_b + 1e-12 * lattice.dt)


def _same_lattice(*fields: LatticeField) -> CausalLattice:
    lat = fields[0].lattice
    for f in fields[1:]:
        if f.lattice != lat:
            raise LatticeError("fields live on different lattices")
    return lat


def _rows_vanish(values: np.ndarray, rows) -> bool:
    return not np.any(values[list(rows)])


def apply_p(V: PotentialProfile, phi: LatticeField) -> LatticeField:
    lat = phi.lattice
    u = phi.values
    out = np.zeros_like(u)
    veff = V.v_eff(lat.times[1:-1])[:, None]
    out[1:-1] = (-(u[2:] - 2.0 * u[1:-1] + u[:-2]) / lat.dt ** 2
                 + lat.laplacian_rows(u[1:-1]) - veff * u[1:-1])
    return LatticeField(out, lat, boundary_rows_zeroed=True)


def retarded_solve(V: PotentialProfile, f: LatticeField) -> LatticeField:
    """phi with P_V phi = f on interior rows and phi = 0 on rows 0, 1."""
    lat = f.lattice
    src = f.values
    if not _rows_vanish(src, (0, 1)):
        raise PreconditionError("retarded source must vanish on the first two time rows")
    veff = V.v_eff(lat.times)
    dt2 = lat.dt ** 2
    phi = np.zeros_like(src)
    for i in range(1, lat.n_t - 1):
        phi[i + 1] = (2.0 * phi[i] - phi[i - 1]
                      + dt2 * (lat.laplacian_rows(phi[i]) - veff[i] * phi[i] - src[i]))
    return LatticeField(phi, lat)


def advanced_solve(V: PotentialProfile, f: LatticeField) -> LatticeField:
    """phi with P_V phi = f on interior rows and phi = 0 on the last two rows."""
    lat = f.lattice
    src = f.values
    n = lat.n_t
    if not _rows_vanish(src, (n - 2, n - 1)):
        raise PreconditionError("advanced source must vanish on the last two time rows")
    veff = V.v_eff(lat.times)
    dt2 = lat.dt ** 2
    phi = np.zeros_like(src)
    for i in range(n - 2, 0, -1):
        phi[i - 1] = (2.0 * phi[i] - phi[i + 1]
                      + dt2 * (lat.laplacian_rows(phi[i]) - veff[i] * phi[i] - src[i]))
    return LatticeField(phi, lat)


def causal_propagator(V: PotentialProfile, f: LatticeField) -> LatticeField:
    n = f.lattice.n_t
    if not _rows_vanish(f.values, (0, 1, n - 2, n - 1)):
        raise PreconditionError("causal propagator needs a source vanishing on the first and last two rows")
    return retarded_solve(V, f) - advanced_solve(V, f)


def _check_window(Vplus: PotentialProfile, lat: CausalLattice):
    if Vplus.cutoff is None:
        return
    a, b = Vplus.cutoff.support
    t = lat.times
    if not (t[1] <= a and b <= t[-1]):
        raise LatticeError(f"scaled ramp [{a}, {b}] must lie inside the lattice window "
                           f"[{t[1]}, {t[-1]}] with chi+ = 0 on the first two rows")


def _times_coupling(Vplus: PotentialProfile, phi: LatticeField) -> LatticeField:
    lat = phi.lattice
    return LatticeField(Vplus.coupling(lat.times)[:, None] * phi.values, lat)


def moller_apply(Vplus: PotentialProfile, phi: LatticeField) -> LatticeField:
    """R phi = phi - G+_{V+}(V+ phi)."""
    _check_window(Vplus, phi.lattice)
    if Vplus.is_free:
        return LatticeField(phi.values.copy(), phi.lattice)
    return phi - retarded_solve(Vplus, _times_coupling(Vplus, phi))


def moller_inverse_apply(Vplus: PotentialProfile, phi: LatticeField) -> LatticeField:
    """R^{-1} phi = phi + G+(V+ phi), G+ of the free operator."""
    _check_window(Vplus, phi.lattice)
    if Vplus.is_free:
        return LatticeField(phi.values.copy(), phi.lattice)
    return phi + retarded_solve(Vplus.free_part, _times_coupling(Vplus, phi))


def dual_moller_apply(Vplus: PotentialProfile, f: LatticeField) -> LatticeField:
    """R* f = f - V+ G-_{V+} f."""
    _check_window(Vplus, f.lattice)
    g = advanced_solve(Vplus, f)
    if Vplus.is_free:
        return LatticeField(f.values.copy(), f.lattice)
    return f - _times_coupling(Vplus, g)


def dual_moller_inverse_apply(Vplus: PotentialProfile, f: LatticeField) -> LatticeField:
    """R*^{-1} f = f + V+ G- f, G- of the free operator."""
    _check_window(Vplus, f.lattice)
    g = advanced_solve(Vplus.free_part, f)
    if Vplus.is_free:
        return LatticeField(f.values.copy(), f.lattice)
    return f + _times_coupling(Vplus, g)


def pairing(f: LatticeField, g: LatticeField) -> float:
    lat = _same_lattice(f, g)
    return float(np.sum(f.values * g.values) * lat.dt * lat.dx)


def symplectic_form(V: PotentialProfile, f: LatticeField, f_prime: LatticeField) -> float:
    return pairing(f, causal_propagator(V, f_prime))


def relative_residual(lhs: LatticeField, rhs: LatticeField, rows=slice(None)) -> float:
    diff = np.max(np.abs(lhs.values[rows] - rhs.values[rows]))
    scale = max(np.max(np.abs(rhs.values[rows])), np.max(np.abs(lhs.values[rows])))
    return float(diff / scale) if scale > 0 else float(diff)


@dataclasses.dataclass(frozen=True)
class GreenIdentityReport:
    retarded: float
    causal: float
    retarded_rel: float
    causal_rel: float
    source_norm: float


def compose_green_identity_check(Vplus: PotentialProfile, f: LatticeField) -> GreenIdentityReport:
    """Residuals of R G+ = G+_{V+} and R G R~* = G_{V+} applied to ``f``."""
    free = Vplus.free_part
    lhs1 = moller_apply(Vplus, retarded_solve(free, f))
    rhs1 = retarded_solve(Vplus, f)
    lhs2 = moller_apply(Vplus, causal_propagator(free, dual_moller_apply(Vplus, f)))
    rhs2 = causal_propagator(Vplus, f)
    r1 = float(np.max(np.abs(lhs1.values - rhs1.values)))
    r2 = float(np.max(np.abs(lhs2.values - rhs2.values)))
    return GreenIdentityReport(r1, r2, relative_residual(lhs1, rhs1), relative_residual(lhs2, rhs2), f.norm())


def operator_scale(V: PotentialProfile, lat: CausalLattice) -> float:
    """Bound on the max-norm of P_V as a matrix, to judge 'is a solution'."""
    return 4 / lat.dt ** 2 + 4 / lat.dx ** 2 + float(np.max(np.abs(V.v_eff(lat.times))))


def time_slice(V: PotentialProfile, band: BandSpec, phi: LatticeField, tol: float = 1e-9) -> LatticeField:
    """TS(phi) = P_V(eta+ phi) for a lattice solution phi."""
    lat = phi.lattice
    band.validate(lat)
    resid = apply_p(V, phi).norm()
    if resid > tol * max(phi.norm(), 1e-300) * operator_scale(V, lat):
        raise PreconditionError(f"input is not a solution: |P_V phi| = {resid:.3e}")
    return _band_source(V, band, phi)


def _band_source(V, band, phi):
    # Off the band eta+ phi is 0 or a solution, so P_V(eta+ phi) vanishes there
    # up to roundoff; the mask makes those zeros exact.
    lat = phi.lattice
    out = apply_p(V, LatticeField(band.eta(lat)[:, None] * phi.values, lat)).values
    out[~band.row_mask(lat)] = 0.0
    return LatticeField(out, lat)


def composite_dual_moller(Vplus: PotentialProfile, band: BandSpec, f: LatticeField) -> LatticeField:
    """R*[f] = -(R*_{0,V+} o TS*_{V+} o G_V) f with TS* = -TS on solutions.

    ``G_V`` is the causal propagator of the full constant potential m2^2.
    """
    lat = f.lattice
    band.validate(lat, Vplus.cutoff)
    _check_window(Vplus, lat)
    outside = ~band.row_mask(lat)
    if np.any(f.values[outside]):
        raise PreconditionError("source must be supported inside the band")
    full = PotentialProfile(Vplus.base_mass_sq, Vplus.target_mass_sq, None)
    psi = causal_propagator(full, f)
    # psi solves the m2 dynamics; P_{V+} = P_V on the band, so this is TS_{V+}
    ts_dual = -_band_source(Vplus, band, psi)
    return -dual_moller_apply(Vplus, ts_dual)


def dense_retarded_matrix(V: PotentialProfile, lat: CausalLattice) -> np.ndarray:
    """P_V as a dense map from rows 2..n_t-1 (unknowns) to rows 1..n_t-2 (equations).

    Only for small lattices; used as an independent check of the recursion.
    """
    n_t, n_x = lat.shape
    size = n_t * n_x
    full = np.zeros((size, size))
    for k in range(size):
        e = np.zeros(size)
        e[k] = 1.0
        full[:, k] = apply_p(V, LatticeField(e.reshape(lat.shape), lat)).values.ravel()
    rows = np.arange(n_x, (n_t - 1) * n_x)
    cols = np.arange(2 * n_x, n_t * n_x)
    return full[np.ix_(rows, cols)]


def discrete_cone_mask(lat: CausalLattice, i0: int, j0: int, future: bool = True) -> np.ndarray:
    """Sites reachable from (i0, j0) at one cell per step (periodic on the circle)."""
    i = np.arange(lat.n_t)[:, None]
    j = np.arange(lat.n_x)[None, :]
    dj = np.abs(j - j0)
    if lat.topology == "circle":
        dj = np.minimum(dj, lat.n_x - dj)
    steps = (i - i0) if future else (i0 - i)
    return (steps >= 0) & (dj <= steps)


def reflections_clear(lat: CausalLattice, *fields: LatticeField) -> bool:
    """On the Dirichlet line, True if no signal from the field supports can reach a
    wall and come back within the time window."""
    if lat.topology == "circle":
        return True
    reach = lat.n_t
    for fld in fields:
        cols = np.flatnonzero(np.any(fld.values != 0, axis=0))
        if cols.size and min(cols[0] + 1, lat.n_x - cols[-1]) <= reach:
            return False
    return True
