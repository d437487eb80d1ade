"""Time-only switching functions and their adiabatic rescalings.

A cutoff rises monotonically from 0 to 1 across a ramp ``[t_on, t_off]``
(``t_off <= 0`` so the switch has completed by ``t = 0``). It is the running
integral of a smooth, non-negative, unit-mass density supported on the ramp.
Profiles are immutable and evaluated lazily; callers sample them at whatever
resolution they need.
"""

from __future__ import annotations

import dataclasses
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import _kernels

DENSITY_KINDS = ("compact-bump", "smoothstep-poly")
_KIND_CODE = {"compact-bump": _kernels.KIND_BUMP, "smoothstep-poly": _kernels.KIND_SMOOTHSTEP}


class CutoffError(ValueError):
    """Invalid ramp or scale."""


@dataclasses.dataclass(frozen=True)
class TimeInterval:
    t_on: float
    t_off: float

    def __post_init__(self):
        if not (np.isfinite(self.t_on) and np.isfinite(self.t_off)):
            raise CutoffError("ramp endpoints must be finite")
        if not self.t_on < self.t_off:
            raise CutoffError(f"need t_on < t_off, got [{self.t_on}, {self.t_off}]")
        if self.t_off > 0:
            raise CutoffError(f"need t_off <= 0 so that the cutoff equals 1 at t=0, got {self.t_off}")

    @property
    def width(self) -> float:
        return self.t_off - self.t_on


@lru_cache(maxsize=None)
def _bump_norm() -> float:
    val, _ = integrate.quad(_kernels._bump, -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


@dataclasses.dataclass(frozen=True)
class CutoffProfile:
    """chi(t) = integral of the density up to t, with chi_scale(t) = chi(t / scale).

    ``order`` is only used by the smoothstep family: the density is
    ``v**order * (1 - v)**order`` on the normalized ramp, so chi is C^order.
    """

    ramp: TimeInterval
    density_kind: str = "compact-bump"
    scale: float = 1.0
    order: int = 2

    def __post_init__(self):
        if self.density_kind not in DENSITY_KINDS:
            raise CutoffError(f"unknown density kind {self.density_kind!r}; expected one of {DENSITY_KINDS}")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise CutoffError(f"scale must be positive, got {self.scale}")
        if self.density_kind == "smoothstep-poly" and self.order < 0:
            raise CutoffError("smoothstep order must be >= 0")

    @property
    def norm(self) -> float:
        return _bump_norm() if self.density_kind == "compact-bump" else 1.0

    @property
    def support(self) -> tuple[float, float]:
        """The scaled ramp ``[scale * t_on, scale * t_off]``."""
        return self.scale * self.ramp.t_on, self.scale * self.ramp.t_off

    @property
    def kernel_args(self) -> tuple:
        a, b = self.support
        return _KIND_CODE[self.density_kind], int(self.order), self.norm, a, b

    def _eval(self, t, which):
        args = self.kernel_args
        t = np.asarray(t, dtype=float)
        out = _kernels.cutoff_eval_array(*args, np.ascontiguousarray(t.reshape(-1)), which)
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def __call__(self, t):
        return self._eval(t, 0)

    def density(self, t):
        return self._eval(t, 1)

    def density_derivative(self, t):
        return self._eval(t, 2)

    def flat_after(self, t) -> bool:
        """True where the cutoff is identically 1 from ``t`` onwards."""
        return np.asarray(t) >= self.support[1]

    def scaled(self, lam: float) -> "CutoffProfile":
        return scale_cutoff(self, lam)

    def complement(self) -> "ComplementCutoff":
        return ComplementCutoff(self)

    def metadata(self) -> dict:
        a, b = self.support
        return {"cutoff.kind": self.density_kind, "cutoff.order": self.order,
                "cutoff.t_on": a, "cutoff.t_off": b, "cutoff.scale": self.scale}


@dataclasses.dataclass(frozen=True)
class ComplementCutoff:
    """chi^-(t) = 1 - chi^+(t)."""

    plus: CutoffProfile

    def __call__(self, t):
        return 1.0 - np.asarray(self.plus(t))

    def density(self, t):
        return -np.asarray(self.plus.density(t))


def make_cutoff(ramp: TimeInterval | tuple[float, float], density_kind: str = "compact-bump",
                order: int = 2) -> CutoffProfile:
    if not isinstance(ramp, TimeInterval):
        ramp = TimeInterval(*map(float, ramp))
    return CutoffProfile(ramp, density_kind, 1.0, order)


def scale_cutoff(chi: CutoffProfile, lam: float) -> CutoffProfile:
    if not lam > 0:
        raise CutoffError(f"scale factor must be positive, got {lam}")
    return dataclasses.replace(chi, scale=chi.scale * lam)


def eval_cutoff(chi, t):
    return chi(t)


def eval_density(chi, t):
    return chi.density(t)


def complement(chi: CutoffProfile) -> ComplementCutoff:
    return chi.complement()
