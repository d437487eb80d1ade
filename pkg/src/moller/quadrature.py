"""Composite Gauss quadrature helpers shared by the mode and state code."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def panel_rule(edges, n: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an ``n``-point Gauss-Legendre rule on every panel."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(n)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def cumulative_integral(func, edges, rtol: float = 1e-12, atol: float = 1e-15,
                        n: int = 20, max_depth: int = 30) -> np.ndarray:
    """Running integral of a vectorized ``func`` evaluated at ``edges``.

    Each panel is integrated with ``n`` and ``n + 10`` point rules and split in
    half until the two agree to the requested tolerance. Returns an array the
    size of ``edges`` starting at 0.
    """
    edges = np.asarray(edges, dtype=float)
    totals = np.zeros(edges.size - 1)
    lo, hi, owner = edges[:-1].copy(), edges[1:].copy(), np.arange(edges.size - 1)
    for _ in range(max_depth):
        if lo.size == 0:
            break
        coarse = _panel_sums(func, lo, hi, n)
        fine = _panel_sums(func, lo, hi, n + 10)
        done = np.abs(fine - coarse) <= atol + rtol * np.abs(fine)
        np.add.at(totals, owner[done], fine[done])
        lo, hi, owner = lo[~done], hi[~done], owner[~done]
        mid = 0.5 * (lo + hi)
        lo, hi, owner = np.concatenate([lo, mid]), np.concatenate([mid, hi]), np.concatenate([owner, owner])
    else:
        if lo.size:
            np.add.at(totals, owner, _panel_sums(func, lo, hi, n + 10))
    return np.concatenate([[0.0], np.cumsum(totals)])


def _panel_sums(func, lo, hi, n):
    x, w = gauss_legendre(n)
    half = 0.5 * (hi - lo)[:, None]
    mid = 0.5 * (hi + lo)[:, None]
    vals = np.asarray(func((mid + half * x).ravel())).reshape(lo.size, n)
    return np.sum(vals * w * half, axis=1)


@lru_cache(maxsize=None)
def lobatto_integration(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto nodes on [-1, 1] and the matrix mapping nodal values to
    running integrals from -1 at each node (exact for degree < p polynomials)."""
    x = -np.cos(np.pi * np.arange(p) / (p - 1))
    vander = legendre.legvander(x, p - 1)
    coeffs_to_int = np.empty((p, p))
    for j in range(p):
        c = np.zeros(p)
        c[j] = 1.0
        anti = legendre.legint(c, lbnd=-1.0)
        coeffs_to_int[:, j] = legendre.legval(x, anti)
    mat = coeffs_to_int @ np.linalg.inv(vander)
    x.flags.writeable = False
    mat.flags.writeable = False
    return x, mat
