"""Smooth surfaces through scattered village counts.

The surface ``S`` on the grid nodes minimises

    sum_i (B_i S - z_i)^2 + stiffness * ||L S||^2,

with ``B_i`` the bilinear interpolation weights at data point ``i`` and ``L``
the mirrored second-difference Laplacian, made dimensionless by ``hx * hy``.
Negative values of the minimiser are then set to zero.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..grid import Grid
from .io import ScatteredData

CG_RTOL = 1e-13


def interpolation_matrix(points, grid: Grid) -> sp.csr_matrix:
    """Sparse bilinear interpolation from grid nodes to ``points`` in the unit square.

    Point coordinates are scaled by the domain lengths ``a`` and ``b``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if np.any(pts < 0) or np.any(pts > 1):
        raise ValueError("data point outside the domain")
    fx = pts[:, 0] * (grid.nx - 1)
    fy = pts[:, 1] * (grid.ny - 1)
    i = np.minimum(np.floor(fx).astype(int), grid.nx - 2)
    j = np.minimum(np.floor(fy).astype(int), grid.ny - 2)
    u, v = fx - i, fy - j
    rows = np.repeat(np.arange(len(pts)), 4)
    cols = np.stack([i * grid.ny + j, (i + 1) * grid.ny + j, i * grid.ny + j + 1, (i + 1) * grid.ny + j + 1], axis=1)
    w = np.stack([(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v], axis=1)
    return sp.csr_matrix((w.ravel(), (rows, cols.ravel())), shape=(len(pts), grid.nx * grid.ny))


def stiffness_operator(grid: Grid) -> sp.csr_matrix:
    return (grid.laplacian_matrix * (grid.hx * grid.hy)).tocsr()


def _solve_spd(A: sp.csr_matrix, rhs: np.ndarray, x0: np.ndarray) -> np.ndarray:
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise np.linalg.LinAlgError("normal equations are singular")
    M = sp.diags(1.0 / diag)
    x, info = spla.cg(A, rhs, x0=x0, rtol=CG_RTOL, atol=0.0, maxiter=20 * A.shape[0], M=M)
    if info != 0:
        # very small stiffness makes the system badly conditioned for CG
        x = spla.spsolve(A.tocsc(), rhs)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("normal equations are singular")
    return x


def gridfit_raw(data: ScatteredData, grid: Grid, stiffness: float = 1.0) -> np.ndarray:
    """The least-squares surface before saturation, shape ``(nx, ny)``."""
    if not stiffness > 0:
        raise ValueError("stiffness must be positive")
    if len(data.values) == 0:
        raise ValueError("need at least one data point")
    B = interpolation_matrix(data.points, grid)
    L = stiffness_operator(grid)
    A = (B.T @ B + stiffness * (L.T @ L)).tocsr()
    rhs = B.T @ data.values
    # start from the mean: constants lie in the stiffness null space
    x0 = np.full(A.shape[0], float(np.mean(data.values)))
    return _solve_spd(A, rhs, x0).reshape(grid.slice_shape)


def gridfit(data: ScatteredData, grid: Grid, stiffness: float = 1.0) -> np.ndarray:
    """Fitted surface with negative values saturated to zero."""
    return np.maximum(gridfit_raw(data, grid, stiffness), 0.0)


def misfit_terms(surface, data: ScatteredData, grid: Grid) -> tuple[float, float]:
    """``(sum_i (B_i S - z_i)^2, ||L S||^2)`` for a surface ``S``."""
    s = np.asarray(surface, dtype=float).ravel()
    r = interpolation_matrix(data.points, grid) @ s - data.values
    Ls = stiffness_operator(grid) @ s
    return float(r @ r), float(Ls @ Ls)


def fit_field(slices: list[ScatteredData], grid: Grid, stiffness: float = 1.0, times=None) -> np.ndarray:
    """Space-time data field from yearly slices.

    Each slice is fitted on its own and the surfaces are interpolated
    linearly in time onto ``grid.t``. ``times`` gives the time of each slice;
    by default it is ``label - first label``. Grid times outside the slice
    range take the nearest slice.
    """
    if not slices:
        raise ValueError("need at least one slice")
    labels = np.array([s.label for s in slices], dtype=float)
    times = labels - labels[0] if times is None else np.asarray(times, dtype=float)
    if len(times) != len(slices) or np.any(np.diff(times) <= 0):
        raise ValueError("slice times must be strictly increasing, one per slice")
    surfaces = np.stack([gridfit(s, grid, stiffness) for s in slices])
    out = np.empty(grid.shape)
    t = np.clip(grid.t, times[0], times[-1])
    k = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 1)
    for n in range(grid.nt + 1):
        lo = k[n]
        if lo == len(times) - 1:
            out[n] = surfaces[lo]
            continue
        w = (t[n] - times[lo]) / (times[lo + 1] - times[lo])
        out[n] = (1 - w) * surfaces[lo] + w * surfaces[lo + 1]
    return out
