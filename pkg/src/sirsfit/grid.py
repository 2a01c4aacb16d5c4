"""Uniform node-centred space-time grid on (0, T) x (0, a) x (0, b).

Fields are plain numpy arrays: a time slice has shape ``(nx, ny)`` and a
space-time field ``(nt + 1, nx, ny)``, indexed (time, x-index, y-index).
Boundary nodes are part of the grid; the homogeneous Neumann condition is
imposed through mirrored ghost nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Grid:
    nx: int = 33
    ny: int = 33
    nt: int = 100
    T: float = 1.0
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("need at least 2 nodes per spatial axis")
        if self.nt < 1:
            raise ValueError("need at least one time step")
        if not (self.T > 0 and self.a > 0 and self.b > 0):
            raise ValueError("T, a and b must be positive")

    @property
    def hx(self) -> float:
        return self.a / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.b / (self.ny - 1)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def slice_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nt + 1, self.nx, self.ny)

    @cached_property
    def x1(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @cached_property
    def x2(self) -> np.ndarray:
        return np.arange(self.ny) * self.hy

    @cached_property
    def t(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights of a time slice."""
        wx = np.full(self.nx, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny, self.hy)
        wy[[0, -1]] *= 0.5
        return np.outer(wx, wy)

    @cached_property
    def time_weights(self) -> np.ndarray:
        """Trapezoidal weights in time (``dt`` inside, ``dt/2`` at the ends)."""
        w = np.full(self.nt + 1, self.dt)
        w[[0, -1]] *= 0.5
        return w

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse 5-point Neumann Laplacian acting on row-major flattened slices."""
        return sp.kronsum(
            _neumann_second_difference(self.ny, self.hy),
            _neumann_second_difference(self.nx, self.hx),
            format="csr",
        )

    def check_slice(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-2:] != self.slice_shape:
            raise ValueError(f"expected trailing shape {self.slice_shape}, got {u.shape}")
        return u

    def check_field(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise ValueError(f"expected field shape {self.shape}, got {u.shape}")
        return u


def _neumann_second_difference(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    # mirrored ghost node: u[-1] = u[1], u[n] = u[n-2]
    upper[0] = 2.0
    lower[-1] = 2.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / h**2


def laplacian_apply(u, grid: Grid) -> np.ndarray:
    """Discrete Neumann Laplacian of a slice (or a stack of slices)."""
    u = grid.check_slice(u)
    pad = [(0, 0)] * (u.ndim - 2) + [(1, 1), (1, 1)]
    g = np.pad(u, pad, mode="reflect")
    c = g[..., 1:-1, 1:-1]
    return (g[..., 2:, 1:-1] + g[..., :-2, 1:-1] - 2 * c) / grid.hx**2 + (
        g[..., 1:-1, 2:] + g[..., 1:-1, :-2] - 2 * c
    ) / grid.hy**2


def integrate_over_domain(u, grid: Grid):
    """Trapezoidal integral over the domain; works on stacks of slices too."""
    u = grid.check_slice(u)
    return np.sum(u * grid.weights, axis=(-2, -1))


def inner(u, v, grid: Grid):
    """Trapezoidal L2(domain) inner product of two slices."""
    return integrate_over_domain(np.asarray(u) * np.asarray(v), grid)


def neumann_eigenvalue(j: int, k: int, a: float = 1.0, b: float = 1.0) -> float:
    return np.pi**2 * ((j / a) ** 2 + (k / b) ** 2)


def neumann_eigenpair(j: int, k: int, a: float = 1.0, b: float = 1.0):
    """Eigenvalue of -Laplace on (0,a)x(0,b) with Neumann data and its eigenfunction.

    The eigenfunction is L2-normalised: ``c_j c_k cos(j pi x1/a) cos(k pi x2/b)``
    with ``c_0 = 1/sqrt(a)`` and ``c_j = sqrt(2/a)`` otherwise.
    """
    if j < 0 or k < 0:
        raise ValueError("mode indices must be nonnegative")
    lam = neumann_eigenvalue(j, k, a, b)
    cj = np.sqrt((1.0 if j == 0 else 2.0) / a)
    ck = np.sqrt((1.0 if k == 0 else 2.0) / b)

    def phi(x1, x2):
        return cj * ck * np.cos(j * np.pi * np.asarray(x1) / a) * np.cos(k * np.pi * np.asarray(x2) / b)

    return lam, phi


def neumann_modes(n_modes: int, a: float = 1.0, b: float = 1.0) -> list[tuple[int, int, float]]:
    """First ``n_modes`` index pairs sorted by eigenvalue, ties broken by (j, k)."""
    if n_modes < 1:
        return []
    m = int(np.ceil(np.sqrt(n_modes))) + 1
    while True:
        modes = sorted(
            ((neumann_eigenvalue(j, k, a, b), j, k) for j in range(m + 1) for k in range(m + 1)),
        )
        # every pair with eigenvalue below the cutoff must be present
        cutoff = np.pi**2 * min((m / a) ** 2, (m / b) ** 2)
        if modes[n_modes - 1][0] < cutoff:
            return [(j, k, lam) for lam, j, k in modes[:n_modes]]
        m *= 2
