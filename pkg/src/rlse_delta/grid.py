"""Uniform mesh on [-a, a], mesh functions, difference operators and norms.

Nodes are x_j = -a + j*h for j = 0..2M with h = a/M, so the interface node
j = M sits on the origin. Grid sums run over j = 0..2M-1 (right endpoint
excluded), which for functions vanishing at both ends is the plain sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``2*M + 1`` nodes on ``[-a, a]``."""

    a: float
    M: int

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"half-width a must be positive, got {self.a}")
        if int(self.M) != self.M or self.M <= 1:
            raise ValueError(f"M must be an integer > 1, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @classmethod
    def from_h(cls, a: float, h: float) -> GridSpec:
        M = a / h
        if abs(M - round(M)) > 1e-9 * M:
            raise ValueError(f"h={h} does not divide a={a}")
        return cls(a, int(round(M)))

    @property
    def h(self) -> float:
        return self.a / self.M

    @property
    def n_nodes(self) -> int:
        return 2 * self.M + 1

    @property
    def interface(self) -> int:
        return self.M

    @cached_property
    def x(self) -> NDArray[np.float64]:
        j = np.arange(self.n_nodes)
        x = -self.a + j * self.h
        # pin the three exact nodes against accumulated rounding
        x[0], x[self.M], x[-1] = -self.a, 0.0, self.a
        return x

    def zeros(self) -> MeshFunction:
        return MeshFunction(np.zeros(self.n_nodes, dtype=complex), self)

    def sample(self, f, zero_ends: bool = True) -> MeshFunction:
        """Evaluate ``f`` (vectorised over x) at the nodes."""
        values = np.asarray(f(self.x), dtype=complex).copy()
        if values.shape != (self.n_nodes,):
            values = np.broadcast_to(values, (self.n_nodes,)).copy()
        if zero_ends:
            values[0] = values[-1] = 0.0
        return MeshFunction(values, self)


@dataclass(frozen=True, eq=False)
class MeshFunction:
    """Complex node values on a :class:`GridSpec`.

    Endpoint values are not forced to zero here; the solver does that.
    """

    values: NDArray[np.complex128]
    grid: GridSpec = field(repr=False)

    # make numpy scalars defer to __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"expected {self.grid.n_nodes} node values, got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, j):
        return self.values[j]

    def __add__(self, other: MeshFunction) -> MeshFunction:
        _check_same_grid(self, other)
        return MeshFunction(self.values + other.values, self.grid)

    def __sub__(self, other: MeshFunction) -> MeshFunction:
        _check_same_grid(self, other)
        return MeshFunction(self.values - other.values, self.grid)

    def __mul__(self, c) -> MeshFunction:
        return MeshFunction(c * self.values, self.grid)

    __rmul__ = __mul__

    def copy(self) -> MeshFunction:
        return MeshFunction(self.values.copy(), self.grid)

    @property
    def in_zh0(self) -> bool:
        return self.values[0] == 0 and self.values[-1] == 0


def _check_same_grid(u: MeshFunction, v: MeshFunction):
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: {u.grid} vs {v.grid}")


def _check_index(u: MeshFunction, j: int, lo: int, hi: int, name: str):
    if not lo <= j <= hi:
        raise IndexError(f"{name}: index {j} outside [{lo}, {hi}]")


# Pointwise difference quotients. Valid index ranges follow the stencils.

def diff_forward(u: MeshFunction, j: int) -> complex:
    _check_index(u, j, 0, 2 * u.grid.M - 1, "diff_forward")
    return (u.values[j + 1] - u.values[j]) / u.grid.h


def diff_backward(u: MeshFunction, j: int) -> complex:
    _check_index(u, j, 1, 2 * u.grid.M, "diff_backward")
    return (u.values[j] - u.values[j - 1]) / u.grid.h


def diff_central(u: MeshFunction, j: int) -> complex:
    _check_index(u, j, 1, 2 * u.grid.M - 1, "diff_central")
    return (u.values[j + 1] - u.values[j - 1]) / (2 * u.grid.h)


def diff_second(u: MeshFunction, j: int) -> complex:
    _check_index(u, j, 1, 2 * u.grid.M - 1, "diff_second")
    v = u.values
    return (v[j + 1] - 2 * v[j] + v[j - 1]) / u.grid.h**2


# Whole-grid versions returning mesh functions in Z_h^0 layout. Entries
# outside the stencil's valid range are set to zero.

def forward_difference(u: MeshFunction) -> MeshFunction:
    out = np.zeros_like(u.values)
    out[:-1] = np.diff(u.values) / u.grid.h
    return MeshFunction(out, u.grid)


def second_difference(u: MeshFunction) -> MeshFunction:
    out = np.zeros_like(u.values)
    out[1:-1] = second_difference_interior(u.values, u.grid.h)
    return MeshFunction(out, u.grid)


def second_difference_interior(values: NDArray, h: float) -> NDArray:
    """``(v[j+1] - 2 v[j] + v[j-1]) / h**2`` for j = 1..n-2."""
    return (values[2:] - 2 * values[1:-1] + values[:-2]) / h**2


def inner_product(u: MeshFunction, v: MeshFunction) -> complex:
    """``h * sum_{j=0}^{2M-1} u_j conj(v_j)``."""
    _check_same_grid(u, v)
    return u.grid.h * np.sum(u.values[:-1] * np.conj(v.values[:-1]))


def l2_norm(u: MeshFunction) -> float:
    return float(np.sqrt(u.grid.h * np.sum(np.abs(u.values[:-1]) ** 2)))


def linf_norm(u: MeshFunction) -> float:
    return float(np.max(np.abs(u.values)))


def lq_norm(u: MeshFunction, q: float) -> float:
    if not 1 <= q < np.inf:
        raise ValueError(f"q must lie in [1, inf), got {q}")
    return float((u.grid.h * np.sum(np.abs(u.values[:-1]) ** q)) ** (1.0 / q))


def h1_seminorm(u: MeshFunction) -> float:
    """l2 norm of the forward difference."""
    return float(np.sqrt(u.grid.h * np.sum(np.abs(np.diff(u.values)) ** 2)) / u.grid.h)


def restrict(u_fine: MeshFunction, factor: int) -> MeshFunction:
    """Sample every ``factor``-th node of a nested finer grid."""
    factor = int(factor)
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"restriction factor must be a power of 2, got {factor}")
    fine = u_fine.grid
    if fine.M % factor:
        raise ValueError(f"grid with M={fine.M} does not nest a factor-{factor} coarsening")
    coarse = GridSpec(fine.a, fine.M // factor)
    return MeshFunction(u_fine.values[::factor].copy(), coarse)


def restrict_to(u_fine: MeshFunction, coarse: GridSpec) -> MeshFunction:
    """Restrict onto a given coarser grid; the two grids must nest."""
    fine = u_fine.grid
    if fine.a != coarse.a or fine.M % coarse.M:
        raise ValueError(f"grids do not nest: {fine} -> {coarse}")
    return restrict(u_fine, fine.M // coarse.M)
