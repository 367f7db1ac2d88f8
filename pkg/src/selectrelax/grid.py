"""Uniform 1D lattices and the discrete inner product used throughout."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Grid", "Wavefunction", "DomainTooSmallError", "GridMismatchError",
           "make_grid", "norm", "inner"]

MIN_INTERIOR = 5


class DomainTooSmallError(ValueError):
    """Raised when a lattice would have fewer than five interior points."""


class GridMismatchError(ValueError):
    """Raised when two wavefunctions live on different lattices."""


@dataclass(frozen=True)
class Grid:
    """Lattice ``x_j = x_min + j*dx`` for ``j = 0..J+1``.

    Only the ``J`` interior nodes carry unknowns; the two boundary nodes
    hold ``psi = 0``.
    """

    x_min: float
    x_max: float
    J: int
    dx: float

    def __post_init__(self):
        if self.J < MIN_INTERIOR:
            raise DomainTooSmallError(
                f"lattice needs at least {MIN_INTERIOR} interior points, got J={self.J}")
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        span = self.x_max - self.x_min
        if abs((self.J + 1) * self.dx - span) > 1e-12 * max(abs(span), 1.0):
            raise ValueError("(J+1)*dx must equal x_max - x_min")

    def node(self, j):
        """Position of node ``j``, measured from the nearer end so that a
        lattice symmetric about 0 has exactly antisymmetric positions."""
        j = np.asarray(j)
        m = self.J + 1
        return np.where(2 * j <= m, self.x_min + j * self.dx, self.x_max - (m - j) * self.dx)

    @property
    def x(self) -> np.ndarray:
        """Interior node positions, length J."""
        return self.node(np.arange(1, self.J + 1))

    @property
    def x_full(self) -> np.ndarray:
        """All nodes including the two Dirichlet boundary nodes."""
        return self.node(np.arange(self.J + 2))

    @property
    def is_symmetric(self) -> bool:
        return abs(self.x_min + self.x_max) <= 1e-12 * max(abs(self.x_min), abs(self.x_max), 1.0)


@dataclass(frozen=True, eq=False)
class Wavefunction:
    """Real samples ``psi_1..psi_J`` on the interior of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.J,):
            raise ValueError(f"expected {self.grid.J} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("wavefunction samples must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __mul__(self, c: float) -> "Wavefunction":
        return Wavefunction(self.grid, c * self.values)

    __rmul__ = __mul__

    def normalized(self) -> "Wavefunction":
        n = norm(self)
        if n == 0:
            raise ValueError("cannot normalize the zero wavefunction")
        return Wavefunction(self.grid, self.values / n)

    def with_boundary(self) -> np.ndarray:
        """Samples on all J+2 nodes, zeros at both ends."""
        return np.concatenate(([0.0], self.values, [0.0]))


def make_grid(x_min: float, x_max: float, dx: float) -> Grid:
    """Build the lattice spanning ``[x_min, x_max]`` with step close to ``dx``.

    The span is kept and the step is adjusted so that ``(J+1)*dx`` equals it
    exactly; read the step actually used from ``Grid.dx``.
    """
    if not x_max > x_min:
        raise ValueError("x_max must exceed x_min")
    if not dx > 0:
        raise ValueError("dx must be positive")
    span = x_max - x_min
    cells = int(round(span / dx))
    if cells - 1 < MIN_INTERIOR:
        raise DomainTooSmallError(
            f"span {span:g} with step {dx:g} leaves {max(cells - 1, 0)} interior points "
            f"(need {MIN_INTERIOR})")
    return Grid(float(x_min), float(x_max), cells - 1, span / cells)


def _check_same(a: Wavefunction, b: Wavefunction) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("wavefunctions are defined on different grids")


def inner(psi: Wavefunction, phi: Wavefunction) -> float:
    """Discrete L2 inner product ``sum(psi*phi)*dx``."""
    _check_same(psi, phi)
    return math.fsum(psi.values * phi.values) * psi.grid.dx


def norm(psi: Wavefunction) -> float:
    return math.sqrt(math.fsum(psi.values * psi.values) * psi.grid.dx)
