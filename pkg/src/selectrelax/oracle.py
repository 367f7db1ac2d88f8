"""Independent reference values.

The discrete Hamiltonian here is the plain three-point ``-D2 + V``; its
spectrum comes from Sturm-sequence bisection, not from any relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import lu_factor, lu_solve, solve_banded

from .grid import Grid
from .potentials import PotentialSamples

__all__ = ["OracleSpectrum", "tridiag_spectrum", "hamiltonian_bands", "morse_levels",
           "harmonic_levels", "box_levels", "discrete_box_levels",
           "dense_penta_solve_oracle"]


@dataclass(frozen=True, eq=False)
class OracleSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None   # columns, unit discrete norm


def hamiltonian_bands(samples: PotentialSamples, grid: Grid):
    """Diagonal and off-diagonal of the three-point ``H_d``."""
    d = 2.0 / grid.dx ** 2 + samples.V
    e = np.full(len(d) - 1, -1.0 / grid.dx ** 2)
    return d, e


@njit(cache=True)
def _sturm_count(d, e2, sigma):
    # number of eigenvalues strictly below sigma
    count = 0
    q = d[0] - sigma
    if q < 0.0:
        count += 1
    for i in range(1, d.shape[0]):
        if q == 0.0:
            q = 1e-300
        q = d[i] - sigma - e2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


@njit(cache=True)
def _bisect_lowest(d, e, k):
    n = d.shape[0]
    e2 = e * e
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(e[i - 1])
        if i < n - 1:
            r += abs(e[i])
        lo = min(lo, d[i] - r)
        hi = max(hi, d[i] + r)
    scale = max(abs(lo), abs(hi))
    out = np.empty(k)
    left = lo
    for i in range(k):
        a = left
        b = hi
        for _ in range(200):
            m = 0.5 * (a + b)
            if m <= a or m >= b or b - a <= 4e-16 * scale:
                break
            if _sturm_count(d, e2, m) > i:
                b = m
            else:
                a = m
        out[i] = 0.5 * (a + b)
        left = a
    return out


def _eigenvector(d, e, lam, dx):
    n = len(d)
    ab = np.zeros((3, n))
    ab[0, 1:] = e
    ab[2, :-1] = e
    shift = lam + 1e-12 * max(1.0, abs(lam))
    ab[1] = d - shift
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)
    for _ in range(3):
        v = solve_banded((1, 1), ab, v)
        v /= np.linalg.norm(v)
    return v / math.sqrt(dx)


def tridiag_spectrum(samples: PotentialSamples, grid: Grid, k_lowest: int,
                     vectors: bool = False) -> OracleSpectrum:
    """Lowest ``k_lowest`` eigenvalues of ``H_d`` by bisection on Sturm
    counts; eigenvectors by inverse iteration when ``vectors`` is set."""
    d, e = hamiltonian_bands(samples, grid)
    if not 1 <= k_lowest <= len(d):
        raise ValueError("k_lowest must be between 1 and J")
    vals = _bisect_lowest(d, e, int(k_lowest))
    vecs = None
    if vectors:
        vecs = np.column_stack([_eigenvector(d, e, lam, grid.dx) for lam in vals])
    return OracleSpectrum(vals, vecs)


def morse_levels(mu: float) -> np.ndarray:
    """Bound levels ``-(1 - mu (n + 1/2))^2`` of ``exp(-2 mu x) - 2 exp(-mu x)``."""
    if not 0 < mu < 2:
        raise ValueError("Morse levels need 0 < mu < 2")
    n = np.arange(int(math.floor(1.0 / mu - 0.5)) + 1)
    n = n[n + 0.5 < 1.0 / mu]
    return -(1.0 - mu * (n + 0.5)) ** 2


def harmonic_levels(omega: float, count: int) -> np.ndarray:
    return (2 * np.arange(count) + 1) * float(omega)


def box_levels(L: float, count: int) -> np.ndarray:
    """``(n pi / L)^2`` for a box of width ``L``, n = 1..count."""
    n = np.arange(1, count + 1)
    return (n * np.pi / L) ** 2


def discrete_box_levels(L: float, dx: float, count: int) -> np.ndarray:
    """Exact eigenvalues of the three-point Laplacian on a box of width ``L``."""
    n = np.arange(1, count + 1)
    return (4.0 / dx ** 2) * np.sin(n * np.pi * dx / (2.0 * L)) ** 2


def dense_penta_solve_oracle(system, rhs) -> np.ndarray:
    """Solve a :class:`PentaSystem` by dense LU with partial pivoting."""
    if system.n > 2000:
        raise ValueError("dense oracle is limited to J <= 2000")
    A = system.dense()
    lu, piv = lu_factor(A, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < 1e-300:
        raise ArithmeticError("matrix is singular")
    return lu_solve((lu, piv), np.asarray(rhs, dtype=float))
