"""Banded LU factorization with partial pivoting, O(J) per factor and solve.

This is the classic LAPACK ``gbtf2``/``gbtrs`` scheme written out for small
bandwidths: row interchanges are confined to the ``kl`` rows below the
pivot, so the upper factor grows to at most ``kl + ku`` superdiagonals.
For the pentadiagonal relaxation matrix ``kl = ku = 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = ["PentaFactors", "SingularMatrixError", "factor", "factor_banded", "solve",
           "banded_matvec"]

PIVOT_FLOOR = 1e-300


class SingularMatrixError(ArithmeticError):
    """A pivot vanished (|pivot| < 1e-300) during factorization."""

    def __init__(self, row: int, message: str | None = None):
        self.row = row
        super().__init__(message or f"matrix is singular to working precision at row {row}")


@njit(cache=True, nogil=True)
def _gbtf2(ab, kl, ku, ipiv):
    # ab has 2*kl+ku+1 rows; A[i, j] lives at ab[kl+ku+i-j, j].
    n = ab.shape[1]
    kv = kl + ku
    ju = 0
    for j in range(n):
        km = min(kl, n - 1 - j)
        p = 0
        big = abs(ab[kv, j])
        for i in range(1, km + 1):
            v = abs(ab[kv + i, j])
            if v > big:
                big = v
                p = i
        ipiv[j] = j + p
        if big < PIVOT_FLOOR:
            return j + 1
        ju = max(ju, min(j + ku + p, n - 1))
        if p != 0:
            for c in range(j, ju + 1):
                t = ab[kv + j - c, c]
                ab[kv + j - c, c] = ab[kv + j + p - c, c]
                ab[kv + j + p - c, c] = t
        if km > 0:
            r = 1.0 / ab[kv, j]
            for i in range(1, km + 1):
                ab[kv + i, j] *= r
            for c in range(j + 1, ju + 1):
                u = ab[kv + j - c, c]
                if u != 0.0:
                    for i in range(1, km + 1):
                        ab[kv + j + i - c, c] -= ab[kv + i, j] * u
    return 0


@njit(cache=True, nogil=True)
def _gbtrs(ab, kl, ku, ipiv, b):
    # returns 1 (b untouched) when b has a non-finite entry
    n = ab.shape[1]
    kv = kl + ku
    for j in range(n):
        if not np.isfinite(b[j]):
            return 1
    for j in range(n):
        p = ipiv[j]
        if p != j:
            t = b[j]
            b[j] = b[p]
            b[p] = t
        bj = b[j]
        if bj != 0.0:
            for i in range(1, min(kl, n - 1 - j) + 1):
                b[j + i] -= ab[kv + i, j] * bj
    for j in range(n - 1, -1, -1):
        b[j] /= ab[kv, j]
        bj = b[j]
        if bj != 0.0:
            for i in range(1, min(kv, j) + 1):
                b[j - i] -= ab[kv - i, j] * bj
    return 0


@njit(cache=True, nogil=True)
def _band_matvec(ab, kl, ku, x, out):
    # ab in compact layout: A[i, j] at ab[ku+i-j, j].
    n = ab.shape[1]
    for i in range(n):
        s = 0.0
        for j in range(max(0, i - kl), min(n, i + ku + 1)):
            s += ab[ku + i - j, j] * x[j]
        out[i] = s


@dataclass(frozen=True, eq=False)
class PentaFactors:
    """LU factors in LAPACK band layout plus the pivot sequence."""

    lu: np.ndarray
    ipiv: np.ndarray
    kl: int
    ku: int

    @property
    def n(self) -> int:
        return self.lu.shape[1]

    @property
    def swapped(self) -> bool:
        """True when at least one row interchange happened."""
        return bool(np.any(self.ipiv != np.arange(self.n)))


def factor_banded(ab: np.ndarray, kl: int, ku: int) -> PentaFactors:
    """Factor a matrix given in compact band layout (``A[i,j]`` at ``ab[ku+i-j, j]``)."""
    ab = np.asarray(ab, dtype=float)
    if ab.shape[0] != kl + ku + 1:
        raise ValueError(f"band array needs {kl + ku + 1} rows, got {ab.shape[0]}")
    n = ab.shape[1]
    work = np.zeros((2 * kl + ku + 1, n))
    work[kl:] = ab
    ipiv = np.empty(n, dtype=np.int64)
    info = _gbtf2(work, kl, ku, ipiv)
    if info:
        raise SingularMatrixError(info - 1)
    work.setflags(write=False)
    ipiv.setflags(write=False)
    return PentaFactors(work, ipiv, kl, ku)


def factor(system) -> PentaFactors:
    """Factor a :class:`~selectrelax.operator.PentaSystem` (or anything with ``banded()``)."""
    if system.n < 5:
        raise ValueError("pentadiagonal factorization needs at least 5 unknowns")
    ab = system.banded()
    try:
        return factor_banded(ab, 2, 2)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            exc.row, f"relaxation matrix singular at row {exc.row} "
                     f"(dt={getattr(system, 'dt', float('nan')):g}); try a different dt") from None


def solve(factors: PentaFactors, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` with precomputed factors; returns a new array."""
    b = np.array(rhs, dtype=float)
    lu = factors.lu
    if b.shape != (lu.shape[1],):
        raise ValueError(f"rhs must have length {lu.shape[1]}")
    if _gbtrs(lu, factors.kl, factors.ku, factors.ipiv, b):
        raise ValueError("rhs must be finite")
    return b


def banded_matvec(ab: np.ndarray, kl: int, ku: int, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    out = np.empty_like(x)
    _band_matvec(np.ascontiguousarray(ab, dtype=float), kl, ku, x, out)
    return out
