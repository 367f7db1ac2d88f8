"""Pentadiagonal relaxation matrix for one implicit step of
``d psi/dt = -(H - E)^2 psi`` and its von Neumann stability diagnostic.

Row ``j`` of the discretized right-hand side reads::

    gamma*psi[j+2] + beta_minus[j]*psi[j+1] + alpha[j]*psi[j]
        + beta_plus[j]*psi[j-1] + gamma*psi[j-2]

with ghost values ``psi = 0`` beyond both ends of the lattice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .grid import Grid
from .potentials import PotentialSamples

__all__ = ["StencilCoeffs", "PentaSystem", "SCHEMES", "stencil", "squared_stencil",
           "make_stencil", "assemble", "apply_stencil", "stability_min_dt",
           "von_neumann_symbol", "growth_factor", "N_K_SAMPLES"]

SCHEMES = ("direct", "consistent")
N_K_SAMPLES = 1024


@dataclass(frozen=True, eq=False)
class StencilCoeffs:
    gamma: float
    beta_minus: np.ndarray
    beta_plus: np.ndarray
    alpha: np.ndarray

    @property
    def n(self) -> int:
        return len(self.alpha)


@dataclass(frozen=True, eq=False)
class PentaSystem:
    """``R = I + dt*M`` stored by diagonals.

    ``sup1[i] = R[i, i+1]``, ``sub1[i] = R[i+1, i]``, and likewise for the
    second diagonals.
    """

    diag: np.ndarray
    sup1: np.ndarray
    sub1: np.ndarray
    sup2: np.ndarray
    sub2: np.ndarray
    dt: float
    E: float

    @property
    def n(self) -> int:
        return len(self.diag)

    def banded(self) -> np.ndarray:
        """Compact band layout, ``R[i, j]`` at ``ab[2+i-j, j]``."""
        n = self.n
        ab = np.zeros((5, n))
        ab[0, 2:] = self.sup2
        ab[1, 1:] = self.sup1
        ab[2] = self.diag
        ab[3, :-1] = self.sub1
        ab[4, :-2] = self.sub2
        return ab

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[:-1] += self.sup1 * x[1:]
        y[1:] += self.sub1 * x[:-1]
        y[:-2] += self.sup2 * x[2:]
        y[2:] += self.sub2 * x[:-2]
        return y

    def dense(self) -> np.ndarray:
        n = self.n
        A = np.diag(self.diag)
        A[np.arange(n - 1), np.arange(1, n)] = self.sup1
        A[np.arange(1, n), np.arange(n - 1)] = self.sub1
        A[np.arange(n - 2), np.arange(2, n)] = self.sup2
        A[np.arange(2, n), np.arange(n - 2)] = self.sub2
        return A


def stencil(samples: PotentialSamples, grid: Grid, E: float) -> StencilCoeffs:
    """Five-point coefficients of ``(H - E)^2`` from centered differences of
    every term in ``psi'''' - 2W psi'' - 2W' psi' - W'' psi + W^2 psi``
    (``W = V - E``)."""
    dx = grid.dx
    gamma = 1.0 / dx ** 4
    W = E - samples.V
    c2 = 2.0 / (dx * dx)
    base = -4.0 * gamma + c2 * W
    drift = samples.Vp / dx
    # 6*gamma is not always representable; adding 4*gamma and 2*gamma
    # separately keeps the biharmonic row sum exactly zero, so the rounding
    # of the large constant cannot shift every eigenvalue by the same amount.
    alpha = (4.0 * gamma + (-2.0 * c2 * W + W * W - samples.Vpp)) + 2.0 * gamma
    return StencilCoeffs(gamma, base - drift, base + drift, alpha)


def squared_stencil(samples: PotentialSamples, grid: Grid, E: float) -> StencilCoeffs:
    """Exact square of the three-point ``H_d - E`` with Dirichlet ends.

    Same band structure as :func:`stencil`; the two differ only in how the
    cross terms are discretized. Eigenvectors are exactly those of ``H_d``.
    """
    dx = grid.dx
    d = 2.0 / dx ** 2 + samples.V - E
    o = -1.0 / dx ** 2
    n = len(d)
    pair = o * (d[:-1] + d[1:])
    beta_minus = np.empty(n)
    beta_plus = np.empty(n)
    beta_minus[:-1], beta_minus[-1] = pair, 0.0
    beta_plus[1:], beta_plus[0] = pair, 0.0
    alpha = d * d + 2.0 * o * o
    alpha[0] -= o * o
    alpha[-1] -= o * o
    return StencilCoeffs(o * o, beta_minus, beta_plus, alpha)


def make_stencil(scheme: str, samples: PotentialSamples, grid: Grid, E: float) -> StencilCoeffs:
    if scheme == "direct":
        return stencil(samples, grid, E)
    if scheme == "consistent":
        return squared_stencil(samples, grid, E)
    raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def assemble(coeffs: StencilCoeffs, dt: float, E: float = float("nan")) -> PentaSystem:
    """``R[i,i] = 1 + dt*alpha[i]``, ``R[i,i+1] = dt*beta_minus[i]``,
    ``R[i,i-1] = dt*beta_plus[i]``, ``R[i,i+-2] = dt*gamma``."""
    if not dt >= 0:
        raise ValueError("dt must be non-negative")
    n = coeffs.n
    return PentaSystem(
        diag=1.0 + dt * coeffs.alpha,
        sup1=dt * coeffs.beta_minus[:-1],
        sub1=dt * coeffs.beta_plus[1:],
        sup2=np.full(n - 2, dt * coeffs.gamma),
        sub2=np.full(n - 2, dt * coeffs.gamma),
        dt=float(dt),
        E=float(E),
    )


def apply_stencil(coeffs: StencilCoeffs, psi) -> np.ndarray:
    """Evaluate the five-point right-hand side directly, ghost values zero."""
    p = np.concatenate(([0.0, 0.0], np.asarray(psi, float), [0.0, 0.0]))
    g = coeffs.gamma
    return (g * p[4:] + coeffs.beta_minus * p[3:-1] + coeffs.alpha * p[2:-2]
            + coeffs.beta_plus * p[1:-3] + g * p[:-4])


def von_neumann_symbol(V, Vp, Vpp, E, dx, theta):
    """Real and imaginary parts ``(a, b)`` of the local amplification symbol
    at ``theta = k*dx`` (broadcasts)."""
    s2 = np.sin(theta / 2.0) ** 2
    W = V - E
    a = (W * W + (8.0 / dx ** 2) * W * s2 + (16.0 / dx ** 4) * s2
         - (4.0 / dx ** 4) * np.sin(theta) ** 2 - Vpp)
    b = -(2.0 / dx) * Vp * np.sin(theta)
    return a, b


def growth_factor(a, b, dt):
    """Squared one-step amplification ``1/|1 + (a + ib) dt|^2`` (``inf`` at
    an exact resonance)."""
    with np.errstate(divide="ignore"):
        return 1.0 / ((1.0 + a * dt) ** 2 + (b * dt) ** 2)


@njit(cache=True, nogil=True)
def _min_dt_kernel(V, Vp, Vpp, E, dx, theta):
    best = 0.0
    c2 = 8.0 / dx ** 2
    c4 = 16.0 / dx ** 4
    d4 = 4.0 / dx ** 4
    for j in range(V.shape[0]):
        W = V[j] - E
        # a = (W + 4 s^2/dx^2)^2 - V'' can only go negative when V'' > 0 and
        # W < sqrt(V''); elsewhere every mode is damped.
        if Vpp[j] <= 0.0 or W >= np.sqrt(Vpp[j]):
            continue
        for t in theta:
            s = np.sin(0.5 * t)
            sn = np.sin(t)
            a = W * W + c2 * W * s * s + c4 * s * s - d4 * sn * sn - Vpp[j]
            if a < 0.0:
                b = -2.0 / dx * Vp[j] * sn
                bound = -2.0 * a / (a * a + b * b)
                if bound > best:
                    best = bound
    return best


def k_grid(n: int = N_K_SAMPLES) -> np.ndarray:
    """``n`` uniform samples of ``k*dx`` in ``(0, pi]``."""
    return np.pi * np.arange(1, n + 1) / n


def stability_min_dt(samples: PotentialSamples, grid: Grid, E: float,
                     n_k: int = N_K_SAMPLES) -> float:
    """Smallest ``dt`` with ``|xi^{m+1}/xi^m| <= 1`` for every node and
    every sampled wavenumber; 0 when the scheme is unconditionally stable
    there.

    The bound carries a relative margin of ``1e-9`` so that evaluating
    :func:`growth_factor` at exactly this ``dt`` does not exceed 1 by
    rounding.
    """
    bound = _min_dt_kernel(samples.V, samples.Vp, samples.Vpp, float(E),
                           grid.dx, k_grid(n_k))
    return float(bound) * (1.0 + 1e-9)
