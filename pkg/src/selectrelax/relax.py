"""Selective relaxation driver.

One implicit step of ``d psi/dt = -(H - E)^2 psi`` is the linear solve
``R psi^{m+1} = psi^m``. With a large ``dt`` a handful of solves (each
followed by renormalization) lands on the eigenstate whose energy is
closest to the selecting energy ``E``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .bandsolver import factor, factor_banded, solve
from .grid import Grid, Wavefunction, make_grid, norm
from .operator import SCHEMES, assemble, make_stencil, stability_min_dt
from .potentials import NoTurningPointError, Potential, PotentialSamples, default_domain, sample

__all__ = ["Gaussian", "ParityPair", "RelaxConfig", "RelaxResult", "AsymmetricGridError",
           "initial_state", "rayleigh_energy", "hamiltonian_residual", "auto_domain",
           "auto_dt", "relax", "relax_on_grid", "heat_relax_baseline", "KINETIC_FORMS"]

KINETIC_FORMS = ("three_point", "central")
DEFAULT_KINETIC = {"direct": "central", "consistent": "three_point"}
REFINE_ROUNDS = 3
GMRES_RTOL = 1e-8
GMRES_RESTART = 10


class AsymmetricGridError(ValueError):
    """Parity-resolved relaxation needs a lattice symmetric about x = 0."""


@dataclass(frozen=True)
class Gaussian:
    """``exp(-(x - center)^2 / (2 width^2))``; ``None`` picks a default."""

    center: float | None = None
    width: float | None = None


@dataclass(frozen=True)
class ParityPair:
    """``g(x - c) +- g(x + c)`` built by mirroring, for doublet states."""

    center: float | None = None
    width: float | None = None


InitSpec = Union[Gaussian, ParityPair, np.ndarray, None]


@dataclass(frozen=True)
class RelaxConfig:
    """Inputs of one relaxation run.

    ``scheme="direct"`` discretizes every term of ``(H - E)^2`` by centered
    differences and evaluates the energy with a central-difference kinetic
    term. Its residual is the larger of the relative change of ``E_rel``
    between the last two iterates and the squared change of the normalized
    iterate; both scale like the squared admixture of competing states, so
    the residual estimates the relative energy error. ``scheme="consistent"`` uses the exact square of
    the three-point Hamiltonian ``H_d`` so the relaxed pair is an eigenpair
    of ``H_d``; convergence is judged on ``||(H_d - E_rel) psi||``.
    """

    E: float
    dx: float
    domain: tuple[float, float] | None = None
    dt: float | str = "auto"
    max_iter: int = 10
    residual_tol: float = 1e-10
    parity: str = "none"
    init: InitSpec = None
    scheme: str = "direct"
    kinetic: str | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.parity not in ("even", "odd", "none"):
            raise ValueError("parity must be 'even', 'odd' or 'none'")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.kinetic is not None and self.kinetic not in KINETIC_FORMS:
            raise ValueError(f"kinetic must be one of {KINETIC_FORMS}")
        if isinstance(self.dt, str):
            if self.dt.lower() != "auto":
                raise ValueError("dt must be a positive number or 'auto'")
        elif not self.dt > 0:
            raise ValueError("explicit dt must be positive")

    @property
    def kinetic_form(self) -> str:
        return self.kinetic or DEFAULT_KINETIC[self.scheme]


@dataclass(frozen=True, eq=False)
class RelaxResult:
    psi: Wavefunction
    E_rel: float
    residual: float
    iterations: int
    converged: bool
    dt_used: float
    stability_bound: float
    E: float = math.nan
    scheme: str = "direct"
    h_residual: float = math.nan
    residual_history: tuple = field(default=(), repr=False)
    energy_history: tuple = field(default=(), repr=False)

    @property
    def grid(self) -> Grid:
        return self.psi.grid


def _potential_min(samples: PotentialSamples, grid: Grid) -> tuple[float, float]:
    i = int(np.argmin(samples.V))
    return float(grid.x[i]), float(samples.V[i])


def _default_shape(spec, grid, samples, E):
    x0, vmin = _potential_min(samples, grid)
    span = grid.x_max - grid.x_min
    try:
        left, right = spec.turning_points(max(E, vmin + 1e-9 * max(1.0, abs(vmin))))
        left, right = max(left, grid.x_min), min(right, grid.x_max)
        if right - left < 4 * grid.dx:
            raise NoTurningPointError
        return 0.5 * (left + right), 0.5 * (right - left)
    except (NoTurningPointError, NotImplementedError, AttributeError):
        return x0, span / 10.0


def initial_state(config: RelaxConfig, grid: Grid, spec: Potential | None = None,
                  samples: PotentialSamples | None = None) -> Wavefunction:
    """Normalized starting vector.

    Without an explicit ``init`` a Gaussian is placed inside the classically
    allowed region at ``E``, slightly off-centre so it overlaps states of
    either parity.
    """
    x = grid.x
    init = config.init
    parity = config.parity
    if parity != "none" and not grid.is_symmetric:
        raise AsymmetricGridError("parity modes need a grid symmetric about 0")
    if isinstance(init, np.ndarray) or (init is not None and not isinstance(init, (Gaussian, ParityPair))):
        values = np.array(init, dtype=float)
        if values.shape != (grid.J,):
            raise ValueError(f"custom initial state must have length {grid.J}")
    else:
        if samples is None and spec is not None:
            samples = sample(spec, grid)
        if init is None:
            init = ParityPair() if parity != "none" else Gaussian()
        mid, half = ((0.0, (grid.x_max - grid.x_min) / 10.0) if samples is None
                     else _default_shape(spec, grid, samples, config.E))
        width = init.width if init.width is not None else max(half / 2.0, 4 * grid.dx)
        if isinstance(init, ParityPair):
            if init.center is not None:
                c = init.center
            elif isinstance(spec, Potential) and spec.is_even and spec.minimum()[0] > 0:
                c = spec.minimum()[0]
            else:
                c = max(half / 2.0, 2 * grid.dx)
            if not grid.is_symmetric:
                raise AsymmetricGridError("a parity pair needs a grid symmetric about 0")
        else:
            c = init.center if init.center is not None else mid + 0.15 * half
        values = np.exp(-((x - c) ** 2) / (2.0 * width ** 2))
        if isinstance(init, ParityPair) and parity == "none":
            parity = "even"
    if parity != "none":
        sign = 1.0 if parity == "even" else -1.0
        values = values + sign * values[::-1]
        if parity == "odd" and grid.J % 2 == 1:
            values[grid.J // 2] = 0.0
    psi = Wavefunction(grid, values)
    if norm(psi) == 0.0:
        raise ValueError("initial state vanishes; pick a different center or parity")
    return psi.normalized()


def _kinetic(p: np.ndarray, dx: float, form: str) -> float:
    if form == "three_point":
        q = np.concatenate(([0.0], p, [0.0]))
        d = (q[1:] - q[:-1]) / dx
    elif form == "central":
        q = np.concatenate(([0.0, 0.0], p, [0.0, 0.0]))
        d = (q[2:] - q[:-2]) / (2.0 * dx)
    else:
        raise ValueError(f"unknown kinetic form {form!r}")
    return math.fsum(d * d)


def rayleigh_energy(psi: Wavefunction, samples: PotentialSamples, grid: Grid,
                    kinetic: str = "three_point") -> float:
    """Discrete ``<psi|H|psi> / <psi|psi>``.

    ``three_point`` is exactly ``sum psi_j (H_d psi)_j dx`` (summed by parts
    so no large terms cancel). ``central`` builds the kinetic term from
    ``(psi_{j+1} - psi_{j-1}) / (2 dx)``.
    """
    p = psi.values
    n2 = math.fsum(p * p)
    if n2 == 0.0:
        raise ValueError("Rayleigh quotient of the zero vector")
    return (_kinetic(p, grid.dx, kinetic) + math.fsum(samples.V * p * p)) / n2


def _apply_hd(p: np.ndarray, samples: PotentialSamples, dx: float) -> np.ndarray:
    q = np.concatenate(([0.0], p, [0.0]))
    return -(q[2:] - 2.0 * q[1:-1] + q[:-2]) / dx ** 2 + samples.V * p


def _apply_m(scheme: str, p: np.ndarray, samples: PotentialSamples, dx: float,
             E: float) -> np.ndarray:
    """``M p`` in nested-difference form.

    Algebraically equal to the assembled five-point band, but rounding
    errors of the large ``1/dx^4`` terms largely cancel on smooth modes,
    which is what the refinement step in :func:`relax_on_grid` relies on.
    """
    if scheme == "consistent":
        s = _apply_hd(p, samples, dx) - E * p
        return _apply_hd(s, samples, dx) - E * s
    W = E - samples.V
    q = np.concatenate(([0.0, 0.0], p, [0.0, 0.0]))
    d2 = q[2:] - 2.0 * q[1:-1] + q[:-2]
    d4 = d2[2:] - 2.0 * d2[1:-1] + d2[:-2]
    return (d4 / dx ** 4 + (2.0 / dx ** 2) * W * d2[1:-1]
            - (samples.Vp / dx) * (q[3:-1] - q[1:-3]) + (W * W - samples.Vpp) * p)


def hamiltonian_residual(psi: Wavefunction, samples: PotentialSamples, grid: Grid,
                         E: float) -> float:
    """``||(H_d - E) psi|| / ||psi||`` with the three-point ``H_d``."""
    p = psi.values
    r = _apply_hd(p, samples, grid.dx) - E * p
    return math.sqrt(math.fsum(r * r) / math.fsum(p * p))


def auto_domain(spec: Potential, E: float) -> tuple[float, float]:
    """Default interval for a run at selecting energy ``E``.

    Energies at or above a continuum threshold are clipped just below it,
    so near-threshold levels get the widest padding ``default_domain``
    allows.
    """
    _, vmin = spec.minimum()
    E_max = max(E, vmin) + 0.25 * abs(E - vmin) + 1e-6
    thr = spec.threshold
    if E_max >= thr:
        E_max = thr - 1e-3 * (thr - vmin)
    lo, hi = default_domain(spec, E_max)
    if spec.is_even:
        half = max(-lo, hi)
        lo, hi = -half, half
    return lo, hi


def auto_dt(samples: PotentialSamples, E: float, stability_bound: float) -> float:
    """A step so large that ``R`` is effectively ``dt*(H - E)^2``.

    ``1e12 / c^2`` with ``c = max|E - V|`` (at least 1): every state more
    than ~1e-5 c away from ``E`` is damped by its full ratio
    ``(E_n - E)^2 / (E_m - E)^2`` per solve, while the matrix entries and the
    iterates stay far from overflow and underflow. The step is rounded down
    to a power of two so that scaling the stencil by it is exact.
    """
    char = max(float(np.max(np.abs(E - samples.V))), 1.0)
    return 2.0 ** math.floor(math.log2(max(10.0 * stability_bound, 1e12 / char ** 2)))


def _align(new: np.ndarray, old: np.ndarray) -> np.ndarray:
    return -new if math.fsum(new * old) < 0 else new


def _project(values: np.ndarray, parity: str) -> np.ndarray:
    if parity == "even":
        return 0.5 * (values + values[::-1])
    if parity == "odd":
        out = 0.5 * (values - values[::-1])
        if len(out) % 2 == 1:
            out[len(out) // 2] = 0.0
        return out
    return values


def _refined_solve(F, psi, scheme, samples, dx, E, dt):
    """Solve ``R x = psi`` to working accuracy.

    The assembled band carries rounding of order ``eps/dx^4`` that shifts
    the fixed point of the iteration at small ``dx``. Residuals taken with
    the nested-difference form :func:`_apply_m` remove it: each correction
    solves ``R d = r`` by GMRES right-preconditioned with the band's LU
    factors. Plain iterative refinement would mostly do, but diverges when
    ``E`` sits so close to an eigenvalue that the rounding dominates the
    smallest eigenvalue of ``R``; GMRES absorbs that single outlier in a
    step or two.
    """
    def apply_r(v):
        return v + dt * _apply_m(scheme, v, samples, dx, E)

    n = len(psi)
    op = LinearOperator((n, n), dtype=float, matvec=lambda w: apply_r(solve(F, w)))
    x = solve(F, psi)
    scale = np.max(np.abs(psi))
    for _ in range(REFINE_ROUNDS):
        r = psi - apply_r(x)
        if np.max(np.abs(r)) <= 1e-15 * scale:
            break
        w, _ = gmres(op, r, rtol=GMRES_RTOL, atol=0.0, restart=GMRES_RESTART, maxiter=1)
        x += solve(F, w)
    return x


def relax_on_grid(config: RelaxConfig, grid: Grid, samples: PotentialSamples,
                  spec: Potential | None = None) -> RelaxResult:
    """Relaxation on a prepared lattice (lets callers reuse ``samples``)."""
    E = float(config.E)
    bound = stability_min_dt(samples, grid, E)
    dt = auto_dt(samples, E, bound) if isinstance(config.dt, str) else float(config.dt)
    R = assemble(make_stencil(config.scheme, samples, grid, E), dt, E)
    F = factor(R)
    psi = initial_state(config, grid, spec, samples).values
    form = config.kinetic_form
    dx = grid.dx
    residuals, energies = [], []
    converged = False
    E_rel = residual = math.nan
    it = 0
    for it in range(1, config.max_iter + 1):
        new = _refined_solve(F, psi, config.scheme, samples, dx, E, dt)
        new = _project(new, config.parity)
        n = math.sqrt(math.fsum(new * new) * dx)
        if n == 0.0 or not math.isfinite(n):
            raise FloatingPointError(
                f"iterate {it} is {'zero' if n == 0 else 'not finite'}; dt={dt:g} is too large")
        new = _align(new / n, psi)
        step = math.sqrt(math.fsum((new - psi) ** 2) * dx)
        psi = new
        wf = Wavefunction(grid, psi)
        E_rel = rayleigh_energy(wf, samples, grid, form)
        if config.scheme == "consistent":
            residual = hamiltonian_residual(wf, samples, grid, E_rel)
        else:
            change = abs(E_rel - energies[-1]) if energies else math.inf
            residual = max(change / max(1.0, abs(E_rel)), step * step)
        residuals.append(residual)
        energies.append(E_rel)
        if residual <= config.residual_tol:
            converged = True
            break
    wf = Wavefunction(grid, psi)
    return RelaxResult(
        psi=wf, E_rel=E_rel, residual=residual, iterations=it, converged=converged,
        dt_used=dt, stability_bound=bound, E=E, scheme=config.scheme,
        h_residual=hamiltonian_residual(wf, samples, grid, E_rel),
        residual_history=tuple(residuals), energy_history=tuple(energies))


def _grid_for(config: RelaxConfig, spec: Potential) -> Grid:
    lo, hi = config.domain if config.domain is not None else auto_domain(spec, config.E)
    return make_grid(lo, hi, config.dx)


def relax(config: RelaxConfig, spec: Potential) -> RelaxResult:
    """Relax toward the eigenstate of ``spec`` closest to ``config.E``."""
    grid = _grid_for(config, spec)
    return relax_on_grid(config, grid, sample(spec, grid), spec)


def heat_relax_baseline(config: RelaxConfig, spec: Potential) -> RelaxResult:
    """Implicit steps of ``d psi/dt = -(H - V_min) psi``.

    ``config.E`` is ignored: this flow only ever finds the lowest state
    compatible with the initial data. The shift by ``min V`` makes the
    generator positive.
    """
    grid = _grid_for(config, spec)
    samples = sample(spec, grid)
    vmin = float(np.min(samples.V))
    char = max(float(np.max(samples.V)) - vmin, 1.0)
    dt = 1e6 / char if isinstance(config.dt, str) else float(config.dt)
    dx = grid.dx
    n = grid.J
    ab = np.zeros((3, n))
    ab[0, 1:] = -dt / dx ** 2
    ab[1] = 1.0 + dt * (2.0 / dx ** 2 + samples.V - vmin)
    ab[2, :-1] = -dt / dx ** 2
    F = factor_banded(ab, 1, 1)
    psi = initial_state(replace(config, E=vmin), grid, spec, samples).values
    residuals, energies = [], []
    converged = False
    E_rel = residual = math.nan
    it = 0
    for it in range(1, config.max_iter + 1):
        new = _project(solve(F, psi), config.parity)
        new /= math.sqrt(math.fsum(new * new) * dx)
        psi = _align(new, psi)
        wf = Wavefunction(grid, psi)
        E_rel = rayleigh_energy(wf, samples, grid, "three_point")
        residual = hamiltonian_residual(wf, samples, grid, E_rel)
        residuals.append(residual)
        energies.append(E_rel)
        if residual <= config.residual_tol:
            converged = True
            break
    return RelaxResult(
        psi=Wavefunction(grid, psi), E_rel=E_rel, residual=residual, iterations=it,
        converged=converged, dt_used=dt, stability_bound=0.0, E=float(config.E),
        scheme="heat", h_residual=residual, residual_history=tuple(residuals),
        energy_history=tuple(energies))
