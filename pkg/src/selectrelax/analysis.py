"""Drivers built on :func:`selectrelax.relax.relax`.

Lattice-step sweeps fitted against ``dx^2``, doublet splittings from
parity-resolved relaxation, Richardson extrapolation and energy scans that
rebuild the spectrum together with the selection basins.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Wavefunction, make_grid
from .potentials import NoTurningPointError, Potential, default_domain, sample
from .relax import ParityPair, RelaxConfig, RelaxResult, relax, relax_on_grid

__all__ = ["FitError", "SweepResult", "SplitResult", "Cluster", "ScanPoint", "ScanResult",
           "fit_dx2", "observed_orders", "richardson", "splitting_guess", "splitting_domain",
           "splitting", "dx_sweep", "split_sweep", "scan_energies", "scan_spectrum",
           "default_jobs", "CLUSTER_RTOL", "CLUSTER_ATOL"]

CLUSTER_RTOL = 1e-6
CLUSTER_ATOL = 1e-12


class FitError(ValueError):
    """Too few usable points for a ``dx^2`` fit."""


def default_jobs() -> int:
    env = os.environ.get("SELECTRELAX_JOBS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"SELECTRELAX_JOBS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("SELECTRELAX_JOBS must be at least 1")
        return n
    return os.cpu_count() or 1


def _map(fn, items, jobs):
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def fit_dx2(dx, y) -> tuple[float, float, float]:
    """Least-squares ``y = a + b dx^2``; returns ``(a, b, rms residual)``."""
    dx = np.asarray(dx, dtype=float)
    y = np.asarray(y, dtype=float)
    if dx.shape != y.shape or dx.ndim != 1:
        raise ValueError("dx and y must be 1D arrays of equal length")
    if len(dx) < 2 or len(np.unique(dx)) < 2:
        raise FitError("need at least two distinct dx values")
    A = np.column_stack([np.ones_like(dx), dx * dx])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ [a, b] - y) ** 2)))
    return float(a), float(b), rms


def observed_orders(dx, y, reference: float) -> np.ndarray:
    """Orders ``log(e_k / e_{k+1}) / log(dx_k / dx_{k+1})`` of successive
    pairs, with ``e = |y - reference|``."""
    dx = np.asarray(dx, dtype=float)
    err = np.abs(np.asarray(y, dtype=float) - reference)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(err[:-1] / err[1:]) / np.log(dx[:-1] / dx[1:])


def richardson(points) -> float:
    """Extrapolate ``(dx, y)`` pairs to ``dx = 0`` assuming ``y = a + b dx^2``.

    Two points give ``(y2 dx1^2 - y1 dx2^2) / (dx1^2 - dx2^2)``; more points
    give the least-squares intercept.
    """
    pts = [(float(d), float(v)) for d, v in points]
    if len(pts) < 2:
        raise ValueError("Richardson extrapolation needs at least two points")
    if len(pts) == 2:
        (d1, y1), (d2, y2) = pts
        h1, h2 = d1 * d1, d2 * d2
        if h1 == h2:
            raise ValueError("Richardson extrapolation needs distinct dx values")
        return (y2 * h1 - y1 * h2) / (h1 - h2)
    try:
        return fit_dx2([p[0] for p in pts], [p[1] for p in pts])[0]
    except FitError as exc:
        raise ValueError(str(exc)) from None


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Values at several lattice steps and their ``a + b dx^2`` fit.

    ``values`` holds eigenvalues for a level sweep and splittings for a
    splitting sweep. The fit uses converged points only.
    """

    dx_values: np.ndarray
    values: np.ndarray
    fit_intercept: float
    fit_slope: float
    fit_residual_rms: float
    converged: np.ndarray
    kind: str = "level"
    runs: tuple = field(default=(), repr=False)

    @property
    def E_rel_values(self) -> np.ndarray:
        return self.values

    def orders(self, reference: float | None = None) -> np.ndarray:
        """Observed convergence orders of successive converged pairs."""
        ref = self.fit_intercept if reference is None else reference
        m = self.converged
        return observed_orders(self.dx_values[m], self.values[m], ref)


@dataclass(frozen=True, eq=False)
class SplitResult:
    E0_rel: float
    E1_rel: float
    T_rel: float
    even: RelaxResult
    odd: RelaxResult
    E_guess: float
    dx: float

    @property
    def converged(self) -> bool:
        return self.even.converged and self.odd.converged


def _sorted_dx(dx_list) -> np.ndarray:
    dx = np.array(sorted({float(d) for d in dx_list}, reverse=True))
    if len(dx) < 3:
        raise FitError("a sweep needs at least 3 distinct dx values")
    if not np.all(dx > 0):
        raise ValueError("dx values must be positive")
    return dx


def _finish_sweep(dx, values, ok, runs, kind) -> SweepResult:
    if ok.sum() < 3:
        raise FitError(f"only {int(ok.sum())} of {len(dx)} sweep points converged; need 3")
    a, b, rms = fit_dx2(dx[ok], values[ok])
    return SweepResult(dx, values, a, b, rms, ok, kind, tuple(runs))


def dx_sweep(config: RelaxConfig, spec: Potential, dx_list, jobs: int | None = None) -> SweepResult:
    """Relax at each ``dx`` with otherwise identical settings and fit."""
    dx = _sorted_dx(dx_list)
    runs = _map(lambda d: relax(replace(config, dx=float(d)), spec), list(dx), jobs)
    values = np.array([r.E_rel for r in runs])
    ok = np.array([r.converged for r in runs])
    return _finish_sweep(dx, values, ok, runs, "level")


def splitting_guess(spec: Potential) -> float:
    """Ground level of the harmonic approximation at a well minimum,
    ``-lam^2/4 + sqrt(2 lam)``."""
    lam = getattr(spec, "lam", None)
    if lam is None:
        raise TypeError("automatic splitting energy needs a DoubleWell potential")
    return -lam * lam / 4.0 + math.sqrt(2.0 * lam)


def splitting_domain(spec: Potential, E: float) -> tuple[float, float]:
    """Symmetric interval wide enough for both doublet members near ``E``."""
    _, vmin = spec.minimum()
    E_max = E + abs(E - vmin) + 1.0
    try:
        lo, hi = default_domain(spec, E_max)
    except NoTurningPointError:
        lo, hi = default_domain(spec, max(E, vmin + 1e-9))
    half = max(-lo, hi)
    return -half, half


def _split_once(spec, E, dx, domain, options) -> SplitResult:
    lo, hi = domain if domain is not None else splitting_domain(spec, E)
    grid = make_grid(lo, hi, dx)
    samples = sample(spec, grid)
    x0 = spec.minimum()[0] if spec.minimum()[0] > 0 else None
    init = ParityPair(center=x0)
    base = RelaxConfig(E=E, dx=dx, domain=(lo, hi), init=init, **options)
    even = relax_on_grid(replace(base, parity="even"), grid, samples, spec)
    odd = relax_on_grid(replace(base, parity="odd"), grid, samples, spec)
    return SplitResult(even.E_rel, odd.E_rel, odd.E_rel - even.E_rel, even, odd, E, dx)


def splitting(spec: Potential, dx: float, domain: tuple[float, float] | None = None,
              E_guess: float | str = "auto", max_fallback: int = 8, **options) -> SplitResult:
    """Lowest doublet of a symmetric double well from one even and one odd run
    at the same selecting energy.

    With ``E_guess="auto"`` a run that fails to converge is retried at
    ``E_k = V_min (1 - 2^-k)``, successive midpoints between the well bottom
    and zero. The last attempt is returned when none converges; check
    :attr:`SplitResult.converged`. ``options`` go to :class:`RelaxConfig`.
    """
    if not spec.is_even:
        raise ValueError("splitting needs a symmetric potential")
    auto = isinstance(E_guess, str)
    if auto and E_guess.lower() != "auto":
        raise ValueError("E_guess must be a number or 'auto'")
    E = splitting_guess(spec) if auto else float(E_guess)
    result = _split_once(spec, E, dx, domain, options)
    if result.converged or not auto:
        return result
    vmin = spec.minimum()[1]
    for k in range(1, max_fallback + 1):
        attempt = _split_once(spec, vmin * (1.0 - 2.0 ** -k), dx, domain, options)
        if attempt.converged:
            return attempt
        result = attempt
    return result


def split_sweep(spec: Potential, dx_list, domain: tuple[float, float] | None = None,
                E_guess: float | str = "auto", jobs: int | None = None, **options) -> SweepResult:
    """Splittings at several lattice steps fitted by ``T + (eps1 - eps0) dx^2``."""
    dx = _sorted_dx(dx_list)
    if domain is None and not isinstance(E_guess, str):
        domain = splitting_domain(spec, float(E_guess))
    elif domain is None:
        domain = splitting_domain(spec, splitting_guess(spec))
    runs = _map(lambda d: splitting(spec, float(d), domain, E_guess, **options), list(dx), jobs)
    values = np.array([r.T_rel for r in runs])
    ok = np.array([r.converged for r in runs])
    return _finish_sweep(dx, values, ok, runs, "splitting")


@dataclass(frozen=True)
class ScanPoint:
    E: float
    E_rel: float
    residual: float
    converged: bool
    cluster: int = -1


@dataclass(frozen=True, eq=False)
class Cluster:
    """One recovered level: mean relaxed energy, the span of scan energies
    that selected it and the best-converged wavefunction."""

    E_n: float
    gamma_lo: float
    gamma_hi: float
    members: int
    psi: Wavefunction = field(repr=False)


@dataclass(frozen=True, eq=False)
class ScanResult:
    points: tuple
    clusters: tuple

    @property
    def energies(self) -> np.ndarray:
        return np.array([c.E_n for c in self.clusters])

    @property
    def converged_fraction(self) -> float:
        return sum(p.converged for p in self.points) / len(self.points)


def scan_energies(lo: float, hi: float, n_points: int) -> np.ndarray:
    """Cell centres ``lo + (k + 1/2)(hi - lo)/n``; a single point sits at
    the middle of the range."""
    if not lo < hi:
        raise ValueError("scan range needs lo < hi")
    if n_points < 1:
        raise ValueError("need at least one scan point")
    return lo + (np.arange(n_points) + 0.5) * (hi - lo) / n_points


def _same_level(a: float, b: float, rtol: float, atol: float) -> bool:
    return abs(a - b) <= max(rtol * max(abs(a), abs(b)), atol)


def scan_spectrum(spec: Potential, E_range: tuple[float, float], n_points: int, dx: float,
                  domain: tuple[float, float] | None = None, rtol: float = CLUSTER_RTOL,
                  atol: float = CLUSTER_ATOL, jobs: int | None = None, **options) -> ScanResult:
    """Relax at evenly spread selecting energies and group the results.

    All points share one lattice. Non-converged points are reported with a
    warning and left out of the clusters.
    """
    lo, hi = map(float, E_range)
    energies = scan_energies(lo, hi, n_points)
    if domain is None:
        from .relax import auto_domain
        domain = auto_domain(spec, hi)
    grid = make_grid(domain[0], domain[1], dx)
    samples = sample(spec, grid)
    base = RelaxConfig(E=float(energies[0]), dx=dx, domain=tuple(domain), **options)
    runs = _map(lambda E: relax_on_grid(replace(base, E=float(E)), grid, samples, spec),
                list(energies), jobs)
    bad = [float(E) for E, r in zip(energies, runs) if not r.converged]
    if bad:
        warnings.warn(f"{len(bad)} of {len(runs)} scan points did not converge and were "
                      f"excluded (first at E={bad[0]:.6g})", RuntimeWarning, stacklevel=2)
    order = sorted((r.E_rel, i) for i, r in enumerate(runs) if r.converged)
    labels = [-1] * len(runs)
    groups: list[list[int]] = []
    for E_rel, i in order:
        if groups and _same_level(E_rel, runs[groups[-1][-1]].E_rel, rtol, atol):
            groups[-1].append(i)
        else:
            groups.append([i])
        labels[i] = len(groups) - 1
    clusters = []
    for g in groups:
        best = min(g, key=lambda i: (runs[i].residual, i))
        clusters.append(Cluster(
            E_n=math.fsum(runs[i].E_rel for i in g) / len(g),
            gamma_lo=float(min(energies[i] for i in g)),
            gamma_hi=float(max(energies[i] for i in g)),
            members=len(g), psi=runs[best].psi))
    points = tuple(ScanPoint(float(E), r.E_rel, r.residual, r.converged, labels[i])
                   for i, (E, r) in enumerate(zip(energies, runs)))
    return ScanResult(points, tuple(clusters))
