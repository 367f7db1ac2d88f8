"""Confining potentials with the first two derivatives the stencil needs.

All potentials are in units with hbar = 2m = 1, so the Hamiltonian is
``H = -d^2/dx^2 + V(x)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import Grid

__all__ = [
    "Potential", "Morse", "DoubleWell", "Harmonic", "Tabulated", "PotentialSamples",
    "OutOfRangeError", "NoTurningPointError",
    "evaluate", "sample", "default_domain", "parse_potential", "load_table",
]


class OutOfRangeError(ValueError):
    """A tabulated potential was evaluated outside its table."""


class NoTurningPointError(ValueError):
    """The potential does not confine a particle of the requested energy."""


class Potential:
    """Base class. Subclasses implement :meth:`eval`."""

    def eval(self, x):
        """Return ``(V, V', V'')`` at ``x`` (scalar or array)."""
        raise NotImplementedError

    def minimum(self) -> tuple[float, float]:
        """Location and value of the global minimum."""
        raise NotImplementedError

    def turning_points(self, E: float) -> tuple[float, float]:
        """Outermost classical turning points at energy ``E``."""
        raise NotImplementedError

    @property
    def is_even(self) -> bool:
        return False

    @property
    def threshold(self) -> float:
        """Bottom of the continuum (``inf`` for confining potentials)."""
        return math.inf


@dataclass(frozen=True)
class Morse(Potential):
    """``V(x) = exp(-2 mu x) - 2 exp(-mu x)``, minimum -1 at x = 0."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("Morse mu must be positive")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        mu = self.mu
        e1 = np.exp(-mu * x)
        e2 = e1 * e1
        V = e2 - 2.0 * e1
        Vp = -2.0 * mu * e2 + 2.0 * mu * e1
        Vpp = 4.0 * mu * mu * e2 - 2.0 * mu * mu * e1
        return V, Vp, Vpp

    def minimum(self):
        return 0.0, -1.0

    @property
    def threshold(self) -> float:
        return 0.0

    def turning_points(self, E):
        if E <= -1.0:
            raise NoTurningPointError("energy below the Morse well bottom")
        if E >= 0.0:
            raise NoTurningPointError("Morse potential does not confine E >= 0 on the right")
        r = math.sqrt(1.0 + E)
        return -math.log(1.0 + r) / self.mu, -math.log(1.0 - r) / self.mu


@dataclass(frozen=True)
class DoubleWell(Potential):
    """Symmetric quartic double well ``V(x) = -lam x^2 + x^4``."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("double-well lambda must be positive")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        x2 = x * x
        lam = self.lam
        return -lam * x2 + x2 * x2, -2.0 * lam * x + 4.0 * x2 * x, -2.0 * lam + 12.0 * x2

    def minimum(self):
        return math.sqrt(self.lam / 2.0), -self.lam ** 2 / 4.0

    def turning_points(self, E):
        lam = self.lam
        if E < -lam ** 2 / 4.0:
            raise NoTurningPointError("energy below the well bottom")
        xt = math.sqrt((lam + math.sqrt(lam * lam + 4.0 * E)) / 2.0)
        return -xt, xt

    @property
    def is_even(self):
        return True


@dataclass(frozen=True)
class Harmonic(Potential):
    """``V(x) = omega^2 x^2``; levels are ``(2n+1) omega``."""

    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("harmonic omega must be positive")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        w2 = self.omega ** 2
        return w2 * x * x, 2.0 * w2 * x, np.full_like(x, 2.0 * w2)

    def minimum(self):
        return 0.0, 0.0

    def turning_points(self, E):
        if E < 0:
            raise NoTurningPointError("energy below the well bottom")
        xt = math.sqrt(E) / self.omega
        return -xt, xt

    @property
    def is_even(self):
        return True


@dataclass(frozen=True, eq=False)
class Tabulated(Potential):
    """Natural cubic spline through ``(x, V)`` samples.

    V' and V'' are the spline's own derivatives, so the interpolant is C2.
    """

    x: np.ndarray
    V: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if x.ndim != 1 or x.shape != V.shape:
            raise ValueError("x and V must be 1D arrays of equal length")
        if len(x) < 5:
            raise ValueError("a tabulated potential needs at least 5 points")
        if not np.all(np.diff(x) > 0):
            raise ValueError("tabulated x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "_spline", CubicSpline(x, V, bc_type="natural"))

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.x[0], self.x[-1]
        tol = 1e-12 * max(abs(lo), abs(hi), 1.0)
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise OutOfRangeError(f"x outside tabulated range [{lo:g}, {hi:g}]")
        x = np.clip(x, lo, hi)
        s = self._spline
        return s(x), s(x, 1), s(x, 2)

    def minimum(self):
        i = int(np.argmin(self.V))
        return float(self.x[i]), float(self.V[i])

    def turning_points(self, E):
        inside = np.nonzero(self.V <= E)[0]
        if inside.size == 0:
            raise NoTurningPointError("energy below the tabulated minimum")
        i0, i1 = inside[0], inside[-1]
        if i0 == 0 or i1 == len(self.x) - 1:
            raise NoTurningPointError("table does not confine this energy")
        roots = [r for r in self._spline.solve(E, extrapolate=False) if np.isfinite(r)]
        left = max((r for r in roots if r <= self.x[i0]), default=self.x[i0 - 1])
        right = min((r for r in roots if r >= self.x[i1]), default=self.x[i1 + 1])
        return float(left), float(right)


@dataclass(frozen=True, eq=False)
class PotentialSamples:
    """``V``, ``V'`` and ``V''`` at the interior lattice nodes."""

    V: np.ndarray
    Vp: np.ndarray
    Vpp: np.ndarray

    def __post_init__(self):
        if not (self.V.shape == self.Vp.shape == self.Vpp.shape) or self.V.ndim != 1:
            raise ValueError("sample arrays must be 1D with equal lengths")
        for a in (self.V, self.Vp, self.Vpp):
            if not np.all(np.isfinite(a)):
                raise ValueError("potential samples must be finite")

    def __len__(self):
        return len(self.V)


def evaluate(spec: Potential, x):
    """``(V, V', V'')`` of ``spec`` at ``x``."""
    return spec.eval(x)


def sample(spec: Potential, grid: Grid) -> PotentialSamples:
    V, Vp, Vpp = spec.eval(grid.x)
    return PotentialSamples(np.asarray(V, float), np.asarray(Vp, float), np.asarray(Vpp, float))


def default_domain(spec: Potential, E_max: float, decay: float = 25.0,
                   max_pad: float = 100.0) -> tuple[float, float]:
    """Interval outside which states with energy up to ``E_max`` are negligible.

    Starts from the outermost classical turning points at ``E_max`` and
    walks outward until the WKB decay exponent ``int sqrt(V - E_max) dx``
    reaches ``decay`` (amplitude ~ exp(-decay)), or the padding reaches
    ``max_pad``.
    """
    x_left, x_right = spec.turning_points(E_max)
    width = max(x_right - x_left, 1e-3)
    h = width / 2000.0

    def pad(x0, direction):
        if isinstance(spec, Tabulated):
            limit = spec.x[0] if direction < 0 else spec.x[-1]
            room = abs(limit - x0)
        else:
            room = max_pad
        room = min(room, max_pad)
        s, x, action = 0.0, x0, 0.0
        step = h
        while action < decay and s < room:
            step_now = min(step, room - s)
            xm = x + direction * step_now / 2
            V = float(spec.eval(xm)[0])
            action += math.sqrt(max(V - E_max, 0.0)) * step_now
            x += direction * step_now
            s += step_now
            step = min(step * 1.05, width)
        return x

    return pad(x_left, -1), pad(x_right, +1)


def parse_potential(text: str) -> Potential:
    """Parse CLI potentials such as ``morse:mu=0.2``, ``dwell:lambda=15``,
    ``harmonic:omega=1`` or ``table:path.csv``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "table":
        if not rest:
            raise ValueError("table potential needs a file path: table:file.csv")
        return load_table(rest)
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"malformed potential parameter {item!r}")
        params[key.strip().lower()] = float(value)
    makers = {
        "morse": (Morse, ("mu",)),
        "dwell": (DoubleWell, ("lambda", "lam")),
        "double_well": (DoubleWell, ("lambda", "lam")),
        "harmonic": (Harmonic, ("omega",)),
    }
    if kind not in makers:
        raise ValueError(f"unknown potential kind {kind!r}")
    cls, names = makers[kind]
    given = [k for k in params if k in names]
    unknown = sorted(set(params) - set(names))
    if unknown:
        raise ValueError(f"unknown parameters for {kind}: {unknown}")
    if not given:
        if cls is Harmonic:
            return Harmonic(1.0)
        raise ValueError(f"missing parameter {names[0]!r} for {kind} potential")
    return cls(params[given[0]])


def load_table(path) -> Tabulated:
    """Read a two-column ``x,V`` CSV; a header row is optional."""
    xs, vs = [], []
    with open(Path(path), newline="") as fh:
        for n, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: line {n + 1}: expected 2 columns")
            try:
                x, v = float(row[0]), float(row[1])
            except ValueError:
                if n == 0 and not xs:
                    continue
                raise ValueError(f"{path}: line {n + 1}: non-numeric value") from None
            xs.append(x)
            vs.append(v)
    return Tabulated(np.array(xs), np.array(vs))
