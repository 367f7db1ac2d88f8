"""Selective relaxation for eigenpairs of 1D Schrodinger operators."""

from .analysis import (FitError, ScanResult, SplitResult, SweepResult, dx_sweep, fit_dx2,
                       scan_spectrum, split_sweep, splitting)
from .bandsolver import PentaFactors, SingularMatrixError, factor, solve
from .grid import DomainTooSmallError, Grid, Wavefunction, inner, make_grid, norm
from .operator import PentaSystem, StencilCoeffs, assemble, stability_min_dt, stencil
from .potentials import DoubleWell, Harmonic, Morse, Tabulated, default_domain, sample
from .relax import (Gaussian, ParityPair, RelaxConfig, RelaxResult, heat_relax_baseline,
                    auto_domain, rayleigh_energy, relax, relax_on_grid)

__version__ = "0.1.0"
