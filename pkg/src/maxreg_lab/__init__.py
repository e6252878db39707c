"""Finite-difference laboratory for boundary-feedback heat problems:
generators, Dirichlet maps, semigroups and maximal-regularity diagnostics."""
from .errors import (
    ConvergenceError,
    FeedbackSingularError,
    NearSpectrumError,
    NearSpectrumWarning,
    NumericalError,
    UnstableGeneratorError,
)
from .grid import Grid, GridFunction, TimeGrid, TimeSignal, bochner_norm, lp_norm, make_grid, time_derivative
from .operators import (
    Boundary,
    DirichletMap,
    ExtendedSystem,
    LinearMap,
    assemble_extended,
    dirichlet_map,
    generator_matrix,
    greiner_residual,
    perturbation_matrix,
    resolvent_identity_residual,
)
from .semigroup import Propagator, expm, mild_solution, yosida_matrix

__version__ = "0.1.0"
