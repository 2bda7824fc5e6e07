"""Ergodic constants and effective Hamiltonians for periodic, non-coercive
Hamilton-Jacobi equations, computed with monotone Lax-Friedrichs schemes."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DivergenceError, HJHomogError, HullExitError,
                     NonConvergenceError, NumericalError, ResolutionError, SpecRejected)
from .grid import Field, TorusGrid, oscillation, reduce_max_over_y, sup_distance
from .hamiltonians import (AssumptionReport, CoeffField, CoerciveTerm, DriftTerm, GraphSpec,
                           HamiltonianSpec, Mode, ProbeConfig, SourceTerm, constant_spec,
                           estimate_constants, lift, oscillation_bound_K, shift)
from .scheme import SchemeConfig, comparison_probe, evolve, numerical_hamiltonian
from .ergodic import (DiscountedSolution, ErgodicResult, diagnostics, ergodic_discount,
                      ergodic_longtime, solve_discounted)
from .effective import (EffectiveTable, PGrid, effective_at, homogeneity_check, interpolate,
                        stability_check, tabulate)
from .multiscale import (AnalyticHamiltonian, ConvergenceReport, GraphResult,
                         convergence_study, effective_H, graph_pipeline, longtime_slope,
                         solve_fine, solve_graph, solve_homogenized)

__all__ = [name for name in dir() if not name.startswith("_")]
