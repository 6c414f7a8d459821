"""Invariant densities of random maps on the boundaries of a multivalued map."""

from .errors import (ConvergenceError, DomainError, HolomapError, NumericError,
                     PreconditionError, RangeError, SizeError, StructureError)
from .piecewise import Branch, ComposedMap, PiecewiseMap, compose_tau21
from .density import DensityGrid, DistributionFn, StepDensity, cumulative, inverse_cdf, mix, norms
from .probability import GridProbability, PiecewiseAffineProbability
from .fperron import (RandomMap, fp_deterministic, fp_random, invariance_residual,
                      pelikan_check)
from .semimarkov import InducedMatrix, combine, induced_matrix, left_invariant, ulam_matrix
from .probsolver import (SolverReport, closed_form_quadratic, infeasibility_probe, solve_general,
                         solve_lebesgue)
from .selector import (SelectorBuild, conjugate_selector, selector_from_mixture,
                       selector_from_random_pdf)
from .bangbang import ObjectiveFn, enumerate_bangbang, hull_membership, optimize, optimize_policy
from .montecarlo import SimConfig, simulate

__version__ = "0.1.0"
