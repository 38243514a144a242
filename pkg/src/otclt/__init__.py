"""Exact discrete optimal transport for costs h(x - y) and CLT-based inference."""

from .costs import CostSpec, evaluate_cost, gradient, grad_conjugate, validate_assumptions
from .measures import DiscreteMeasure, SampleSource, empirical_from_sample, grid_measure, load_csv, write_csv
from .solver import DualPair, TransportPlan, build_cost_matrix, solve_discrete_ot, verify_optimality
from .duality import (PotentialVector, anchor, c_transform, canonical_potentials, canonicalize,
                      check_cyclical_monotonicity, superdifferential)
from .oracle1d import Distribution1D, monotone_map, potential_1d, quantile_cost, sigma_sq_1d
from .inference import (CltReport, efron_stein_bound, one_sample_ci, sigma_sq_plugin, two_sample_ci,
                        wasserstein_ci)
from .montecarlo import (ExperimentConfig, map_stability_diagnostic, remainder_variance, simulate_clt,
                         stability_diagnostic)

__version__ = "0.1.0"
