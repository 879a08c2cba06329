"""Block structure detection for Kendall rank correlation matrices."""
from .covariance import (
    SigmaEstimate, SingularCovarianceError, shrink, sigma_hat, sigma_hat_entry,
    sigma_tilde, solve_sigma, theta_hats)
from .estimator import (
    BlockTauEstimate, inverse_sine_transform, loss, precision_matrix,
    project_tau, sine_transform)
from .kendall import TauEstimate, TieError, concordance_indicator, kendall_tau
from .pairs import PairIndex, n_pairs, unvectorize, vectorize
from .partitions import (
    BlockStructure, CapacityError, Partition, cell_labels, is_refinement,
    merge, n_blocks, sigma_cells, varphi)
from .path import PathResult, alpha_values, build_path, chi_square_sf, select_structure
from .simulate import Scenario, metric_nu2, metric_xi, run_study, sample_copula

__version__ = "0.1.0"
