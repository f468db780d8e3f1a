"""Bayesian structure learning for Gaussian concentration and covariance graph models.

The off-diagonal entries carry continuous spike-and-slab priors, and both
parameterizations are sampled by column-wise block Gibbs. Prior simulation
and posterior summaries live in their own modules.
"""

__version__ = "0.1.0"
FORMAT_VERSION = "sssl-result/1"

from .analysis import (  # noqa: E402
    ChainOutput,
    GraphEstimate,
    inefficiency_factor,
    median_probability_graph,
    merge_outputs,
    structure_metrics,
)
from .calibration import calibrate_pi, conditional_density_histogram, simulate_prior  # noqa: E402
from .chain import ChainConfig, ChainState  # noqa: E402
from .concentration import run_concentration_chain  # noqa: E402
from .covariance import run_covariance_chain  # noqa: E402
from .data import load_csv, paper_p12_covariance, rolling_windows, sample_gaussian, standardize  # noqa: E402
from .model import (  # noqa: E402
    CONCENTRATION,
    COVARIANCE,
    Dataset,
    EdgeIndicators,
    Hyperparams,
    SymmetricPDMatrix,
)
from .samplers import run_sampler  # noqa: E402
