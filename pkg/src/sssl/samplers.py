"""Mode dispatch: pick the concentration or covariance sampler by name."""

from __future__ import annotations

from .analysis import ChainOutput
from .chain import ChainConfig
from .concentration import initial_concentration_state, run_concentration_chain, sweep_concentration
from .covariance import initial_covariance_state, run_covariance_chain, sweep_covariance
from .model import CONCENTRATION, COVARIANCE, Dataset, Hyperparams, check_mode

_INITIAL = {CONCENTRATION: initial_concentration_state, COVARIANCE: initial_covariance_state}
_SWEEP = {CONCENTRATION: sweep_concentration, COVARIANCE: sweep_covariance}
_RUN = {CONCENTRATION: run_concentration_chain, COVARIANCE: run_covariance_chain}


def initial_state_for(mode: str):
    return _INITIAL[check_mode(mode)]


def sweep_for(mode: str):
    return _SWEEP[check_mode(mode)]


def run_sampler(
    data: Dataset,
    theta: Hyperparams,
    config: ChainConfig,
    rng,
    mode: str,
    progress=None,
) -> ChainOutput:
    """Run the chain for ``mode`` (``"concentration"`` or ``"covariance"``)."""
    return _RUN[check_mode(mode)](data, theta, config, rng, progress)

