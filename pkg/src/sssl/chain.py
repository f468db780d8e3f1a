"""Chain configuration, sampler state and the shared sweep/run loop."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .analysis import ChainOutput, trace_positions
from .errors import DimensionMismatch, InvalidParameter, NotPositiveDefinite, SamplerAbort
from .model import (
    Dataset,
    EdgeIndicators,
    Hyperparams,
    SymmetricPDMatrix,
    VarianceMatrix,
    check_mode,
    sample_edge_indicators,
)
from .numerics import symmetric_swap

INIT_RIDGE = 1e-3


@dataclass
class ChainConfig:
    iterations: int = 10000
    burnin: int = 3000
    seed: int | None = None
    refresh_interval: int = 100
    trace_subset: int = 100
    store_every: int | None = None
    random_scan: bool = False

    def __post_init__(self):
        if not self.iterations > self.burnin >= 0:
            raise InvalidParameter(
                f"need iterations > burnin >= 0, got iterations={self.iterations}, burnin={self.burnin}"
            )
        if self.refresh_interval < 1:
            raise InvalidParameter("refresh_interval must be at least 1")
        if self.store_every is not None and self.store_every < 1:
            raise InvalidParameter("store_every must be at least 1")

    @property
    def kept(self) -> int:
        return self.iterations - self.burnin

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ChainState:
    """Current matrix (with cached inverse), indicators and prior variances.

    ``matrix`` is the concentration matrix for the concentration sampler and
    the covariance matrix for the covariance sampler; its ``inverse_cache``
    holds the other one.
    """

    matrix: SymmetricPDMatrix
    z: EdgeIndicators
    v: VarianceMatrix
    sweep_count: int = 0
    max_drift_between_refreshes: float = 0.0
    max_drift_after_refresh: float = 0.0

    @property
    def p(self) -> int:
        return self.matrix.dim

    def set_indicators(self, z: EdgeIndicators, theta: Hyperparams) -> None:
        iu = upper_indices(self.p)
        self.z = z
        ent = self.v.entries
        vals = np.where(z.bits, theta.v1 ** 2, theta.v0 ** 2)
        ent[iu] = vals
        ent[iu[1], iu[0]] = vals

    def refresh(self) -> None:
        before = self.matrix.refresh()
        self.max_drift_between_refreshes = max(self.max_drift_between_refreshes, before)
        self.max_drift_after_refresh = max(self.max_drift_after_refresh, self.matrix.cache_drift)

    def snapshot(self) -> dict:
        return {
            "matrix": self.matrix.values.copy(),
            "inverse_cache": self.matrix.inverse_cache.copy(),
            "z": self.z.matrix(),
            "sweep_count": self.sweep_count,
        }


@lru_cache(maxsize=32)
def upper_indices(p: int):
    return np.triu_indices(p, 1)


def draw_indicators(state: ChainState, theta: Hyperparams, rng: np.random.Generator) -> None:
    """Joint draw of all ``p(p-1)/2`` indicators given the current matrix."""
    state.set_indicators(sample_edge_indicators(state.matrix, theta, rng), theta)


def initial_state(matrix: np.ndarray, theta: Hyperparams, rng: np.random.Generator) -> ChainState:
    pd = SymmetricPDMatrix(matrix)
    p = pd.dim
    z = EdgeIndicators.empty(p)
    state = ChainState(pd, z, VarianceMatrix.from_indicators(z, theta))
    draw_indicators(state, theta, rng)
    return state


def starting_covariance(data: Dataset) -> np.ndarray:
    """Ridged sample covariance ``S/n + 0.001 I``; the identity when ``n = 0``."""
    p = data.p
    if data.n == 0:
        return np.eye(p)
    return data.S / data.n + INIT_RIDGE * np.eye(p)


def validate_inputs(data: Dataset, theta: Hyperparams) -> None:
    if data.p < 2:
        raise DimensionMismatch("dimension must be at least 2")
    if not isinstance(theta, Hyperparams):
        raise InvalidParameter("theta must be a Hyperparams instance")


SweepFn = Callable[..., None]


def iterate_chain(
    state: ChainState,
    sweep: SweepFn,
    data: Dataset,
    theta: Hyperparams,
    config: ChainConfig,
    rng: np.random.Generator,
    mode: str,
):
    """Run ``config.iterations`` sweeps, yielding ``(iteration, seconds, state)`` after each.

    The inverse cache is refreshed every ``config.refresh_interval`` sweeps.
    Numerical failures surface as :class:`SamplerAbort` carrying a snapshot
    of the state at the failing sweep.
    """
    check_mode(mode)
    for it in range(config.iterations):
        t0 = time.perf_counter()
        try:
            sweep(state, data, theta, rng, random_scan=config.random_scan)
            if state.sweep_count % config.refresh_interval == 0:
                state.refresh()
        except (NotPositiveDefinite, InvalidParameter) as exc:
            raise SamplerAbort(
                f"{mode} sampler aborted at sweep {state.sweep_count}: {exc}",
                state=state.snapshot(),
            ) from exc
        yield it, time.perf_counter() - t0, state


def run_chain(
    state: ChainState,
    sweep: SweepFn,
    data: Dataset,
    theta: Hyperparams,
    config: ChainConfig,
    rng: np.random.Generator,
    mode: str,
    progress: Callable[[int], None] | None = None,
) -> ChainOutput:
    """Run burn-in plus kept sweeps and accumulate posterior summaries."""
    p = state.p
    out = ChainOutput.start(p, mode, trace_positions(p, config.trace_subset), config.store_every)
    for it, seconds, _ in iterate_chain(state, sweep, data, theta, config, rng, mode):
        out.record_time(seconds)
        if it >= config.burnin:
            out.accumulate(state.matrix.values, state.z.bits)
        if progress is not None:
            progress(it)
    out.diagnostics.update(
        max_drift_between_refreshes=state.max_drift_between_refreshes,
        max_drift_after_refresh=state.max_drift_after_refresh,
        final_drift=state.matrix.drift(),
    )
    out.finish()
    return out


def column_order(p: int, rng: np.random.Generator, random_scan: bool):
    return rng.permutation(p) if random_scan else range(p)


@lru_cache(maxsize=32)
def others_index(p: int):
    """For each column ``j``, the remaining indices in the order a swap of ``j`` and ``p - 1`` leaves them."""
    out = []
    for j in range(p):
        perm = np.arange(p)
        perm[j], perm[p - 1] = p - 1, j
        out.append(perm[:-1].copy())
    return out


def update_single_column(state: ChainState, j: int, redraw_last) -> None:
    """Move column ``j`` last, call ``redraw_last(others, j)``, move it back."""
    last = state.p - 1
    mats = (state.matrix.values, state.matrix.inverse_cache)
    for m in mats:
        symmetric_swap(m, j, last)
    try:
        redraw_last(others_index(state.p)[j], j)
    finally:
        for m in mats:
            symmetric_swap(m, j, last)


def sweep_columns(state: ChainState, order, redraw_last) -> None:
    """Bring each column in ``order`` to the last position and redraw it.

    Rather than swapping every column back, the sweep tracks the running
    permutation (``label[k]`` is the original index now at position ``k``)
    and restores the original order once at the end, so each column costs a
    single O(p) swap. ``redraw_last(others, j)`` receives the original labels
    of the leading positions and of the last one.
    """
    p = state.p
    last = p - 1
    mats = (state.matrix.values, state.matrix.inverse_cache)
    label = np.arange(p)
    pos = np.arange(p)
    try:
        for j in order:
            k = pos[j]
            if k != last:
                for m in mats:
                    symmetric_swap(m, k, last)
                moved = label[last]
                label[k], label[last] = moved, j
                pos[moved], pos[j] = k, last
            redraw_last(label[:-1], j)
    finally:
        if np.any(pos != np.arange(p)):
            ix = np.ix_(pos, pos)
            for m in mats:
                m[...] = m[ix]

