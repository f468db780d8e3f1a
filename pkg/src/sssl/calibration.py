"""Prior-only simulation: implied edge probabilities, pi calibration and conditional densities.

All of these run the production samplers on an empty dataset (``n = 0``,
``S = 0``), so the draws come from the prior itself including the effect of
the positive definite constraint, which is what makes the implied edge
probability differ from ``pi``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .analysis import batch_means_stderr
from .chain import ChainConfig, iterate_chain, upper_indices, validate_inputs
from .errors import InsufficientSamples, InvalidParameter, TargetNotBracketed
from .model import CONCENTRATION, Dataset, Hyperparams, check_mode, n_pairs
from .samplers import initial_state_for, sweep_for

MIN_STRATUM = 100


@dataclass(frozen=True)
class CalibrationResult:
    theta: Hyperparams
    p: int
    mode: str
    implied_edge_prob: float
    mc_stderr: float
    iterations: int
    burnin: int

    def as_dict(self) -> dict:
        d = asdict(self)
        d["theta"] = self.theta.as_dict()
        return d


def _prior_states(p, theta, mode, iterations, burnin, rng):
    """Yield the chain state after every kept prior sweep."""
    check_mode(mode)
    data = Dataset.empty(p)
    validate_inputs(data, theta)
    config = ChainConfig(iterations=iterations, burnin=burnin, trace_subset=0)
    state = initial_state_for(mode)(data, theta, rng)
    for it, _, st in iterate_chain(state, sweep_for(mode), data, theta, config, rng, mode):
        if it >= burnin:
            yield st


def simulate_prior(
    p: int,
    theta: Hyperparams,
    mode: str = CONCENTRATION,
    iterations: int = 2000,
    burnin: int = 500,
    rng: np.random.Generator | None = None,
) -> CalibrationResult:
    """Monte Carlo estimate of the prior probability ``Pr(z_ij = 1)``, averaged over pairs.

    The per-sweep edge fraction is a stationary but autocorrelated series, so
    its standard error is estimated by batch means.
    """
    rng = np.random.default_rng() if rng is None else rng
    m = n_pairs(p)
    series = np.array([st.z.count() / m for st in _prior_states(p, theta, mode, iterations, burnin, rng)])
    prob = float(series.mean())
    if not 0.0 < prob < 1.0:
        raise InsufficientSamples(f"estimated edge probability {prob} is degenerate; run longer")
    return CalibrationResult(theta, p, mode, prob, batch_means_stderr(series), iterations, burnin)


def _simulate_task(args):
    return simulate_prior(*args)


def prior_curve(
    p: int,
    thetas,
    mode: str = CONCENTRATION,
    iterations: int = 2000,
    burnin: int = 500,
    rng: np.random.Generator | None = None,
    jobs: int = 1,
) -> list[CalibrationResult]:
    """:func:`simulate_prior` for each hyperparameter set, one independent stream each.

    Child generators are spawned from ``rng`` before any work starts, so the
    results do not depend on ``jobs``.
    """
    rng = np.random.default_rng() if rng is None else rng
    thetas = list(thetas)
    tasks = [(p, th, mode, iterations, burnin, child) for th, child in zip(thetas, rng.spawn(len(thetas)))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_simulate_task, tasks))
    return [_simulate_task(t) for t in tasks]


def interpolate_crossing(xs, ys, target: float) -> float:
    """First ``x`` where the piecewise-linear curve through ``(xs, ys)`` reaches ``target``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if not ys.min() <= target <= ys.max():
        raise TargetNotBracketed(
            f"target {target:.6g} lies outside the simulated range [{ys.min():.6g}, {ys.max():.6g}]"
        )
    for k in range(len(xs) - 1):
        y0, y1 = ys[k], ys[k + 1]
        if min(y0, y1) <= target <= max(y0, y1):
            if y1 == y0:
                return float(xs[k])
            return float(xs[k] + (target - y0) * (xs[k + 1] - xs[k]) / (y1 - y0))
    return float(xs[int(np.argmin(np.abs(ys - target)))])


def calibrate_pi(
    target_prob: float,
    p: int,
    v0: float,
    h: float,
    lam: float = 1.0,
    mode: str = CONCENTRATION,
    grid=(0.01, 0.02, 0.03, 0.05),
    iterations: int = 2000,
    rng: np.random.Generator | None = None,
    burnin: int | None = None,
    jobs: int = 1,
) -> float:
    """The ``pi`` whose implied prior edge probability equals ``target_prob``.

    Simulates the prior at every grid value and inverts the piecewise-linear
    interpolant. Raises :class:`TargetNotBracketed` when the target is
    outside the simulated range.
    """
    if not 0.0 < target_prob < 1.0:
        raise InvalidParameter(f"target probability must lie in (0, 1), got {target_prob}")
    grid = [float(g) for g in grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParameter("grid must be strictly increasing with at least two values")
    burnin = iterations // 4 if burnin is None else burnin
    thetas = [Hyperparams(v0=v0, h=h, pi=g, lam=lam) for g in grid]
    curve = prior_curve(p, thetas, mode, iterations, burnin, rng, jobs)
    return interpolate_crossing(grid, [r.implied_edge_prob for r in curve], target_prob)


@dataclass
class Histogram:
    """Normalized histogram of prior draws of ``a_ij`` with ``z_ij`` fixed at ``z_value``."""

    z_value: int
    edges: np.ndarray
    density: np.ndarray
    count: int
    mean: float
    sd: float
    excess_kurtosis: float

    def mass(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))

    def as_dict(self) -> dict:
        return {
            "z_value": self.z_value,
            "edges": self.edges.tolist(),
            "density": self.density.tolist(),
            "count": self.count,
            "mean": self.mean,
            "sd": self.sd,
            "excess_kurtosis": self.excess_kurtosis,
        }


def conditional_density_histogram(
    p: int,
    theta: Hyperparams,
    mode: str,
    z_value: int,
    iterations: int,
    bins=60,
    rng: np.random.Generator | None = None,
    burnin: int | None = None,
) -> Histogram:
    """Pool prior draws of every off-diagonal ``a_ij`` whose concurrent ``z_ij`` equals ``z_value``."""
    if z_value not in (0, 1):
        raise InvalidParameter(f"z_value must be 0 or 1, got {z_value}")
    rng = np.random.default_rng() if rng is None else rng
    burnin = iterations // 4 if burnin is None else burnin
    iu = upper_indices(p)
    chunks = []
    for st in _prior_states(p, theta, mode, iterations, burnin, rng):
        a = st.matrix.values[iu]
        chunks.append(a[st.z.bits == bool(z_value)])
    draws = np.concatenate(chunks) if chunks else np.zeros(0)
    if draws.size < MIN_STRATUM:
        raise InsufficientSamples(
            f"only {draws.size} draws with z = {z_value}; need at least {MIN_STRATUM}"
        )
    density, edges = np.histogram(draws, bins=bins, density=True)
    centered = draws - draws.mean()
    var = float(np.mean(centered ** 2))
    kurt = float(np.mean(centered ** 4) / var ** 2 - 3.0) if var > 0 else math.nan
    return Histogram(z_value, edges, density, int(draws.size), float(draws.mean()), math.sqrt(var), kurt)
