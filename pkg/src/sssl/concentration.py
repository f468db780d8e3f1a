"""Block Gibbs sampler for concentration (undirected) graph models.

Each column update moves column ``j`` of the concentration matrix to the
last position and redraws it through the change of variables
``u = omega_12``, ``v = omega_22 - u' Omega_11^{-1} u``::

    u | rest ~ N(-C s_12, C),  C = ((s_22 + lambda) Omega_11^{-1} + diag(1/v_12))^{-1}
    v | rest ~ Gamma(n/2 + 1, rate=(s_22 + lambda)/2)

The covariance matrix is kept as the inverse cache, so ``Omega_11^{-1}`` costs
O(p^2) per column instead of a fresh factorization.
"""

from __future__ import annotations

import math

import numpy as np

from .analysis import ChainOutput
from .chain import (
    ChainConfig,
    ChainState,
    column_order,
    draw_indicators,
    initial_state,
    others_index,
    run_chain,
    starting_covariance,
    sweep_columns,
    update_single_column,
    validate_inputs,
)
from .model import CONCENTRATION, Dataset, Hyperparams
from .numerics import (
    block_inverse_assemble,
    cholesky,
    inverse_from_cholesky,
    leading_block_inverse,
    sample_gamma,
    sample_mvn_precision,
)

ConcentrationState = ChainState


def column_precision(inv11, s12, s22, v12, lam):
    """Precision ``C^{-1}`` and linear term of the column conditional (mean ``C @ linear``)."""
    prec = (s22 + lam) * inv11
    prec.flat[:: prec.shape[0] + 1] += 1.0 / v12
    return prec, -np.asarray(s12, dtype=float)


def column_conditional(state: ChainState, j: int, data: Dataset, theta: Hyperparams) -> dict:
    """Parameters of the full conditional of column ``j`` without touching ``state``.

    Returns the normal mean and covariance of ``u`` (entries ordered as in
    ``index``) and the Gamma shape and rate of the Schur complement ``v``.
    """
    others = others_index(state.p)[j]
    perm = np.append(others, j)
    inv11 = leading_block_inverse(state.matrix.inverse_cache[np.ix_(perm, perm)])
    s22 = data.S[j, j]
    prec, lin = column_precision(inv11, data.S[others, j], s22, state.v.entries[others, j], theta.lam)
    cov = inverse_from_cholesky(cholesky(prec))
    return {
        "index": others,
        "mean": cov @ lin,
        "cov": cov,
        "precision": prec,
        "omega11_inv": inv11,
        "gamma_shape": data.n / 2.0 + 1.0,
        "gamma_rate": (s22 + theta.lam) / 2.0,
    }


def _redraw_last(om, sig, s12, s22, v12, n, lam, rng, cov_inflation=1.0):
    # om: concentration matrix with the target column last; sig: its inverse
    inv11 = leading_block_inverse(sig)
    prec, lin = column_precision(inv11, s12, s22, v12, lam)
    u, mean = sample_mvn_precision(lin, prec, rng)
    if cov_inflation != 1.0:
        u = mean + math.sqrt(cov_inflation) * (u - mean)
    v = sample_gamma(n / 2.0 + 1.0, (s22 + lam) / 2.0, rng)

    block_inverse_assemble(inv11, u, v, out=sig)
    t = sig[:-1, -1] * -v  # = Omega_11^{-1} u
    om[:-1, -1] = u
    om[-1, :-1] = u
    om[-1, -1] = v + float(u @ t)


def _redraw(state, data, theta, rng, cov_inflation):
    om = state.matrix.values
    sig = state.matrix.inverse_cache
    S = data.S
    V = state.v.entries

    def redraw_last(others, j):
        _redraw_last(om, sig, S[others, j], S[j, j], V[others, j], data.n, theta.lam, rng, cov_inflation)

    return redraw_last


def update_column_concentration(
    state: ChainState,
    j: int,
    data: Dataset,
    theta: Hyperparams,
    rng: np.random.Generator,
    *,
    cov_inflation: float = 1.0,
) -> None:
    """Redraw column ``j`` of the concentration matrix from its full conditional.

    ``cov_inflation`` scales the covariance of the normal draw and exists only
    so tests can check that a corrupted sampler is detected.
    """
    update_single_column(state, j, _redraw(state, data, theta, rng, cov_inflation))


def sweep_concentration(state, data, theta, rng, *, random_scan=False, cov_inflation=1.0) -> None:
    """Update every column once, then redraw all edge indicators jointly."""
    order = column_order(state.p, rng, random_scan)
    sweep_columns(state, order, _redraw(state, data, theta, rng, cov_inflation))
    draw_indicators(state, theta, rng)
    state.sweep_count += 1


def initial_concentration_state(data: Dataset, theta: Hyperparams, rng) -> ChainState:
    """Start at the inverse of the ridged sample covariance, indicators drawn given it."""
    omega0 = inverse_from_cholesky(cholesky(starting_covariance(data)))
    return initial_state(omega0, theta, rng)


def run_concentration_chain(
    data: Dataset,
    theta: Hyperparams,
    config: ChainConfig,
    rng: np.random.Generator,
    progress=None,
) -> ChainOutput:
    validate_inputs(data, theta)
    state = initial_concentration_state(data, theta, rng)
    return run_chain(state, sweep_concentration, data, theta, config, rng, CONCENTRATION, progress)
