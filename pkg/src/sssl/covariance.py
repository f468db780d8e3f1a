"""Block Gibbs sampler for covariance (bi-directed) graph models.

Column ``j`` of the covariance matrix is moved last and redrawn through
``u = sigma_12``, ``v = sigma_22 - u' Sigma_11^{-1} u``. Given the current
``v``, ``u`` is normal with precision ``B + diag(1/v_12)`` where

    B = Sigma_11^{-1} S_11 Sigma_11^{-1} / v + lambda Sigma_11^{-1}
    w = Sigma_11^{-1} s_12 / v            (mean = precision^{-1} w)

and then, given the new ``u``, ``v ~ GIG(1 - n/2, lambda, b)`` where ``b`` is
the residual sum of squares
``u'Sigma_11^{-1} S_11 Sigma_11^{-1} u - 2 s_12'Sigma_11^{-1} u + s_22``.
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
from .errors import InvalidParameter
from .model import COVARIANCE, Dataset, Hyperparams
from .numerics import (
    GigParams,
    block_inverse_assemble,
    cholesky,
    inverse_from_cholesky,
    leading_block_inverse,
    sample_gamma,
    sample_gig,
    sample_mvn_precision,
)

CovarianceState = ChainState


def column_precision(inv11, S11, s12, v, v12, lam, n):
    """Precision ``B + diag(1/v_12)`` and linear term ``w`` of the ``u`` conditional."""
    if n > 0:
        prec = inv11 @ S11 @ inv11
        prec /= v
        prec += lam * inv11
        lin = inv11 @ s12 / v
    else:
        prec = lam * inv11
        lin = np.zeros(inv11.shape[0])
    prec.flat[:: prec.shape[0] + 1] += 1.0 / v12
    # B is a product of three matrices; remove its rounding asymmetry
    prec += prec.T
    prec *= 0.5
    return prec, lin


def gig_b(inv11, S11, s12, s22, u) -> float:
    t = inv11 @ u
    return float(t @ S11 @ t - 2.0 * (s12 @ t) + s22)


def column_conditional(state: ChainState, j: int, data: Dataset, theta: Hyperparams) -> dict:
    """Normal parameters of ``u`` given the current ``v`` for column ``j``; ``state`` is untouched."""
    others = others_index(state.p)[j]
    perm = np.append(others, j)
    sig = state.matrix.values
    inv11 = leading_block_inverse(state.matrix.inverse_cache[np.ix_(perm, perm)])
    sigma12 = sig[others, j]
    v = float(sig[j, j] - sigma12 @ inv11 @ sigma12)
    prec, lin = column_precision(
        inv11, data.S[np.ix_(others, others)], data.S[others, j], v,
        state.v.entries[others, j], theta.lam, data.n,
    )
    cov = inverse_from_cholesky(cholesky(prec))
    return {
        "index": others,
        "mean": cov @ lin,
        "cov": cov,
        "precision": prec,
        "linear": lin,
        "sigma11_inv": inv11,
        "schur": v,
        "gig_order": 1.0 - data.n / 2.0,
    }


def _redraw_last(sig, om, S11, s12, s22, v12, n, lam, rng, cov_inflation=1.0):
    # sig: covariance matrix with the target column last; om: its inverse
    inv11 = leading_block_inverse(om)
    sigma12 = sig[:-1, -1]
    v_cur = float(sig[-1, -1] - sigma12 @ inv11 @ sigma12)
    if not v_cur > 0:
        raise InvalidParameter(f"current Schur complement is not positive ({v_cur})")
    prec, lin = column_precision(inv11, S11, s12, v_cur, v12, lam, n)
    u, mean = sample_mvn_precision(lin, prec, rng)
    if cov_inflation != 1.0:
        u = mean + math.sqrt(cov_inflation) * (u - mean)
    if n > 0:
        b = gig_b(inv11, S11, s12, s22, u)
        if not b > 0:
            raise InvalidParameter(f"GIG b-argument must be positive, got {b}")
        v = sample_gig(GigParams(1.0 - n / 2.0, lam, b), rng)
    else:
        # b -> 0 limit of GIG(1, lambda, b)
        v = sample_gamma(1.0, lam / 2.0, rng)

    block_inverse_assemble(inv11, u, v, out=om)
    t = om[:-1, -1] * -v  # = Sigma_11^{-1} u
    sig[:-1, -1] = u
    sig[-1, :-1] = u
    sig[-1, -1] = v + float(u @ t)


def _redraw(state, data, theta, rng, cov_inflation):
    sig = state.matrix.values
    om = state.matrix.inverse_cache
    S = data.S
    V = state.v.entries
    n = data.n

    def redraw_last(others, j):
        S11 = S[np.ix_(others, others)] if n else None
        _redraw_last(sig, om, S11, S[others, j], float(S[j, j]), V[others, j], n, theta.lam, rng, cov_inflation)

    return redraw_last


def update_column_covariance(
    state: ChainState,
    j: int,
    data: Dataset,
    theta: Hyperparams,
    rng: np.random.Generator,
    *,
    cov_inflation: float = 1.0,
) -> None:
    """Redraw column ``j``: ``u`` given the current ``v``, then ``v`` given the new ``u``."""
    update_single_column(state, j, _redraw(state, data, theta, rng, cov_inflation))


def sweep_covariance(state, data, theta, rng, *, random_scan=False, cov_inflation=1.0) -> None:
    order = column_order(state.p, rng, random_scan)
    sweep_columns(state, order, _redraw(state, data, theta, rng, cov_inflation))
    draw_indicators(state, theta, rng)
    state.sweep_count += 1


def initial_covariance_state(data: Dataset, theta: Hyperparams, rng) -> ChainState:
    """Start at the ridged sample covariance ``S/n + 0.001 I``."""
    return initial_state(starting_covariance(data), theta, rng)


def run_covariance_chain(
    data: Dataset,
    theta: Hyperparams,
    config: ChainConfig,
    rng: np.random.Generator,
    progress=None,
) -> ChainOutput:
    validate_inputs(data, theta)
    state = initial_covariance_state(data, theta, rng)
    return run_chain(state, sweep_covariance, data, theta, config, rng, COVARIANCE, progress)
