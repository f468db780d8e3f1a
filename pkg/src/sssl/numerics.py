"""Dense linear algebra kernels and random variate generators.

Everything here works on plain ``numpy`` arrays. The samplers call these
functions once per column, so the hot paths go straight to LAPACK through
``scipy.linalg.lapack`` to keep per-call overhead small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import InvalidParameter, NotPositiveDefinite

__all__ = [
    "CholeskyFactor",
    "GigParams",
    "cholesky",
    "inverse_from_cholesky",
    "sample_mvn_cov",
    "sample_mvn_precision",
    "sample_gamma",
    "sample_gig",
    "symmetric_swap",
    "block_inverse_assemble",
    "leading_block_inverse",
]


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor ``L`` with ``L @ L.T`` equal to the source."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


@dataclass(frozen=True)
class GigParams:
    """Generalized inverse Gaussian with kernel ``x**(q-1) * exp(-(a*x + b/x)/2)``."""

    q: float
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidParameter(f"GIG requires a > 0 and b > 0, got a={self.a}, b={self.b}")
        if not math.isfinite(self.q):
            raise InvalidParameter(f"GIG order must be finite, got q={self.q}")


def _potrf(m: np.ndarray) -> np.ndarray:
    c, info = lapack.dpotrf(m, lower=1, clean=1, overwrite_a=0)
    if info != 0:
        raise NotPositiveDefinite(
            f"Cholesky factorization failed at pivot {info}" if info > 0
            else f"invalid argument to dpotrf ({info})"
        )
    return c


def cholesky(m) -> CholeskyFactor:
    """Lower Cholesky factor; raises :class:`NotPositiveDefinite` on a non-positive pivot."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidParameter(f"expected a square matrix, got shape {m.shape}")
    return CholeskyFactor(_potrf(m))


def inverse_from_cholesky(factor: CholeskyFactor) -> np.ndarray:
    inv, info = lapack.dpotri(factor.lower, lower=1)
    if info != 0:
        raise NotPositiveDefinite(f"inverse from Cholesky factor failed ({info})")
    il = np.tril_indices_from(inv, -1)
    inv[il[1], il[0]] = inv[il]
    return inv


def sample_mvn_cov(mean, cov, rng: np.random.Generator) -> np.ndarray:
    """Draw ``mean + L @ eps`` with ``L`` the Cholesky factor of ``cov``."""
    mean = np.asarray(mean, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    factor = cholesky(cov)
    return mean + factor.lower @ rng.standard_normal(mean.shape[0])


def sample_mvn_precision(linear, precision, rng: np.random.Generator):
    """Draw from ``N(P^{-1} b, P^{-1})`` given the precision ``P`` and ``b``.

    Uses one Cholesky of ``P`` and two triangular solves, so no explicit
    inverse is formed. Returns ``(draw, mean)``.
    """
    c = _potrf(precision)
    y, info = lapack.dtrtrs(c, linear, lower=1, trans=0)
    mean, _ = lapack.dtrtrs(c, y, lower=1, trans=1)
    eps = rng.standard_normal(y.shape[0])
    draw, _ = lapack.dtrtrs(c, y + eps, lower=1, trans=1)
    return draw, mean


def sample_gamma(shape: float, rate: float, rng: np.random.Generator, size=None):
    """Gamma draw with density proportional to ``x**(shape-1) * exp(-rate*x)``."""
    if not (shape > 0 and rate > 0):
        raise InvalidParameter(f"gamma requires shape > 0 and rate > 0, got {shape}, {rate}")
    return rng.gamma(shape, 1.0 / rate, size)


# Devroye (2014) rejection sampler for the two-parameter gig(lam, omega) with
# density proportional to x**(lam-1) * exp(-omega*(x + 1/x)/2), lam >= 0. It
# samples log(x) under a three-piece envelope and needs no Bessel functions.


def _psi(x, alpha, lam):
    return -alpha * (math.cosh(x) - 1.0) - lam * (math.exp(x) - x - 1.0)


def _dpsi(x, alpha, lam):
    return -alpha * math.sinh(x) - lam * (math.exp(x) - 1.0)


class _DevroyeGig:
    __slots__ = ("lam", "alpha", "t", "s", "eta", "zeta", "theta", "xi",
                 "p", "r", "td", "sd", "q", "scale")

    def __init__(self, lam: float, omega: float):
        alpha = math.sqrt(omega * omega + lam * lam) - lam
        if alpha <= 0.0:
            # omega underflowed relative to lam; fall back to the series form
            alpha = omega * omega / (2.0 * lam)
        self.lam = lam
        self.alpha = alpha

        x = -_psi(1.0, alpha, lam)
        if 0.5 <= x <= 2.0:
            t = 1.0
        elif x > 2.0:
            t = math.sqrt(2.0 / (alpha + lam))
        else:
            t = math.log(4.0 / (alpha + 2.0 * lam))

        x = -_psi(-1.0, alpha, lam)
        if 0.5 <= x <= 2.0:
            s = 1.0
        elif x > 2.0:
            s = math.sqrt(4.0 / (alpha * math.cosh(1.0) + lam))
        else:
            ia = 1.0 / alpha
            s = math.log(1.0 + ia + math.sqrt(ia * ia + 2.0 * ia))
            if lam > 0.0:
                s = min(1.0 / lam, s)

        self.t, self.s = t, s
        self.eta = -_psi(t, alpha, lam)
        self.zeta = -_dpsi(t, alpha, lam)
        self.theta = -_psi(-s, alpha, lam)
        self.xi = _dpsi(-s, alpha, lam)
        self.p = 1.0 / self.xi
        self.r = 1.0 / self.zeta
        self.td = t - self.r * self.eta
        self.sd = s - self.p * self.theta
        self.q = self.td + self.sd
        ratio = lam / omega
        self.scale = ratio + math.sqrt(1.0 + ratio * ratio)

    def draw(self, rng: np.random.Generator) -> float:
        alpha, lam = self.alpha, self.lam
        p, q, r = self.p, self.q, self.r
        td, sd = self.td, self.sd
        total = p + q + r
        while True:
            u, v, w = rng.random(3)
            if v <= 0.0:
                continue
            if u * total < q:
                x = -sd + q * v
            elif u * total < q + r:
                x = td - r * math.log(v)
            else:
                x = -sd + p * math.log(v)
            if x > 700.0 or x < -700.0:
                continue
            if x > td:
                chi = math.exp(-self.eta - self.zeta * (x - self.t))
            elif x < -sd:
                chi = math.exp(-self.theta + self.xi * (x + self.s))
            else:
                chi = 1.0
            if w * chi <= math.exp(_psi(x, alpha, lam)):
                return math.exp(x) * self.scale


def sample_gig(params: GigParams, rng: np.random.Generator, size=None):
    """Draw from GIG(q, a, b) by Devroye's log-scale rejection method.

    The order is reflected to ``|q|`` (``X ~ GIG(q)`` iff ``1/X ~ GIG(-q)``
    after swapping ``a`` and ``b``) and the draw rescaled by ``sqrt(b/a)``.
    The expected number of trials is bounded uniformly in the parameters.
    """
    q, a, b = params.q, params.a, params.b
    lam = abs(q)
    omega = math.sqrt(a * b)
    gen = _DevroyeGig(lam, omega)
    scale = math.sqrt(b / a)
    if size is None:
        x = gen.draw(rng)
        if q < 0:
            x = 1.0 / x
        return x * scale
    out = np.empty(size)
    flat = out.reshape(-1)
    for k in range(flat.shape[0]):
        x = gen.draw(rng)
        flat[k] = (1.0 / x if q < 0 else x) * scale
    return out


def symmetric_swap(m: np.ndarray, i: int, j: int) -> None:
    """Swap rows ``i, j`` and columns ``i, j`` of ``m`` in place."""
    if i == j:
        return
    t = m[i].copy()
    m[i] = m[j]
    m[j] = t
    t = m[:, i].copy()
    m[:, i] = m[:, j]
    m[:, j] = t


def block_inverse_assemble(inv11, u, v, out=None) -> np.ndarray:
    """Inverse of ``[[A11, u], [u', v + u' A11^{-1} u]]`` from ``A11^{-1}``.

    ``v`` is the Schur complement of ``A11`` and must be positive. Costs
    O(p^2). When ``out`` is given the result is written into it.
    """
    if not v > 0:
        raise InvalidParameter(f"Schur complement must be positive, got {v}")
    inv11 = np.asarray(inv11, dtype=float)
    u = np.asarray(u, dtype=float)
    k = inv11.shape[0]
    if out is None:
        out = np.empty((k + 1, k + 1))
    t = inv11 @ u
    np.multiply.outer(t, t / v, out=out[:k, :k])
    out[:k, :k] += inv11
    out[:k, k] = -t / v
    out[k, :k] = out[:k, k]
    out[k, k] = 1.0 / v
    return out


def leading_block_inverse(full_inv, out=None) -> np.ndarray:
    """``A11^{-1}`` from the inverse ``M`` of the full matrix: ``M11 - m12 m12' / m22``."""
    full_inv = np.asarray(full_inv, dtype=float)
    m22 = full_inv[-1, -1]
    if not m22 > 0:
        raise InvalidParameter(f"corner of the inverse must be positive, got {m22}")
    m12 = full_inv[:-1, -1]
    if out is None:
        out = np.empty((m12.shape[0], m12.shape[0]))
    np.multiply.outer(m12, m12 / -m22, out=out)
    out += full_inv[:-1, :-1]
    return out
