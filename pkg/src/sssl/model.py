"""Prior domain types, densities and the joint edge-indicator update.

The continuous spike-and-slab prior puts a two-component normal mixture on
every off-diagonal entry of a positive definite matrix ``A`` (either the
concentration matrix or the covariance matrix), an exponential density with
rate ``lambda/2`` on every diagonal entry, and restricts ``A`` to the positive
definite cone. Latent indicators ``z_ij`` select the mixture component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, InvalidParameter, NotPositiveDefinite
from .numerics import _potrf, inverse_from_cholesky, CholeskyFactor

CONCENTRATION = "concentration"
COVARIANCE = "covariance"
MODES = (CONCENTRATION, COVARIANCE)


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise InvalidParameter(f"mode must be one of {MODES}, got {mode!r}")
    return mode


@dataclass(frozen=True)
class Hyperparams:
    """Prior parameters. The slab sd is stored as a ratio ``h`` of the spike sd."""

    v0: float = 0.02
    h: float = 50.0
    pi: float = 0.5
    lam: float = 1.0

    def __post_init__(self):
        if not self.v0 > 0:
            raise InvalidParameter(f"v0 must be positive, got {self.v0}")
        if not self.h > 1:
            raise InvalidParameter(f"h must exceed 1, got {self.h}")
        if not 0 < self.pi < 1:
            raise InvalidParameter(f"pi must lie in (0, 1), got {self.pi}")
        if not self.lam > 0:
            raise InvalidParameter(f"lambda must be positive, got {self.lam}")

    @property
    def v1(self) -> float:
        return self.h * self.v0

    @classmethod
    def default_for(cls, p: int, **overrides) -> "Hyperparams":
        """Defaults used for data analysis: ``v0=0.02, h=50, pi=2/(p-1), lambda=1``."""
        kwargs = dict(v0=0.02, h=50.0, pi=2.0 / (p - 1), lam=1.0)
        kwargs.update(overrides)
        return cls(**kwargs)

    def as_dict(self) -> dict:
        return {"v0": self.v0, "h": self.h, "v1": self.v1, "pi": self.pi, "lambda": self.lam}


class SymmetricPDMatrix:
    """Dense symmetric positive definite matrix carrying a cached inverse.

    The samplers mutate ``values`` and ``inverse_cache`` in place between
    refreshes; :meth:`refresh` recomputes the inverse from a Cholesky
    factorization and records the drift accumulated before it.
    """

    def __init__(self, values, inverse=None):
        values = np.array(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {values.shape}")
        if values.shape[0] < 1:
            raise DimensionMismatch("matrix must be non-empty")
        iu = np.triu_indices(values.shape[0], 1)
        values[iu[1], iu[0]] = values[iu]
        self.values = values
        self.inverse_cache = None
        self.cache_drift = math.inf
        if inverse is None:
            self.refresh()
        else:
            self.inverse_cache = np.array(inverse, dtype=float)
            self.cache_drift = self.drift()

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, idx):
        return self.values[idx]

    def set_entry(self, i: int, j: int, value: float) -> None:
        """Write ``value`` at ``(i, j)`` and ``(j, i)``. The inverse cache is not updated."""
        self.values[i, j] = value
        self.values[j, i] = value

    def cholesky(self) -> CholeskyFactor:
        return CholeskyFactor(_potrf(self.values))

    def is_pd(self) -> bool:
        try:
            _potrf(self.values)
        except NotPositiveDefinite:
            return False
        return True

    def drift(self) -> float:
        """Infinity norm of ``A @ inverse_cache - I``."""
        r = self.values @ self.inverse_cache
        r[np.diag_indices_from(r)] -= 1.0
        return float(np.abs(r).sum(axis=1).max())

    def refresh(self) -> float:
        """Recompute the inverse by Cholesky; returns the drift measured before the refresh."""
        before = self.drift() if self.inverse_cache is not None else math.inf
        self.inverse_cache = inverse_from_cholesky(self.cholesky())
        self.cache_drift = self.drift()
        return before

    def copy(self) -> "SymmetricPDMatrix":
        return SymmetricPDMatrix(self.values.copy(), self.inverse_cache.copy())


@dataclass
class EdgeIndicators:
    """Edge-inclusion indicators ``z_ij`` for ``i < j``.

    ``bits`` holds the ``p(p-1)/2`` entries in ``np.triu_indices(p, 1)`` order.
    """

    dim: int
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (n_pairs(self.dim),):
            raise DimensionMismatch(
                f"expected {n_pairs(self.dim)} indicators for p={self.dim}, got {self.bits.shape}"
            )

    @classmethod
    def empty(cls, p: int) -> "EdgeIndicators":
        return cls(p, np.zeros(n_pairs(p), dtype=bool))

    @classmethod
    def from_matrix(cls, m) -> "EdgeIndicators":
        """Read the strict upper triangle of a square array as indicators (nonzero means edge)."""
        m = np.asarray(m)
        p = m.shape[0]
        return cls(p, m[np.triu_indices(p, 1)] != 0)

    def __getitem__(self, ij):
        i, j = ij
        if i == j:
            raise IndexError("diagonal entries are not addressable")
        if i > j:
            i, j = j, i
        return bool(self.bits[pair_index(self.dim, i, j)])

    def matrix(self) -> np.ndarray:
        """Symmetric boolean adjacency matrix with a false diagonal."""
        out = np.zeros((self.dim, self.dim), dtype=bool)
        iu = np.triu_indices(self.dim, 1)
        out[iu] = self.bits
        out[iu[1], iu[0]] = self.bits
        return out

    def count(self) -> int:
        return int(self.bits.sum())

    def edges(self) -> list[tuple[int, int]]:
        iu = np.triu_indices(self.dim, 1)
        return [(int(i), int(j)) for i, j, b in zip(iu[0], iu[1], self.bits) if b]


@dataclass
class VarianceMatrix:
    """Full symmetric matrix of prior variances: ``v0**2`` where ``z_ij = 0`` else ``v1**2``.

    The diagonal is zero and never used.
    """

    dim: int
    entries: np.ndarray

    @classmethod
    def from_indicators(cls, z: EdgeIndicators, theta: Hyperparams) -> "VarianceMatrix":
        m = np.where(z.matrix(), theta.v1 ** 2, theta.v0 ** 2)
        np.fill_diagonal(m, 0.0)
        return cls(z.dim, m)

    def consistent_with(self, z: EdgeIndicators, theta: Hyperparams) -> bool:
        return bool(np.array_equal(self.entries, VarianceMatrix.from_indicators(z, theta).entries))


@dataclass
class Dataset:
    """Data matrix ``Y`` (``n x p``) together with its Gram matrix ``S = Y'Y``.

    ``n = 0`` is allowed and means prior-only simulation (``S = 0``).
    """

    Y: np.ndarray
    labels: list[str] | None = None
    timestamps: list | None = None
    S: np.ndarray = field(init=False)

    def __post_init__(self):
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        self.S = self.Y.T @ self.Y
        if self.labels is not None and len(self.labels) != self.p:
            raise DimensionMismatch(f"{len(self.labels)} labels for {self.p} columns")

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    @classmethod
    def empty(cls, p: int) -> "Dataset":
        return cls(np.zeros((0, p)))


@lru_cache(maxsize=32)
def _triu(p: int):
    return np.triu_indices(p, 1)


def n_pairs(p: int) -> int:
    return p * (p - 1) // 2


def pair_index(p: int, i: int, j: int) -> int:
    """Position of ``(i, j)``, ``i < j``, within ``np.triu_indices(p, 1)`` order."""
    return i * p - i * (i + 1) // 2 + (j - i - 1)


def edge_log_odds(a, theta: Hyperparams):
    """Conditional log-odds of ``z_ij = 1`` given the matrix entry ``a``.

    Works on scalars or arrays. Evaluated in the log domain so that a tiny
    spike sd cannot overflow the density ratio.
    """
    a = np.asarray(a, dtype=float)
    v0, v1 = theta.v0, theta.v1
    out = (
        math.log(theta.pi) - math.log1p(-theta.pi)
        + math.log(v0 / v1)
        + a * a * (0.5 / (v0 * v0) - 0.5 / (v1 * v1))
    )
    return out if out.ndim else float(out)


def edge_inclusion_prob(a, theta: Hyperparams):
    return expit(edge_log_odds(a, theta))


def sample_edge_indicators(A, theta: Hyperparams, rng: np.random.Generator) -> EdgeIndicators:
    """Draw every ``z_ij`` independently from its conditional given ``A`` in one pass."""
    values = A.values if isinstance(A, SymmetricPDMatrix) else np.asarray(A, dtype=float)
    p = values.shape[0]
    a = values[_triu(p)]
    lo = edge_log_odds(a, theta)
    # u < sigmoid(lo) <=> logit(u) < lo; comparing on the logit scale keeps
    # the draw exact where the sigmoid would saturate
    u = rng.random(a.shape[0])
    with np.errstate(divide="ignore"):
        bits = np.log(u) - np.log1p(-u) < lo
    return EdgeIndicators(p, bits)


def unnormalized_log_target(A, z: EdgeIndicators, theta: Hyperparams, data: Dataset, mode: str) -> float:
    """Log joint density of ``(A, Z)`` given data, up to an additive constant.

    Combines the Gaussian likelihood in the parameterization set by ``mode``,
    the selected normal component (with its prior weight) for every
    off-diagonal entry, and the exponential kernel for each diagonal entry.
    """
    check_mode(mode)
    values = A.values if isinstance(A, SymmetricPDMatrix) else np.asarray(A, dtype=float)
    p = values.shape[0]
    if data.p != p or z.dim != p:
        raise DimensionMismatch("matrix, indicators and data must share the same dimension")
    c = _potrf(values)
    logdet = 2.0 * float(np.log(np.diag(c)).sum())
    n = data.n
    if mode == CONCENTRATION:
        loglik = 0.5 * n * logdet - 0.5 * float(np.sum(data.S * values))
    else:
        loglik = -0.5 * n * logdet
        if n:
            inv = inverse_from_cholesky(CholeskyFactor(c))
            loglik -= 0.5 * float(np.sum(data.S * inv))
    a = values[np.triu_indices(p, 1)]
    sd = np.where(z.bits, theta.v1, theta.v0)
    logprior_off = float(np.sum(-0.5 * (a / sd) ** 2 - np.log(sd)))
    logprior_z = float(np.sum(np.where(z.bits, math.log(theta.pi), math.log1p(-theta.pi))))
    logprior_diag = -0.5 * theta.lam * float(np.trace(values))
    return loglik + logprior_off + logprior_z + logprior_diag
