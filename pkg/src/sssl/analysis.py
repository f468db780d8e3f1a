"""Posterior summaries: edge frequencies, median probability graphs, accuracy and mixing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .model import EdgeIndicators, check_mode, n_pairs


def trace_positions(p: int, subset: int) -> np.ndarray:
    """Up to ``subset`` evenly spaced ``(i, j)`` positions, ``i <= j``, as a ``(k, 2)`` array."""
    iu = np.triu_indices(p)
    total = iu[0].shape[0]
    k = min(max(int(subset), 0), total)
    if k == 0:
        return np.zeros((0, 2), dtype=int)
    pick = np.unique(np.linspace(0, total - 1, k).round().astype(int))
    return np.column_stack([iu[0][pick], iu[1][pick]])


@dataclass
class ChainOutput:
    """Streaming accumulators over the kept sweeps of one (or several merged) chains.

    ``edge_freq`` and ``mat_mean`` are full symmetric ``p x p`` arrays; the
    diagonal of ``edge_freq`` is zero. ``traces`` has one column per row of
    ``trace_index``. ``samples`` is filled only when a thinning interval was
    requested.
    """

    p: int
    mode: str
    kept: int = 0
    edge_freq: np.ndarray | None = None
    mat_mean: np.ndarray | None = None
    trace_index: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    traces: np.ndarray | None = None
    sweep_seconds: np.ndarray | None = None
    samples: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def start(cls, p: int, mode: str, trace_index=None, store_every: int | None = None):
        out = cls(p=p, mode=check_mode(mode))
        if trace_index is not None:
            out.trace_index = np.asarray(trace_index, dtype=int).reshape(-1, 2)
        out._edge_sum = np.zeros(n_pairs(p))
        out._mat_sum = np.zeros((p, p))
        out._trace_rows = []
        out._seconds = []
        out._store_every = store_every
        out._seen = 0
        if store_every:
            out.samples = {"matrix": [], "z": []}
        return out

    def record_time(self, seconds: float) -> None:
        self._seconds.append(seconds)

    def accumulate(self, matrix: np.ndarray, bits: np.ndarray) -> None:
        self.kept += 1
        self._edge_sum += bits
        self._mat_sum += matrix
        if len(self.trace_index):
            self._trace_rows.append(matrix[self.trace_index[:, 0], self.trace_index[:, 1]])
        if self._store_every and self._seen % self._store_every == 0:
            self.samples["matrix"].append(matrix.copy())
            self.samples["z"].append(bits.copy())
        self._seen += 1

    def finish(self) -> "ChainOutput":
        if self.kept < 1:
            raise InvalidParameter("a chain output needs at least one kept sweep")
        p = self.p
        ef = np.zeros((p, p))
        iu = np.triu_indices(p, 1)
        ef[iu] = self._edge_sum / self.kept
        ef[iu[1], iu[0]] = ef[iu]
        self.edge_freq = ef
        mm = self._mat_sum / self.kept
        self.mat_mean = 0.5 * (mm + mm.T)
        k = len(self.trace_index)
        self.traces = np.array(self._trace_rows).reshape(-1, k) if self._trace_rows else np.zeros((0, k))
        self.sweep_seconds = np.asarray(self._seconds, dtype=float)
        if self.samples is not None:
            self.samples = {
                "matrix": np.array(self.samples["matrix"]),
                "z": np.array(self.samples["z"], dtype=bool),
            }
        return self

    def edge_probabilities(self) -> np.ndarray:
        """Edge frequencies in ``np.triu_indices(p, 1)`` order."""
        return self.edge_freq[np.triu_indices(self.p, 1)]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "mode": self.mode,
            "kept": self.kept,
            "edge_prob": self.edge_freq.tolist(),
            "posterior_mean": self.mat_mean.tolist(),
            "trace_index": self.trace_index.tolist(),
            "diagnostics": {k: _jsonable(v) for k, v in self.diagnostics.items()},
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def merge_outputs(*outputs: ChainOutput) -> ChainOutput:
    """Pool independent chains: means are weighted by kept sweeps; traces are dropped.

    The result does not depend on the order of the arguments.
    """
    if not outputs:
        raise InvalidParameter("nothing to merge")
    p, mode = outputs[0].p, outputs[0].mode
    for o in outputs:
        if o.p != p or o.mode != mode:
            raise DimensionMismatch("can only merge outputs with matching dimension and mode")
    kept = sum(o.kept for o in outputs)
    ef = sum(o.edge_freq * o.kept for o in outputs) / kept
    mm = sum(o.mat_mean * o.kept for o in outputs) / kept
    secs = np.sort(np.concatenate([o.sweep_seconds for o in outputs]))
    return ChainOutput(p=p, mode=mode, kept=kept, edge_freq=ef, mat_mean=mm, sweep_seconds=secs)


@dataclass
class GraphEstimate:
    edges: EdgeIndicators
    threshold: float

    @property
    def adjacency(self) -> np.ndarray:
        return self.edges.matrix()

    def count(self) -> int:
        return self.edges.count()


def median_probability_graph(out: ChainOutput, threshold: float = 0.5) -> GraphEstimate:
    """Edges whose inclusion frequency strictly exceeds ``threshold``."""
    return GraphEstimate(EdgeIndicators(out.p, out.edge_probabilities() > threshold), threshold)


def structure_metrics(estimate, truth: EdgeIndicators) -> dict:
    """True/false positive and negative counts of an estimated graph against the truth."""
    est = estimate.edges if isinstance(estimate, GraphEstimate) else estimate
    if est.dim != truth.dim:
        raise DimensionMismatch(f"estimate has p={est.dim}, truth has p={truth.dim}")
    e, t = est.bits, truth.bits
    return {
        "tp": int(np.sum(e & t)),
        "fp": int(np.sum(e & ~t)),
        "fn": int(np.sum(~e & t)),
        "tn": int(np.sum(~e & ~t)),
    }


def _centered(series) -> tuple[np.ndarray, float]:
    x = np.asarray(series, dtype=float).ravel()
    x = x - x.mean()
    c0 = float(x @ x)
    if c0 <= 0.0:
        raise InvalidParameter("autocorrelation is undefined for a constant series")
    return x, c0


def autocorrelation(series, lag: int) -> float:
    """Biased sample autocorrelation at ``lag`` (lag-0 autocovariance in the denominator)."""
    x, c0 = _centered(series)
    if not 0 <= lag < x.shape[0]:
        raise InvalidParameter(f"lag must lie in [0, {x.shape[0]}), got {lag}")
    if lag == 0:
        return 1.0
    return float(x[:-lag] @ x[lag:]) / c0


def autocorrelations(series) -> np.ndarray:
    """All biased sample autocorrelations, lags ``0..M-1``, via FFT."""
    x, c0 = _centered(series)
    m = x.shape[0]
    nfft = 1 << (2 * m - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:m]
    return acov / c0


def inefficiency_factor(series) -> float:
    """``1 + 2 * sum_{k=1}^{K} rho(k)``, ``K`` the first lag with ``rho(k) < 2/sqrt(M)``.

    The lag at which the correlogram first drops below the band is included in
    the sum. If it never drops below, all available lags are used.
    """
    x = np.asarray(series, dtype=float).ravel()
    m = x.shape[0]
    if m < 10:
        raise InvalidParameter(f"need at least 10 values, got {m}")
    rho = autocorrelations(x)
    band = 2.0 / math.sqrt(m)
    below = np.nonzero(rho[1:] < band)[0]
    k = int(below[0]) + 1 if below.size else m - 1
    return 1.0 + 2.0 * float(rho[1:k + 1].sum())


def inefficiency_summary(out: ChainOutput) -> dict:
    """Median inefficiency factor over the traced entries, overall and split by diagonal."""
    if out.traces is None or out.traces.shape[1] == 0 or out.traces.shape[0] < 10:
        return {"all": None, "off_diagonal": None, "diagonal": None, "count": 0}
    factors = []
    diag = []
    for col, (i, j) in enumerate(out.trace_index):
        try:
            factors.append(inefficiency_factor(out.traces[:, col]))
        except InvalidParameter:
            continue
        diag.append(i == j)
    factors = np.asarray(factors)
    diag = np.asarray(diag, dtype=bool)

    def med(a):
        return float(np.median(a)) if a.size else None

    return {
        "all": med(factors),
        "off_diagonal": med(factors[~diag]),
        "diagonal": med(factors[diag]),
        "count": int(factors.size),
    }


def batch_means_stderr(series, batches: int = 50) -> float:
    """Standard error of the mean of an autocorrelated series by non-overlapping batch means."""
    x = np.asarray(series, dtype=float).ravel()
    size = x.shape[0] // batches
    if size < 1:
        raise InvalidParameter(f"series of length {x.shape[0]} is too short for {batches} batches")
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))
