"""Trace ingestion, synthetic workloads, and the exact ground-truth oracle.

The on-disk trace format is UTF-8 CSV with one packet per line:
``flow_id,weight``. The weight column is optional and defaults to 1; flow ids
are taken verbatim (bytes of the field). The Zipf generator stands in for
packet traces that cannot be redistributed: ranks are drawn from a Zipf(skew)
law over a fixed universe, deterministically per seed.
"""

from __future__ import annotations

from typing import Iterable, Iterator, NamedTuple

import numpy as np

from ..errors import ParameterError
from ..hashing import fnv1a64


class TraceRecord(NamedTuple):
    flow_id: bytes
    weight: int


class TraceParseError(ValueError):
    """A trace line could not be parsed; carries the 1-based line number."""

    def __init__(self, path, line_no: int, detail: str):
        super().__init__(f"{path}:{line_no}: {detail}")
        self.line_no = line_no


def load_trace(path) -> Iterator[TraceRecord]:
    """Yield records from a CSV trace in file order."""
    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip(b"\r\n")
            if not line:
                continue
            flow_id, sep, weight_field = line.partition(b",")
            if not flow_id:
                raise TraceParseError(path, line_no, "empty flow id")
            if not sep or not weight_field:
                weight = 1
            else:
                try:
                    weight = int(weight_field)
                except ValueError:
                    raise TraceParseError(
                        path, line_no, f"bad weight {weight_field!r}") from None
                if weight < 1:
                    raise TraceParseError(path, line_no, f"weight {weight} < 1")
            yield TraceRecord(flow_id, weight)


def write_trace(path, records: Iterable[TraceRecord]) -> None:
    """Write records as ``flow_id,weight`` lines."""
    with open(path, "wb") as fh:
        for rec in records:
            fh.write(rec.flow_id + b"," + str(rec.weight).encode() + b"\n")


class ZipfTrace:
    """A generated trace kept in columnar form for fast streaming.

    ``ranks`` are 0-based flow ranks; ``flow_id(rank)`` gives the CSV
    identifier; ``keys64()`` folds every packet's id for the kernels.
    """

    def __init__(self, ranks: np.ndarray, universe: int, weights: np.ndarray | None = None):
        self.ranks = ranks
        self.universe = universe
        self.weights = weights

    def __len__(self) -> int:
        return int(self.ranks.shape[0])

    @staticmethod
    def flow_id(rank: int) -> bytes:
        return b"f%d" % rank

    def keys64(self) -> np.ndarray:
        lut = np.empty(self.universe, dtype=np.uint64)
        for r in range(self.universe):
            lut[r] = fnv1a64(self.flow_id(r))
        return lut[self.ranks]

    def records(self) -> Iterator[TraceRecord]:
        weights = self.weights
        for i, rank in enumerate(self.ranks.tolist()):
            w = 1 if weights is None else int(weights[i])
            yield TraceRecord(self.flow_id(rank), w)


def gen_zipf(n: int, universe: int, skew: float, seed: int) -> ZipfTrace:
    """Draw ``n`` packet ranks from Zipf(skew) over ``universe`` flows.

    skew = 0 degenerates to uniform frequencies. Deterministic per seed.
    """
    if universe < 1:
        raise ParameterError(f"universe must be >= 1, got {universe}")
    if skew < 0:
        raise ParameterError(f"skew must be >= 0, got {skew}")
    if n < 0:
        raise ParameterError(f"n must be >= 0, got {n}")
    gen = np.random.Generator(np.random.PCG64(seed))
    weights = np.arange(1, universe + 1, dtype=np.float64) ** -skew
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    ranks = np.searchsorted(cdf, gen.random(n), side="right").astype(np.int64)
    return ZipfTrace(ranks=ranks, universe=universe)


def exact_oracle(records: Iterable[TraceRecord]) -> dict[bytes, int]:
    """Full-fidelity per-flow totals; the reference for every error metric."""
    totals: dict[bytes, int] = {}
    for flow_id, weight in records:
        totals[flow_id] = totals.get(flow_id, 0) + weight
    return totals


def oracle_from_ranks(ranks: np.ndarray, universe: int,
                      weights: np.ndarray | None = None) -> np.ndarray:
    """Columnar oracle for generated traces: per-rank totals."""
    if weights is None:
        return np.bincount(ranks, minlength=universe).astype(np.int64)
    return np.bincount(ranks, weights=weights, minlength=universe).astype(np.int64)
