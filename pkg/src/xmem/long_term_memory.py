"""Compact prototype store with usage-driven consolidation and LFU eviction.

Consolidation selects the most-used candidate columns as prototype keys and
enriches their values (and shrinkage) as affinity-weighted averages over all
candidates, so each stored prototype summarizes its neighborhood in key space
instead of aliasing a single column. The store never exceeds l_max elements;
overflow evicts the least-used entries first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import affinity, similarity
from .core_types import (
    ConfigError,
    KeyBlock,
    QueryBlock,
    SelectionBlock,
    ShapeError,
    ShrinkageVector,
    ValueBlock,
)


@dataclass(frozen=True)
class ConsolidationReport:
    """Size accounting for one consolidation."""

    prototype_count: int
    evicted_count: int
    candidate_elements: int

    @property
    def compression_ratio(self) -> float:
        return self.candidate_elements / self.prototype_count


def select_prototypes(
    candidate_keys: KeyBlock, normalized_usage: np.ndarray, p: int
) -> list[int]:
    """Indices of the min(p, n) candidates with the largest normalized usage.

    Ties resolve toward the lower index; the result is sorted ascending.
    """
    usage = np.asarray(normalized_usage, dtype=np.float64)
    if usage.shape != (candidate_keys.n,):
        raise ShapeError(
            f"usage has shape {usage.shape}, want ({candidate_keys.n},)"
        )
    if candidate_keys.n == 0:
        return []
    order = np.argsort(-usage, kind="stable")
    return sorted(int(i) for i in order[: min(p, candidate_keys.n)])


def select_random(
    candidate_keys: KeyBlock, normalized_usage: np.ndarray, p: int, rng: np.random.Generator
) -> list[int]:
    """Uniform random prototype choice (ablation baseline)."""
    n = candidate_keys.n
    if n == 0:
        return []
    picked = rng.choice(n, size=min(p, n), replace=False)
    return sorted(int(i) for i in picked)


def select_kmeans(
    candidate_keys: KeyBlock, normalized_usage: np.ndarray, p: int, rng: np.random.Generator
) -> list[int]:
    """Lloyd k-means over candidate keys, centroids snapped to candidates.

    10 iterations from a random subset init. Each centroid snaps to its
    nearest not-yet-taken candidate so the result stays a unique index set of
    size min(p, n).
    """
    n = candidate_keys.n
    if n == 0:
        return []
    count = min(p, n)
    pts = candidate_keys.data.T.astype(np.float64)  # n x c_k
    centroids = pts[rng.choice(n, size=count, replace=False)].copy()
    for _ in range(10):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        for c in range(count):
            members = pts[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    taken: set[int] = set()
    picked = []
    d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    for c in range(count):
        order = np.argsort(d2[:, c], kind="stable")
        nearest = next(int(i) for i in order if int(i) not in taken)
        taken.add(nearest)
        picked.append(nearest)
    return sorted(picked)


def potentiate(
    candidate_keys: KeyBlock,
    candidate_shrinkage: ShrinkageVector,
    candidate_values: ValueBlock,
    prototype_indices: list[int],
    top_k: int | None,
) -> tuple[KeyBlock, ShrinkageVector, ValueBlock]:
    """Build prototype columns from the selected candidates.

    Prototype keys are exact copies of the selected candidate columns. Values
    and shrinkage are affinity-weighted averages over all candidates, with
    the prototypes acting as queries against the candidate set (unit
    selection, the usual top-k filter).
    """
    if len(set(prototype_indices)) != len(prototype_indices):
        raise ValueError("prototype indices must be unique")
    if len(prototype_indices) == 0:
        c_k = candidate_keys.c_k
        c_v = candidate_values.c_v
        return (
            KeyBlock(np.zeros((c_k, 0), dtype=np.float32)),
            ShrinkageVector(np.zeros(0, dtype=np.float32)),
            ValueBlock(np.zeros((c_v, 0), dtype=np.float32)),
        )
    idx = np.asarray(prototype_indices, dtype=np.intp)
    if idx.min() < 0 or idx.max() >= candidate_keys.n:
        raise ValueError("prototype index out of range")

    proto_key_data = candidate_keys.data[:, idx]
    sim = similarity(
        candidate_keys,
        candidate_shrinkage,
        QueryBlock(proto_key_data),
        SelectionBlock(np.ones_like(proto_key_data)),
    )
    weights = affinity(sim, top_k)
    proto_values = candidate_values.data @ weights.data
    proto_shrinkage = candidate_shrinkage.data @ weights.data
    # convex combination of values >= 1 can round a hair below the bound
    np.maximum(proto_shrinkage, 1.0, out=proto_shrinkage)
    return (
        KeyBlock(proto_key_data),
        ShrinkageVector(proto_shrinkage),
        ValueBlock(proto_values),
    )


class LongTermMemory:
    """Flat prototype columns with per-element usage, capped at l_max."""

    def __init__(self, c_k: int, c_v: int, l_max: int):
        if l_max < 0:
            raise ConfigError(f"l_max must be >= 0, got {l_max}")
        self.c_k = c_k
        self.c_v = c_v
        self.l_max = l_max
        self.keys = np.zeros((c_k, 0), dtype=np.float32)
        self.shrinkage = np.zeros(0, dtype=np.float32)
        self.values = np.zeros((c_v, 0), dtype=np.float32)
        self.usage = np.zeros(0, dtype=np.float64)

    @property
    def element_count(self) -> int:
        return self.keys.shape[1]

    def commit(
        self,
        proto_keys: KeyBlock,
        proto_shrinkage: ShrinkageVector,
        proto_values: ValueBlock,
        initial_usage: np.ndarray | None = None,
    ) -> int:
        """Append prototypes, evicting the least-used elements first if the
        cap would be exceeded. Returns the eviction count.

        New elements start at zero usage unless initial_usage is given; their
        standing is earned through subsequent reads.
        """
        new_count = proto_keys.n
        if proto_shrinkage.n != new_count or proto_values.n != new_count:
            raise ShapeError("prototype key/shrinkage/value counts differ")
        if new_count > self.l_max:
            raise ConfigError(
                f"committing {new_count} prototypes exceeds l_max={self.l_max}"
            )
        evict_count = max(0, self.element_count + new_count - self.l_max)
        if evict_count:
            order = np.argsort(self.usage, kind="stable")  # ties: lower index first
            keep = np.ones(self.element_count, dtype=bool)
            keep[order[:evict_count]] = False
            self.keys = self.keys[:, keep]
            self.shrinkage = self.shrinkage[keep]
            self.values = self.values[:, keep]
            self.usage = self.usage[keep]
        if initial_usage is None:
            initial_usage = np.zeros(new_count, dtype=np.float64)
        elif np.asarray(initial_usage).shape != (new_count,):
            raise ShapeError("initial_usage length does not match prototype count")
        self.keys = np.concatenate([self.keys, proto_keys.data], axis=1)
        self.shrinkage = np.concatenate([self.shrinkage, proto_shrinkage.data])
        self.values = np.concatenate([self.values, proto_values.data], axis=1)
        self.usage = np.concatenate(
            [self.usage, np.asarray(initial_usage, dtype=np.float64)]
        )
        return evict_count

    def accumulate_usage(self, mass: np.ndarray) -> None:
        """Add one read's long-term-segment affinity mass, elementwise."""
        mass = np.asarray(mass)
        if mass.shape != (self.element_count,):
            raise ShapeError(
                f"usage mass has shape {mass.shape}, want ({self.element_count},)"
            )
        self.usage += mass
