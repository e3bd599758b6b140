"""Memory reading: anisotropic squared-distance similarity, top-k softmax
affinity, value readout, and per-element usage mass.

All operations are pure functions of their inputs and single precision.
Reduction order is fixed (retained elements are always processed in
ascending index order), so results are reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_types import (
    ContractError,
    KeyBlock,
    QueryBlock,
    SelectionBlock,
    ShapeError,
    ShrinkageVector,
    ValueBlock,
    _frozen_f32,
)


@dataclass(frozen=True)
class SimilarityMatrix:
    """n x hw matrix; entry (i, j) scores memory element i against query j.

    Entries are <= 0: each is a negated, shrinkage-scaled, selection-weighted
    sum of squared channel differences.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_f32(self.data, "SimilarityMatrix"))
        if self.data.ndim != 2:
            raise ShapeError(f"SimilarityMatrix must be 2-D, got {self.data.shape}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def hw(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class AffinityMatrix:
    """Column-stochastic n x hw weights with at most k_used nonzeros per column."""

    data: np.ndarray
    k_used: int

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_f32(self.data, "AffinityMatrix"))
        if self.data.ndim != 2:
            raise ShapeError(f"AffinityMatrix must be 2-D, got {self.data.shape}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def hw(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class UsageMass:
    """Total affinity mass each memory element received in one read."""

    per_element: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "per_element", _frozen_f32(self.per_element, "UsageMass")
        )
        if self.per_element.ndim != 1:
            raise ShapeError(f"UsageMass must be 1-D, got {self.per_element.shape}")


def similarity(
    k: KeyBlock, s: ShrinkageVector, q: QueryBlock, e: SelectionBlock
) -> SimilarityMatrix:
    """Anisotropic squared-distance similarity between memory and query.

    Computed via the expansion
        S = s_col * (-(k*k)^T e + 2 k^T (e*q) - ones (e*q*q)),
    which is elementwise products and matrix multiplies only. With unit
    shrinkage and selection this is exactly the negated squared L2 distance
    (up to rounding).
    """
    if k.n != s.n:
        raise ShapeError(f"keys have {k.n} elements but shrinkage has {s.n}")
    if q.data.shape != e.data.shape:
        raise ShapeError(f"query {q.data.shape} and selection {e.data.shape} differ")
    if k.c_k != q.c_k:
        raise ShapeError(f"keys have {k.c_k} channels but query has {q.c_k}")
    if k.n == 0:
        return SimilarityMatrix(np.zeros((0, q.hw), dtype=np.float32))

    kd, qd, ed = k.data, q.data, e.data
    eq = ed * qd
    # single fused GEMM: stacking [k; k*k; 1] against [2 e*q; -e; -sum(e*q*q)]
    # yields all three expansion terms in one pass with no large temporaries
    lhs = np.concatenate(
        [kd, kd * kd, np.ones((1, k.n), dtype=np.float32)]
    )
    rhs = np.concatenate(
        [2.0 * eq, -ed, -np.sum(eq * qd, axis=0, keepdims=True)]
    )
    # computed transposed (hw, n) so the top-k filter reads contiguous rows
    sim_t = rhs.T @ lhs
    sim_t *= s.data[None, :]
    # rounding in the expansion can leave +epsilon where the true value is 0
    # (coincident key and query); clamp to keep the sign guarantee exact
    np.minimum(sim_t, 0.0, out=sim_t)
    return SimilarityMatrix(sim_t.T)


def _retained_indices(rows: np.ndarray, top_k: int) -> np.ndarray:
    """Per-row indices of the top_k largest values, value ties toward the
    lower index, each row sorted ascending.

    argpartition settles everything except which of the values tied with the
    k-th rank survive; rows where that boundary is ambiguous are repaired
    index-by-index so replay is byte-exact regardless of partition order.
    """
    n = rows.shape[1]
    part = np.argpartition(rows, n - top_k, axis=1)[:, n - top_k :]
    kept = np.sort(part, axis=1)
    kth = np.take_along_axis(rows, kept, axis=1).min(axis=1)
    strictly_above = (rows > kth[:, None]).sum(axis=1)
    tied_total = (rows == kth[:, None]).sum(axis=1)
    ambiguous = np.nonzero(tied_total != top_k - strictly_above)[0]
    for row in ambiguous:
        values = rows[row]
        above = np.nonzero(values > kth[row])[0]
        tied = np.nonzero(values == kth[row])[0][: top_k - above.size]
        kept[row] = np.sort(np.concatenate([above, tied]))
    return kept


def affinity(sim: SimilarityMatrix, top_k: int | None) -> AffinityMatrix:
    """Column softmax over the top_k most similar memory elements.

    Per column, the top_k largest similarities are retained (ties toward the
    lower element index), the softmax is taken over the retained set, and all
    other entries are exact 0.0. top_k=None, or top_k >= n, is a plain column
    softmax. The per-column max is subtracted before exponentiation since
    similarities are large-magnitude negatives. Retained elements are reduced
    in ascending index order, so results are independent of partition order.
    """
    if top_k is not None and top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    n, hw = sim.n, sim.hw
    if n == 0:
        raise ContractError("cannot read from an empty combined memory")

    data = sim.data
    if top_k is None or top_k >= n:
        shifted = data - data.max(axis=0, keepdims=True)
        ex = np.exp(shifted)
        out = ex / ex.sum(axis=0, keepdims=True)
        return AffinityMatrix(out, k_used=n if top_k is None else top_k)

    # work row-wise on the transpose: per-column selection over contiguous
    # rows (free when the similarity was produced in transposed layout)
    rows = np.ascontiguousarray(data.T)
    kept = _retained_indices(rows, top_k)
    vals = np.take_along_axis(rows, kept, axis=1)
    vals = vals - vals.max(axis=1, keepdims=True)
    ex = np.exp(vals)
    weights = ex / ex.sum(axis=1, keepdims=True)
    out_t = np.zeros((hw, n), dtype=np.float32)
    np.put_along_axis(out_t, kept, weights, axis=1)
    return AffinityMatrix(out_t.T, k_used=top_k)


def readout(v: ValueBlock, w: AffinityMatrix) -> np.ndarray:
    """Aggregate value columns through the affinity: F = v @ w.

    Each output column is a convex combination of value columns.
    """
    if v.n != w.n:
        raise ShapeError(f"values have {v.n} elements but affinity has {w.n}")
    return v.data @ w.data


def usage_mass(w: AffinityMatrix) -> UsageMass:
    """Per-element affinity mass summed across query columns."""
    return UsageMass(w.data.sum(axis=1))
