"""Bounded high-resolution store of recent frames.

Holds full key/shrinkage/value columns for the reference frame plus the most
recent insertions, tracks per-element usage across reads, and hands the
oldest non-reference frames to consolidation when the frame cap is reached.
Single-writer: exactly one pipeline owns and mutates an instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core_types import (
    CapacityError,
    ConfigError,
    ContractError,
    FeatureDims,
    KeyBlock,
    ShapeError,
    ShrinkageVector,
    ValueBlock,
)


@dataclass
class FrameRecord:
    """One inserted frame: feature columns plus usage/age bookkeeping."""

    keys: KeyBlock
    shrinkage: ShrinkageVector
    values: ValueBlock
    inserted_at: int
    is_reference: bool
    usage: np.ndarray = field(init=False)

    def __post_init__(self):
        self.usage = np.zeros(self.keys.n, dtype=np.float64)


@dataclass(frozen=True)
class CandidateBundle:
    """Consolidation candidates, flattened across frames in insertion order."""

    keys: KeyBlock
    shrinkage: ShrinkageVector
    values: ValueBlock
    normalized_usage: np.ndarray


class WorkingMemory:
    """Frame-granular store bounded by t_max, shrinking to t_min on split.

    t_max=None disables the cap (used by the unbounded comparison mode, where
    consolidation is switched off entirely).
    """

    def __init__(self, dims: FeatureDims, t_min: int, t_max: int | None):
        if t_min < 2:
            raise ConfigError(f"t_min must be >= 2, got {t_min}")
        if t_max is not None and t_max <= t_min:
            raise ConfigError(f"t_max ({t_max}) must exceed t_min ({t_min})")
        self.dims = dims
        self.t_min = t_min
        self.t_max = t_max
        self.frames: list[FrameRecord] = []

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def element_count(self) -> int:
        return len(self.frames) * self.dims.hw()

    def append_frame(
        self,
        keys: KeyBlock,
        shrinkage: ShrinkageVector,
        values: ValueBlock,
        frame_idx: int,
    ) -> FrameRecord:
        """Append one frame's columns with zero usage. First append is the
        immortal reference frame."""
        if self.t_max is not None and self.frame_count >= self.t_max:
            raise CapacityError(
                f"append at frame cap t_max={self.t_max}; consolidation is overdue"
            )
        hw = self.dims.hw()
        if keys.data.shape != (self.dims.c_k, hw):
            raise ShapeError(
                f"frame keys {keys.data.shape} != ({self.dims.c_k}, {hw})"
            )
        if values.data.shape != (self.dims.c_v, hw):
            raise ShapeError(
                f"frame values {values.data.shape} != ({self.dims.c_v}, {hw})"
            )
        if shrinkage.n != hw:
            raise ShapeError(f"frame shrinkage has {shrinkage.n} entries, want {hw}")
        if self.frames and frame_idx <= self.frames[-1].inserted_at:
            raise ContractError(
                f"insertion frame {frame_idx} not after {self.frames[-1].inserted_at}"
            )
        record = FrameRecord(
            keys=keys,
            shrinkage=shrinkage,
            values=values,
            inserted_at=frame_idx,
            is_reference=not self.frames,
        )
        self.frames.append(record)
        return record

    def concatenated_keys(self) -> np.ndarray:
        return np.concatenate([f.keys.data for f in self.frames], axis=1)

    def concatenated_values(self) -> np.ndarray:
        return np.concatenate([f.values.data for f in self.frames], axis=1)

    def concatenated_shrinkage(self) -> np.ndarray:
        return np.concatenate([f.shrinkage.data for f in self.frames])

    def accumulate_usage(self, mass: np.ndarray) -> None:
        """Add one read's working-segment affinity mass, elementwise.

        mass is ordered (frame position, spatial position), matching the
        concatenated column order.
        """
        mass = np.asarray(mass)
        if mass.shape != (self.element_count,):
            raise ShapeError(
                f"usage mass has shape {mass.shape}, want ({self.element_count},)"
            )
        hw = self.dims.hw()
        for i, frame in enumerate(self.frames):
            frame.usage += mass[i * hw : (i + 1) * hw]

    def normalized_usage(self, current_frame_idx: int) -> np.ndarray:
        """Usage per element divided by frames of residency (clamped to 1).

        A read opportunity is one processed frame, so residency is counted in
        frames since insertion rather than in memory insertions.
        """
        hw = self.dims.hw()
        out = np.empty(self.element_count, dtype=np.float64)
        for i, frame in enumerate(self.frames):
            if current_frame_idx < frame.inserted_at:
                raise ContractError(
                    f"current frame {current_frame_idx} precedes insertion "
                    f"{frame.inserted_at}"
                )
            duration = max(1, current_frame_idx - frame.inserted_at)
            out[i * hw : (i + 1) * hw] = frame.usage / duration
        return out

    def split_for_consolidation(
        self, current_frame_idx: int
    ) -> tuple[list[FrameRecord], CandidateBundle]:
        """Retain the reference frame plus the t_min-1 newest frames; return
        the dropped middle frames as consolidation candidates.

        Mutates the store: after the call only the retained frames remain.
        """
        if self.t_max is None or self.frame_count != self.t_max:
            raise ContractError(
                f"split requires frame_count == t_max, have {self.frame_count}"
            )
        normalized = self.normalized_usage(current_frame_idx)
        hw = self.dims.hw()
        n_candidates = self.t_max - self.t_min
        candidates = self.frames[1 : 1 + n_candidates]
        retained = [self.frames[0]] + self.frames[1 + n_candidates :]
        bundle = CandidateBundle(
            keys=KeyBlock(np.concatenate([f.keys.data for f in candidates], axis=1)),
            shrinkage=ShrinkageVector(
                np.concatenate([f.shrinkage.data for f in candidates])
            ),
            values=ValueBlock(
                np.concatenate([f.values.data for f in candidates], axis=1)
            ),
            normalized_usage=np.concatenate(
                [normalized[(1 + i) * hw : (2 + i) * hw] for i in range(n_candidates)]
            ),
        )
        self.frames = retained
        return retained, bundle
