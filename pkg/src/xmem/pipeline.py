"""Per-frame orchestration across the three memory stores.

Every frame: read from the concatenated working + long-term memory, route the
affinity mass into per-element usage, and advance the sensory state. Every
r-th frame: copy the query in as a new working-memory key (with its value and
shrinkage) and optionally deep-update the sensory state. When the working
memory reaches its frame cap, consolidate the oldest non-reference frames
into long-term prototypes, evicting least-used prototypes if the cap demands.

One pipeline per stream; object tracks share nothing and the frame loop is
sequential.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .affinity import AffinityMatrix, affinity, readout, similarity, usage_mass
from .core_types import (
    ConfigError,
    ContractError,
    FeatureDims,
    KeyBlock,
    QueryBlock,
    SelectionBlock,
    ShrinkageVector,
    ValueBlock,
    map_selection,
    map_shrinkage,
)
from .long_term_memory import (
    ConsolidationReport,
    LongTermMemory,
    potentiate,
    select_kmeans,
    select_prototypes,
    select_random,
)
from .sensory import GruWeights, SensoryState, deep_update, gru_step
from .working_memory import WorkingMemory

DeepUpdateMode = Literal["every_rth", "every_frame", "never"]
PrototypeStrategy = Literal["usage", "random", "kmeans"]

PROB_EPS = 1e-7


@dataclass(frozen=True)
class PipelineConfig:
    dims: FeatureDims
    r: int = 10
    t_min: int = 5
    t_max: int = 10
    p: int = 128
    top_k: int = 30
    l_max: int = 10_000
    deep_update_mode: DeepUpdateMode = "every_rth"
    prototype_strategy: PrototypeStrategy = "usage"
    insert_offset: int = 0
    unbounded: bool = False
    potentiation_filtered: bool = True
    gru_kernel_size: int = 1
    sensory_input_channels: int | None = None

    def __post_init__(self):
        if self.r < 1:
            raise ConfigError(f"r must be >= 1, got {self.r}")
        if self.t_min < 2:
            raise ConfigError(f"t_min must be >= 2, got {self.t_min}")
        if self.t_max <= self.t_min:
            raise ConfigError(
                f"t_max ({self.t_max}) must exceed t_min ({self.t_min})"
            )
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if self.l_max < self.p:
            raise ConfigError(
                f"l_max ({self.l_max}) must be >= p ({self.p})"
            )
        if not 0 <= self.insert_offset < self.r:
            raise ConfigError(
                f"insert_offset ({self.insert_offset}) must lie in [0, r)"
            )
        if self.deep_update_mode not in ("every_rth", "every_frame", "never"):
            raise ConfigError(f"unknown deep_update_mode {self.deep_update_mode!r}")
        if self.prototype_strategy not in ("usage", "random", "kmeans"):
            raise ConfigError(f"unknown prototype_strategy {self.prototype_strategy!r}")

    @property
    def sensory_channels(self) -> int:
        return self.sensory_input_channels or self.dims.c_h


@dataclass(frozen=True)
class ObjectFeatures:
    """One frame's raw encoder-side features for a single object.

    Query and shrinkage/selection arrive unmapped; the pipeline applies the
    range mappings on ingestion. Shapes: raw_query and raw_selection are
    (c_k, hw), raw_shrinkage (hw,), values (c_v, hw), sensory_input (c_in, hw).
    """

    raw_query: np.ndarray
    raw_shrinkage: np.ndarray
    raw_selection: np.ndarray
    values: np.ndarray
    sensory_input: np.ndarray


@dataclass
class ObjectTrack:
    object_id: int
    working: WorkingMemory
    long_term: LongTermMemory
    sensory: SensoryState

    @property
    def total_elements(self) -> int:
        return self.working.element_count + self.long_term.element_count


@dataclass(frozen=True)
class FrameEvents:
    inserted: bool
    consolidated: bool
    evicted_count: int
    report: ConsolidationReport | None = None


@dataclass(frozen=True)
class FrameOutput:
    object_id: int
    readout: np.ndarray
    fused_probabilities: np.ndarray
    events: FrameEvents


def soft_aggregate(per_object_probs: np.ndarray) -> np.ndarray:
    """Fuse per-object foreground probabilities into one distribution.

    Each probability becomes odds p/(1-p) against implicit background odds
    of 1; columns of the (objects+1, hw) result sum to 1, row 0 being the
    background. Inputs at exactly 0 or 1 are clamped to [eps, 1-eps].
    """
    probs = np.asarray(per_object_probs, dtype=np.float32)
    if probs.ndim != 2:
        raise ValueError(f"expected (objects, hw) probabilities, got {probs.shape}")
    probs = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    odds = probs / (1.0 - probs)
    stacked = np.concatenate([np.ones((1, probs.shape[1]), dtype=np.float32), odds])
    return stacked / stacked.sum(axis=0, keepdims=True)


class Pipeline:
    """Owns the object tracks and replays the per-frame update schedule."""

    def __init__(
        self,
        config: PipelineConfig,
        first_frame: list[ObjectFeatures],
        seed: int = 0,
    ):
        if not first_frame:
            raise ConfigError("at least one object is required")
        self.config = config
        self.seed = seed
        dims = config.dims

        ss = np.random.SeedSequence(seed)
        gru_seq, deep_seq, probe_seq = ss.spawn(3)
        self.gru_weights = GruWeights.seeded(
            config.sensory_channels, dims.c_h, config.gru_kernel_size, gru_seq
        )
        self.deep_weights = GruWeights.seeded(
            dims.c_v, dims.c_h, config.gru_kernel_size, deep_seq
        )
        # stand-in for mask decoding: a fixed linear probe from the readout
        # to one foreground logit per position
        probe_rng = np.random.default_rng(probe_seq)
        self.probe = (
            probe_rng.standard_normal(dims.c_v).astype(np.float32)
            / np.float32(np.sqrt(dims.c_v))
        )

        self.tracks: list[ObjectTrack] = []
        for obj_id, feats in enumerate(first_frame):
            wm = WorkingMemory(
                dims, config.t_min, None if config.unbounded else config.t_max
            )
            wm.append_frame(
                KeyBlock(feats.raw_query),
                map_shrinkage(feats.raw_shrinkage),
                ValueBlock(feats.values),
                frame_idx=0,
            )
            self.tracks.append(
                ObjectTrack(
                    object_id=obj_id,
                    working=wm,
                    long_term=LongTermMemory(dims.c_k, dims.c_v, config.l_max),
                    sensory=SensoryState.zeros(dims.c_h, dims.h, dims.w),
                )
            )
        self.last_frame_idx = 0
        self.last_read_ns = 0

    # -- schedule ----------------------------------------------------------

    def is_insertion_frame(self, frame_idx: int) -> bool:
        return frame_idx % self.config.r == self.config.insert_offset % self.config.r

    def _select(self, bundle, frame_idx: int) -> list[int]:
        cfg = self.config
        if cfg.prototype_strategy == "usage":
            return select_prototypes(bundle.keys, bundle.normalized_usage, cfg.p)
        rng = np.random.default_rng((self.seed, frame_idx))
        if cfg.prototype_strategy == "random":
            return select_random(bundle.keys, bundle.normalized_usage, cfg.p, rng)
        return select_kmeans(bundle.keys, bundle.normalized_usage, cfg.p, rng)

    # -- per-frame loop ----------------------------------------------------

    def step(self, features: list[ObjectFeatures], frame_idx: int) -> list[FrameOutput]:
        if frame_idx <= self.last_frame_idx:
            raise ContractError(
                f"frame index {frame_idx} not after {self.last_frame_idx}"
            )
        if len(features) != len(self.tracks):
            raise ContractError(
                f"{len(features)} feature sets for {len(self.tracks)} objects"
            )
        cfg = self.config
        dims = cfg.dims
        hw = dims.hw()
        insert = self.is_insertion_frame(frame_idx)

        readouts: list[np.ndarray] = []
        events: list[FrameEvents] = []
        probs = np.empty((len(self.tracks), hw), dtype=np.float32)
        read_ns = 0

        for track, feats in zip(self.tracks, features):
            wm, lt = track.working, track.long_term
            query = QueryBlock(feats.raw_query)
            selection = map_selection(feats.raw_selection)
            shrinkage = map_shrinkage(feats.raw_shrinkage)

            combined_keys = KeyBlock(
                np.concatenate([wm.concatenated_keys(), lt.keys], axis=1)
            )
            combined_shrinkage = ShrinkageVector(
                np.concatenate([wm.concatenated_shrinkage(), lt.shrinkage])
            )
            combined_values = ValueBlock(
                np.concatenate([wm.concatenated_values(), lt.values], axis=1)
            )

            t0 = time.perf_counter_ns()
            sim = similarity(combined_keys, combined_shrinkage, query, selection)
            weights: AffinityMatrix = affinity(sim, cfg.top_k)
            feat = readout(combined_values, weights)
            read_ns += time.perf_counter_ns() - t0
            readouts.append(feat)

            mass = usage_mass(weights).per_element
            split = wm.element_count
            wm.accumulate_usage(mass[:split])
            lt.accumulate_usage(mass[split:])

            track.sensory = gru_step(track.sensory, _grid(feats.sensory_input, dims), self.gru_weights)
            if cfg.deep_update_mode == "every_frame":
                track.sensory = deep_update(
                    track.sensory, _grid(feats.values, dims), self.deep_weights
                )

            consolidated = False
            evicted = 0
            report = None
            if insert:
                wm.append_frame(
                    KeyBlock(query.data), shrinkage, ValueBlock(feats.values), frame_idx
                )
                if cfg.deep_update_mode == "every_rth":
                    track.sensory = deep_update(
                        track.sensory, _grid(feats.values, dims), self.deep_weights
                    )
                if not cfg.unbounded and wm.frame_count == cfg.t_max:
                    _, bundle = wm.split_for_consolidation(frame_idx)
                    indices = self._select(bundle, frame_idx)
                    proto_k, proto_s, proto_v = potentiate(
                        bundle.keys,
                        bundle.shrinkage,
                        bundle.values,
                        indices,
                        cfg.top_k if cfg.potentiation_filtered else None,
                    )
                    evicted = lt.commit(proto_k, proto_s, proto_v)
                    consolidated = True
                    report = ConsolidationReport(
                        prototype_count=len(indices),
                        evicted_count=evicted,
                        candidate_elements=bundle.keys.n,
                    )
            events.append(FrameEvents(insert, consolidated, evicted, report))
            probs[track.object_id] = _sigmoid_probe(self.probe, feat)

        fused = soft_aggregate(probs)
        self.last_frame_idx = frame_idx
        self.last_read_ns = read_ns
        return [
            FrameOutput(track.object_id, feat, fused, ev)
            for track, feat, ev in zip(self.tracks, readouts, events)
        ]

    # -- aggregate counters (summed across objects) --------------------------

    @property
    def wm_frames(self) -> int:
        return max(t.working.frame_count for t in self.tracks)

    @property
    def wm_elements(self) -> int:
        return sum(t.working.element_count for t in self.tracks)

    @property
    def lt_elements(self) -> int:
        return sum(t.long_term.element_count for t in self.tracks)


def _grid(flat_or_grid: np.ndarray, dims: FeatureDims) -> np.ndarray:
    arr = np.asarray(flat_or_grid, dtype=np.float32)
    return arr.reshape(arr.shape[0], dims.h, dims.w)


def _sigmoid_probe(probe: np.ndarray, feat: np.ndarray) -> np.ndarray:
    logits = probe @ feat
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-logits))
