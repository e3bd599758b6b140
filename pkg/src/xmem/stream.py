"""Feature stream files and synthetic stream generation.

Stream layout (all integers u32 little-endian, all payloads float32
little-endian):

    magic "XMFS" | version | c_k | c_v | c_in | h | w | frame_count | object_count
    then per frame, per object:
        raw_query     c_k * h * w
        raw_shrinkage       h * w
        raw_selection c_k * h * w
        values        c_v * h * w
        sensory_input c_in * h * w

Declared sizes must match the byte length exactly; any mismatch is reported
with the byte offset where parsing failed. Long-term snapshots reuse the same
block conventions under the "XMLT" magic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .core_types import FeatureDims, StreamFormatError
from .pipeline import ObjectFeatures

MAGIC = b"XMFS"
SNAPSHOT_MAGIC = b"XMLT"
VERSION = 1
_HEADER = struct.Struct("<4s8I")

_FIELD_OFFSETS = {
    "version": 4, "c_k": 8, "c_v": 12, "c_in": 16,
    "h": 20, "w": 24, "frame_count": 28, "object_count": 32,
}


@dataclass(frozen=True)
class StreamHeader:
    c_k: int
    c_v: int
    c_in: int
    h: int
    w: int
    frame_count: int
    object_count: int

    @property
    def hw(self) -> int:
        return self.h * self.w

    @property
    def floats_per_object(self) -> int:
        return (2 * self.c_k + self.c_v + self.c_in + 1) * self.hw

    @property
    def bytes_per_object(self) -> int:
        return 4 * self.floats_per_object

    def dims(self, c_h: int = 64) -> FeatureDims:
        return FeatureDims(h=self.h, w=self.w, c_k=self.c_k, c_v=self.c_v, c_h=c_h)

    def pack(self) -> bytes:
        return _HEADER.pack(
            MAGIC, VERSION, self.c_k, self.c_v, self.c_in,
            self.h, self.w, self.frame_count, self.object_count,
        )


def read_header(path: str | Path) -> StreamHeader:
    path = Path(path)
    raw = path.read_bytes()[: _HEADER.size]
    if len(raw) < _HEADER.size:
        raise StreamFormatError(
            f"truncated header: {len(raw)} bytes, need {_HEADER.size}", len(raw)
        )
    magic, version, c_k, c_v, c_in, h, w, frames, objects = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise StreamFormatError(f"bad magic {magic!r}, want {MAGIC!r}", 0)
    if version != VERSION:
        raise StreamFormatError(f"unsupported version {version}", _FIELD_OFFSETS["version"])
    header = StreamHeader(c_k, c_v, c_in, h, w, frames, objects)
    for name in ("c_k", "c_v", "c_in", "h", "w", "frame_count", "object_count"):
        if getattr(header, name) < 1:
            raise StreamFormatError(f"header field {name} must be >= 1", _FIELD_OFFSETS[name])
    expected = _HEADER.size + header.frame_count * header.object_count * header.bytes_per_object
    actual = path.stat().st_size
    if actual != expected:
        raise StreamFormatError(
            f"file is {actual} bytes but header declares {expected}",
            min(actual, expected),
        )
    return header


def iter_frames(path: str | Path) -> Iterator[list[ObjectFeatures]]:
    """Yield per-frame object feature lists, reading lazily."""
    header = read_header(path)
    hw = header.hw
    sizes = [
        ("raw_query", header.c_k, hw),
        ("raw_shrinkage", 1, hw),
        ("raw_selection", header.c_k, hw),
        ("values", header.c_v, hw),
        ("sensory_input", header.c_in, hw),
    ]
    with open(path, "rb") as f:
        f.seek(_HEADER.size)
        for _ in range(header.frame_count):
            objects = []
            for _ in range(header.object_count):
                blob = f.read(header.bytes_per_object)
                fields = {}
                offset = 0
                for name, rows, cols in sizes:
                    count = rows * cols
                    arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
                    fields[name] = arr.reshape(rows, cols) if rows > 1 else arr.copy()
                    offset += 4 * count
                fields["raw_query"] = fields["raw_query"].copy()
                fields["raw_selection"] = fields["raw_selection"].copy()
                fields["values"] = fields["values"].copy()
                fields["sensory_input"] = fields["sensory_input"].copy()
                objects.append(ObjectFeatures(**fields))
            yield objects


def write_stream(
    path: str | Path, header: StreamHeader, frames: Iterable[list[ObjectFeatures]]
) -> None:
    written = 0
    with open(path, "wb") as f:
        f.write(header.pack())
        for objects in frames:
            if len(objects) != header.object_count:
                raise ValueError(
                    f"frame has {len(objects)} objects, header says {header.object_count}"
                )
            for feats in objects:
                for arr in (
                    feats.raw_query, feats.raw_shrinkage, feats.raw_selection,
                    feats.values, feats.sensory_input,
                ):
                    f.write(np.asarray(arr, dtype="<f4").tobytes())
            written += 1
    if written != header.frame_count:
        raise ValueError(f"wrote {written} frames, header says {header.frame_count}")


def synthetic_frames(
    seed: int,
    header: StreamHeader,
    drift: float,
) -> Iterator[list[ObjectFeatures]]:
    """Seeded random-walk feature trajectories.

    Frame 0 draws a standard-normal base per object; each later frame adds
    drift * standard-normal steps, so drift=0 repeats frame 0 forever and
    large drift decorrelates consecutive frames.
    """
    if drift < 0:
        raise ValueError(f"drift must be >= 0, got {drift}")
    rng = np.random.default_rng(seed)
    hw = header.hw
    step = np.float32(drift)
    shapes = [
        (header.c_k, hw), (hw,), (header.c_k, hw),
        (header.c_v, hw), (header.c_in, hw),
    ]
    states = [
        [rng.standard_normal(shape, dtype=np.float32) for shape in shapes]
        for _ in range(header.object_count)
    ]
    for frame in range(header.frame_count):
        if frame > 0 and step > 0:
            for state in states:
                for arr in state:
                    arr += step * rng.standard_normal(arr.shape, dtype=np.float32)
        yield [ObjectFeatures(*(arr.copy() for arr in state)) for state in states]


def generate_synthetic(
    path: str | Path,
    seed: int,
    header: StreamHeader,
    drift: float,
) -> StreamHeader:
    """Write a synthetic stream to disk. Same seed, same bytes."""
    write_stream(path, header, synthetic_frames(seed, header, drift))
    return header


# -- long-term snapshot ------------------------------------------------------

_SNAP_HEADER = struct.Struct("<4s4I")


@dataclass(frozen=True)
class SnapshotObject:
    keys: np.ndarray
    shrinkage: np.ndarray
    values: np.ndarray
    usage: np.ndarray


def write_lt_snapshot(path: str | Path, tracks) -> None:
    """Serialize each track's long-term store for offline inspection."""
    with open(path, "wb") as f:
        first = tracks[0].long_term
        f.write(_SNAP_HEADER.pack(SNAPSHOT_MAGIC, VERSION, len(tracks), first.c_k, first.c_v))
        for track in tracks:
            lt = track.long_term
            f.write(struct.pack("<I", lt.element_count))
            for arr in (lt.keys, lt.shrinkage, lt.values, lt.usage):
                f.write(np.asarray(arr, dtype="<f4").tobytes())


def read_lt_snapshot(path: str | Path) -> list[SnapshotObject]:
    blob = Path(path).read_bytes()
    if len(blob) < _SNAP_HEADER.size:
        raise StreamFormatError("truncated snapshot header", len(blob))
    magic, version, objects, c_k, c_v = _SNAP_HEADER.unpack(blob[: _SNAP_HEADER.size])
    if magic != SNAPSHOT_MAGIC:
        raise StreamFormatError(f"bad magic {magic!r}, want {SNAPSHOT_MAGIC!r}", 0)
    if version != VERSION:
        raise StreamFormatError(f"unsupported version {version}", 4)
    out = []
    offset = _SNAP_HEADER.size
    for _ in range(objects):
        if offset + 4 > len(blob):
            raise StreamFormatError("truncated snapshot object header", offset)
        (count,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        blocks = []
        for rows in (c_k, 1, c_v, 1):
            n_floats = rows * count
            end = offset + 4 * n_floats
            if end > len(blob):
                raise StreamFormatError("truncated snapshot block", len(blob))
            arr = np.frombuffer(blob, dtype="<f4", count=n_floats, offset=offset).copy()
            blocks.append(arr.reshape(rows, count) if rows > 1 else arr)
            offset += 4 * n_floats
        out.append(SnapshotObject(*blocks))
    if offset != len(blob):
        raise StreamFormatError("trailing bytes after snapshot payload", offset)
    return out
