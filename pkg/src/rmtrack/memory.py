"""Pool of reliable memories built from clustered past samples.

A memory is a temporally contiguous cluster of tracked samples. It keeps at
most ``max_samples`` uniformly subsampled members (descriptor and feature
map), the mean feature map of *all* members, and a confidence that rewards
early start and many members: ``exp(-(sigma1 * begin - sigma2 * size))``.
"""
from __future__ import annotations

import csv
import io
import os
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .clustering import Segmentation
from .errors import DimensionError
from .features import Descriptor


@dataclass(frozen=True)
class Sample:
    """One tracked sample: absolute frame number, descriptor and windowed feature map."""

    frame: int
    descriptor: Descriptor
    fmap: np.ndarray


@dataclass
class Memory:
    id: int
    begin: int  # first absolute frame of the cluster
    size: int  # number of samples in the cluster (before subsampling)
    frames: list[int]
    descriptors: list[Descriptor]
    maps: list[np.ndarray]
    mean_appearance: np.ndarray
    mean_descriptor: Descriptor
    confidence: float
    ingested_at: Optional[int] = None

    @property
    def end(self) -> int:
        return self.frames[-1]


@dataclass
class MemoryPool:
    memories: list[Memory] = field(default_factory=list)
    next_id: int = 1

    def __len__(self):
        return len(self.memories)

    def __iter__(self):
        return iter(self.memories)

    def __bool__(self):
        return bool(self.memories)

    def get(self, memory_id: int) -> Optional[Memory]:
        for m in self.memories:
            if m.id == memory_id:
                return m
        return None

    def most_confident(self) -> Optional[Memory]:
        if not self.memories:
            return None
        return min(self.memories, key=lambda m: (-m.confidence, m.id))


def confidence(begin: float, size: float, sigma1: float, sigma2: float) -> float:
    return float(np.exp(-(sigma1 * begin - sigma2 * size)))


def mean_descriptor(descriptors: Sequence[Descriptor]) -> Descriptor:
    v = np.mean([d.values for d in descriptors], axis=0)
    norm = float(np.sqrt(v @ v))
    if norm == 0.0:
        return Descriptor(np.zeros_like(v), True)
    return Descriptor(v / norm, False)


def blend_weights(x: Descriptor, memory: Memory) -> np.ndarray:
    """Per-sample weights over the memory's stored samples.

    ``beta_j`` is proportional to ``exp(-||x - phi_j||^2)`` and the weights sum
    to one. A zero descriptor gets uniform weights.
    """
    n = len(memory.descriptors)
    if n == 0:
        raise ValueError("memory has no samples")
    if x.is_zero:
        return np.full(n, 1.0 / n)
    d = np.array([np.sum((x.values - s.values) ** 2) for s in memory.descriptors])
    w = np.exp(-(d - d.min()))
    return w / w.sum()


def select_memory(x: Descriptor, pool: MemoryPool) -> Optional[Memory]:
    """Memory whose mean descriptor is closest to ``x``; ties prefer higher
    confidence, then lower id."""
    if not pool.memories:
        return None

    def key(m):
        return (float(np.sum((x.values - m.mean_descriptor.values) ** 2)), -m.confidence, m.id)

    return min(pool.memories, key=key)


def compose_appearance(memory: Optional[Memory], beta, x_p: np.ndarray, gamma: float) -> np.ndarray:
    """Learned appearance ``(1 - gamma) sum_j beta_j x_j + gamma x_p``.

    Without an active memory the current sample is returned unchanged.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if memory is None:
        return np.array(x_p, dtype=np.float64, copy=True)
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (len(memory.maps),):
        raise DimensionError("one weight per stored sample expected")
    if any(m.shape != x_p.shape for m in memory.maps):
        raise DimensionError(f"memory maps do not match sample shape {x_p.shape}")
    acc = np.zeros_like(x_p, dtype=np.float64)
    for b, m in zip(beta, memory.maps):
        acc += b * m
    return (1.0 - gamma) * acc + gamma * x_p


def subsample_indices(n: int, max_samples: int) -> list[int]:
    if n <= max_samples:
        return list(range(n))
    return [(i * n) // max_samples for i in range(max_samples)]


def build_memory(memory_id: int, members: Sequence[Sample], sigma1: float, sigma2: float,
                 max_samples: int = 100, ingested_at: Optional[int] = None) -> Memory:
    if not members:
        raise ValueError("a memory needs at least one sample")
    keep = [members[i] for i in subsample_indices(len(members), max_samples)]
    descs = [s.descriptor for s in keep]
    mean_map = np.mean([s.fmap for s in members], axis=0)
    begin = members[0].frame
    return Memory(
        id=memory_id,
        begin=begin,
        size=len(members),
        frames=[s.frame for s in keep],
        descriptors=descs,
        maps=[s.fmap for s in keep],
        mean_appearance=mean_map,
        mean_descriptor=mean_descriptor(descs),
        confidence=confidence(begin, len(members), sigma1, sigma2),
        ingested_at=ingested_at,
    )


def ingest_clusters(seg: Segmentation, samples: Sequence[Sample], current_frame: int,
                    pool: MemoryPool, sigma1: float, sigma2: float,
                    max_samples: int = 100) -> tuple[MemoryPool, list[Sample]]:
    """Turn every cluster except the last (still growing) one into a memory.

    ``seg`` indexes ``samples`` 1-based. Returns the pool (mutated in place)
    and the samples that remain in the sample pool.
    """
    if not seg.is_partition_of(len(samples)):
        raise ValueError("segmentation does not cover the sample pool")
    for s in seg.intervals[:-1]:
        members = samples[s.u - 1:s.v]
        pool.memories.append(build_memory(pool.next_id, members, sigma1, sigma2,
                                          max_samples, ingested_at=current_frame))
        pool.next_id += 1
    last = seg.intervals[-1]
    return pool, list(samples[last.u - 1:last.v])


def evict(pool: MemoryPool, max_size: int) -> list[Memory]:
    """Drop lowest-confidence memories until ``len(pool) <= max_size``.

    Ties go against the later-starting memory, then the higher id. Returns the
    removed memories.
    """
    removed = []
    while len(pool.memories) > max_size:
        worst = min(pool.memories, key=lambda m: (m.confidence, -m.begin, -m.id))
        pool.memories.remove(worst)
        removed.append(worst)
    return removed


def snapshot_csv(pool: MemoryPool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "B", "N", "confidence"])
    for m in pool.memories:
        w.writerow([m.id, m.begin, m.size, repr(m.confidence)])
    return buf.getvalue()


# Binary dump layout (little endian), repeated once per memory:
#   int64 id, uint32 channels, uint32 rows, uint32 cols,
#   channels*rows*cols float64 values in channel-major order.
_HEADER = struct.Struct("<qIII")


def dump_appearances(pool: MemoryPool, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        for m in pool.memories:
            a = np.asarray(m.mean_appearance, dtype="<f8")
            if a.ndim == 2:
                a = a[None]
            fh.write(_HEADER.pack(m.id, *a.shape))
            fh.write(np.ascontiguousarray(a).tobytes())


def load_appearances(path: str | os.PathLike) -> dict[int, np.ndarray]:
    out = {}
    with open(path, "rb") as fh:
        buf = fh.read()
    pos = 0
    while pos < len(buf):
        mid, c, h, w = _HEADER.unpack_from(buf, pos)
        pos += _HEADER.size
        n = c * h * w
        out[mid] = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).reshape(c, h, w).copy()
        pos += 8 * n
    return out
