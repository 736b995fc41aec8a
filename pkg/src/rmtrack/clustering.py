"""Temporally constrained clustering of a sample stream.

Samples are numbered ``1..p``. A cluster is a contiguous run of samples
(:class:`Interval`, inclusive on both ends) and a segmentation is an ordered
list of such runs covering ``1..p``. The cost of a cluster is the sum of its
pairwise squared distances divided by its size; with the integral image of
the distance matrix every cost query is O(1).

The greedy merge starts from singletons and sweeps over adjacent pairs
``(1, 2), (3, 4), ...`` of the list as it stood at the start of the sweep,
merging a pair when the cost increase ``tau`` satisfies
``tau <= rho_rel * (C(a) + C(b)) + eps_abs``. It stops once a regular
sweep and the shifted sweep that follows it both merge nothing.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class Interval:
    u: int
    v: int

    def __post_init__(self):
        if not 1 <= self.u <= self.v:
            raise ValueError(f"invalid interval [{self.u}, {self.v}]")

    def __len__(self):
        return self.v - self.u + 1


@dataclass
class Segmentation:
    intervals: list[Interval]
    sweeps: int = 0
    evaluations: int = 0
    # merge evaluations performed in each sweep
    sweep_evaluations: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def boundaries(self) -> list[int]:
        """Last sample index of every interval but the final one."""
        return [s.v for s in self.intervals[:-1]]

    def is_partition_of(self, p: int) -> bool:
        if not self.intervals or self.intervals[0].u != 1 or self.intervals[-1].v != p:
            return False
        return all(a.v + 1 == b.u for a, b in zip(self.intervals, self.intervals[1:]))


def distance_matrix(descriptors: Sequence) -> np.ndarray:
    """Pairwise squared Euclidean distances between descriptors (or raw vectors)."""
    if len(descriptors) < 1:
        raise ValueError("need at least one descriptor")
    vals = [getattr(d, "values", d) for d in descriptors]
    n = len(np.ravel(vals[0]))
    if any(len(np.ravel(v)) != n for v in vals):
        raise DimensionError("descriptors differ in length")
    X = np.asarray([np.ravel(v) for v in vals], dtype=np.float64)
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    D = np.maximum(D, 0.0)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def integral_image(D: np.ndarray) -> np.ndarray:
    """``(p+1) x (p+1)`` prefix sums with a zero first row and column."""
    D = np.asarray(D, dtype=np.float64)
    J = np.zeros((D.shape[0] + 1, D.shape[1] + 1))
    J[1:, 1:] = D.cumsum(axis=0).cumsum(axis=1)
    return J


def rect_sum(J: np.ndarray, r0: int, r1: int, c0: int, c1: int) -> float:
    """Sum of ``D[r0..r1, c0..c1]`` (1-based, inclusive)."""
    return float(J[r1, c1] - J[r0 - 1, c1] - J[r1, c0 - 1] + J[r0 - 1, c0 - 1])


def block_sum(J: np.ndarray, s: Interval) -> float:
    """Sum of the square block ``D[u..v, u..v]``.

    By symmetry ``J(u-1, v) == J(v, u-1)``, so this is
    ``J(v, v) - 2 J(u-1, v) + J(u-1, u-1)``.
    """
    return float(J[s.v, s.v] - 2.0 * J[s.u - 1, s.v] + J[s.u - 1, s.u - 1])


def interval_cost(J: np.ndarray, s: Interval) -> float:
    """Pairwise distance sum over ``i < j`` in ``s``, divided by the sample count."""
    n = len(s)
    if n == 1:
        return 0.0
    return block_sum(J, s) / (2.0 * n)


def merge_gain(J: np.ndarray, s1: Interval, s2: Interval) -> float:
    """Increase in cost when two adjacent clusters are merged."""
    if s1.v + 1 != s2.u:
        raise ValueError(f"intervals {s1} and {s2} are not adjacent")
    return interval_cost(J, Interval(s1.u, s2.v)) - (interval_cost(J, s1) + interval_cost(J, s2))


def cluster(J: np.ndarray, p: int, rho_rel: float = 1.0, eps_abs: float = 0.0) -> Segmentation:
    """Greedy bottom-up merging of adjacent clusters (see module docstring).

    A sweep pairs list positions ``(1, 2), (3, 4), ...``. When such a sweep
    merges nothing, one shifted sweep pairing ``(2, 3), (4, 5), ...`` is tried
    before giving up; without it two mergeable neighbours that straddle a
    pair boundary would never be compared.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if rho_rel < 0 or eps_abs < 0:
        raise ValueError("rho_rel and eps_abs must be non-negative")
    if J.shape[0] < p + 1:
        raise DimensionError("integral image smaller than p")
    diag = np.diagonal(J)
    u = np.arange(1, p + 1)
    v = u.copy()
    c = np.zeros(p)
    seg = Segmentation(intervals=[])
    offset = 0
    while len(u) >= 2:
        seg.sweeps += 1
        a = np.arange(offset, len(u) - 1, 2)
        b = a + 1
        ua, vb = u[a], v[b]
        cu = (diag[vb] - 2.0 * J[ua - 1, vb] + diag[ua - 1]) / (2.0 * (vb - ua + 1))
        cs = c[a] + c[b]
        ok = cu - cs <= rho_rel * cs + eps_abs
        seg.sweep_evaluations.append(len(a))
        seg.evaluations += len(a)
        if ok.any():
            # merged pair: left member absorbs the right one
            v[a[ok]] = v[b[ok]]
            c[a[ok]] = cu[ok]
            keep = np.ones(len(u), dtype=bool)
            keep[b[ok]] = False
            u, v, c = u[keep], v[keep], c[keep]
            offset = 0
        elif offset == 0:
            offset = 1
        else:
            break
    seg.intervals = [Interval(int(s), int(e)) for s, e in zip(u, v)]
    return seg


def baseline_scale(D: np.ndarray, n0: int | None = None) -> float:
    """Mean off-diagonal distance over the leading ``n0 x n0`` block."""
    D = np.asarray(D, dtype=np.float64)
    n0 = D.shape[0] if n0 is None else n0
    if n0 < 2 or n0 > D.shape[0]:
        raise ValueError(f"need 2 <= n0 <= {D.shape[0]}, got {n0}")
    B = D[:n0, :n0]
    return float((B.sum() - np.trace(B)) / (n0 * (n0 - 1)))


def cluster_descriptors(descriptors: Sequence, rho_rel: float = 1.0, eps_factor: float = 1.2,
                        n0: int = 40) -> tuple[Segmentation, np.ndarray, float]:
    """Offline convenience: distances, calibration from the first ``n0`` samples, clustering.

    Returns the segmentation, the integral image and the ``eps_abs`` used.
    """
    D = distance_matrix(descriptors)
    p = D.shape[0]
    eps_abs = eps_factor * baseline_scale(D, min(n0, p)) if p >= 2 else 0.0
    J = integral_image(D)
    return cluster(J, p, rho_rel, eps_abs), J, eps_abs


def read_descriptor_csv(text: str | Iterable[str]) -> np.ndarray:
    """Rows of comma-separated reals, one sample per row; ``#`` lines and blanks skipped."""
    lines = text.splitlines() if isinstance(text, str) else text
    rows = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(t) for t in line.split(",")])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if not rows:
        raise ValueError("no samples in descriptor CSV")
    if len({len(r) for r in rows}) != 1:
        raise ValueError("rows have different lengths")
    return np.asarray(rows)


def segmentation_csv(seg: Segmentation, J: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster_id", "first_frame", "last_frame", "cost"])
    for i, s in enumerate(seg.intervals, 1):
        w.writerow([i, s.u, s.v, repr(interval_cost(J, s))])
    return buf.getvalue()
