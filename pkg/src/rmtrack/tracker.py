"""Frame-by-frame tracking with a pool of reliable memories.

Each step detects the target with the current model, moves the box, samples
the target again at the new position and retrains. In ``memory`` mode the
training appearance mixes the stored samples of the memory that best matches
the learned appearance with the new sample, and the sample stream is
periodically clustered into new memories. The two baseline modes keep a
single model that drifts toward every new sample at a fixed rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import clustering
from .config import TrackerConfig
from .errors import DimensionError, SingularityError
from .features import apply_window, cosine_window, descriptor, hog
from .imaging import Box, extract_window
from .memory import (MemoryPool, Sample, blend_weights, compose_appearance, evict,
                     ingest_clusters, select_memory)
from .spectral import (Kernel, ResponseMap, SpectralModel, detect, gaussian_target, linear_update,
                       refine_shift, target_bandwidth, train, train_blended, train_split,
                       update_model)

PSR_EXCLUDE = 11
PSR_SENTINEL = 1e6


def psr(resp: ResponseMap | np.ndarray) -> float:
    """Peak-to-sidelobe ratio, excluding an 11x11 (cyclic) window around the peak."""
    if isinstance(resp, np.ndarray):
        resp = ResponseMap.from_grid(resp)
    g = resp.grid
    h, w = g.shape
    if h < PSR_EXCLUDE or w < PSR_EXCLUDE:
        raise DimensionError(f"response {g.shape} smaller than {PSR_EXCLUDE}x{PSR_EXCLUDE}")
    half = PSR_EXCLUDE // 2
    r, c = resp.peak
    mask = np.ones(g.shape, dtype=bool)
    rows = np.arange(r - half, r + half + 1) % h
    cols = np.arange(c - half, c + half + 1) % w
    mask[np.ix_(rows, cols)] = False
    side = g[mask]
    if side.size == 0:
        return PSR_SENTINEL
    sd = float(side.std())
    if sd < 1e-12:
        return PSR_SENTINEL
    return (resp.peak_value - float(side.mean())) / sd


@dataclass(frozen=True)
class TrackResult:
    frame: int
    box: Box
    peak: float
    psr: float
    active_memory: Optional[int] = None
    rescanned: bool = False


def window_geometry(box: Box, cfg: TrackerConfig) -> tuple[int, int]:
    """Search window ``(w, h)`` in pixels: padded box, a whole number of cells."""
    cs = cfg.cell_size

    def side(extent):
        cells = max(int(math.ceil(extent * cfg.padding / cs)), cfg.min_window_cells)
        return cells * cs

    return side(box.w), side(box.h)


class Tracker:
    """Mutable tracker state. Call :meth:`init` once, then :meth:`step` per frame."""

    def __init__(self, config: Optional[TrackerConfig] = None):
        self.config = config or TrackerConfig()
        cfg = self.config
        if cfg.mode == "baseline_mosse":
            self.kernel = Kernel("linear")
        elif cfg.mode == "baseline_csk":
            self.kernel = Kernel("gaussian", cfg.kernel_sigma)
        else:
            self.kernel = Kernel(cfg.kernel, cfg.kernel_sigma)
        self.box: Optional[Box] = None
        self.model: Optional[SpectralModel] = None
        self.samples: list[Sample] = []
        self.pool = MemoryPool()
        self.dbar: Optional[float] = None
        self.frame_index = 0
        self.active_memory: Optional[int] = None
        self.frame_shape: Optional[tuple[int, int]] = None
        self._pending: list[tuple[Box, float]] = []
        self._rescan_cache: Optional[tuple[int, SpectralModel]] = None

    # -- geometry and features ------------------------------------------------

    @property
    def is_memory_mode(self) -> bool:
        return self.config.mode == "memory"

    def features(self, frame: np.ndarray, center: tuple[float, float]) -> np.ndarray:
        patch = extract_window(frame, center, self.window_size)
        fm = hog(patch, self.config.cell_size, self.config.n_orientations)
        return apply_window(fm, self.cos_window)

    def _clamp(self, box: Box) -> Box:
        h, w = self.frame_shape
        return box.clamped(w, h)

    def _check_frame(self, frame: np.ndarray) -> np.ndarray:
        frame = np.asarray(frame, dtype=np.float64)
        if frame.shape != self.frame_shape:
            raise DimensionError(f"frame {frame.shape} differs from initial {self.frame_shape}")
        return frame

    # -- lifecycle -------------------------------------------------------------

    def init(self, frame: np.ndarray, box: Box) -> TrackResult:
        frame = np.asarray(frame, dtype=np.float64)
        if frame.ndim != 2:
            raise DimensionError("frames must be 2-D grayscale arrays")
        h, w = frame.shape
        cx, cy = box.center
        if not (0 <= cx < w and 0 <= cy < h) or box.w < 1 or box.h < 1:
            raise ValueError(f"degenerate or out-of-frame box {box}")
        cfg = self.config
        self.frame_shape = frame.shape
        self.box = box
        self.window_size = window_geometry(box, cfg)
        rows = self.window_size[1] // cfg.cell_size
        cols = self.window_size[0] // cfg.cell_size
        self.cos_window = cosine_window(rows, cols)
        # bandwidth follows the target extent, not the padded window
        s = target_bandwidth(box.h / cfg.cell_size, box.w / cfg.cell_size)
        self.y = gaussian_target(rows, cols, s)

        x = self.features(frame, box.center)
        self.model = self._fresh(x)
        self.frame_index = 1
        self.samples = [Sample(1, descriptor(x), x)] if self.is_memory_mode else []
        resp = detect(self.model, x)
        return TrackResult(1, box, resp.peak_value, psr(resp), None, False)

    def _fresh(self, x: np.ndarray) -> SpectralModel:
        cfg = self.config
        if cfg.mode == "baseline_mosse":
            return train_split(x, self.y, self.kernel, cfg.lam)
        return train(x, self.y, self.kernel, cfg.lam)

    def external_detections(self, detections: Iterable[tuple[Box, float]]) -> None:
        """Queue coarse detections for the next step (used only if confidence drops)."""
        dets = []
        for item in detections:
            try:
                box, score = item
            except (TypeError, ValueError) as exc:
                raise ValueError(f"malformed detection {item!r}") from exc
            if not isinstance(box, Box):
                raise ValueError(f"detection box must be a Box, got {type(box).__name__}")
            score = float(score)
            if not math.isfinite(score):
                raise ValueError("detection score must be finite")
            dets.append((box, score))
        if dets:
            self._pending = dets

    def step(self, frame: np.ndarray) -> TrackResult:
        if self.model is None:
            raise RuntimeError("tracker not initialized")
        frame = self._check_frame(frame)
        p = self.frame_index + 1
        center, resp, conf, rescanned = self._locate(frame)
        self.box = self._clamp(Box.from_center(center[0], center[1], self.box.w, self.box.h))
        x = self.features(frame, self.box.center)
        if self.is_memory_mode:
            self._memory_update(x, p)
        else:
            self._baseline_update(x)
        self.frame_index = p
        return TrackResult(p, self.box, resp.peak_value, conf,
                           self.active_memory if self.is_memory_mode else None, rescanned)

    def baseline_step(self, frame: np.ndarray) -> TrackResult:
        if self.is_memory_mode:
            raise RuntimeError("baseline_step needs a baseline mode")
        return self.step(frame)

    # -- detection -------------------------------------------------------------

    def _detect_at(self, frame, model, center, passes=None):
        # The cosine taper biases the peak toward zero shift, so the search is
        # repeated from the corrected position until it stops moving.
        passes = self.config.detect_passes if passes is None else passes
        first = None
        for _ in range(passes):
            z = self.features(frame, center)
            resp = detect(model, z)
            if first is None:
                first = resp
            dy, dx = refine_shift(resp, self.config.cell_size)
            center = (center[0] + dx, center[1] + dy)
            if dx == 0 and dy == 0:
                break
        return center, first

    def _locate(self, frame):
        center, resp = self._detect_at(frame, self.model, self.box.center)
        conf = psr(resp)
        pending, self._pending = self._pending, []
        thr = self.config.psr_threshold
        if conf >= thr:
            return center, resp, conf, False
        if pending:
            best = max(range(len(pending)), key=lambda i: (pending[i][1], -i))
            cand = pending[best][0]
            c2, r2 = self._detect_at(frame, self.model, cand.center)
            return c2, r2, psr(r2), True
        if self.is_memory_mode and self.config.rescan:
            hit = self._rescan(frame)
            if hit is not None:
                return hit[0], hit[1], hit[2], True
        return center, resp, conf, False

    def _rescan_model(self) -> Optional[SpectralModel]:
        top = self.pool.most_confident()
        if top is None:
            return None
        if self._rescan_cache is None or self._rescan_cache[0] != top.id:
            self._rescan_cache = (top.id, train(top.mean_appearance, self.y, self.kernel, self.config.lam))
        return self._rescan_cache[1]

    def _scan_centers(self):
        h, w = self.frame_shape
        ww, wh = self.window_size
        stride = self.config.rescan_stride or max(min(ww, wh) // 2, 1)

        def axis(n, size):
            lo, hi = size / 2.0, n - size / 2.0
            if hi <= lo:
                return [n / 2.0]
            pts = list(np.arange(lo, hi, stride))
            if hi - pts[-1] > 1e-9:
                pts.append(hi)
            return pts

        return [(x, y) for y in axis(h, wh) for x in axis(w, ww)]

    def _rescan(self, frame):
        model = self._rescan_model()
        if model is None:
            return None
        best = None
        for c in self._scan_centers():
            center, resp = self._detect_at(frame, model, c)
            if best is None or resp.peak_value > best[1].peak_value:
                best = (center, resp)
        # judge the winner from a window centred on it; grid responses are
        # damped by the taper whenever the target sits off-centre
        resp = detect(model, self.features(frame, best[0]))
        conf = psr(resp)
        if conf < self.config.psr_threshold:
            return None
        return best[0], resp, conf

    def rescan(self, frame: np.ndarray) -> Optional[Box]:
        """Full-frame search with the most confident memory; ``None`` if nothing convincing."""
        frame = self._check_frame(frame)
        hit = self._rescan(frame)
        if hit is None:
            return None
        (cx, cy) = hit[0]
        return self._clamp(Box.from_center(cx, cy, self.box.w, self.box.h))

    # -- model updates ---------------------------------------------------------

    def _baseline_update(self, x):
        try:
            fresh = self._fresh(x)
        except SingularityError:
            return
        self.model = update_model(self.model, fresh, self.config.gamma)

    def _memory_update(self, x, p):
        cfg = self.config
        desc = descriptor(x)
        active = select_memory(descriptor(self.model.x_hat), self.pool)
        self.active_memory = active.id if active is not None else None
        try:
            if active is None:
                # no memory yet: running average of the samples seen so far
                x_hat = linear_update(self.model.x_hat, x, cfg.gamma)
            else:
                beta = blend_weights(desc, active)
                x_hat = compose_appearance(active, beta, x, cfg.gamma)
            self.model = train_blended(x_hat, x, self.y, cfg.gamma, self.kernel, cfg.lam)
        except SingularityError:
            pass

        self.samples.append(Sample(p, desc, x))
        if len(self.samples) > cfg.pool_capacity:
            del self.samples[: len(self.samples) - cfg.pool_capacity]
        if self.dbar is None and p == cfg.n0:
            D = clustering.distance_matrix([s.descriptor for s in self.samples[: cfg.n0]])
            self.dbar = clustering.baseline_scale(D, cfg.n0)
        if self.dbar is not None and p % cfg.cluster_interval == 0:
            self._cluster(p)

    def _cluster(self, p):
        cfg = self.config
        D = clustering.distance_matrix([s.descriptor for s in self.samples])
        J = clustering.integral_image(D)
        seg = clustering.cluster(J, len(self.samples), cfg.rho_rel, cfg.eps_factor * self.dbar)
        _, self.samples = ingest_clusters(seg, self.samples, p, self.pool, cfg.sigma1,
                                          cfg.sigma2, cfg.max_memory_samples)
        evict(self.pool, cfg.max_memories)


def track_sequence(frames: Sequence[np.ndarray] | Iterable[np.ndarray], init_box: Box,
                   config: Optional[TrackerConfig] = None) -> list[TrackResult]:
    """Run a tracker over ``frames`` starting from ``init_box`` on the first one."""
    tr = Tracker(config)
    out = []
    it = iter(frames)
    first = next(it, None)
    if first is None:
        return out
    out.append(tr.init(first, init_box))
    for f in it:
        out.append(tr.step(f))
    return out


def results_csv(results: Sequence[TrackResult]) -> str:
    lines = ["frame,x,y,w,h,peak,psr,active_memory,rescanned"]
    for r in results:
        b = r.box
        am = "" if r.active_memory is None else str(r.active_memory)
        lines.append(",".join([str(r.frame), repr(float(b.x)), repr(float(b.y)), repr(float(b.w)),
                               repr(float(b.h)), repr(float(r.peak)), repr(float(r.psr)), am,
                               str(int(r.rescanned))]))
    return "\n".join(lines) + "\n"
