"""Seeded synthetic sequences with exact ground truth.

A target texture is pasted at integer positions over a background texture,
then Gaussian pixel noise is added. The background can be split into
vertical zones whose textures have different dominant orientations, and the
target texture can be swapped on a per-frame schedule ("regimes").
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter, zoom

from .imaging import Box

# streak directions (row sigma, col sigma) used for background zones
_ZONE_SIGMAS = ((0.6, 12.0), (12.0, 0.6), (3.0, 3.0), (1.0, 1.0))


@dataclass(frozen=True)
class SynthSpec:
    width: int = 320
    height: int = 240
    target_size: tuple[int, int] = (32, 32)
    # (frame, center_x, center_y) keyframes, 1-based frames, linearly interpolated
    waypoints: tuple[tuple[int, float, float], ...] = ((1, 160.0, 120.0),)
    # (first_frame, last_frame, regime_id); must cover 1..n_frames
    schedule: tuple[tuple[int, int, int], ...] = ((1, 100, 0),)
    noise: float = 0.0
    seed: int = 0
    background_seed: Optional[int] = None
    target_seed: Optional[int] = None
    background_zones: int = 1
    target_contrast: float = 0.5
    background_contrast: float = 0.3

    @property
    def n_frames(self) -> int:
        return max(e for _, e, _ in self.schedule)

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("frame size must be positive")
        tw, th = self.target_size
        if tw < 1 or th < 1 or tw > self.width or th > self.height:
            raise ValueError("target must fit in the frame")
        frames = sorted(self.schedule)
        expect = 1
        for s, e, _ in frames:
            if s != expect or e < s:
                raise ValueError("schedule must cover frames 1..n contiguously")
            expect = e + 1
        if not self.waypoints or self.waypoints[0][0] != 1:
            raise ValueError("first waypoint must be at frame 1")
        if any(b[0] <= a[0] for a, b in zip(self.waypoints, self.waypoints[1:])):
            raise ValueError("waypoint frames must increase")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.background_zones < 1:
            raise ValueError("background_zones must be >= 1")


def _texture(rng: np.random.Generator, h: int, w: int, sigma, contrast: float) -> np.ndarray:
    t = gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap")
    t = (t - t.mean()) / (t.std() + 1e-12)
    return 0.5 + contrast * np.tanh(t / 2.0)


def target_texture(seed: int, regime: int, size: tuple[int, int], contrast: float = 0.5) -> np.ndarray:
    """Blocky random pattern: a coarse random grid upsampled, plus fine detail."""
    w, h = size
    rng = np.random.default_rng([seed, 1, regime])
    coarse = rng.uniform(-1.0, 1.0, (max(h // 6, 2), max(w // 6, 2)))
    big = zoom(coarse, (h / coarse.shape[0], w / coarse.shape[1]), order=0)[:h, :w]
    fine = gaussian_filter(rng.standard_normal((h, w)), 0.7)
    t = big + 0.3 * fine / (fine.std() + 1e-12)
    t = (t - t.mean()) / (np.abs(t).max() + 1e-12)
    return np.clip(0.5 + contrast * t, 0.0, 1.0)


def background(spec: SynthSpec) -> np.ndarray:
    seed = spec.seed if spec.background_seed is None else spec.background_seed
    out = np.empty((spec.height, spec.width))
    edges = (np.arange(spec.background_zones + 1) * spec.width) // spec.background_zones
    for z in range(spec.background_zones):
        rng = np.random.default_rng([seed, 2, z])
        sig = _ZONE_SIGMAS[z % len(_ZONE_SIGMAS)]
        out[:, edges[z]:edges[z + 1]] = _texture(rng, spec.height, edges[z + 1] - edges[z], sig,
                                                 spec.background_contrast)
    return out


def trajectory(spec: SynthSpec) -> np.ndarray:
    """Integer target centres, one ``(x, y)`` row per frame."""
    n = spec.n_frames
    f = np.array([w[0] for w in spec.waypoints], dtype=np.float64)
    xs = np.array([w[1] for w in spec.waypoints], dtype=np.float64)
    ys = np.array([w[2] for w in spec.waypoints], dtype=np.float64)
    t = np.arange(1, n + 1, dtype=np.float64)
    return np.stack([np.floor(np.interp(t, f, xs) + 0.5), np.floor(np.interp(t, f, ys) + 0.5)], axis=1)


def regime_at(spec: SynthSpec, frame: int) -> int:
    for s, e, r in spec.schedule:
        if s <= frame <= e:
            return r
    raise ValueError(f"frame {frame} outside schedule")


def synth_sequence(spec: SynthSpec) -> tuple[list[np.ndarray], list[Box]]:
    """Render all frames and their ground-truth boxes (0-based pixel coordinates)."""
    spec.validate()
    tw, th = spec.target_size
    traj = trajectory(spec)
    x0 = traj[:, 0] - tw // 2
    y0 = traj[:, 1] - th // 2
    if x0.min() < 0 or y0.min() < 0 or (x0 + tw).max() > spec.width or (y0 + th).max() > spec.height:
        raise ValueError("trajectory leaves the frame")
    bg = background(spec)
    tseed = spec.seed if spec.target_seed is None else spec.target_seed
    textures = {}
    noise_rng = np.random.default_rng([spec.seed, 3])
    frames, gt = [], []
    for i in range(spec.n_frames):
        r = regime_at(spec, i + 1)
        if r not in textures:
            textures[r] = target_texture(tseed, r, spec.target_size, spec.target_contrast)
        img = bg.copy()
        xi, yi = int(x0[i]), int(y0[i])
        img[yi:yi + th, xi:xi + tw] = textures[r]
        if spec.noise > 0:
            img = img + noise_rng.normal(0.0, spec.noise, img.shape)
        frames.append(img)
        gt.append(Box(float(xi), float(yi), float(tw), float(th)))
    return frames, gt


def _preset_static(seed: int) -> SynthSpec:
    return SynthSpec(waypoints=((1, 160.0, 120.0),), schedule=((1, 100, 0),), noise=0.0, seed=seed)


def _preset_translation(seed: int) -> SynthSpec:
    # 2 px per frame around a rectangle, 400 frames
    pts = ((1, 60.0, 60.0), (101, 260.0, 60.0), (161, 260.0, 180.0), (261, 60.0, 180.0),
           (321, 60.0, 60.0), (400, 218.0, 60.0))
    return SynthSpec(waypoints=pts, schedule=((1, 400, 0),), noise=0.02, seed=seed)


def _preset_drift_recovery(seed: int) -> SynthSpec:
    # Regime A wanders through the left background zone, crosses quickly
    # into the right one and wanders there. Regime B then sits still where A
    # was last seen, and A reappears in the left zone at frame 261.
    pts = ((1, 60.0, 60.0), (61, 60.0, 180.0), (81, 100.0, 180.0), (101, 100.0, 140.0),
           (113, 196.0, 140.0), (160, 196.0, 60.0), (200, 260.0, 80.0), (260, 260.0, 80.0),
           (261, 70.0, 190.0), (331, 70.0, 50.0), (400, 100.0, 150.0))
    return SynthSpec(waypoints=pts, schedule=((1, 200, 0), (201, 260, 1), (261, 400, 0)),
                     noise=0.005, seed=seed, background_zones=2)


PRESETS = {
    "static": _preset_static,
    "translation": _preset_translation,
    "drift_recovery": _preset_drift_recovery,
}


def preset(name: str, seed: int = 0) -> SynthSpec:
    try:
        return PRESETS[name](seed)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
