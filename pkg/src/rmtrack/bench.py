"""Sequence I/O, one-pass evaluation metrics and report files.

Sequences follow the common benchmark layout: a directory holding ``img/``
with one image per frame (names sorted lexicographically) and
``groundtruth_rect.txt`` with one ``x,y,w,h`` box per line in 1-based pixel
coordinates. The tracker itself works in 0-based coordinates; the helpers
here convert at the boundary so results files and ground truth share the
file convention.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence as Seq

import numpy as np

from .config import TrackerConfig
from .imaging import Box, load_image, save_pgm
from .synth import SynthSpec, preset, synth_sequence  # noqa: F401  (re-exported)
from .tracker import TrackResult, results_csv, track_sequence

GT_FILE = "groundtruth_rect.txt"
IMAGE_EXTS = (".pgm", ".ppm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
SUCCESS_THRESHOLDS = np.round(np.arange(21) * 0.05, 10)
PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)


@dataclass
class Sequence:
    name: str
    frames: list[Path]
    # one entry per frame; None marks an absent target
    gt: list[Optional[Box]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.frames)

    @property
    def has_gt(self) -> bool:
        return bool(self.gt)

    def images(self):
        for p in self.frames:
            yield load_image(p)


def parse_groundtruth(text: str) -> list[Optional[Box]]:
    """Parse ``x,y,w,h`` lines separated by commas, tabs or spaces.

    Lines with NaN or non-positive extents mark frames without a target.
    """
    boxes: list[Optional[Box]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = [t for t in re.split(r"[,\t ]+", line) if t]
        if len(parts) != 4:
            raise ValueError(f"ground truth line {lineno}: expected 4 values, got {len(parts)}")
        try:
            x, y, w, h = (float(t) for t in parts)
        except ValueError as exc:
            raise ValueError(f"ground truth line {lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in (x, y, w, h)) or w <= 0 or h <= 0:
            boxes.append(None)
        else:
            boxes.append(Box(x, y, w, h))
    return boxes


def load_sequence(path: str | os.PathLike) -> Sequence:
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"sequence directory {root} not found")
    img_dir = root / "img" if (root / "img").is_dir() else root
    frames = sorted((p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_EXTS), key=lambda p: p.name)
    if not frames:
        raise ValueError(f"no frames found in {img_dir}")
    seq = Sequence(name=root.name, frames=frames)
    gt_path = root / GT_FILE
    if not gt_path.is_file():
        seq.warnings.append(f"missing {GT_FILE}; loaded without annotations")
        return seq
    seq.gt = parse_groundtruth(gt_path.read_text())
    if len(seq.gt) != len(frames):
        raise ValueError(f"{len(seq.gt)} ground-truth boxes for {len(frames)} frames")
    return seq


def write_sequence(path: str | os.PathLike, frames: Seq[np.ndarray], gt: Seq[Box]) -> Path:
    """Write frames as PGMs plus a ground-truth file; ``gt`` is 0-based."""
    root = Path(path)
    (root / "img").mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(frames, 1):
        save_pgm(root / "img" / f"{i:04d}.pgm", img)
    lines = [f"{b.x + 1:g},{b.y + 1:g},{b.w:g},{b.h:g}" for b in gt]
    (root / GT_FILE).write_text("\n".join(lines) + "\n")
    return root


def to_file_coords(box: Box) -> Box:
    return box.translated(1.0, 1.0)


def from_file_coords(box: Box) -> Box:
    return box.translated(-1.0, -1.0)


def center_error(pred: Box, gt: Box) -> float:
    (px, py), (gx, gy) = pred.center, gt.center
    return math.hypot(px - gx, py - gy)


def overlap(pred: Box, gt: Box) -> float:
    """Intersection over union of two boxes."""
    iw = min(pred.x + pred.w, gt.x + gt.w) - max(pred.x, gt.x)
    ih = min(pred.y + pred.h, gt.y + gt.h) - max(pred.y, gt.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = pred.w * pred.h + gt.w * gt.h - inter
    return min(max(inter / union, 0.0), 1.0)


def success_curve(overlaps: np.ndarray) -> np.ndarray:
    """Fraction of frames whose overlap is strictly above each threshold 0, 0.05, ..., 1."""
    o = np.asarray(overlaps, dtype=np.float64)
    if o.size == 0:
        return np.zeros(len(SUCCESS_THRESHOLDS))
    return (o[None, :] > SUCCESS_THRESHOLDS[:, None]).mean(axis=1)


def precision_curve(errors: np.ndarray) -> np.ndarray:
    """Fraction of frames whose centre error is strictly below each threshold 0..50 px."""
    e = np.asarray(errors, dtype=np.float64)
    if e.size == 0:
        return np.zeros(len(PRECISION_THRESHOLDS))
    return (e[None, :] < PRECISION_THRESHOLDS[:, None]).mean(axis=1)


@dataclass
class EvalReport:
    name: str
    mode: str
    frames: np.ndarray  # frame numbers that carry ground truth
    center_errors: np.ndarray
    overlaps: np.ndarray
    precision: np.ndarray
    success: np.ndarray
    auc: float
    mean_cle: float

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def evaluate(results: Seq[TrackResult] | Seq[Box], seq: Sequence | Seq[Optional[Box]],
             name: Optional[str] = None, mode: str = "") -> EvalReport:
    """Per-frame metrics and OPE curves. Frames with absent ground truth are skipped."""
    gt = seq.gt if isinstance(seq, Sequence) else list(seq)
    if name is None:
        name = seq.name if isinstance(seq, Sequence) else "sequence"
    if len(results) != len(gt):
        raise ValueError(f"{len(results)} results for {len(gt)} ground-truth frames")
    frames, errs, ovs = [], [], []
    for i, (r, g) in enumerate(zip(results, gt), 1):
        if g is None:
            continue
        b = r.box if isinstance(r, TrackResult) else r
        frames.append(i)
        errs.append(center_error(b, g))
        ovs.append(overlap(b, g))
    errs = np.asarray(errs, dtype=np.float64)
    ovs = np.asarray(ovs, dtype=np.float64)
    succ = success_curve(ovs)
    return EvalReport(name=name, mode=mode, frames=np.asarray(frames, dtype=np.int64),
                      center_errors=errs, overlaps=ovs, precision=precision_curve(errs),
                      success=succ, auc=float(succ.mean()),
                      mean_cle=float(errs.mean()) if errs.size else float("nan"))


def run_tracker(frames: Seq[np.ndarray], gt: Seq[Optional[Box]], config: TrackerConfig,
                init: Optional[Box] = None) -> list[TrackResult]:
    """Track from the first ground-truth box (file coordinates in and out)."""
    start = init if init is not None else (gt[0] if gt else None)
    if start is None:
        raise ValueError("no initial box: first frame has no ground truth")
    res = track_sequence(frames, from_file_coords(start), config)
    return [TrackResult(r.frame, to_file_coords(r.box), r.peak, r.psr, r.active_memory, r.rescanned)
            for r in res]


def read_results_csv(text: str) -> list[TrackResult]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for r in rows:
        am = r["active_memory"]
        out.append(TrackResult(int(r["frame"]), Box(float(r["x"]), float(r["y"]), float(r["w"]), float(r["h"])),
                               float(r["peak"]), float(r["psr"]), int(am) if am else None,
                               bool(int(r["rescanned"]))))
    return out


def frame_csv(rep: EvalReport) -> str:
    lines = ["frame,center_error,overlap"]
    for f, e, o in zip(rep.frames, rep.center_errors, rep.overlaps):
        lines.append(f"{int(f)},{float(e)!r},{float(o)!r}")
    return "\n".join(lines) + "\n"


def read_frame_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return (np.array([int(r["frame"]) for r in rows]),
            np.array([float(r["center_error"]) for r in rows]),
            np.array([float(r["overlap"]) for r in rows]))


def aggregate(reports: Seq[EvalReport]) -> dict[str, dict[str, float]]:
    """Per-mode means weighted by the number of evaluated frames."""
    out: dict[str, dict[str, float]] = {}
    for mode in sorted({r.mode for r in reports}):
        reps = [r for r in reports if r.mode == mode and r.n_frames > 0]
        n = sum(r.n_frames for r in reps)
        if n == 0:
            continue
        out[mode] = {
            "frames": n,
            "sequences": len(reps),
            "mean_cle": float(sum(r.center_errors.sum() for r in reps) / n),
            "auc": float(sum(r.auc * r.n_frames for r in reps) / n),
        }
    return out


def _slug(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", s) or "sequence"


def report_stem(rep: EvalReport) -> str:
    return _slug(f"{rep.name}_{rep.mode}" if rep.mode else rep.name)


def success_svg(reports: Seq[EvalReport], width: int = 480, height: int = 360) -> str:
    """SVG 1.1 line plot of success curves (overlap threshold vs success rate)."""
    ml, mr, mt, mb = 50, 150, 20, 40
    pw, ph = width - ml - mr, height - mt - mb
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

    def px(t, v):
        return ml + t * pw, mt + (1.0 - v) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for k in range(6):
        v = k / 5
        x0, y0 = px(0, v)
        out.append(f'<text x="{x0 - 6}" y="{y0 + 4:.1f}" font-size="10" text-anchor="end">{v:.1f}</text>')
        x1, y1 = px(v, 0)
        out.append(f'<text x="{x1:.1f}" y="{y1 + 14}" font-size="10" text-anchor="middle">{v:.1f}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 6}" font-size="11" text-anchor="middle">overlap threshold</text>')
    out.append(f'<text x="12" y="{mt + ph / 2}" font-size="11" text-anchor="middle" '
               f'transform="rotate(-90 12 {mt + ph / 2})">success rate</text>')
    for i, rep in enumerate(reports):
        c = colors[i % len(colors)]
        pts = " ".join("%.2f,%.2f" % px(t, v) for t, v in zip(SUCCESS_THRESHOLDS, rep.success))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        ly = mt + 14 + 16 * i
        label = f"{report_stem(rep)} [{rep.auc:.3f}]"
        out.append(f'<line x1="{ml + pw + 8}" y1="{ly - 4}" x2="{ml + pw + 24}" y2="{ly - 4}" stroke="{c}" stroke-width="1.5"/>')
        out.append(f'<text x="{ml + pw + 28}" y="{ly}" font-size="10">{_xml_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _xml_escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def report(reports: Seq[EvalReport], path: str | os.PathLike) -> dict[str, Path]:
    """Write per-sequence CSVs, ``summary.json`` and ``success.svg`` into directory ``path``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    written = {}
    for rep in reports:
        p = root / f"{report_stem(rep)}.csv"
        p.write_text(frame_csv(rep))
        written[report_stem(rep)] = p
    summary = {
        "sequences": [
            {"name": r.name, "mode": r.mode, "frames": r.n_frames, "mean_cle": r.mean_cle, "auc": r.auc}
            for r in reports
        ],
        "aggregate": aggregate(reports),
    }
    p = root / "summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written["summary"] = p
    p = root / "success.svg"
    p.write_text(success_svg(reports))
    written["plot"] = p
    return written


def write_results(path: str | os.PathLike, results: Seq[TrackResult]) -> None:
    Path(path).write_text(results_csv(results))
