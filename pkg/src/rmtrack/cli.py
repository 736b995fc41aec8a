"""Command-line entry points: ``track``, ``bench``, ``cluster`` and ``synth``.

Tracker settings come from built-in defaults, then an optional
``--config`` file of ``key = value`` lines, then individual flags.
Machine-readable output goes to files (or stdout); progress goes to stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import bench, clustering
from .config import MODES, TrackerConfig
from .errors import ConfigError, FormatError
from .imaging import Box
from .synth import PRESETS, preset, synth_sequence

_DEFAULTS = TrackerConfig()

# flag -> (config field, type)
TRACKER_FLAGS = {
    "--gamma": ("gamma", float),
    "--lambda": ("lam", float),
    "--kernel": ("kernel", str),
    "--cell-size": ("cell_size", int),
    "--padding": ("padding", float),
    "--cluster-interval": ("cluster_interval", int),
    "--pool-capacity": ("pool_capacity", int),
    "--rho-rel": ("rho_rel", float),
    "--eps-factor": ("eps_factor", float),
    "--max-memories": ("max_memories", int),
    "--max-memory-samples": ("max_memory_samples", int),
    "--sigma1": ("sigma1", float),
    "--sigma2": ("sigma2", float),
    "--psr-threshold": ("psr_threshold", float),
}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _add_tracker_flags(p: argparse.ArgumentParser, multi_mode: bool = False) -> None:
    if multi_mode:
        p.add_argument("--mode", action="append", choices=MODES, dest="modes",
                       help="tracker mode; repeat to compare several (default: memory)")
    else:
        p.add_argument("--mode", choices=MODES, default=None,
                       help=f"tracker mode (default: {_DEFAULTS.mode})")
    for flag, (name, typ) in TRACKER_FLAGS.items():
        kw = {"choices": ("gaussian", "linear")} if name == "kernel" else {}
        p.add_argument(flag, type=typ, default=None, dest=name,
                       help=f"default: {getattr(_DEFAULTS, name)}", **kw)
    p.add_argument("--config", type=Path, default=None, help="key = value configuration file")
    p.add_argument("--seed", type=int, default=0, help="seed for synthetic presets (default: 0)")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="use a generated synthetic sequence")


def build_config(args: argparse.Namespace, mode: Optional[str] = None) -> TrackerConfig:
    cfg = TrackerConfig()
    if args.config is not None:
        cfg = TrackerConfig.from_file(args.config, cfg)
    changes = {name: getattr(args, name) for _, (name, _) in TRACKER_FLAGS.items()
               if getattr(args, name, None) is not None}
    m = mode if mode is not None else getattr(args, "mode", None)
    if m is not None:
        changes["mode"] = m
    return dataclasses.replace(cfg, **changes)


def _parse_box(text: str) -> Box:
    parts = [float(t) for t in text.replace(" ", ",").split(",") if t]
    if len(parts) != 4:
        raise ValueError("--init needs x,y,w,h")
    return Box(*parts)


def _load_inputs(args, seq_dir):
    """Frames, ground truth and a display name, from a directory or a preset."""
    if seq_dir is not None:
        seq = bench.load_sequence(seq_dir)
        for w in seq.warnings:
            _log(f"warning: {seq.name}: {w}")
        return list(seq.images()), seq.gt, seq.name
    frames, gt = synth_sequence(preset(args.preset, args.seed))
    return frames, [bench.to_file_coords(b) for b in gt], f"{args.preset}_s{args.seed}"


def cmd_track(args) -> int:
    if (args.sequence is None) == (args.preset is None):
        raise ValueError("give either a sequence directory or --preset")
    cfg = build_config(args)
    init = _parse_box(args.init) if args.init else None
    frames, gt, name = _load_inputs(args, args.sequence)
    _log(f"tracking {name}: {len(frames)} frames, mode {cfg.mode}")
    t0 = time.perf_counter()
    results = bench.run_tracker(frames, gt, cfg, init)
    dt = time.perf_counter() - t0
    bench.write_results(args.out, results)
    print(f"fps {len(frames) / dt:.2f}")
    if gt:
        rep = bench.evaluate(results, gt, name, cfg.mode)
        print(f"mean_cle {rep.mean_cle:.4f}")
    return 0


def cmd_bench(args) -> int:
    if not args.sequences and args.preset is None:
        raise ValueError("give at least one sequence directory or --preset")
    modes = args.modes or ["memory"]
    if len(set(modes)) != len(modes):
        raise ValueError("each --mode may be given once")
    configs = {m: build_config(args, m) for m in modes}
    inputs = [(d, None) for d in args.sequences]
    if args.preset is not None:
        inputs.append((None, args.preset))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for seq_dir, _ in inputs:
        frames, gt, name = _load_inputs(args, seq_dir)
        if not gt:
            raise ValueError(f"{name}: benchmarking needs ground truth")
        for m in modes:
            _log(f"bench {name} [{m}]")
            t0 = time.perf_counter()
            results = bench.run_tracker(frames, gt, configs[m])
            _log(f"  {len(frames) / (time.perf_counter() - t0):.1f} fps")
            rep = bench.evaluate(results, gt, name, m)
            bench.write_results(out / f"{bench.report_stem(rep)}_results.csv", results)
            reports.append(rep)
    bench.report(reports, out)
    print("mode,frames,mean_cle,auc")
    for mode, agg in bench.aggregate(reports).items():
        print(f"{mode},{agg['frames']},{agg['mean_cle']:.4f},{agg['auc']:.4f}")
    return 0


def cmd_cluster(args) -> int:
    if args.rho_rel < 0 or args.eps_factor < 0 or args.n0 < 2:
        raise ValueError("need rho_rel >= 0, eps_factor >= 0 and n0 >= 2")
    X = clustering.read_descriptor_csv(Path(args.csv).read_text())
    seg, J, eps = clustering.cluster_descriptors(list(X), args.rho_rel, args.eps_factor, args.n0)
    text = clustering.segmentation_csv(seg, J)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    _log(f"{len(seg)} clusters over {X.shape[0]} samples (eps_abs {eps:.6g})")
    return 0


def cmd_synth(args) -> int:
    spec = preset(args.preset, args.seed)
    if args.noise is not None:
        spec = dataclasses.replace(spec, noise=args.noise)
    frames, gt = synth_sequence(spec)
    bench.write_sequence(args.out, frames, gt)
    _log(f"wrote {len(frames)} frames to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmtrack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="track one sequence and write a results CSV")
    t.add_argument("sequence", nargs="?", default=None, help="sequence directory")
    _add_tracker_flags(t)
    t.add_argument("--init", default=None, help="initial box x,y,w,h (default: first ground-truth line)")
    t.add_argument("--out", default="results.csv", help="results CSV (default: results.csv)")
    t.set_defaults(func=cmd_track)

    b = sub.add_parser("bench", help="evaluate tracker modes and write reports")
    b.add_argument("sequences", nargs="*", help="sequence directories")
    _add_tracker_flags(b, multi_mode=True)
    b.add_argument("--out", default="bench_out", help="report directory (default: bench_out)")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("cluster", help="segment a descriptor CSV into temporal clusters")
    c.add_argument("csv", help="one comma-separated descriptor per line")
    c.add_argument("--rho-rel", type=float, default=_DEFAULTS.rho_rel, help=f"default: {_DEFAULTS.rho_rel}")
    c.add_argument("--eps-factor", type=float, default=_DEFAULTS.eps_factor,
                   help=f"default: {_DEFAULTS.eps_factor}")
    c.add_argument("--n0", type=int, default=_DEFAULTS.n0, help=f"calibration samples (default: {_DEFAULTS.n0})")
    c.add_argument("--out", default=None, help="segmentation CSV (default: stdout)")
    c.set_defaults(func=cmd_cluster)

    s = sub.add_parser("synth", help="write a synthetic sequence directory")
    s.add_argument("--preset", choices=sorted(PRESETS), default="translation",
                   help="scene preset (default: translation)")
    s.add_argument("--seed", type=int, default=0, help="default: 0")
    s.add_argument("--noise", type=float, default=None, help="override the preset's noise level")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ConfigError, FormatError, OSError) as exc:
        print(f"rmtrack {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
