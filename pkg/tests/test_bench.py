from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import synthetic
from rmtrack import bench
from rmtrack.config import TrackerConfig
from rmtrack.features import descriptor, hog
from rmtrack.imaging import Box, save_pgm
from rmtrack.synth import SynthSpec, preset, regime_at, synth_sequence, target_texture
from rmtrack.tracker import TrackResult


def make_dir(root, n=3, gt_lines=None):
    (root / "img").mkdir(parents=True)
    for i in range(n):
        save_pgm(root / "img" / f"{i + 1:04d}.pgm", np.full((20, 30), i / 10))
    if gt_lines is not None:
        (root / bench.GT_FILE).write_text("\n".join(gt_lines) + "\n")
    return root


# -- sequence loading ---------------------------------------------------------

def test_load_sequence_with_mixed_delimiters(tmp_path):
    root = make_dir(tmp_path / "seq", 3, ["1,2,10,12", "3\t4\t10\t12", "5 6  10 12"])
    seq = bench.load_sequence(root)
    assert seq.name == "seq" and len(seq) == 3 and not seq.warnings
    assert seq.gt == [Box(1, 2, 10, 12), Box(3, 4, 10, 12), Box(5, 6, 10, 12)]
    imgs = list(seq.images())
    assert imgs[2].shape == (20, 30) and imgs[2].mean() == pytest.approx(0.2, abs=1 / 255)


def test_load_sequence_without_groundtruth_warns(tmp_path):
    seq = bench.load_sequence(make_dir(tmp_path / "s", 2))
    assert not seq.has_gt and "missing" in seq.warnings[0]


def test_load_sequence_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        bench.load_sequence(tmp_path / "nope")
    with pytest.raises(ValueError, match="2 ground-truth boxes for 3 frames"):
        bench.load_sequence(make_dir(tmp_path / "a", 3, ["1,1,4,4", "1,1,4,4"]))
    (tmp_path / "empty").mkdir()
    with pytest.raises(ValueError):
        bench.load_sequence(tmp_path / "empty")


def test_parse_groundtruth_cases():
    assert bench.parse_groundtruth("1,2,3,4\n\nNaN,NaN,NaN,NaN\n0,0,0,5\n") == [Box(1, 2, 3, 4), None, None]
    for bad in ["1,2,3\n", "1,2,x,4\n"]:
        with pytest.raises(ValueError):
            bench.parse_groundtruth(bad)


# -- metrics ------------------------------------------------------------------

def test_center_error_and_overlap_examples():
    assert bench.center_error(Box(0, 0, 10, 10), Box(3, 4, 10, 10)) == 5.0
    assert bench.overlap(Box(0, 0, 10, 10), Box(0, 0, 10, 10)) == 1.0
    assert bench.overlap(Box(0, 0, 10, 10), Box(5, 0, 10, 10)) == pytest.approx(1 / 3)
    assert bench.overlap(Box(0, 0, 10, 10), Box(10, 0, 10, 10)) == 0.0
    assert bench.overlap(Box(0, 0, 10, 10), Box(2, 2, 5, 5)) == pytest.approx(0.25)


def test_metrics_symmetric(rng):
    for _ in range(100):
        a = Box(*rng.uniform(0, 50, 2), *rng.uniform(1, 30, 2))
        b = Box(*rng.uniform(0, 50, 2), *rng.uniform(1, 30, 2))
        assert bench.overlap(a, b) == pytest.approx(bench.overlap(b, a))
        assert 0.0 <= bench.overlap(a, b) <= 1.0
        assert bench.center_error(a, b) == bench.center_error(b, a)


def test_evaluate_perfect_and_disjoint():
    gt = [Box(10, 10, 20, 20)] * 8
    rep = bench.evaluate(gt, gt)
    assert rep.auc == pytest.approx(20 / 21) and rep.mean_cle == 0.0
    assert np.all(rep.precision[1:] == 1.0) and rep.precision[0] == 0.0
    far = [Box(100, 100, 20, 20)] * 8
    rep = bench.evaluate(far, gt)
    assert rep.auc == 0.0 and np.all(rep.success == 0.0)


def test_evaluate_five_frame_fixture():
    gt = [Box(0, 0, 10, 10)] * 5
    pred = [Box(0, 0, 10, 10), Box(0, 0, 10, 5), Box(0, 5, 10, 5), Box(20, 0, 10, 10), Box(0, 30, 10, 10)]
    rep = bench.evaluate(pred, gt, "fix", "m")
    np.testing.assert_allclose(rep.overlaps, [1, 0.5, 0.5, 0, 0])
    # thresholds below 0.5 see 3 of 5 frames, 0.5..0.95 see 1, threshold 1 sees none
    expect = [0.6] * 10 + [0.2] * 10 + [0.0]
    np.testing.assert_allclose(rep.success, expect)
    assert rep.auc == pytest.approx(sum(expect) / 21)
    assert rep.mean_cle == pytest.approx((0 + 2.5 + 2.5 + 20 + 30) / 5)


def test_evaluate_skips_absent_frames_and_checks_length():
    gt = [Box(0, 0, 4, 4), None, Box(0, 0, 4, 4)]
    rep = bench.evaluate([Box(0, 0, 4, 4)] * 3, gt)
    assert rep.frames.tolist() == [1, 3] and rep.n_frames == 2
    with pytest.raises(ValueError):
        bench.evaluate([Box(0, 0, 4, 4)] * 2, gt)


def test_curves_monotone(rng):
    ovs = rng.uniform(0, 1, 300)
    errs = rng.exponential(10, 300)
    assert np.all(np.diff(bench.success_curve(ovs)) <= 0)
    assert np.all(np.diff(bench.precision_curve(errs)) >= 0)
    assert len(bench.success_curve([])) == 21 and len(bench.precision_curve([])) == 51


def test_aggregate_weights_by_frames():
    gt = [Box(0, 0, 10, 10)] * 4
    a = bench.evaluate([Box(0, 0, 10, 10)] * 4, gt, "a", "m")
    b = bench.evaluate([Box(3, 4, 10, 10)], gt[:1], "b", "m")
    agg = bench.aggregate([a, b])["m"]
    assert agg["frames"] == 5 and agg["sequences"] == 2
    assert agg["mean_cle"] == pytest.approx(5 / 5)
    assert agg["auc"] == pytest.approx((4 * a.auc + b.auc) / 5)


# -- synthetic sequences ------------------------------------------------------

def test_synth_is_deterministic():
    a, ga = synth_sequence(preset("drift_recovery", 4))
    b, gb = synth_sequence(preset("drift_recovery", 4))
    assert ga == gb and all(np.array_equal(x, y) for x, y in zip(a, b))
    c, _ = synth_sequence(preset("drift_recovery", 5))
    assert not np.array_equal(a[0], c[0])


def test_synth_groundtruth_crops_the_texture():
    spec = SynthSpec(noise=0.0, schedule=((1, 5, 0), (6, 10, 1)))
    frames, gt = synth_sequence(spec)
    for i in (0, 7):
        b = gt[i]
        crop = frames[i][int(b.y):int(b.y + b.h), int(b.x):int(b.x + b.w)]
        np.testing.assert_array_equal(crop, target_texture(spec.seed, regime_at(spec, i + 1), spec.target_size))


def test_synth_regimes_are_far_apart_in_descriptor_space():
    for seed in range(5):
        spec = preset("drift_recovery", seed)
        a = [descriptor(hog(target_texture(seed, 0, (32, 32)) + 0.005 * np.random.default_rng(k).standard_normal((32, 32))))
             for k in range(10)]
        b = descriptor(hog(target_texture(seed, 1, (32, 32))))
        within = max(np.sum((x.values - y.values) ** 2) for x in a for y in a)
        across = min(np.sum((x.values - b.values) ** 2) for x in a)
        assert across >= 3 * within, (seed, across, within)
        assert spec.n_frames == 400


def test_synth_rejects_out_of_frame_trajectory():
    with pytest.raises(ValueError):
        synth_sequence(SynthSpec(waypoints=((1, 5.0, 5.0),)))
    with pytest.raises(ValueError):
        preset("nope")


def test_write_and_load_round_trip(tmp_path):
    frames, gt = synthetic("static")
    root = bench.write_sequence(tmp_path / "st", frames[:4], gt[:4])
    seq = bench.load_sequence(root)
    assert [bench.from_file_coords(b) for b in seq.gt] == list(gt[:4])
    np.testing.assert_allclose(next(seq.images()), np.clip(frames[0], 0, 1), atol=0.5 / 255 + 1e-9)


# -- runs and reports ---------------------------------------------------------

def test_run_tracker_uses_file_coordinates():
    frames, gt = synthetic("static")
    file_gt = [bench.to_file_coords(b) for b in gt[:10]]
    res = bench.run_tracker(frames[:10], file_gt, TrackerConfig())
    assert [r.box for r in res] == file_gt
    with pytest.raises(ValueError):
        bench.run_tracker(frames[:2], [None, None], TrackerConfig())


def test_results_csv_round_trip(tmp_path):
    res = [TrackResult(1, Box(1.5, 2, 3, 4), 0.9, 55.0, None, False),
           TrackResult(2, Box(1.25, 2, 3, 4), 0.1, 3.0, 2, True)]
    p = tmp_path / "r.csv"
    bench.write_results(p, res)
    assert bench.read_results_csv(p.read_text()) == res


def test_report_files(tmp_path):
    gt = [Box(0, 0, 10, 10)] * 6
    reps = [bench.evaluate([Box(1, 0, 10, 10)] * 6, gt, "s<1>", "memory"),
            bench.evaluate([Box(4, 0, 10, 10)] * 6, gt, "s<1>", "baseline_mosse")]
    written = bench.report(reps, tmp_path / "out")
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == sorted(
        ["s_1__baseline_mosse.csv", "s_1__memory.csv", "success.svg", "summary.json"])
    frames, errs, ovs = bench.read_frame_csv(written["s_1__memory"].read_text())
    assert frames.tolist() == list(range(1, 7)) and np.all(errs == 1.0)
    np.testing.assert_allclose(ovs, reps[0].overlaps)
    summary = json.loads(written["summary"].read_text())
    assert len(summary["sequences"]) == 2 and set(summary["aggregate"]) == {"memory", "baseline_mosse"}
    root = ET.fromstring(written["plot"].read_text())
    assert root.tag.endswith("svg") and len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 2
    assert not math.isnan(summary["aggregate"]["memory"]["auc"])
