"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""
from __future__ import annotations

import time
import warnings

import numpy as np
import pytest

from conftest import record, regime_stream, synthetic
from rmtrack import cli, clustering, memory, spectral
from rmtrack.bench import center_error
from rmtrack.config import TrackerConfig
from rmtrack.memory import Memory, MemoryPool
from rmtrack.spectral import Kernel
from rmtrack.tracker import Tracker, track_sequence

LAM = 1e-4


def _rel(a, b):
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) / np.linalg.norm(np.ravel(b)))


# -- 1 ------------------------------------------------------------------------

def test_c01_ridge_solver_matches_dense_solve():
    t0 = time.perf_counter()
    worst = 0.0
    for name in ("gaussian", "linear"):
        kern = Kernel(name, 0.5)
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal((8, 8))
            y = spectral.gaussian_target(8, 8, spectral.target_bandwidth(8, 8))
            k = spectral.kernel_autocorrelation(x, kern)
            fast = spectral.idft2(spectral.ridge_solve(k, y, LAM))
            dense = np.linalg.solve(spectral.circulant_from_vector(k) + LAM * np.eye(64), y.ravel())
            worst = max(worst, _rel(fast, dense))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 5.0
    record(1, ok, f"worst relative error {worst:.2e} over 200 instances, {dt:.2f} s")
    assert worst <= 1e-8
    assert dt < 5.0


# -- 2 ------------------------------------------------------------------------

def _naive_response(alpha, x_hat, z, kern):
    """f(P^-m z) with training samples P^i x_hat, evaluated shift by shift."""
    h, w = z.shape
    out = np.empty((h, w))
    for m in np.ndindex(h, w):
        zm = np.roll(z, (-m[0], -m[1]), axis=(0, 1))
        out[m] = sum(alpha[i] * kern(zm, np.roll(x_hat, i, axis=(0, 1))) for i in np.ndindex(h, w))
    return out


def test_c02_detection_matches_naive_and_finds_shifts():
    kern = Kernel("gaussian", 0.5)
    y = spectral.gaussian_target(8, 8, spectral.target_bandwidth(8, 8))
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((8, 8))
        model = spectral.train(x, y, kern, LAM)
        z = rng.standard_normal((8, 8))
        alpha = spectral.idft2(model.alpha_f)
        resp = spectral.detect(model, z).grid
        worst = max(worst, float(np.max(np.abs(resp - _naive_response(alpha, x, z, kern)))))
    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(100 + seed)
        x = rng.standard_normal((8, 8))
        m, n = (int(v) for v in rng.integers(0, 8, 2))
        model = spectral.train(x, y, kern, LAM)
        hits += spectral.detect(model, np.roll(x, (m, n), axis=(0, 1))).peak == (m, n)
    ok = worst <= 1e-6 and hits == 50
    record(2, ok, f"max |response - naive| {worst:.2e}; shifted peaks exact in {hits}/50 trials")
    assert worst <= 1e-6
    assert hits == 50


# -- 3 ------------------------------------------------------------------------

def _blend_ratios(kernel_name):
    kern = Kernel(kernel_name, 0.5)
    gamma = 0.15
    y = spectral.gaussian_target(8, 8, spectral.target_bandwidth(8, 8))
    ratios = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((8, 8))
        d = rng.standard_normal((8, 8))
        x_hat = x + d / np.linalg.norm(d) * rng.uniform(0.0, 0.1) * np.linalg.norm(x)
        k = spectral.kernel_autocorrelation(x, kern)
        k_hat = spectral.kernel_autocorrelation(x_hat, kern)
        K, K_hat = spectral.circulant_from_vector(k), spectral.circulant_from_vector(k_hat)
        approx = spectral.idft2(spectral.blended_solve(k_hat, k, y, gamma, LAM))
        exact = spectral.oracle_exact_blend(K_hat, K, y, gamma, LAM)
        ratios.append(spectral.oracle_blend_cost(approx, K_hat, K, y, gamma, LAM)
                      / spectral.oracle_blend_cost(exact, K_hat, K, y, gamma, LAM))
    return np.array(ratios)


def test_c03_blended_solver_cost_within_five_percent():
    r = _blend_ratios("gaussian")
    lin = _blend_ratios("linear")
    ok = bool(np.all(r <= 1.05))
    record(3, ok, f"gaussian kernel: worst cost ratio {r.max():.5f} over 100 instances "
                  f"(linear kernel, informational: {np.mean(lin <= 1.05):.0%} within 1.05, worst {lin.max():.2f})")
    assert np.all(r <= 1.05)


# -- 4 ------------------------------------------------------------------------

def test_c04_integral_image_rectangle_sums_exact():
    worst = 0.0
    n_queries = 0
    for seed in range(2):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((100, 12))
        D = clustering.distance_matrix(list(X))
        J = clustering.integral_image(D)
        for _ in range(100):
            r0, r1 = sorted(int(v) for v in rng.integers(1, 101, 2))
            c0, c1 = sorted(int(v) for v in rng.integers(1, 101, 2))
            naive = 0.0
            for i in range(r0 - 1, r1):
                for j in range(c0 - 1, c1):
                    naive += D[i, j]
            got = clustering.rect_sum(J, r0, r1, c0, c1)
            worst = max(worst, abs(got - naive) / max(abs(naive), 1e-300))
            n_queries += 1
    ok = worst <= 1e-9
    record(4, ok, f"worst relative error {worst:.2e} over {n_queries} rectangles")
    assert worst <= 1e-9


# -- 5 ------------------------------------------------------------------------

def test_c05_clustering_recovers_regime_boundaries():
    good = 0
    for seed in range(100):
        X, truth = regime_stream(seed)
        seg, _, _ = clustering.cluster_descriptors(list(X), rho_rel=1.0, eps_factor=1.2, n0=40)
        found = seg.boundaries()
        good += len(found) == len(truth) and all(abs(a - b) <= 1 for a, b in zip(found, truth))
    ok = good >= 95
    record(5, ok, f"all boundaries within +/-1 frame in {good}/100 seeds (need 95)")
    assert good >= 95


# -- 6 ------------------------------------------------------------------------

def clustering_timing(p: int = 1000, repeats: int = 5) -> dict[str, float]:
    """Median wall time of ``cluster`` with ``J`` precomputed, on two streams."""
    out = {}
    X, _ = regime_stream(7, p=p)
    streams = {"regimes": X, "uniform": np.tile(X[:1], (p, 1))}
    for name, S in streams.items():
        D = clustering.distance_matrix(list(S))
        eps = 1.2 * clustering.baseline_scale(D, 40)
        J = clustering.integral_image(D)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            seg = clustering.cluster(J, p, 1.0, eps)
            times.append(time.perf_counter() - t0)
        out[name] = float(np.median(times))
        out[name + "_sweeps"] = seg.sweeps
    return out


def test_c06_clustering_speed_on_1000_samples():
    t = clustering_timing()
    worst = max(t["regimes"], t["uniform"])
    ok = worst <= 0.1 and t["uniform_sweeps"] <= int(np.ceil(np.log2(1000))) + 1
    record(6, ok, f"cluster(p=1000): {1e3 * t['regimes']:.2f} ms (regime stream), "
                  f"{1e3 * t['uniform']:.2f} ms / {t['uniform_sweeps']} sweeps (identical samples)")
    assert worst <= 0.1
    assert t["uniform_sweeps"] <= int(np.ceil(np.log2(1000))) + 1


# -- 7 ------------------------------------------------------------------------

def test_c07_translation_lock_all_modes():
    frames, gt = synthetic("translation", 0)
    fractions = {}
    for mode in ("memory", "baseline_mosse", "baseline_csk"):
        res = track_sequence(frames, gt[0], TrackerConfig(mode=mode))
        err = np.array([center_error(r.box, g) for r, g in zip(res, gt)])
        fractions[mode] = float(np.mean(err <= 2.0))
    ok = all(f >= 0.99 for f in fractions.values())
    record(7, ok, "frames within 2 px: " + ", ".join(f"{m} {f:.1%}" for m, f in fractions.items()))
    assert ok


# -- 8 ------------------------------------------------------------------------

def run_with_ingestion_log(frames, box, config):
    """Track and remember when every memory id was ingested."""
    tr = Tracker(config)
    results = [tr.init(frames[0], box)]
    ingested = {}
    for f in frames[1:]:
        results.append(tr.step(f))
        for m in tr.pool:
            ingested.setdefault(m.id, m.ingested_at)
    return results, ingested


@pytest.mark.slow
def test_c08_memory_tracker_recovers_after_drift():
    wins = 0
    early = 0
    lines = []
    for seed in range(10):
        frames, gt = synthetic("drift_recovery", seed)
        mem, ingested = run_with_ingestion_log(frames, gt[0], TrackerConfig(mode="memory"))
        csk = track_sequence(frames, gt[0], TrackerConfig(mode="baseline_csk"))
        late = slice(299, 400)  # frames 300..400
        e_mem = np.mean([center_error(r.box, g) for r, g in zip(mem[late], gt[late])])
        e_csk = np.mean([center_error(r.box, g) for r, g in zip(csk[late], gt[late])])
        wins += e_mem <= 0.5 * e_csk
        active = [r.active_memory for r in mem[late]]
        early += all(a is not None and ingested[a] < 200 for a in active)
        lines.append(f"seed {seed}: memory {e_mem:.1f} px vs csk {e_csk:.1f} px")
    ok = wins >= 8 and early >= 8
    record(8, ok, f"late error halved in {wins}/10 seeds; active memory ingested before "
                  f"frame 200 in {early}/10 seeds")
    print("\n".join(lines))
    assert wins >= 8
    assert early >= 8


# -- 9 ------------------------------------------------------------------------

def _random_memory(rng, mid, begin, size, s1, s2):
    v = rng.standard_normal(4)
    d = memory.Descriptor(v / np.linalg.norm(v))
    return Memory(mid, begin, size, [begin], [d], [np.zeros((1, 2, 2))], np.zeros((1, 2, 2)), d,
                  memory.confidence(begin, size, s1, s2))


def test_c09_memory_pool_bookkeeping():
    s1, s2 = 1e-3, 1e-2
    rng = np.random.default_rng(9)
    pool = MemoryPool()
    max_seen = 0
    wrong_evictions = 0
    for cycle in range(40):
        for _ in range(int(rng.integers(1, 5))):
            begin, size = int(rng.integers(0, 2000)), int(rng.integers(1, 101))
            pool.memories.append(_random_memory(rng, pool.next_id, begin, size, s1, s2))
            pool.next_id += 1
        while len(pool) > 10:
            lowest = min(m.confidence for m in pool)
            gone = memory.evict(pool, len(pool) - 1)
            wrong_evictions += gone[0].confidence != lowest
        max_seen = max(max_seen, len(pool))

    B = np.arange(0, 201)
    N = np.arange(1, 101)
    grid = np.array([[memory.confidence(b, n, s1, s2) for n in N] for b in B])
    dec_b = bool(np.all(np.diff(grid, axis=0) < 0))
    inc_n = bool(np.all(np.diff(grid, axis=1) > 0))
    ok = max_seen <= 10 and wrong_evictions == 0 and dec_b and inc_n
    record(9, ok, f"max pool size {max_seen}, {wrong_evictions} wrong evictions, confidence "
                  f"strictly decreasing in B: {dec_b}, increasing in N: {inc_n} on 201x100 grid")
    assert ok


# -- 10 -----------------------------------------------------------------------

def test_c10_fixed_rate_update_matches_closed_form():
    rng = np.random.default_rng(10)
    gamma = 0.15
    samples = rng.standard_normal((50, 6, 6))
    acc = np.zeros((6, 6))
    for s in samples:
        acc = spectral.linear_update(acc, s, gamma)
    closed = np.tensordot(spectral.expanded_weights(gamma, 50), samples, axes=1)
    err = float(np.max(np.abs(acc - closed)))
    lag100 = float(spectral.expanded_weights(0.1, 101)[0])
    ok = err <= 1e-12 and abs(lag100 - 2.656e-6) <= 1e-9
    record(10, ok, f"iterated vs closed form max diff {err:.1e}; weight at lag 100 (gamma 0.1) = {lag100:.4e}")
    assert err <= 1e-12
    assert abs(lag100 - 2.656e-6) <= 1e-9


# -- 11 -----------------------------------------------------------------------

def test_c11_memory_mode_throughput():
    frames, gt = synthetic("translation", 0)
    t0 = time.perf_counter()
    track_sequence(frames, gt[0], TrackerConfig(mode="memory"))
    fps = len(frames) / (time.perf_counter() - t0)
    ok = fps >= 10.0
    record(11, ok, f"memory mode {fps:.1f} fps on {frames[0].shape[1]}x{frames[0].shape[0]} frames",
           status=None if ok else "WARN")
    if not ok:
        warnings.warn(f"memory-mode throughput {fps:.1f} fps is below 10 fps on this machine")


# -- 12 -----------------------------------------------------------------------

def test_c12_bench_runs_are_byte_identical(tmp_path, capsys):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        argv = ["bench", "--preset", "translation", "--seed", "3", "--mode", "memory",
                "--mode", "baseline_mosse", "--out", str(out)]
        assert cli.main(argv) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    capsys.readouterr()
    same = outs[0] == outs[1] and len(outs[0]) == 4
    record(12, same, f"{len(outs[0])} CSV files compared, identical: {same}")
    assert same
