from __future__ import annotations

import functools

import numpy as np
import pytest

from rmtrack.synth import preset, synth_sequence

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def record(number: int, ok: bool, detail: str, status: str | None = None) -> None:
    status = status or ("PASS" if ok else "FAIL")
    ACCEPTANCE_LINES[number] = f"[{status}] criterion {number:2d}: {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@functools.lru_cache(maxsize=None)
def synthetic(name: str, seed: int = 0):
    """Frames and 0-based ground truth of a preset, generated once per session."""
    frames, gt = synth_sequence(preset(name, seed))
    for f in frames:
        f.setflags(write=False)
    return tuple(frames), tuple(gt)


def regime_stream(seed: int, p: int = 500, dim: int = 64, noise_ratio: float = 0.2, min_len: int = 30):
    """Descriptor stream with 2..6 regimes. Every sample sits at distance
    ``noise_ratio * gap`` from its regime centre, where ``gap`` is the smallest
    distance between consecutive centres. Returns samples, true boundaries
    (last 1-based index of every regime but the final one)."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 7))
    while True:
        cuts = np.sort(rng.choice(np.arange(min_len, p - min_len + 1), k - 1, replace=False))
        if np.all(np.diff(np.concatenate([[0], cuts, [p]])) >= min_len):
            break
    centres = rng.standard_normal((k, dim))
    centres /= np.linalg.norm(centres, axis=1, keepdims=True)
    gap = min(np.linalg.norm(centres[i] - centres[i + 1]) for i in range(k - 1))
    labels = np.searchsorted(cuts, np.arange(p), side="right")
    noise = rng.standard_normal((p, dim))
    noise *= noise_ratio * gap / np.linalg.norm(noise, axis=1, keepdims=True)
    return centres[labels] + noise, [int(c) for c in cuts]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
