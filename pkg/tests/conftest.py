"""Shared fixtures and the acceptance-summary reporter."""

import numpy as np
import pytest

from karyoseg import Seed

# (name, passed, detail) tuples appended by tests/test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}: {detail}")


def stroke_seeds(obj, avoid, label, offset=(0, 0)):
    """Scripted stand-in for an operator's brush stroke: a 3 px wide line
    of seeds down a chromosome's centerline, skipping ``avoid`` pixels."""
    ox, oy = offset
    cx, cy = obj.center
    theta = np.deg2rad(obj.orientation_deg)
    ux, uy = np.cos(theta), np.sin(theta)
    px, py = -uy, ux
    seen, seeds = set(), []
    h, w = obj.mask.shape
    for t in np.arange(-obj.length / 2 + 1, obj.length / 2, 1.0):
        for side in (-1.0, 0.0, 1.0):
            x = int(round(cx + t * ux + side * px))
            y = int(round(cy + t * uy + side * py))
            if (x, y) in seen or not (0 <= y < h and 0 <= x < w):
                continue
            seen.add((x, y))
            if obj.mask[y, x] and not avoid[y, x]:
                seeds.append(Seed(x - ox, y - oy, label, "chromosome"))
    return seeds


def paint_intersection(mask, label, offset=(0, 0)):
    """Seeds covering every pixel of the visible crossing footprint."""
    ox, oy = offset
    ys, xs = np.nonzero(mask)
    return [Seed(int(x) - ox, int(y) - oy, label, "intersection") for y, x in zip(ys, xs)]


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
