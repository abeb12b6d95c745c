import os
from pathlib import Path

import numpy as np
import pytest

from dqpgo import dq
from dqpgo.graph import PoseGraph

DATA = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(rng, count, scale=1.0):
    A = rng.normal(size=(count, 3, 3))
    return scale * (A @ np.swapaxes(A, 1, 2) + 0.5 * np.eye(3))


def random_graph(rng, n, extra=2, spread=3.0, noise=0.5):
    """Connected graph: a chain plus ``extra`` random chords, with noisy measurements."""
    if extra > (n - 1) * (n - 2) // 2:
        raise ValueError(f"a {n}-node chain has room for only {(n - 1) * (n - 2) // 2} chords")
    nodes = dq.random_poses(rng, n, spread)
    pairs = [(k, k + 1) for k in range(n - 1)]
    while len(pairs) < n - 1 + extra:
        a, b = sorted(rng.choice(n, 2, replace=False))
        if (a, b) not in pairs:
            pairs.append((a, b))
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    rel = dq.compose(dq.inverse(nodes[i]), nodes[j])
    bump = dq.from_pose(rng.normal(0, noise, len(pairs)), rng.normal(0, noise, (len(pairs), 2)))
    z = dq.compose(rel, bump)
    return PoseGraph(nodes, i, j, z, random_spd(rng, len(pairs)))


def dataset_dir():
    return Path(os.environ.get("DQPGO_DATA", Path(__file__).parents[1] / "data"))


def find_dataset(name):
    """First file in the dataset directory whose name contains ``name`` (case-insensitive)."""
    root = dataset_dir()
    if not root.is_dir():
        return None
    hits = sorted(
        p for p in root.iterdir()
        if p.is_file() and name.lower() in p.name.lower()
        and p.suffix.lower() in (".g2o", ".graph", ".txt", ".gz")
    )
    return hits[0] if hits else None


def find_any(*names):
    for name in names:
        hit = find_dataset(name)
        if hit is not None:
            return hit
    return None


# (criterion number, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
