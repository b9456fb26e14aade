import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from epidetect.data import CountPanel, StudyGeometry


@pytest.fixture
def grid_geometry():
    """3x3 grid of regions, 50 km spacing, equal populations, rook adjacency."""
    n = 9
    coords = np.array([(50.0 * (i % 3), 50.0 * (i // 3)) for i in range(n)])
    pops = np.full(n, 1000.0)
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            if i != j and abs(coords[i] - coords[j]).sum() == 50.0:
                adj[i, j] = True
    return StudyGeometry(tuple(f"r{i}" for i in range(n)), coords, pops, adj)


@pytest.fixture
def small_panel():
    rng = np.random.default_rng(7)
    counts = rng.poisson(4.0, size=(4, 10))
    return CountPanel(counts, ("a", "b", "c", "d"), period_length=5)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")
    return path
