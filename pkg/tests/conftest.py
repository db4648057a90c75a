import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from msignn.graph import from_edges, load_graph  # noqa: E402
from oracles import random_graph_edges  # noqa: E402

DATA_ROOT = Path(os.environ.get("MSIGNN_DATA", Path(__file__).parents[1] / "data"))


def dataset_dir(name: str) -> Path:
    return DATA_ROOT / name.lower()


def load_dataset(name: str):
    """Load ``$MSIGNN_DATA/<name>`` in whichever layout it is stored.

    Returns None when the directory is absent; callers decide whether that
    is a skip or a failure.
    """
    root = dataset_dir(name)
    if (root / "meta.json").is_file():
        return load_graph(root, "canonical")
    if (root / "out1_graph_edges.txt").is_file():
        dim = 932 if name.lower() == "actor" else None
        return load_graph(root, "geomgcn-text", sparse_feature_dim=dim)
    return None


def random_labeled_graph(seed, n=10, p=0.3, num_features=4, num_classes=3):
    rng = np.random.default_rng(seed)
    edges = random_graph_edges(rng, n, p)
    labels = rng.integers(0, num_classes, n)
    labels[:num_classes] = np.arange(num_classes)
    return from_edges(n, edges, rng.normal(size=(n, num_features)), labels, num_classes), edges


@pytest.fixture
def path3():
    return from_edges(3, [(0, 1), (1, 2)], np.eye(3), [0, 1, 0], 2)


@pytest.fixture
def small_graph():
    graph, _ = random_labeled_graph(3, n=8, p=0.35)
    return graph


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(name: str, ok: bool, detail: str) -> str:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
