"""Graph container, dataset readers/writers and stratified splits.

Two on-disk layouts are understood:

canonical
    ``meta.json`` (num_nodes, num_classes, feature_dim), ``edges.tsv``
    (``u<TAB>v`` per line, 0-based), ``features.csv`` (one row per node)
    and ``labels.txt`` (one class id per line).

geomgcn-text
    ``out1_graph_edges.txt`` and ``out1_node_feature_label.txt``, each
    with a header line, as distributed with the Geom-GCN benchmarks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class DatasetError(ValueError):
    """Raised when a dataset directory is missing files or is inconsistent."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with node features and labels.

    ``indptr``/``indices`` are the CSR arrays of the symmetric adjacency
    (no self-loops, no duplicates, column indices sorted per row).
    """

    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = ""

    def __post_init__(self):
        n = len(self.indptr) - 1
        if self.features.shape[0] != n:
            raise DatasetError(
                f"feature rows ({self.features.shape[0]}) != num_nodes ({n})")
        if self.labels.shape != (n,):
            raise DatasetError(f"expected {n} labels, got {self.labels.shape}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError("label id outside [0, num_classes)")
        for arr in (self.indptr, self.indices, self.features, self.labels):
            arr.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return len(self.indices) // 2

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def adjacency(self) -> sp.csr_matrix:
        n = self.num_nodes
        data = np.ones(len(self.indices), dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an (E, 2) array with u < v, sorted."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.num_classes == other.num_classes
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None


def from_edges(num_nodes, edges, features, labels, num_classes=None, name=""):
    """Build a Graph from a possibly directed, duplicated edge list.

    Edges are symmetrized, deduplicated and self-loops are dropped.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) and (edges.min() < 0 or edges.max() >= num_nodes):
        raise DatasetError("edge endpoint outside [0, num_nodes)")
    edges = edges[edges[:, 0] != edges[:, 1]]
    both = np.concatenate([edges, edges[:, ::-1]])
    adj = sp.csr_matrix(
        (np.ones(len(both)), (both[:, 0], both[:, 1])), shape=(num_nodes, num_nodes))
    adj.sum_duplicates()
    adj.sort_indices()
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if len(labels) else 0
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(num_nodes, -1)
    return Graph(adj.indptr.astype(np.int64), adj.indices.astype(np.int64),
                 np.ascontiguousarray(features), labels, int(num_classes), name)


# --------------------------------------------------------------------------
# readers / writers

def _require(path: Path) -> Path:
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    return path


def _parse_labels(tokens, source):
    out = []
    for tok in tokens:
        try:
            out.append(int(tok))
        except ValueError:
            raise DatasetError(f"non-integer label {tok!r} in {source}") from None
    return np.array(out, dtype=np.int64)


def _read_canonical(root: Path) -> Graph:
    meta = json.loads(_require(root / "meta.json").read_text())
    n = int(meta["num_nodes"])
    edges_path = _require(root / "edges.tsv")
    edges = np.loadtxt(edges_path, dtype=np.int64, ndmin=2) if edges_path.stat().st_size else np.zeros((0, 2), np.int64)
    feat_path = _require(root / "features.csv")
    features = np.loadtxt(feat_path, delimiter=",", dtype=np.float64, ndmin=2)
    lab_path = _require(root / "labels.txt")
    labels = _parse_labels(lab_path.read_text().split(), lab_path)
    if features.shape[0] != n or len(labels) != n:
        raise DatasetError(
            f"{root}: meta says {n} nodes, found {features.shape[0]} feature rows "
            f"and {len(labels)} labels")
    if "feature_dim" in meta and features.shape[1] != int(meta["feature_dim"]):
        raise DatasetError(f"{root}: feature_dim mismatch")
    if len(edges) and edges.max() >= n:
        raise DatasetError(f"{root}: edge references node {edges.max()} >= {n}")
    return from_edges(n, edges, features, labels, int(meta["num_classes"]), name=root.name)


def _read_geomgcn(root: Path, sparse_feature_dim: int | None = None) -> Graph:
    ids, rows, labels = [], [], []
    node_path = _require(root / "out1_node_feature_label.txt")
    with node_path.open() as fh:
        next(fh)
        for line in fh:
            if not line.strip():
                continue
            node_id, feat, label = line.rstrip("\n").split("\t")
            ids.append(int(node_id))
            rows.append(feat)
            labels.append(label)
    n = len(ids)
    order = np.argsort(ids)
    if not np.array_equal(np.sort(ids), np.arange(n)):
        raise DatasetError(f"{node_path}: node ids are not 0..{n - 1}")
    if sparse_feature_dim is None:
        features = np.array([[float(x) for x in r.split(",")] for r in rows])
    else:
        # Actor (film) lists the indices of nonzero features instead of a dense row
        features = np.zeros((n, sparse_feature_dim))
        for i, r in enumerate(rows):
            idx = [int(x) for x in r.split(",") if x]
            features[i, idx] = 1.0
    features = features[order]
    labels = _parse_labels(labels, node_path)[order]

    edge_path = _require(root / "out1_graph_edges.txt")
    edges = np.loadtxt(edge_path, dtype=np.int64, skiprows=1, ndmin=2)
    if len(edges) and edges.max() >= n:
        raise DatasetError(f"{edge_path}: edge references node {edges.max()} >= {n}")
    return from_edges(n, edges, features, labels, name=root.name)


def load_graph(dataset_dir, format="canonical", sparse_feature_dim=None) -> Graph:
    """Read a dataset directory in ``canonical`` or ``geomgcn-text`` layout."""
    root = Path(dataset_dir)
    if not root.is_dir():
        raise DatasetError(f"dataset directory not found: {root}")
    if format == "canonical":
        return _read_canonical(root)
    if format == "geomgcn-text":
        return _read_geomgcn(root, sparse_feature_dim)
    raise ValueError(f"unknown dataset format {format!r}")


def save_graph(graph: Graph, out_dir) -> Path:
    """Write ``graph`` in canonical layout; reloading gives an equal Graph."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"num_nodes": graph.num_nodes, "num_classes": graph.num_classes,
            "feature_dim": graph.num_features}
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    np.savetxt(out / "edges.tsv", graph.edge_list(), fmt="%d", delimiter="\t")
    # %.17g round-trips float64 exactly
    np.savetxt(out / "features.csv", graph.features, fmt="%.17g", delimiter=",")
    np.savetxt(out / "labels.txt", graph.labels, fmt="%d")
    return out


# --------------------------------------------------------------------------
# splits

TRAIN_PCT, TEST_PCT = 48, 20


@dataclass(frozen=True)
class SplitMasks:
    """Disjoint train/val/test node id arrays (sorted)."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int | None = field(default=None, compare=False)

    def __eq__(self, other):
        return (np.array_equal(self.train, other.train)
                and np.array_equal(self.val, other.val)
                and np.array_equal(self.test, other.test))


def split_sizes(class_size: int) -> tuple[int, int, int]:
    """Per-class (train, val, test) counts for a 48/32/20 split.

    Train and test are floored and validation takes the remainder; a
    nonempty class always keeps at least one training node.
    """
    n_train = max(TRAIN_PCT * class_size // 100, 1 if class_size else 0)
    n_test = min(TEST_PCT * class_size // 100, class_size - n_train)
    return n_train, class_size - n_train - n_test, n_test


def make_splits(graph: Graph, num_splits: int = 10, seed: int = 0,
                min_class_size: int = 1) -> list[SplitMasks]:
    """Class-stratified random 48% / 32% / 20% train / val / test splits.

    Split ``k`` is drawn from ``numpy.random.default_rng([seed, k])`` so a
    given split does not depend on how many others were requested.
    """
    counts = np.bincount(graph.labels, minlength=graph.num_classes)
    small = [c for c, k in enumerate(counts) if 0 < k < min_class_size]
    if small:
        raise DatasetError(
            f"classes {small} have fewer than {min_class_size} members")
    members = [np.flatnonzero(graph.labels == c) for c in range(graph.num_classes)]
    splits = []
    for k in range(num_splits):
        rng = np.random.default_rng([seed, k])
        train, val, test = [], [], []
        for nodes in members:
            if not len(nodes):
                continue
            perm = rng.permutation(nodes)
            n_tr, n_va, _ = split_sizes(len(nodes))
            train.append(perm[:n_tr])
            val.append(perm[n_tr:n_tr + n_va])
            test.append(perm[n_tr + n_va:])
        splits.append(SplitMasks(
            np.sort(np.concatenate(train)), np.sort(np.concatenate(val)),
            np.sort(np.concatenate(test)), seed=seed))
    return splits
