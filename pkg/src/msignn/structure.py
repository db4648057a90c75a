"""Hop adjacency matrices, information-gain-ratio column selection and MSI layers.

The pipeline for one hop ``i`` is::

    A_i = compute_hop_adjacency(graph, m)[i - 1]
    sel = select_columns(A_i, labels, train_nodes, t, n)
    S   = build_msi_layer(features, [sel_1, ..., sel_m], config)

``select_columns`` scores every column ``u`` of ``A_i`` by how well the
binary attribute "labeled node v is i hops from u" splits the labeled
nodes (C4.5 gain ratio), keeps the top ``t`` and then drops columns that
touch ``n`` or fewer labeled nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Graph


@dataclass(frozen=True)
class HopAdjacency:
    """Boolean matrix with entry [v, u] set iff dist(v, u) == hop."""

    hop: int
    matrix: sp.csr_matrix

    def degrees(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)


def compute_hop_adjacency(graph: Graph, max_hop: int) -> list[HopAdjacency]:
    """Exact-distance adjacency for hops 1..max_hop.

    Runs a breadth-first search from every node at once: the frontier at
    depth ``i`` is the set of pairs reachable by extending a depth ``i-1``
    pair by one edge, minus every pair already seen at a smaller depth.
    """
    if max_hop < 1:
        raise ValueError("max_hop must be >= 1")
    n = graph.num_nodes
    adj = sp.csr_matrix(
        (np.ones(len(graph.indices), dtype=bool), graph.indices, graph.indptr),
        shape=(n, n))
    step = adj.astype(np.int64)
    visited = _clean(adj + sp.identity(n, dtype=bool, format="csr"))
    frontier = _clean(adj)
    hops = [HopAdjacency(1, frontier)]
    for i in range(2, max_hop + 1):
        reach = _clean(frontier.astype(np.int64) @ step)
        frontier = _clean(reach.astype(np.int8) - reach.multiply(visited).astype(np.int8))
        visited = _clean(visited + frontier)
        hops.append(HopAdjacency(i, frontier))
    return hops


def _clean(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=bool)
    m.eliminate_zeros()
    m.sort_indices()
    return m


# --------------------------------------------------------------------------
# information gain ratio

def entropy(class_counts) -> float:
    """Shannon entropy in bits of a class histogram (0 log 0 = 0)."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("class counts must be nonnegative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an empty set is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    total = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / np.where(total > 0, total, 1), 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logs).sum(axis=1)


@dataclass(frozen=True)
class IgrScore:
    column_node: int
    score: float
    occurrence: int


def _column_stats(matrix, labels, labeled):
    """Gain ratio and labeled-occurrence for every column, vectorized."""
    labeled = np.asarray(labeled, dtype=np.int64)
    if not len(labeled):
        raise ValueError("labeled set must be nonempty")
    y = np.asarray(labels)[labeled]
    classes, y_idx = np.unique(y, return_inverse=True)
    onehot = sp.csr_matrix(
        (np.ones(len(y)), (np.arange(len(y)), y_idx)), shape=(len(y), len(classes)))
    sub = sp.csr_matrix(matrix)[labeled].astype(np.float64)
    inside = np.asarray((sub.T @ onehot).todense())           # |V| x C
    totals = np.bincount(y_idx, minlength=len(classes)).astype(np.float64)
    outside = totals[None, :] - inside
    n_in = inside.sum(axis=1)
    n_lab = float(len(labeled))
    frac = n_in / n_lab
    base = entropy(totals)
    cond = frac * _entropy_rows(inside) + (1 - frac) * _entropy_rows(outside)
    gain = base - cond
    split_info = _entropy_rows(np.column_stack([n_in, n_lab - n_in]))
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(split_info > 0, gain / np.where(split_info > 0, split_info, 1), 0.0)
    # rounding can leave -1e-17 on zero-gain columns
    score = np.maximum(score, 0.0)
    return score, n_in.astype(np.int64)


def igr_score(column, labels, labeled_set, column_node: int = -1) -> IgrScore:
    """Gain ratio of one adjacency column over the labeled nodes.

    ``column`` is a length-|V| 0/1 vector (dense or sparse). A column
    adjacent to none or all of the labeled nodes scores 0.
    """
    if sp.issparse(column):
        col = sp.csr_matrix(column.reshape(-1, 1) if column.shape[0] == 1 else column)
    else:
        col = sp.csr_matrix(np.asarray(column, dtype=np.float64).reshape(-1, 1))
    score, occ = _column_stats(col, labels, labeled_set)
    return IgrScore(int(column_node), float(score[0]), int(occ[0]))


def igr_scores(hop: HopAdjacency | sp.spmatrix, labels, labeled_set):
    """Scores and occurrences for all columns of a hop matrix."""
    matrix = hop.matrix if isinstance(hop, HopAdjacency) else hop
    return _column_stats(matrix, labels, labeled_set)


# --------------------------------------------------------------------------
# selection

SCORE_DECIMALS = 12


@dataclass(frozen=True)
class ColumnRanking:
    """All columns of one hop matrix in descending-score order."""

    hop: int
    order: np.ndarray
    scores: np.ndarray
    occurrence: np.ndarray

    def rows(self):
        for u in self.order:
            yield IgrScore(int(u), float(self.scores[u]), int(self.occurrence[u]))


def rank_columns(hop: HopAdjacency, labels, labeled_set) -> ColumnRanking:
    scores, occ = igr_scores(hop, labels, labeled_set)
    # equal scores may differ in the last ulp depending on class order
    key = np.round(scores, SCORE_DECIMALS)
    # lexsort keys run last-to-first: score descending, then node id ascending
    order = np.lexsort((np.arange(len(scores)), -key))
    return ColumnRanking(hop.hop, order, scores, occ)


@dataclass(frozen=True)
class SelectedStructure:
    hop: int
    column_nodes: np.ndarray
    matrix: sp.csr_matrix
    scores: np.ndarray = field(default=None, repr=False)

    @property
    def width(self) -> int:
        return len(self.column_nodes)


def select_from_ranking(hop: HopAdjacency, ranking: ColumnRanking, t: int, n: int) -> SelectedStructure:
    if t < 1:
        raise ValueError("t must be >= 1")
    head = ranking.order[:t]
    keep = head[ranking.occurrence[head] > n]
    return SelectedStructure(hop.hop, keep, hop.matrix[:, keep].tocsr(), ranking.scores[keep])


def select_columns(hop: HopAdjacency, labels, labeled_set, t: int, n: int) -> SelectedStructure:
    """Top-``t`` columns by gain ratio, then drop those with occurrence <= ``n``.

    Ties in score are broken by the smaller node id. The result may be
    narrower than ``t`` (or empty) once the occurrence filter runs.
    """
    return select_from_ranking(hop, rank_columns(hop, labels, labeled_set), t, n)


def write_ranking_csv(ranking_rows, fh) -> int:
    """Dump ``node_id,score,occurrence`` rows; returns the number written."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["node_id", "score", "occurrence"])
    count = 0
    for row in ranking_rows:
        writer.writerow([row.column_node, repr(row.score), row.occurrence])
        count += 1
    return count


# --------------------------------------------------------------------------
# MSI layer

@dataclass(frozen=True)
class MsiConfig:
    """Selection size ``t``, occurrence threshold ``n``, discount ``lam``.

    ``c_x`` copies of the features and ``c_a[i-1]`` copies of the hop-i
    structural block are concatenated; the hop count is ``len(c_a)``.
    """

    t: int = 1000
    n: int = 1
    lam: float = 0.5
    c_x: int = 1
    c_a: tuple[int, ...] = (1, 1)

    def __post_init__(self):
        object.__setattr__(self, "c_a", tuple(int(c) for c in self.c_a))
        if not self.c_a:
            raise ValueError("need at least one hop")
        if self.c_x < 0 or any(c < 0 for c in self.c_a):
            raise ValueError("combined numbers must be >= 0")
        if self.c_x == 0 and not any(self.c_a):
            raise ValueError("all combined numbers are zero")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.t < 1:
            raise ValueError("t must be >= 1")

    @property
    def max_hop(self) -> int:
        return len(self.c_a)

    def is_identity(self) -> bool:
        return self.c_x == 1 and not any(self.c_a)

    def width(self, num_features: int, widths: Sequence[int]) -> int:
        return self.c_x * num_features + sum(c * w for c, w in zip(self.c_a, widths))


def build_msi_layer(features, selected: Sequence[SelectedStructure], config: MsiConfig) -> np.ndarray:
    """Concatenate duplicated feature and discounted structural blocks.

    Row ``v`` is ``[X_v]*c_x, [S_v1]*c_a1, lam*[S_v2]*c_a2, ...``; a block
    with multiplicity 0 is left out. Returns a dense float64 matrix.
    """
    if len(selected) < config.max_hop:
        raise ValueError(f"need selections for hops 1..{config.max_hop}")
    blocks = []
    if config.c_x:
        if features is None:
            raise ValueError("c_x > 0 but no features given")
        blocks += [np.asarray(features, dtype=np.float64)] * config.c_x
    for i, (c, sel) in enumerate(zip(config.c_a, selected)):
        if c == 0 or sel.width == 0:
            continue
        block = sel.matrix.toarray().astype(np.float64)
        if i:
            block *= config.lam ** i
        blocks += [block] * c
    if not blocks or sum(b.shape[1] for b in blocks) == 0:
        raise ValueError("MSI layer has zero width")
    return np.hstack(blocks) if len(blocks) > 1 else blocks[0].copy()


def structural_widths(selected: Sequence[SelectedStructure]) -> list[int]:
    return [s.width for s in selected]
