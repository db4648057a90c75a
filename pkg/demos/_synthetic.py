"""Synthetic graphs shared by the demo scripts."""

import numpy as np

from msignn import from_edges


def anchored_heterophily(n=300, num_classes=4, anchors_per_class=6, degree=5,
                         num_features=20, signal=0.1, seed=0):
    """Heterophilous graph whose labels are written in *who* a node links to.

    Each class owns a few anchor nodes (anchors carry random labels of their
    own). An ordinary node of class c spends most of its edges on anchors
    owned by c and the rest on random nodes, so direct neighbours rarely
    share its label while its adjacency-matrix row still identifies it.
    Features are Gaussian with a weak class-dependent shift.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, n)
    anchors = rng.choice(n, num_classes * anchors_per_class, replace=False).reshape(num_classes, -1)
    edges = set()
    for v in range(n):
        own = anchors[labels[v]]
        for _ in range(degree):
            u = rng.choice(own) if rng.random() < 0.7 else rng.integers(n)
            if u != v:
                edges.add((min(v, u), max(v, u)))
    centers = rng.normal(size=(num_classes, num_features))
    x = rng.normal(size=(n, num_features)) + signal * centers[labels]
    return from_edges(n, sorted(edges), x, labels, num_classes, name="anchored")


def edge_homophily(graph):
    u, v = graph.edge_list().T
    return float(np.mean(graph.labels[u] == graph.labels[v]))
