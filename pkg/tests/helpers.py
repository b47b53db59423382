"""Shared instance generators and independent brute-force oracles."""

from __future__ import annotations

import itertools
from collections import Counter

import numpy as np

import gcncert as gc


def two_node_loop() -> tuple[gc.Graph, gc.GcnModel]:
    """Two connected nodes, four binary features, a hand-checkable 2-layer classifier.

    Node 0's scores are (1.5, 2.5); with one allowed flip the score gap
    o1 - o0 reduces to 0.5 * (x[0,2] + x[1,2]), so interval analysis misses
    the certificate (margin -0.5) while the symbolic one lands it (+0.5).
    """
    graph = gc.Graph(
        adjacency=np.array([[0, 1], [1, 0]]),
        features=np.array([[1, 0, 1, 1], [1, 0, 1, 0]]),
    )
    model = gc.GcnModel((
        gc.GcnLayer(np.array([[0.0, 1], [0, 0], [1, 0], [0, 1]]), np.zeros(2)),
        gc.GcnLayer(np.array([[0.0, 1], [1, 1]]), np.zeros(2)),
    ))
    return graph, model


def undershoot_example() -> tuple[gc.Graph, gc.GcnModel, gc.PerturbationBudget]:
    """Single isolated node where the symbolic certifier is looser than intervals.

    Pre-activation spans [-0.5, 1.0] over the one allowed flip, a mixed ReLU
    with the positive side dominating, so the area-minimal lower bound keeps
    the raw pre-activation and admits -0.5 where the interval floor is 0.
    The node is truly robust: interval margin +0.1, symbolic margin -0.4.
    """
    graph = gc.Graph(adjacency=np.array([[0]]), features=np.array([[0]]))
    model = gc.GcnModel((
        gc.GcnLayer(np.array([[1.5]]), np.array([-0.5])),
        gc.GcnLayer(np.array([[1.0, 0.0]]), np.array([0.1, 0.0])),
    ))
    return graph, model, gc.PerturbationBudget(per_node=1, total=1)


def flip_moves_label_example() -> tuple[gc.Graph, gc.GcnModel, gc.PerturbationBudget]:
    """One node, one linear layer: decision margin 0.1, one flip swings it by -0.5."""
    graph = gc.Graph(adjacency=np.array([[0]]), features=np.array([[1]]))
    model = gc.GcnModel((
        gc.GcnLayer(np.array([[0.5, 0.0]]), np.array([0.0, 0.4])),
    ))
    return graph, model, gc.PerturbationBudget(per_node=1, total=1)


def raw_instance(rng, num_layers: int = 2):
    """Random graph, features, budget, and uniform random weights."""
    n = int(rng.integers(2, 7))
    m0 = int(rng.integers(2, 6))
    hidden = int(rng.integers(2, 5))
    labels = int(rng.integers(2, 4))
    adj = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.45:
                adj[i, j] = adj[j, i] = 1
    feats = (rng.random((n, m0)) < 0.5).astype(int)
    widths = [m0] + [hidden] * (num_layers - 1) + [labels]
    layers = tuple(
        gc.GcnLayer(
            rng.uniform(-1, 1, (widths[k], widths[k + 1])),
            rng.uniform(-0.5, 0.5, widths[k + 1]),
        )
        for k in range(num_layers)
    )
    graph = gc.Graph(adjacency=adj, features=feats)
    budget = gc.PerturbationBudget(
        per_node=int(rng.integers(1, 3)), total=int(rng.integers(1, 4))
    )
    return graph, gc.GcnModel(layers), budget


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def trained_instance(rng, steps: int = 30, lr: float = 0.3):
    """Random instance whose weights are briefly fit to a random labeling.

    Mirrors certifying a trained classifier: margins become structured
    instead of arbitrary, and non-robust nodes with real counterexamples
    remain common at these budgets.
    """
    graph, model, budget = raw_instance(rng)
    labels = rng.integers(0, model.num_labels, graph.num_nodes)
    onehot = np.eye(model.num_labels)[labels]
    norm_adj = gc.normalize_adjacency(graph)
    x = graph.features.astype(float)
    (w1, b1), (w2, b2) = [(l.weight.copy(), l.bias.copy()) for l in model.layers]
    for _ in range(steps):
        h1 = (norm_adj @ x) @ w1 + b1
        r = np.maximum(h1, 0.0)
        out = (norm_adj @ r) @ w2 + b2
        dout = (_softmax(out) - onehot) / graph.num_nodes
        dw2 = (norm_adj @ r).T @ dout
        db2 = dout.sum(axis=0)
        dh1 = ((norm_adj.T @ dout) @ w2.T) * (h1 > 0)
        dw1 = (norm_adj @ x).T @ dh1
        db1 = dh1.sum(axis=0)
        w1 -= lr * dw1
        b1 -= lr * db1
        w2 -= lr * dw2
        b2 -= lr * db2
    return graph, gc.GcnModel((gc.GcnLayer(w1, b1), gc.GcnLayer(w2, b2))), budget


def planted_community_graph(rng, n: int = 20, m0: int = 6):
    """Two feature-signature communities with homophilous edges, plus labels."""
    labels = np.array([0, 1] * (n // 2))
    rng.shuffle(labels)
    signature = {0: (0, 1, 2), 1: (3, 4, 5)}
    feats = np.zeros((n, m0), dtype=int)
    for i in range(n):
        for j in range(m0):
            feats[i, j] = rng.random() < (0.7 if j in signature[labels[i]] else 0.2)
    adj = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < (0.35 if labels[i] == labels[j] else 0.08):
                adj[i, j] = adj[j, i] = 1
    return gc.Graph(adjacency=adj, features=feats), labels


def iter_flip_combos(n: int, m: int, budget: gc.PerturbationBudget):
    """Independent enumeration of admissible flip tuples (including the empty one)."""
    cells = [(i, j) for i in range(n) for j in range(m)]
    yield ()
    for size in range(1, min(budget.total, len(cells)) + 1):
        for combo in itertools.combinations(cells, size):
            counts = Counter(i for i, _ in combo)
            if max(counts.values()) <= budget.per_node:
                yield combo


def flipped(features: np.ndarray, combo) -> np.ndarray:
    out = features.copy()
    for i, j in combo:
        out[i, j] = 1 - out[i, j]
    return out


def brute_force_robust_nodes(model, graph, budget) -> np.ndarray:
    """Ground-truth robustness flags by replaying every admissible flip tuple."""
    norm_adj = gc.normalize_adjacency(graph)
    base = np.argmax(gc.forward(model, norm_adj, graph.features), axis=1)
    robust = np.ones(graph.num_nodes, dtype=bool)
    for combo in iter_flip_combos(graph.num_nodes, graph.num_features, budget):
        labels = np.argmax(gc.forward(model, norm_adj, flipped(graph.features, combo)), axis=1)
        robust &= labels == base
    return robust


def brute_force_form_minimum(elem, features, budget, mode="both") -> float:
    """Minimum of an element's lower-bound form over the flip budget, by enumeration."""
    sub = features[elem.var_nodes]
    n_sub, m = sub.shape
    best = np.inf
    for combo in iter_flip_combos(n_sub, m, budget):
        if mode == "add-only" and any(sub[i, j] != 0 for i, j in combo):
            continue
        if mode == "delete-only" and any(sub[i, j] != 1 for i, j in combo):
            continue
        value = elem.lower_coef[0] @ flipped(sub, combo).ravel().astype(float)
        best = min(best, value + elem.lower_const[0])
    return float(best)
