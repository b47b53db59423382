"""Attributed graphs, GCN node classifiers, and the concrete forward pass.

A classifier applies, per layer, graph convolution with the normalized
adjacency, an affine map, and ReLU; the final layer stays linear so output
scores keep their sign and margins between labels are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError


@dataclass(frozen=True)
class Graph:
    """Undirected graph with binary node features.

    ``adjacency`` is a symmetric 0/1 matrix (self-loops allowed),
    ``features`` a 0/1 matrix with one row per node.
    """

    adjacency: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int64)
        feats = np.asarray(self.features, dtype=np.int64)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DimensionError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] < 1:
            raise DataError("graph must have at least one node")
        if feats.ndim != 2 or feats.shape[0] != adj.shape[0]:
            raise DimensionError(
                f"features must have one row per node, got {feats.shape} for {adj.shape[0]} nodes"
            )
        if not np.isin(adj, (0, 1)).all():
            raise DataError("adjacency entries must be 0 or 1")
        if (adj != adj.T).any():
            raise DataError("adjacency must be symmetric")
        if not np.isin(feats, (0, 1)).all():
            raise DataError("feature entries must be 0 or 1")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "features", feats)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class GcnLayer:
    weight: np.ndarray  # (m_in, m_out)
    bias: np.ndarray  # (m_out,)

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise DimensionError(f"layer weight must be 2-D, got shape {w.shape}")
        if b.ndim != 1 or b.shape[0] != w.shape[1]:
            raise DimensionError(
                f"layer bias must have length {w.shape[1]}, got shape {b.shape}"
            )
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True)
class GcnModel:
    """Ordered GCN layers; consecutive layer widths must chain."""

    layers: tuple[GcnLayer, ...]

    def __post_init__(self):
        layers = tuple(
            layer if isinstance(layer, GcnLayer) else GcnLayer(*layer)
            for layer in self.layers
        )
        if not layers:
            raise DataError("model must have at least one layer")
        for l in range(len(layers) - 1):
            out_width = layers[l].weight.shape[1]
            in_width = layers[l + 1].weight.shape[0]
            if out_width != in_width:
                raise DimensionError(
                    f"layer {l} outputs width {out_width} but layer {l + 1} expects {in_width}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def input_width(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def num_labels(self) -> int:
        return self.layers[-1].weight.shape[1]


@dataclass(frozen=True)
class Prediction:
    scores: np.ndarray  # (n, |C|)
    labels: np.ndarray  # (n,), row-wise argmax, lowest index on ties


def normalize_adjacency(graph: Graph) -> np.ndarray:
    """D^{-1/2} (A + I) D^{-1/2}; the +I self-loop keeps all degrees positive."""
    a_hat = graph.adjacency.astype(np.float64) + np.eye(graph.num_nodes)
    inv_sqrt_deg = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]


def forward(model: GcnModel, norm_adj: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Score matrix of the GCN: per layer Ã·H, then H·W + b, then ReLU (skipped on the last layer)."""
    h = np.asarray(features, dtype=np.float64)
    n = norm_adj.shape[0]
    if norm_adj.shape != (n, n) or h.shape[0] != n:
        raise DimensionError(
            f"adjacency {norm_adj.shape} incompatible with features {h.shape}"
        )
    if h.shape[1] != model.input_width:
        raise DimensionError(
            f"model expects {model.input_width} input features, got {h.shape[1]}"
        )
    for l, layer in enumerate(model.layers):
        h = norm_adj @ h
        h = h @ layer.weight + layer.bias
        if l < model.num_layers - 1:
            h = np.maximum(h, 0.0)
    return h


def predict(model: GcnModel, graph: Graph) -> Prediction:
    scores = forward(model, normalize_adjacency(graph), graph.features)
    return Prediction(scores=scores, labels=np.argmax(scores, axis=1))
