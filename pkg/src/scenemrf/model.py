"""Discriminant function, edge-potential topologies and weight containers.

Weight layout (frozen, ``LAYOUT_VERSION``): node blocks ``w_n^k`` for
k = 0..K-1, then for each edge type in configuration order one block per
class pair (l, k) in lexicographic order.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .features import NA_DIM, NODE_DIM, OA_DIM
from .graph import SceneGraph
from .scene import LabelSpace, Labeling

LAYOUT_VERSION = 1


class ConfigurationError(ValueError):
    pass


class Scheme(str, Enum):
    NODE_ONLY = "node"
    ASSOC = "assoc"
    NONASSOC = "nonassoc"
    PARSIMON = "parsimon"


class EdgeType(str, Enum):
    OBJECT_ASSOCIATIVE = "object_associative"
    NON_ASSOCIATIVE = "non_associative"
    ASSOCIATIVE = "associative"


@dataclass(frozen=True)
class EdgeTypeGraph:
    type_id: EdgeType
    pairs: tuple[tuple[int, int], ...]
    features: str   # which edge feature block feeds it: "oa", "na" or "all"
    dim: int

    @property
    def l(self) -> np.ndarray:
        return np.array([p[0] for p in self.pairs], np.int64)

    @property
    def k(self) -> np.ndarray:
        return np.array([p[1] for p in self.pairs], np.int64)


@dataclass(frozen=True)
class ModelConfig:
    scheme: Scheme
    label_space: LabelSpace
    node_dim: int = NODE_DIM
    oa_dim: int = OA_DIM
    na_dim: int = NA_DIM
    context_range: float = 0.3
    C: float = 0.1
    edge_types: tuple[EdgeTypeGraph, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.C <= 0:
            raise ConfigurationError("C must be positive")
        if self.context_range <= 0:
            raise ConfigurationError("context_range must be positive")
        object.__setattr__(self, "edge_types", tuple(build_edge_type_graphs(self)))

    @property
    def K(self) -> int:
        return self.label_space.K

    def with_(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


def object_associative_pairs(space: LabelSpace) -> tuple[tuple[int, int], ...]:
    pairs = {(l, k) for members in space.object_parts.values() for l in members for k in members}
    return tuple(sorted(pairs))


def build_edge_type_graphs(config: ModelConfig) -> list[EdgeTypeGraph]:
    K = config.label_space.K
    full = tuple((l, k) for l in range(K) for k in range(K))
    both = config.oa_dim + config.na_dim
    if config.scheme is Scheme.NODE_ONLY:
        return []
    if config.scheme is Scheme.ASSOC:
        return [EdgeTypeGraph(EdgeType.ASSOCIATIVE, tuple((k, k) for k in range(K)), "all", both)]
    if config.scheme is Scheme.NONASSOC:
        return [EdgeTypeGraph(EdgeType.NON_ASSOCIATIVE, full, "all", both)]
    oa_pairs = object_associative_pairs(config.label_space)
    if not oa_pairs:
        raise ConfigurationError("the parsimonious scheme needs object part groupings in the label space")
    return [EdgeTypeGraph(EdgeType.OBJECT_ASSOCIATIVE, oa_pairs, "oa", config.oa_dim),
            EdgeTypeGraph(EdgeType.NON_ASSOCIATIVE, full, "na", config.na_dim)]


def parameter_count(config: ModelConfig) -> int:
    return config.K * config.node_dim + sum(len(t.pairs) * t.dim for t in config.edge_types)


@dataclass(eq=False)
class Weights:
    node: np.ndarray              # K x node_dim
    edge: list[np.ndarray]        # per edge type: |T_t| x dim_t

    @classmethod
    def zeros(cls, config: ModelConfig) -> "Weights":
        return cls(np.zeros((config.K, config.node_dim)),
                   [np.zeros((len(t.pairs), t.dim)) for t in config.edge_types])

    @classmethod
    def from_vector(cls, config: ModelConfig, vec) -> "Weights":
        vec = np.asarray(vec, float)
        if vec.shape != (parameter_count(config),):
            raise ConfigurationError(f"expected {parameter_count(config)} weights, got {vec.shape}")
        nn = config.K * config.node_dim
        node = vec[:nn].reshape(config.K, config.node_dim).copy()
        edge, pos = [], nn
        for t in config.edge_types:
            size = len(t.pairs) * t.dim
            edge.append(vec[pos:pos + size].reshape(len(t.pairs), t.dim).copy())
            pos += size
        return cls(node, edge)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.node.ravel()] + [e.ravel() for e in self.edge])

    def scaled(self, c: float) -> "Weights":
        return Weights(self.node * c, [e * c for e in self.edge])

    def __add__(self, other: "Weights") -> "Weights":
        return Weights(self.node + other.node, [a + b for a, b in zip(self.edge, other.edge)])


def layout_descriptor(config: ModelConfig) -> list[dict]:
    out = [{"block": "node", "classes": config.K, "dim": config.node_dim}]
    for t in config.edge_types:
        out.append({"block": "edge", "type": t.type_id.value, "features": t.features,
                    "dim": t.dim, "pairs": [list(p) for p in t.pairs]})
    return out


def _check(graph: SceneGraph, Y: np.ndarray, config: ModelConfig):
    if Y.shape != (graph.N, config.K):
        raise ConfigurationError(f"labeling shape {Y.shape} != ({graph.N}, {config.K})")
    if graph.node_features.shape[1] != config.node_dim:
        raise ConfigurationError("node feature dimension does not match the configuration")


def discriminant(graph: SceneGraph, labeling: Labeling, weights: Weights, config: ModelConfig) -> float:
    """Score of a labeling: node terms plus typed, class-pair specific edge terms."""
    Y = labeling.values
    _check(graph, Y, config)
    score = float(np.sum(Y * (graph.node_features @ weights.node.T)))
    if graph.n_edges:
        Yi, Yj = Y[graph.edges[:, 0]], Y[graph.edges[:, 1]]
        for t, W in zip(config.edge_types, weights.edge):
            active = Yi[:, t.l] * Yj[:, t.k]              # E x |T|
            score += float(np.sum(active * (graph.edge_block(t.features) @ W.T)))
    return score


def joint_feature_map(graph: SceneGraph, labeling: Labeling, config: ModelConfig) -> np.ndarray:
    """Psi(x, y) laid out like :meth:`Weights.to_vector`, so w . Psi = discriminant."""
    Y = labeling.values
    _check(graph, Y, config)
    blocks = [(Y.T @ graph.node_features).ravel()]
    Yi, Yj = Y[graph.edges[:, 0]], Y[graph.edges[:, 1]]
    for t in config.edge_types:
        active = Yi[:, t.l] * Yj[:, t.k]
        blocks.append((active.T @ graph.edge_block(t.features)).ravel())
    return np.concatenate(blocks)
