"""Scene graphs: segments as vertices, proximity edges, cached feature matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import (NA_DIM, NODE_DIM, OA_DIM, FeatureParams, edge_features,
                       node_features, scene_boundary)
from .scene import Scene
from .segmentation import EdgeSet, build_graph, segment_distances


@dataclass(frozen=True, eq=False)
class SceneGraph:
    scene: Scene
    edge_set: EdgeSet
    node_features: np.ndarray   # N x NODE_DIM
    oa_features: np.ndarray     # E x OA_DIM
    na_features: np.ndarray     # E x NA_DIM

    @property
    def N(self) -> int:
        return len(self.node_features)

    @property
    def edges(self) -> np.ndarray:
        return self.edge_set.edges

    @property
    def n_edges(self) -> int:
        return len(self.edge_set)

    @property
    def context_range(self) -> float:
        return self.edge_set.context_range

    def edge_block(self, source: str) -> np.ndarray:
        if source == "oa":
            return self.oa_features
        if source == "na":
            return self.na_features
        return np.hstack([self.oa_features, self.na_features])

    def check_finite(self):
        for name, a in (("node", self.node_features), ("oa", self.oa_features), ("na", self.na_features)):
            if not np.all(np.isfinite(a)):
                rows = np.nonzero(~np.all(np.isfinite(a), axis=1))[0]
                raise FloatingPointError(f"non-finite {name} features at rows {rows.tolist()}")


class FeatureCache:
    """Per-scene cache of node features, closest-point distances and pair features.

    Lets a context-range sweep rebuild graphs without recomputing anything.
    """

    def __init__(self, scene: Scene, params: FeatureParams = FeatureParams(),
                 precomputed_visual: dict[int, np.ndarray] | None = None):
        self.scene = scene
        self.params = params
        boundary = scene_boundary(scene) if scene.n_points else None
        pre = precomputed_visual or {}
        rows = [node_features(s, scene, params, boundary, pre.get(s.id)).vector()
                for s in scene.segments]
        self.node_matrix = np.array(rows).reshape(-1, NODE_DIM)
        self._distances: dict[tuple[int, int], float] = {}
        self._range = 0.0
        self._pair_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def distances(self, max_range: float) -> dict[tuple[int, int], float]:
        if max_range > self._range:
            self._distances = segment_distances(self.scene, max_range)
            self._range = max_range
        return self._distances

    def pair(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        key = (i, j)
        if key not in self._pair_cache:
            segs = self.scene.segments
            hsv = self.node_matrix[:, 14:17]
            closest = self._distances.get((min(i, j), max(i, j)))
            ef = edge_features(segs[i], segs[j], self.scene, hsv[i], hsv[j], closest, self.params)
            self._pair_cache[key] = (ef.object_associative, ef.non_associative)
        return self._pair_cache[key]

    def graph(self, context_range: float) -> SceneGraph:
        edge_set = build_graph(self.scene, context_range, self.distances(context_range))
        oa = np.zeros((len(edge_set), OA_DIM))
        na = np.zeros((len(edge_set), NA_DIM))
        for e, (i, j) in enumerate(edge_set.edges):
            oa[e], na[e] = self.pair(int(i), int(j))
        return SceneGraph(self.scene, edge_set, self.node_matrix, oa, na)


def build_scene_graph(scene: Scene, context_range: float = 0.3,
                      params: FeatureParams = FeatureParams(),
                      precomputed_visual: dict[int, np.ndarray] | None = None) -> SceneGraph:
    return FeatureCache(scene, params, precomputed_visual).graph(context_range)
