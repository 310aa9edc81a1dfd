"""Over-segmentation of a point cloud and the proximity graph over segments."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .scene import Scene, Segment


@dataclass(frozen=True)
class SegmentationParams:
    normal_angle_threshold: float = 0.35   # radians
    continuity_distance: float = 0.05      # meters
    min_segment_points: int = 50
    normal_estimation_k: int = 15

    def __post_init__(self):
        if not (0 < self.normal_angle_threshold < np.pi / 2):
            raise ValueError("normal_angle_threshold must lie in (0, pi/2)")
        if self.continuity_distance <= 0 or self.min_segment_points <= 0 or self.normal_estimation_k <= 0:
            raise ValueError("segmentation parameters must be positive")


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    segments: list[np.ndarray]
    dropped: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))


@dataclass(frozen=True, eq=False)
class EdgeSet:
    """Unordered segment pairs stored as rows (i, j) with i < j, sorted."""

    edges: np.ndarray
    context_range: float
    distances: np.ndarray

    def __len__(self):
        return len(self.edges)

    def pairs(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}


def estimate_normals(scene: Scene, k: int = 15) -> np.ndarray:
    """Per-point PCA normals over k nearest neighbours, oriented toward the capturing camera."""
    pts = scene.positions
    if k > len(pts):
        raise ValueError(f"k={k} exceeds the number of points ({len(pts)})")
    _, nbr = cKDTree(pts).query(pts, k=k)
    nbr = nbr.reshape(len(pts), -1)
    local = pts[nbr]
    d = local - local.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", d, d)
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    origins = np.stack([scene.view_map[v].origin for v in scene.view_ids]) if len(pts) else pts
    flip = np.einsum("ni,ni->n", normals, origins - pts) < 0
    normals[flip] *= -1
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def over_segment(positions: np.ndarray, normals: np.ndarray,
                 params: SegmentationParams = SegmentationParams()) -> SegmentationResult:
    """Region growing over the k-NN graph.

    A neighbour joins a region when its normal is within the angle threshold
    of both the point that reached it and the region's seed, and it lies
    within the continuity distance.  Seeds are taken in ascending point
    order.  Regions below ``min_segment_points`` are merged into the adjacent
    region they touch most, or dropped when isolated.
    """
    positions = np.asarray(positions, float)
    normals = np.asarray(normals, float)
    n = len(positions)
    if n == 0:
        raise ValueError("cannot segment an empty point cloud")
    k = min(params.normal_estimation_k, n)
    dist, nbr = cKDTree(positions).query(positions, k=k)
    dist, nbr = dist.reshape(n, -1), nbr.reshape(n, -1)
    cos_t = np.cos(params.normal_angle_threshold)
    label = -np.ones(n, np.int64)
    n_regions = 0
    for seed in range(n):
        if label[seed] >= 0:
            continue
        label[seed] = n_regions
        ref = normals[seed]
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            for d, q in zip(dist[p], nbr[p]):
                if label[q] >= 0 or d > params.continuity_distance:
                    continue
                if normals[p] @ normals[q] >= cos_t and ref @ normals[q] >= cos_t:
                    label[q] = n_regions
                    queue.append(q)
        n_regions += 1

    sizes = np.bincount(label, minlength=n_regions)
    small = sizes < params.min_segment_points
    if small.any():
        # adjacency counts between regions along continuity-respecting k-NN links
        src = np.repeat(np.arange(n), nbr.shape[1])
        dst = nbr.reshape(-1)
        ok = dist.reshape(-1) <= params.continuity_distance
        a, b = label[src[ok]], label[dst[ok]]
        cross = a != b
        a, b = a[cross], b[cross]
        for r in np.nonzero(small)[0]:
            # grow small regions into their most-connected large neighbour
            touching = b[(a == r) & ~small[b]]
            if len(touching):
                vals, cnt = np.unique(touching, return_counts=True)
                label[label == r] = vals[np.argmax(cnt)]
        final_small = np.bincount(label, minlength=n_regions) < params.min_segment_points
        dropped_mask = final_small[label]
        label[dropped_mask] = -1
    else:
        dropped_mask = np.zeros(n, bool)
    kept = [np.nonzero(label == r)[0] for r in range(n_regions)]
    kept = [idx for idx in kept if len(idx)]
    return SegmentationResult(kept, np.nonzero(dropped_mask)[0])


def segment_scene(scene: Scene, params: SegmentationParams = SegmentationParams()):
    """Estimate normals, over-segment, and return (scene with segments, dropped point ids)."""
    normals = estimate_normals(scene, params.normal_estimation_k)
    result = over_segment(scene.positions, normals, params)
    return scene.with_segments(result.segments), result.dropped


def min_segment_distance(a: Segment, b: Segment, scene: Scene) -> float:
    """Exact minimum Euclidean distance between member points of two segments."""
    pa = scene.positions[a.point_indices]
    pb = scene.positions[b.point_indices]
    if len(pa) < len(pb):
        pa, pb = pb, pa
    d, j = cKDTree(pa).query(pb, k=1)
    i = int(np.argmin(d))
    return float(np.sqrt(np.sum((pb[i] - pa[j[i]]) ** 2)))


def segment_distances(scene: Scene, max_range: float) -> dict[tuple[int, int], float]:
    """Closest-point distances for every segment pair possibly closer than ``max_range``.

    Pairs whose bounding boxes are already at least ``max_range`` apart are omitted.
    """
    segs = scene.segments
    lo = np.array([scene.positions[s.point_indices].min(axis=0) for s in segs]).reshape(-1, 3)
    hi = np.array([scene.positions[s.point_indices].max(axis=0) for s in segs]).reshape(-1, 3)
    out = {}
    for i in range(len(segs)):
        gap = np.maximum(0.0, np.maximum(lo[i + 1:] - hi[i], lo[i] - hi[i + 1:]))
        near = np.nonzero(np.sqrt((gap ** 2).sum(axis=1)) < max_range)[0] + i + 1
        for j in near:
            out[(i, int(j))] = min_segment_distance(segs[i], segs[j], scene)
    return out


def build_graph(scene: Scene, context_range: float = 0.3,
                distances: dict[tuple[int, int], float] | None = None) -> EdgeSet:
    """Edge (i, j) iff some pair of member points is strictly closer than ``context_range``."""
    if context_range <= 0:
        raise ValueError("context_range must be positive")
    if distances is None:
        distances = segment_distances(scene, context_range)
    pairs = sorted((ij, d) for ij, d in distances.items() if d < context_range)
    edges = np.array([ij for ij, _ in pairs], np.int64).reshape(-1, 2)
    return EdgeSet(edges, float(context_range), np.array([d for _, d in pairs], float))
