"""Node and edge features for segments.

Node vector (56 entries): visual appearance (48) followed by local shape and
geometry (8).  Edge vectors: the object-associative part (5) carries visual
similarity, coplanarity and convexity; the non-associative part (6) carries
relative placement.  Everything that depends on horizontal orientation is
built from rotation-invariant quantities so the features do not change when
the scene and its cameras rotate about the vertical axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.colors import rgb_to_hsv
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .scene import Scene, Segment
from .segmentation import min_segment_distance

HUE_BINS, SAT_BINS, VAL_BINS = 10, 2, 2
GRADIENT_BINS = 31
VISUAL_DIM = HUE_BINS + SAT_BINS + VAL_BINS + 3 + GRADIENT_BINS  # 48
GEOMETRY_DIM = 8
NODE_DIM = VISUAL_DIM + GEOMETRY_DIM
OA_DIM = 5
NA_DIM = 6

NODE_FEATURE_NAMES = (
    [f"hue_hist_{b}" for b in range(HUE_BINS)]
    + [f"sat_hist_{b}" for b in range(SAT_BINS)]
    + [f"val_hist_{b}" for b in range(VAL_BINS)]
    + ["mean_h", "mean_s", "mean_v"]
    + [f"grad_hist_{b}" for b in range(GRADIENT_BINS)]
    + ["linearness", "planarness", "scatter", "normal_z", "centroid_z",
       "vertical_extent", "horizontal_extent", "boundary_distance"]
)
OA_FEATURE_NAMES = ("dh", "ds", "dv", "coplanarity", "convexity")
NA_FEATURE_NAMES = ("horizontal_distance", "vertical_displacement", "normal_dot",
                    "vertical_angle_diff", "closest_distance", "in_front")


class DegenerateSegment(ValueError):
    pass


@dataclass(frozen=True)
class FeatureParams:
    coplanar_angle: float = 0.2      # alpha, radians
    convex_distance: float = 0.1     # tau, meters
    coplanarity_cap: float = 100.0
    front_dead_zone: float = 0.01    # meters
    gradient_neighbors: int = 10


@dataclass(frozen=True, eq=False)
class NodeFeatures:
    visual: np.ndarray
    geometry: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.visual, self.geometry])


@dataclass(frozen=True, eq=False)
class EdgeFeatures:
    object_associative: np.ndarray
    non_associative: np.ndarray


def scatter_eigenvalues(segment: Segment, scene: Scene) -> np.ndarray:
    """Eigenvalues of the member-point covariance, ascending and clamped at zero."""
    if segment.size < 3:
        raise DegenerateSegment(f"segment {segment.id} has {segment.size} points; need at least 3")
    pts = scene.positions[segment.point_indices]
    d = pts - pts.mean(axis=0)
    lam = np.linalg.eigvalsh(d.T @ d / len(pts))
    return np.maximum(lam, 0.0)


def _hist(x, bins):
    h, _ = np.histogram(x, bins=bins, range=(0.0, 1.0))
    return h / h.sum()


def _gradient_histogram(pts, intensity, normal, k):
    """Magnitude-weighted histogram of tangent-plane intensity-gradient orientations.

    Orientations are unsigned and measured from the segment's principal axis,
    with linear interpolation between neighbouring (circular) bins.
    """
    n = len(pts)
    uniform = np.full(GRADIENT_BINS, 1.0 / GRADIENT_BINS)
    if n < 3:
        return uniform
    d = pts - pts.mean(axis=0)
    _, vecs = np.linalg.eigh(d.T @ d)
    u = vecs[:, 2] - (vecs[:, 2] @ normal) * normal
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    k = min(k, n - 1)
    _, nbr = cKDTree(pts).query(pts, k=k + 1)
    nbr = nbr[:, 1:]
    rel = pts[nbr] - pts[:, None, :]
    D = np.stack([rel @ u, rel @ v], axis=-1)            # n x k x 2
    dI = intensity[nbr] - intensity[:, None]
    A = np.einsum("nki,nkj->nij", D, D)
    b = np.einsum("nki,nk->ni", D, dI)
    ridge = 1e-12 * (np.trace(A, axis1=1, axis2=2) + 1e-30)
    A = A + ridge[:, None, None] * np.eye(2)
    g = np.linalg.solve(A, b[..., None])[..., 0]
    mag = np.hypot(g[:, 0], g[:, 1])
    if not np.any(mag > 1e-12):
        return uniform
    theta = np.mod(np.arctan2(g[:, 1], g[:, 0]), np.pi)
    pos = theta / np.pi * GRADIENT_BINS - 0.5
    lo = np.floor(pos)
    frac = pos - lo
    lo = lo.astype(np.int64) % GRADIENT_BINS
    hist = np.zeros(GRADIENT_BINS)
    np.add.at(hist, lo, mag * (1.0 - frac))
    np.add.at(hist, (lo + 1) % GRADIENT_BINS, mag * frac)
    return hist / hist.sum()


def _horizontal_diameter(xy):
    if len(xy) < 2:
        return 0.0
    try:
        hull = xy[ConvexHull(xy).vertices] if len(xy) >= 3 else xy
    except QhullError:
        # collinear footprint: extent along the principal direction
        d = xy - xy.mean(axis=0)
        _, vecs = np.linalg.eigh(d.T @ d)
        proj = d @ vecs[:, 1]
        return float(proj.max() - proj.min())
    diff = hull[:, None, :] - hull[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def scene_boundary(scene: Scene) -> np.ndarray:
    """Closed polygon (M+1 x 2) of the scene's horizontal convex hull."""
    xy = scene.positions[:, :2]
    try:
        poly = xy[ConvexHull(xy).vertices]
    except (QhullError, ValueError):
        lo, hi = xy.min(axis=0), xy.max(axis=0)
        poly = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
    return np.vstack([poly, poly[:1]])


def boundary_distance(point_xy, boundary: np.ndarray) -> float:
    a, b = boundary[:-1], boundary[1:]
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", point_xy - a, ab) / np.maximum((ab ** 2).sum(1), 1e-300), 0, 1)
    closest = a + t[:, None] * ab
    return float(np.sqrt(((closest - point_xy) ** 2).sum(1)).min())


def node_features(segment: Segment, scene: Scene, params: FeatureParams = FeatureParams(),
                  boundary: np.ndarray | None = None, visual: np.ndarray | None = None) -> NodeFeatures:
    """Visual (48) and shape/geometry (8) features of one segment.

    ``visual`` lets externally computed appearance features replace the
    built-in color and gradient histograms.
    """
    lam = scatter_eigenvalues(segment, scene)
    idx = segment.point_indices
    pts = scene.positions[idx]
    if visual is None:
        rgb = scene.colors[idx]
        hsv = rgb_to_hsv(rgb)
        visual = np.concatenate([
            _hist(hsv[:, 0], HUE_BINS), _hist(hsv[:, 1], SAT_BINS), _hist(hsv[:, 2], VAL_BINS),
            hsv.mean(axis=0),
            _gradient_histogram(pts, rgb.mean(axis=1), segment.normal, params.gradient_neighbors),
        ])
    else:
        visual = np.asarray(visual, float)
        if visual.shape != (VISUAL_DIM,):
            raise ValueError(f"precomputed visual features must have {VISUAL_DIM} entries")
    if boundary is None:
        boundary = scene_boundary(scene)
    c = segment.centroid
    geometry = np.array([
        lam[2] - lam[1],
        lam[1] - lam[0],
        lam[0],
        segment.normal[2],
        c[2],
        float(pts[:, 2].max() - pts[:, 2].min()),
        _horizontal_diameter(pts[:, :2]),
        boundary_distance(c[:2], boundary),
    ])
    return NodeFeatures(visual, geometry)


def coplanarity(si: Segment, sj: Segment, params: FeatureParams = FeatureParams()) -> float:
    if si.normal @ sj.normal < np.cos(params.coplanar_angle):
        return -1.0
    delta = si.centroid - sj.centroid
    d = 0.5 * (abs(delta @ si.normal) + abs(delta @ sj.normal))
    return params.coplanarity_cap if d * params.coplanarity_cap <= 1.0 else 1.0 / d


def convexity(si: Segment, sj: Segment, closest: float,
              params: FeatureParams = FeatureParams()) -> float:
    if closest >= params.convex_distance:
        return 0.0
    dij = sj.centroid - si.centroid
    bends_out = si.normal @ dij <= 0 and sj.normal @ -dij <= 0
    flat = si.normal @ sj.normal >= np.cos(params.coplanar_angle)
    return 1.0 if (bends_out or flat) else 0.0


def edge_features(si: Segment, sj: Segment, scene: Scene, mean_hsv_i, mean_hsv_j,
                  closest: float | None = None,
                  params: FeatureParams = FeatureParams()) -> EdgeFeatures:
    """Features of the ordered pair (i, j); the non-associative part is direction dependent."""
    if closest is None:
        closest = min_segment_distance(si, sj, scene)
    ci, cj = si.centroid, sj.centroid
    oa = np.array([
        *np.abs(np.asarray(mean_hsv_i) - np.asarray(mean_hsv_j)),
        coplanarity(si, sj, params),
        convexity(si, sj, closest, params),
    ])
    dist_diff = np.linalg.norm(si.horizontal_ray) - np.linalg.norm(sj.horizontal_ray)
    front = 0.0 if abs(dist_diff) <= params.front_dead_zone else float(np.sign(dist_diff))
    na = np.array([
        np.hypot(ci[0] - cj[0], ci[1] - cj[1]),
        ci[2] - cj[2],
        si.normal @ sj.normal,
        np.arccos(np.clip(si.normal[2], -1, 1)) - np.arccos(np.clip(sj.normal[2], -1, 1)),
        closest,
        front,
    ])
    return EdgeFeatures(oa, na)
