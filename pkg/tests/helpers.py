"""Small hand-built scenes for unit tests."""
import numpy as np

from scenemrf.scene import CameraView, Scene


def grid(a, b, spacing):
    us = np.arange(-a / 2, a / 2 + 1e-9, spacing)
    vs = np.arange(-b / 2, b / 2 + 1e-9, spacing)
    U, V = np.meshgrid(us - us.mean(), vs - vs.mean(), indexing="ij")
    return U.ravel(), V.ravel()


def horizontal_patch(center, size=(0.4, 0.4), spacing=0.04):
    u, v = grid(*size, spacing)
    return np.column_stack([u, v, np.zeros_like(u)]) + np.asarray(center, float)


def vertical_patch(center, size=(0.4, 0.4), spacing=0.04, facing="y"):
    u, v = grid(*size, spacing)
    zero = np.zeros_like(u)
    pts = np.column_stack([u, zero, v]) if facing == "y" else np.column_stack([zero, u, v])
    return pts + np.asarray(center, float)


def make_scene(patches, colors=None, camera=(0.0, -3.0, 2.0), extra_views=()):
    """One segment per patch; every point attributed to view 0 unless more views are given."""
    colors = colors or [(0.5, 0.5, 0.5)] * len(patches)
    pos = np.vstack(patches)
    col = np.vstack([np.tile(np.asarray(c, float), (len(p), 1)) for p, c in zip(patches, colors)])
    views = (CameraView(0, camera),) + tuple(CameraView(i + 1, o) for i, o in enumerate(extra_views))
    scene = Scene(pos, col, np.zeros(len(pos), np.int64), views)
    idx, start = [], 0
    for p in patches:
        idx.append(np.arange(start, start + len(p)))
        start += len(p)
    return scene.with_segments(idx)


def rotation_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_graph(rng, N=5, p_edge=0.6, node_dim=56, oa_dim=5, na_dim=6):
    """SceneGraph with random feature values on a random edge set (geometry unused)."""
    from scenemrf.graph import SceneGraph
    from scenemrf.segmentation import EdgeSet
    edges = np.array([(i, j) for i in range(N) for j in range(i + 1, N) if rng.random() < p_edge],
                     np.int64).reshape(-1, 2)
    scene = make_scene([np.array([[float(i), 0.0, 0.0]]) for i in range(N)])
    return SceneGraph(scene, EdgeSet(edges, 1.0, np.zeros(len(edges))),
                      rng.normal(size=(N, node_dim)), rng.normal(size=(len(edges), oa_dim)),
                      rng.normal(size=(len(edges), na_dim)))
