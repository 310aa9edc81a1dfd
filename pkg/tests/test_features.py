import numpy as np
import pytest
from matplotlib.colors import hsv_to_rgb

from scenemrf.features import (GRADIENT_BINS, NA_DIM, NODE_DIM, OA_DIM, VISUAL_DIM,
                               DegenerateSegment, FeatureParams, convexity, coplanarity,
                               edge_features, node_features, scatter_eigenvalues)
from scenemrf.graph import FeatureCache
from scenemrf.scene import CameraView, Scene
from scenemrf.synthgen import generate_scene, separable_spec

from helpers import horizontal_patch, make_scene, rotation_z, vertical_patch


def scene_of(pts, camera=(0.0, -3.0, 3.0)):
    sc = Scene(pts, np.full((len(pts), 3), 0.5), np.zeros(len(pts), np.int64), (CameraView(0, camera),))
    return sc.with_segments([np.arange(len(pts))])


def test_planar_points_zero_smallest_eigenvalue():
    sc = scene_of(horizontal_patch((0, 0, 1), (1, 0.5), 0.05))
    lam = scatter_eigenvalues(sc.segments[0], sc)
    assert lam[0] == pytest.approx(0, abs=1e-9) and np.all(np.diff(lam) >= 0)


def test_line_points_two_zero_eigenvalues():
    t = np.linspace(0, 1, 30)
    sc = scene_of(np.column_stack([t, 2 * t, -t]))
    lam = scatter_eigenvalues(sc.segments[0], sc)
    assert lam[0] == pytest.approx(0, abs=1e-9) and lam[1] == pytest.approx(0, abs=1e-9)


def test_uniform_cube_eigenvalues_analytic():
    pts = np.random.default_rng(0).uniform(size=(10000, 3))
    sc = scene_of(pts, camera=(5.0, 5.0, 5.0))
    assert np.allclose(scatter_eigenvalues(sc.segments[0], sc), 1 / 12, atol=0.01)


def test_two_points_degenerate():
    sc = scene_of(np.array([[0, 0, 0], [1, 0, 0.0]]))
    with pytest.raises(DegenerateSegment):
        scatter_eigenvalues(sc.segments[0], sc)


def test_red_segment_color_features():
    sc = make_scene([horizontal_patch((0, 0, 0.7))], colors=[(1.0, 0.0, 0.0)])
    v = node_features(sc.segments[0], sc).visual
    assert v[:10].max() >= 0.9 and v[0] >= 0.9
    assert v[14:17] == pytest.approx([0.0, 1.0, 1.0])


def test_horizontal_and_vertical_geometry():
    sc = make_scene([horizontal_patch((0, 0, 0.75)), vertical_patch((1.5, 0, 1.5))])
    g0 = node_features(sc.segments[0], sc).geometry
    g1 = node_features(sc.segments[1], sc).geometry
    assert g0[3] == pytest.approx(1.0, abs=1e-9)
    assert g1[3] == pytest.approx(0.0, abs=1e-9)
    assert g1[4] == pytest.approx(1.5, abs=1e-6)
    assert g1[5] == pytest.approx(0.4, abs=1e-9)
    assert g0[6] == pytest.approx(np.hypot(0.4, 0.4), abs=1e-9)


def test_node_vector_contract():
    scene, _ = generate_scene(separable_spec(seed=1))
    for s in scene.segments:
        f = node_features(s, scene)
        assert f.visual.shape == (VISUAL_DIM,) and f.geometry.shape == (8,)
        v = f.vector()
        assert v.shape == (NODE_DIM,) and np.all(np.isfinite(v))
        for lo, hi in ((0, 10), (10, 12), (12, 14), (17, 48)):
            assert v[lo:hi].sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(v[lo:hi] >= 0)
        assert f.geometry[:3].min() >= 0


def test_gradient_histogram_constant_color_is_uniform():
    sc = make_scene([horizontal_patch((0, 0, 0.5))])
    g = node_features(sc.segments[0], sc).visual[17:]
    assert np.allclose(g, 1 / GRADIENT_BINS)


def test_gradient_histogram_perpendicular_ramp():
    pts = horizontal_patch((0, 0, 0.5), (0.6, 0.3), 0.02)
    shade = (pts[:, 1] - pts[:, 1].min()) / np.ptp(pts[:, 1])
    col = np.column_stack([shade] * 3)
    sc = Scene(pts, col, np.zeros(len(pts), np.int64), (CameraView(0, [0, -2, 3]),))
    sc = sc.with_segments([np.arange(len(pts))])
    g = node_features(sc.segments[0], sc).visual[17:]
    assert g[GRADIENT_BINS // 2] > 0.95


def test_precomputed_visual_bypass():
    sc = make_scene([horizontal_patch((0, 0, 0.5))])
    pre = np.arange(VISUAL_DIM, dtype=float)
    f = node_features(sc.segments[0], sc, visual=pre)
    assert np.array_equal(f.visual, pre)
    with pytest.raises(ValueError):
        node_features(sc.segments[0], sc, visual=np.zeros(3))
    cache = FeatureCache(sc, precomputed_visual={0: pre})
    assert np.array_equal(cache.node_matrix[0, :VISUAL_DIM], pre)


def _pair(p, q, colors=None, camera=(0.0, -3.0, 3.0)):
    sc = make_scene([p, q], colors, camera)
    fc = FeatureCache(sc)
    return sc, fc.node_matrix[:, 14:17]


def test_identical_copy_edge_features():
    p = vertical_patch((0, 0, 1.0))
    sc, hsv = _pair(p, p.copy())
    ef = edge_features(sc.segments[0], sc.segments[1], sc, hsv[0], hsv[1])
    oa, na = ef.object_associative, ef.non_associative
    assert np.allclose(oa[:3], 0) and oa[3] == 100.0 and oa[4] == 1.0
    assert na[0] == 0 and na[1] == 0 and na[2] == pytest.approx(1.0) and na[3] == 0
    assert na[4] == 0 and na[5] == 0


def test_monitor_above_table_vertical_displacement():
    table = horizontal_patch((0, 0, 0.75), (0.8, 0.6))
    monitor = vertical_patch((0, 0.1, 1.05), (0.4, 0.3))
    sc, hsv = _pair(monitor, table)
    na = edge_features(sc.segments[0], sc.segments[1], sc, hsv[0], hsv[1]).non_associative
    assert na[1] == pytest.approx(0.3, abs=1e-9)
    assert na[0] == pytest.approx(0.1, abs=1e-9)


def test_coplanar_wall_patches():
    a = vertical_patch((0, 2, 1.0), (0.5, 0.5))
    b = vertical_patch((0.55, 2, 1.0), (0.5, 0.5))
    sc, hsv = _pair(a, b)
    oa = edge_features(sc.segments[0], sc.segments[1], sc, hsv[0], hsv[1]).object_associative
    assert oa[3] == 100.0 and oa[4] == 1.0


def test_coplanarity_formula():
    sc = make_scene([horizontal_patch((0, 0, 0)), horizontal_patch((1, 0, 0.05))], camera=(0, 0, 3))
    assert coplanarity(sc.segments[0], sc.segments[1]) == pytest.approx(20.0)
    sc = make_scene([horizontal_patch((0, 0, 0)), vertical_patch((1, 0, 0))], camera=(0, -3, 3))
    assert coplanarity(sc.segments[0], sc.segments[1]) == -1.0


def test_convexity_box_edge_vs_room_corner():
    s = 0.04
    top = horizontal_patch((0, 0.2, 0.8), (0.4, 0.4), s)
    front = vertical_patch((0, -0.02, 0.58), (0.4, 0.4), s)
    sc = make_scene([top, front], camera=(0, -3, 3))
    assert convexity(sc.segments[0], sc.segments[1], 0.03) == 1.0
    floor = horizontal_patch((0, -0.2, 0.0), (0.4, 0.4), s)
    wall = vertical_patch((0, 0.02, 0.22), (0.4, 0.4), s)
    sc = make_scene([floor, wall], camera=(0, -3, 3))
    assert convexity(sc.segments[0], sc.segments[1], 0.03) == 0.0
    assert convexity(sc.segments[0], sc.segments[1], 0.5) == 0.0


def test_in_front_indicator_with_dead_zone():
    near = vertical_patch((0, -1.0, 1.0))
    far = vertical_patch((0, 1.0, 1.0))
    sc, hsv = _pair(near, far)
    na = edge_features(sc.segments[0], sc.segments[1], sc, hsv[0], hsv[1]).non_associative
    assert na[5] == -1.0
    na = edge_features(sc.segments[1], sc.segments[0], sc, hsv[1], hsv[0]).non_associative
    assert na[5] == 1.0
    twin = vertical_patch((0.005, -1.0, 1.0))
    sc, hsv = _pair(near, twin)
    assert edge_features(sc.segments[0], sc.segments[1], sc, hsv[0], hsv[1]).non_associative[5] == 0.0


def test_edge_vector_lengths_and_swap_properties():
    scene, _ = generate_scene(separable_spec(seed=2))
    fc = FeatureCache(scene)
    fc.distances(1.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        i, j = rng.choice(scene.n_segments, 2, replace=False)
        oa, na = fc.pair(i, j)
        oa2, na2 = fc.pair(j, i)
        assert oa.shape == (OA_DIM,) and na.shape == (NA_DIM,)
        assert np.array_equal(oa, oa2)
        assert na[1] == -na2[1] and na[3] == -na2[3] and na[5] == -na2[5]
        assert na[0] == na2[0] and na[2] == na2[2] and na[4] == na2[4]
        assert na[5] in (-1.0, 0.0, 1.0)


def _all_features(scene, r=0.6):
    g = FeatureCache(scene).graph(r)
    return g.node_features, g.edges, g.oa_features, g.na_features


def test_horizontal_rotation_and_translation_invariance():
    scene, _ = generate_scene(separable_spec(seed=4))
    base = _all_features(scene)
    for theta, t in ((0.7, (0, 0, 0)), (2.1, (3.0, -1.5, 0)), (0.0, (10.0, 4.0, 0))):
        moved = _all_features(scene.transformed(rotation_z(theta), t))
        assert np.array_equal(base[1], moved[1])
        for a, b in ((base[0], moved[0]), (base[2], moved[2]), (base[3], moved[3])):
            assert np.max(np.abs(a - b)) <= 1e-6


def test_vertical_translation_shifts_only_height():
    scene, _ = generate_scene(separable_spec(seed=5))
    f0 = FeatureCache(scene).node_matrix
    f1 = FeatureCache(scene.transformed(translation=(0, 0, 0.5))).node_matrix
    diff = np.abs(f1 - f0)
    assert np.allclose(f1[:, 52] - f0[:, 52], 0.5)
    assert np.max(np.delete(diff, 52, axis=1)) <= 1e-6


def test_feature_params_change_convexity_threshold():
    top = horizontal_patch((0, 0.2, 0.8), (0.4, 0.4))
    front = vertical_patch((0, -0.02, 0.58), (0.4, 0.4))
    sc = make_scene([top, front])
    assert convexity(sc.segments[0], sc.segments[1], 0.05, FeatureParams(convex_distance=0.01)) == 0.0
