import numpy as np
import pytest

from scenemrf.scene import CameraView, Scene
from scenemrf.segmentation import (SegmentationParams, build_graph, estimate_normals,
                                   min_segment_distance, over_segment, segment_distances,
                                   segment_scene)
from scenemrf.synthgen import generate_scene, stacked_spec

from helpers import horizontal_patch, make_scene, vertical_patch
from oracles import brute_min_distance


def raw_scene(pts, camera=(0.0, 0.0, 3.0)):
    return Scene(pts, np.full((len(pts), 3), 0.5), np.zeros(len(pts), np.int64),
                 (CameraView(0, camera),))


def test_plane_normals_point_up():
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(-1, 1, (100, 2)), np.zeros(100)])
    n = estimate_normals(raw_scene(pts), 15)
    assert np.all(n @ [0, 0, 1] > 0.99)
    assert np.allclose(np.linalg.norm(n, axis=1), 1)


def test_sphere_normals_match_radial_direction():
    rng = np.random.default_rng(1)
    v = rng.normal(size=(3000, 3))
    pts = v / np.linalg.norm(v, axis=1, keepdims=True)
    cam = np.array([0.0, 0.0, 5.0])
    n = estimate_normals(raw_scene(pts, cam), 15)
    facing = pts[:, 2] > 0.3
    err = np.degrees(np.arccos(np.clip(np.sum(n[facing] * pts[facing], axis=1), -1, 1)))
    assert err.mean() < 10.0


def test_box_face_normals_axis_aligned():
    s = 0.03
    u = np.arange(0, 1 + 1e-9, s)
    U, V = np.meshgrid(u, u, indexing="ij")
    U, V = U.ravel(), V.ravel()
    top = np.column_stack([U, V, np.ones_like(U)])
    front = np.column_stack([U, np.zeros_like(U), V])
    side = np.column_stack([np.zeros_like(U), U, V])
    pts = np.vstack([top, front, side])
    axes = np.repeat([[0, 0, 1], [0, -1, 0], [-1, 0, 0]], len(U), axis=0)
    interior = np.tile((U > 0.1) & (U < 0.9) & (V > 0.1) & (V < 0.9), 3)
    n = estimate_normals(raw_scene(pts, (-2.0, -2.0, 3.0)), 15)
    params = SegmentationParams()
    ang = np.arccos(np.clip(np.sum(n * axes, axis=1), -1, 1))
    assert np.all(ang[interior] <= params.normal_angle_threshold)


def test_k_exceeding_points_raises():
    with pytest.raises(ValueError):
        estimate_normals(raw_scene(np.zeros((5, 3)) + np.arange(5)[:, None]), 15)


def test_empty_cloud_raises():
    with pytest.raises(ValueError):
        over_segment(np.zeros((0, 3)), np.zeros((0, 3)))


def _segment(pts, camera=(0.0, -3.0, 3.0), params=SegmentationParams()):
    sc = raw_scene(pts, camera)
    return over_segment(pts, estimate_normals(sc, params.normal_estimation_k), params)


def test_two_parallel_planes_two_segments():
    pts = np.vstack([horizontal_patch((0, 0, 0), (1, 1), 0.03), horizontal_patch((0, 0, 1), (1, 1), 0.03)])
    res = _segment(pts)
    assert len(res.segments) == 2 and len(res.dropped) == 0


def test_single_plane_one_segment():
    res = _segment(horizontal_patch((0, 0, 0), (1, 1), 0.03))
    assert len(res.segments) == 1


def test_dihedral_two_segments_pure():
    s = 0.02
    u = np.arange(0, 0.6 + 1e-9, s)
    U, V = np.meshgrid(u, u[1:], indexing="ij")
    floor = np.column_stack([U.ravel(), V.ravel(), np.zeros(U.size)])
    wall = np.column_stack([U.ravel(), np.zeros(U.size), V.ravel()])
    pts = np.vstack([floor, wall])
    truth = np.repeat([0, 1], U.size)
    params = SegmentationParams(normal_angle_threshold=np.radians(20))
    res = _segment(pts, (0.3, 2.0, 2.0), params)
    assert len(res.segments) == 2
    for seg in res.segments:
        purity = np.bincount(truth[seg]).max() / len(seg)
        assert purity >= 0.95


def test_small_isolated_region_dropped():
    plane = horizontal_patch((0, 0, 0), (1, 1), 0.03)
    blob = horizontal_patch((5, 5, 0), (0.1, 0.1), 0.03)
    res = _segment(np.vstack([plane, blob]))
    assert len(res.segments) == 1
    assert sorted(res.dropped.tolist()) == list(range(len(plane), len(plane) + len(blob)))


def test_partition_and_determinism():
    spec = stacked_spec(seed=3, noise=0.0)
    scene, _ = generate_scene(spec)
    a, dropped = segment_scene(scene)
    b, _ = segment_scene(scene)
    seen = np.zeros(scene.n_points, int)
    for s in a.segments:
        seen[s.point_indices] += 1
    seen[dropped] += 1
    assert np.all(seen == 1)
    assert [s.point_indices.tolist() for s in a.segments] == [s.point_indices.tolist() for s in b.segments]


def test_min_distance_examples():
    sc = make_scene([horizontal_patch((0, 0, 0), (1, 1), 0.1), horizontal_patch((0, 0, 0.4), (1, 1), 0.1)])
    assert abs(min_segment_distance(sc.segments[0], sc.segments[1], sc) - 0.4) < 1e-12
    shared = make_scene([np.array([[0, 0, 0], [1, 0, 0.0]]), np.array([[0, 0, 0], [0, 1, 0.0]])])
    assert min_segment_distance(shared.segments[0], shared.segments[1], shared) == 0.0


def test_min_distance_matches_brute_force_and_is_symmetric():
    rng = np.random.default_rng(2)
    for _ in range(40):
        a = rng.normal(size=(rng.integers(1, 60), 3))
        b = rng.normal(size=(rng.integers(1, 60), 3)) + rng.normal(size=3)
        sc = make_scene([a, b])
        d = min_segment_distance(sc.segments[0], sc.segments[1], sc)
        assert d == pytest.approx(brute_min_distance(a, b), abs=1e-12)
        assert d == min_segment_distance(sc.segments[1], sc.segments[0], sc)


def test_context_range_edges():
    sc = make_scene([horizontal_patch((0, 0, 0)), horizontal_patch((0, 0, 0.4))])
    assert len(build_graph(sc, 0.3)) == 0
    assert build_graph(sc, 0.6).pairs() == {(0, 1)}


def test_strict_inequality_at_range():
    sc = make_scene([np.array([[0, 0, 0.0]] * 1), np.array([[0, 0, 0.5]])])
    assert len(build_graph(sc, 0.5)) == 0
    assert len(build_graph(sc, np.nextafter(0.5, 1))) == 1


def test_edge_sets_monotone_in_range():
    scene, _ = generate_scene(stacked_spec(seed=4))
    prev = set()
    for r in np.linspace(0.1, 1.0, 10):
        e = build_graph(scene, r)
        assert prev <= e.pairs()
        assert all(i < j for i, j in e.pairs()) and len(e.pairs()) == len(e)
        prev = e.pairs()


def test_distances_prefilter_keeps_close_pairs():
    scene, _ = generate_scene(stacked_spec(seed=5))
    d = segment_distances(scene, 0.5)
    for i in range(scene.n_segments):
        for j in range(i + 1, scene.n_segments):
            true = min_segment_distance(scene.segments[i], scene.segments[j], scene)
            if true < 0.5:
                assert d[(i, j)] == true


def test_bad_params_rejected():
    with pytest.raises(ValueError):
        SegmentationParams(normal_angle_threshold=2.0)
    with pytest.raises(ValueError):
        SegmentationParams(min_segment_points=0)
    with pytest.raises(ValueError):
        build_graph(make_scene([horizontal_patch((0, 0, 0))]), 0.0)
