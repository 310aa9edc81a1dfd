import numpy as np
import pytest
from hypothesis import given, strategies as st

from scenemrf.scene import (CameraView, LabelMode, LabelSpace, Labeling, Scene, Segment,
                            StructureError, hamming_loss, validate_labeling)

from helpers import horizontal_patch, make_scene, vertical_patch

EX = LabelSpace(("a", "b"))
ML = LabelSpace(("a", "b"), mode=LabelMode.MULTILABEL)


def test_exclusive_one_active_ok():
    assert validate_labeling(Labeling([[1, 0]]), EX) == []


def test_exclusive_two_active_violation():
    assert validate_labeling(Labeling([[1, 1]]), EX) == [0]


def test_multilabel_two_active_ok():
    assert validate_labeling(Labeling([[1, 1]]), ML) == []


def test_dimension_mismatch_is_structural():
    with pytest.raises(StructureError):
        validate_labeling(Labeling([[1, 0, 0]]), EX)
    with pytest.raises(StructureError):
        validate_labeling(Labeling([[1, 0]]), EX, n_segments=2)


@given(st.integers(1, 5), st.integers(1, 4), st.data())
def test_validate_labeling_total(N, K, data):
    space = LabelSpace(tuple(f"c{k}" for k in range(K)), mode=data.draw(st.sampled_from(list(LabelMode))))
    bits = data.draw(st.lists(st.integers(0, 1), min_size=N * K, max_size=N * K))
    Y = np.array(bits, float).reshape(N, K)
    bad = validate_labeling(Labeling(Y), space)
    if space.mode is LabelMode.EXCLUSIVE:
        assert bad == np.nonzero(Y.sum(axis=1) != 1)[0].tolist()
    else:
        assert bad == []


def test_hamming_examples():
    a = Labeling.from_classes([0, 1, 2], 3)
    assert hamming_loss(a, a) == 0
    assert hamming_loss(a, Labeling.from_classes([0, 2, 2], 3)) == 1
    t = Labeling([[1, 0, 1], [0, 0, 0]])
    p = Labeling([[1, 1, 1], [0, 0, 0]])
    assert hamming_loss(t, p, mode=LabelMode.MULTILABEL) == 1


def test_hamming_shape_mismatch():
    with pytest.raises(StructureError):
        hamming_loss(Labeling.from_classes([0], 2), Labeling.from_classes([0, 1], 2))


def test_hamming_ignores_unlabeled_truth_rows():
    t = Labeling.from_classes([0, -1], 2)
    assert hamming_loss(t, Labeling.from_classes([0, 1], 2)) == 0


@given(st.integers(1, 6), st.integers(1, 4), st.sampled_from(list(LabelMode)), st.data())
def test_hamming_metric_properties(N, K, mode, data):
    def draw():
        if mode is LabelMode.EXCLUSIVE:
            return Labeling.from_classes(data.draw(st.lists(st.integers(0, K - 1), min_size=N, max_size=N)), K)
        bits = data.draw(st.lists(st.integers(0, 1), min_size=N * K, max_size=N * K))
        return Labeling(np.array(bits, float).reshape(N, K))
    a, b, c = draw(), draw(), draw()
    h = lambda x, y: hamming_loss(x, y, mode=mode)
    assert h(a, a) == 0
    assert h(a, b) == h(b, a)
    assert h(a, c) <= h(a, b) + h(b, c)


def test_segment_geometry_invariants():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(50, 3)) * [1.0, 1.0, 0.01] + [0, 0, 1]
    view = CameraView(0, [0.3, -2.0, 3.0])
    s = Segment.from_points(0, np.arange(50), pts, np.zeros(50, np.int64), {0: view})
    assert np.allclose(s.centroid, pts.mean(axis=0), atol=1e-9)
    assert abs(np.linalg.norm(s.normal) - 1) < 1e-9
    assert s.capture_ray @ s.normal < 0
    assert np.allclose(s.horizontal_ray, s.capture_ray[:2])


def test_segment_normal_flips_toward_camera():
    pts = horizontal_patch((0, 0, 0.5))
    for cam in ([0, 0, 3.0], [0, 0, -3.0]):
        s = Segment.from_points(0, np.arange(len(pts)), pts, np.zeros(len(pts), np.int64),
                                {0: CameraView(0, cam)})
        assert np.sign(s.normal[2]) == np.sign(cam[2])


def test_single_point_segment_uses_negated_ray():
    pts = np.array([[1.0, 2.0, 0.5]])
    view = CameraView(0, [0.0, 0.0, 2.0])
    s = Segment.from_points(0, [0], pts, np.zeros(1, np.int64), {0: view})
    ray = pts[0] - view.origin
    assert np.allclose(s.normal, -ray / np.linalg.norm(ray))


def test_capture_view_is_majority():
    pts = horizontal_patch((0, 0, 0.5))
    vids = np.zeros(len(pts), np.int64)
    vids[: len(pts) // 3] = 1
    views = {0: CameraView(0, [0, -3, 2]), 1: CameraView(1, [0, 3, 2])}
    s = Segment.from_points(0, np.arange(len(pts)), pts, vids, views)
    assert s.view_id == 0


def test_scene_validation():
    v = (CameraView(0, [0, 0, 2]),)
    with pytest.raises(StructureError):
        Scene([[np.nan, 0, 0]], [[0, 0, 0]], [0], v)
    with pytest.raises(StructureError):
        Scene([[0, 0, 0]], [[1.5, 0, 0]], [0], v)
    with pytest.raises(StructureError):
        Scene([[0, 0, 0]], [[0, 0, 0]], [3], v)
    with pytest.raises(StructureError):
        Scene([[0, 0, 0]], [[0, 0, 0]], [0], v + (CameraView(0, [1, 1, 1]),))
    sc = Scene(np.zeros((4, 3)) + np.arange(4)[:, None], np.zeros((4, 3)), np.zeros(4), v)
    with pytest.raises(StructureError):
        sc.with_segments([[0, 1], [1, 2]])
    with pytest.raises(StructureError):
        sc.with_segments([[0, 7]])


def test_scene_is_immutable():
    sc = make_scene([horizontal_patch((0, 0, 1))])
    with pytest.raises(ValueError):
        sc.positions[0, 0] = 5.0
    assert np.all(sc.gravity_up == [0, 0, 1])
    p = sc.point(0)
    assert p.view_id == 0 and p.position.shape == (3,)


def test_transformed_moves_cameras():
    sc = make_scene([vertical_patch((0, 1, 1))])
    moved = sc.transformed(translation=[1.0, 2.0, 0.0])
    assert np.allclose(moved.views[0].origin, sc.views[0].origin + [1, 2, 0])
    assert np.allclose(moved.segments[0].capture_ray, sc.segments[0].capture_ray)


def test_label_space_rules():
    with pytest.raises(StructureError):
        LabelSpace(("a", "a"))
    with pytest.raises(StructureError):
        LabelSpace(("a", "unlabeled"))
    with pytest.raises(StructureError):
        LabelSpace(("a", "b"), {"obj": {0, 5}})
    sp = LabelSpace.from_names(["x", "y", "z"], {"o": ["x", "z"]})
    assert sp.K == 3 and sp.object_parts["o"] == frozenset({0, 2})
    assert sp.index("y") == 1
    with pytest.raises(KeyError):
        sp.index("w")


def test_labeling_classes_roundtrip():
    L = Labeling.from_classes([2, -1, 0], 3)
    assert L.classes().tolist() == [2, -1, 0]
    assert L.unlabeled().tolist() == [False, True, False]
    assert Labeling([[0.5, 0.5]]).classes().tolist() == [-1]
    assert not Labeling([[0.5, 0.5]]).is_integral
