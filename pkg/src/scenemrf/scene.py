"""Core data types: points, camera views, segments, scenes, label spaces, labelings.

Point data is stored column-wise as numpy arrays on :class:`Scene` rather than
as a list of point objects; :meth:`Scene.point` gives the per-point view.
All arrays handed to these types are copied and frozen.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

GRAVITY_UP = np.array([0.0, 0.0, 1.0])
UNLABELED = "unlabeled"


class StructureError(ValueError):
    """Array shapes or indices are inconsistent with the objects they describe."""


class LabelingViolation(ValueError):
    """A labeling breaks the label-space mode constraint."""

    def __init__(self, segments):
        self.segments = list(segments)
        super().__init__(f"labeling constraint violated at segments {self.segments}")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class Point(NamedTuple):
    position: np.ndarray
    color: np.ndarray
    view_id: int


@dataclass(frozen=True)
class CameraView:
    view_id: int
    origin: np.ndarray

    def __post_init__(self):
        origin = _frozen(self.origin)
        if origin.shape != (3,) or not np.all(np.isfinite(origin)):
            raise StructureError(f"camera origin must be a finite 3-vector, got {self.origin!r}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "view_id", int(self.view_id))


@dataclass(frozen=True, eq=False)
class Segment:
    """One atomic region of the point cloud.

    Use :meth:`from_points` to build one; it derives centroid, normal and
    capture ray from the member points.
    """

    id: int
    point_indices: np.ndarray
    centroid: np.ndarray
    normal: np.ndarray
    capture_ray: np.ndarray
    view_id: int

    @property
    def horizontal_ray(self) -> np.ndarray:
        return self.capture_ray[:2]

    @property
    def size(self) -> int:
        return len(self.point_indices)

    @classmethod
    def from_points(cls, seg_id: int, point_indices, positions: np.ndarray,
                    view_ids: np.ndarray, views: dict[int, CameraView]) -> "Segment":
        idx = np.asarray(point_indices, dtype=np.int64)
        if idx.size == 0:
            raise StructureError(f"segment {seg_id} has no points")
        if idx.min() < 0 or idx.max() >= len(positions):
            raise StructureError(f"segment {seg_id} has point indices out of range")
        pts = positions[idx]
        centroid = pts.mean(axis=0)

        # capturing view: majority vote, smallest id on ties
        vids, counts = np.unique(view_ids[idx], return_counts=True)
        view_id = int(vids[np.argmax(counts)])
        if view_id not in views:
            raise StructureError(f"segment {seg_id} references unknown view {view_id}")
        ray = centroid - views[view_id].origin

        normal = None
        if len(idx) > 1:
            d = pts - centroid
            scatter = d.T @ d / len(idx)
            if np.any(scatter > 0):
                _, vecs = np.linalg.eigh(scatter)
                normal = vecs[:, 0]
        if normal is None:
            # single point (or coincident points): face the camera
            rn = np.linalg.norm(ray)
            normal = -ray / rn if rn > 0 else GRAVITY_UP.copy()
        normal = normal / np.linalg.norm(normal)
        if ray @ normal > 0:
            normal = -normal
        return cls(int(seg_id), _frozen(idx, np.int64), _frozen(centroid),
                   _frozen(normal), _frozen(ray), view_id)


@dataclass(frozen=True, eq=False)
class Scene:
    """A colored point cloud with camera views and (optionally) a segmentation."""

    positions: np.ndarray
    colors: np.ndarray
    view_ids: np.ndarray
    views: tuple[CameraView, ...]
    segments: tuple[Segment, ...] = ()
    generator: dict | None = None

    def __post_init__(self):
        pos = _frozen(self.positions).reshape(-1, 3)
        col = _frozen(self.colors).reshape(-1, 3)
        vid = _frozen(self.view_ids, np.int64).reshape(-1)
        if not (len(pos) == len(col) == len(vid)):
            raise StructureError("positions, colors and view_ids must have equal length")
        if not np.all(np.isfinite(pos)):
            raise StructureError("point positions must be finite")
        if col.size and (col.min() < 0 or col.max() > 1):
            raise StructureError("color channels must lie in [0, 1]")
        views = tuple(self.views)
        ids = [v.view_id for v in views]
        if len(set(ids)) != len(ids):
            raise StructureError("view ids must be unique")
        unknown = set(np.unique(vid).tolist()) - set(ids)
        if unknown:
            raise StructureError(f"points reference unknown views {sorted(unknown)}")
        segs = tuple(self.segments)
        seen = np.zeros(len(pos), dtype=bool)
        for s in segs:
            if s.point_indices.min() < 0 or s.point_indices.max() >= len(pos):
                raise StructureError(f"segment {s.id} has point indices out of range")
            if seen[s.point_indices].any():
                raise StructureError(f"segment {s.id} overlaps another segment")
            seen[s.point_indices] = True
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        object.__setattr__(self, "view_ids", vid)
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "segments", segs)

    @property
    def n_points(self) -> int:
        return len(self.positions)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def gravity_up(self) -> np.ndarray:
        return GRAVITY_UP

    @property
    def view_map(self) -> dict[int, CameraView]:
        return {v.view_id: v for v in self.views}

    def point(self, i: int) -> Point:
        return Point(self.positions[i], self.colors[i], int(self.view_ids[i]))

    def with_segments(self, index_lists: Sequence[Sequence[int]]) -> "Scene":
        views = self.view_map
        segs = tuple(Segment.from_points(i, idx, self.positions, self.view_ids, views)
                     for i, idx in enumerate(index_lists))
        return Scene(self.positions, self.colors, self.view_ids, self.views, segs, self.generator)

    def transformed(self, rotation: np.ndarray | None = None, translation=None) -> "Scene":
        """Apply a rigid motion to points, cameras and segments alike."""
        R = np.eye(3) if rotation is None else np.asarray(rotation, float)
        t = np.zeros(3) if translation is None else np.asarray(translation, float)
        pos = self.positions @ R.T + t
        views = tuple(CameraView(v.view_id, R @ v.origin + t) for v in self.views)
        moved = Scene(pos, self.colors, self.view_ids, views, (), self.generator)
        return moved.with_segments([s.point_indices for s in self.segments])


class LabelMode(str, Enum):
    EXCLUSIVE = "exclusive"
    MULTILABEL = "multilabel"


@dataclass(frozen=True)
class LabelSpace:
    class_names: tuple[str, ...]
    object_parts: dict[str, frozenset[int]] = field(default_factory=dict)
    mode: LabelMode = LabelMode.EXCLUSIVE

    def __post_init__(self):
        names = tuple(self.class_names)
        if len(set(names)) != len(names):
            raise StructureError("class names must be unique")
        if UNLABELED in names:
            raise StructureError(f"{UNLABELED!r} is reserved for abstentions")
        parts = {}
        for obj, members in dict(self.object_parts).items():
            members = frozenset(int(m) for m in members)
            bad = [m for m in members if not 0 <= m < len(names)]
            if bad:
                raise StructureError(f"object {obj!r} references invalid classes {bad}")
            parts[obj] = members
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "object_parts", parts)
        object.__setattr__(self, "mode", LabelMode(self.mode))

    @property
    def K(self) -> int:
        return len(self.class_names)

    def index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise KeyError(f"unknown class {name!r}") from None

    @classmethod
    def from_names(cls, class_names, objects: dict[str, Sequence[str]] | None = None,
                   mode=LabelMode.EXCLUSIVE) -> "LabelSpace":
        names = tuple(class_names)
        parts = {}
        for obj, members in (objects or {}).items():
            unknown = [p for p in members if p not in names]
            if unknown:
                raise StructureError(f"object {obj!r} lists unknown classes {unknown}")
            parts[obj] = frozenset(names.index(p) for p in members)
        return cls(names, parts, mode)


@dataclass(frozen=True, eq=False)
class Labeling:
    """N x K class-indicator matrix; entries 0/1, or 0/0.5/1 for relaxed solutions.

    An all-zero row marks an unlabeled (abstained) segment.
    """

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise StructureError("labeling values must be an N x K matrix")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def is_integral(self) -> bool:
        return bool(np.all((self.values == 0) | (self.values == 1)))

    @classmethod
    def from_classes(cls, classes, K: int) -> "Labeling":
        classes = np.asarray(classes, dtype=np.int64)
        Y = np.zeros((len(classes), K))
        mask = classes >= 0
        Y[np.nonzero(mask)[0], classes[mask]] = 1.0
        return cls(Y)

    def classes(self) -> np.ndarray:
        """Class index per segment, -1 where the row is not a clean one-hot."""
        Y = self.values
        onehot = (Y.sum(axis=1) == 1) & np.all((Y == 0) | (Y == 1), axis=1)
        return np.where(onehot, Y.argmax(axis=1), -1)

    def unlabeled(self) -> np.ndarray:
        return ~np.any(self.values != 0, axis=1)

    def __eq__(self, other):
        return isinstance(other, Labeling) and np.array_equal(self.values, other.values)

    __hash__ = None


def validate_labeling(labeling: Labeling, space: LabelSpace, n_segments: int | None = None,
                      allow_unlabeled: bool = False) -> list[int]:
    """Return the segment indices violating the mode constraint (empty list means ok).

    Raises StructureError when the matrix does not match the label space.
    """
    Y = labeling.values
    if Y.shape[1] != space.K or (n_segments is not None and Y.shape[0] != n_segments):
        raise StructureError(f"labeling shape {Y.shape} does not match N={n_segments}, K={space.K}")
    binary = np.all((Y == 0) | (Y == 1), axis=1)
    if space.mode is LabelMode.MULTILABEL:
        bad = ~binary
    else:
        sums = Y.sum(axis=1)
        ok = binary & (sums == 1)
        if allow_unlabeled:
            ok |= binary & (sums == 0)
        bad = ~ok
    return np.nonzero(bad)[0].tolist()


def hamming_loss(truth: Labeling, pred: Labeling, space: LabelSpace | None = None,
                 mode: LabelMode | None = None) -> float:
    """Segments whose indicator rows differ (exclusive) or differing entries (multi-label).

    In exclusive mode, all-zero rows of ``truth`` are the unlabeled sentinel and
    are excluded from the count.
    """
    A, B = truth.values, pred.values
    if A.shape != B.shape:
        raise StructureError(f"labeling shapes differ: {A.shape} vs {B.shape}")
    if mode is None:
        mode = space.mode if space is not None else LabelMode.EXCLUSIVE
    diff = A != B
    if LabelMode(mode) is LabelMode.MULTILABEL:
        return float(diff.sum())
    known = np.any(A != 0, axis=1)
    return float(np.any(diff, axis=1)[known].sum())
