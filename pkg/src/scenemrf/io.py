"""JSON persistence for scenes, label spaces and trained models.

Floats are written with Python's shortest round-trip repr, so a save/load
cycle reproduces every stored number exactly.  Writes go to a temporary file
in the target directory and are renamed into place.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import LAYOUT_VERSION, ModelConfig, Weights, layout_descriptor, parameter_count
from .scene import (UNLABELED, CameraView, LabelMode, LabelSpace, Labeling, Scene,
                    StructureError)

FORMAT_VERSION = 1


class FileFormatError(Exception):
    code = 2


class MalformedFile(FileFormatError):
    code = 3


class VersionMismatch(FileFormatError):
    code = 4


class IndexOutOfRange(FileFormatError):
    code = 5


class UnknownClass(FileFormatError):
    code = 6


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, doc):
    atomic_write_text(path, json.dumps(doc, indent=1, allow_nan=False) + "\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise MalformedFile(f"{path}: not valid JSON ({e})") from None


def _require(doc, key, kind, where):
    if key not in doc:
        raise MalformedFile(f"{where}: missing field {key!r}")
    if not isinstance(doc[key], kind):
        raise MalformedFile(f"{where}: field {key!r} has the wrong type")
    return doc[key]


# ------------------------------------------------------------------ label spaces

def label_space_to_dict(space: LabelSpace) -> dict:
    return {"classes": list(space.class_names),
            "objects": {obj: [space.class_names[k] for k in sorted(m)]
                        for obj, m in space.object_parts.items()},
            "mode": space.mode.value}


def label_space_from_dict(doc: dict, where="label space") -> LabelSpace:
    if not isinstance(doc, dict):
        raise MalformedFile(f"{where}: expected a JSON object")
    classes = _require(doc, "classes", list, where)
    objects = doc.get("objects", {})
    if not isinstance(objects, dict):
        raise MalformedFile(f"{where}: 'objects' must map object names to class lists")
    try:
        return LabelSpace.from_names(classes, objects, LabelMode(doc.get("mode", "exclusive")))
    except ValueError as e:
        raise MalformedFile(f"{where}: {e}") from None


def save_label_space(path, space: LabelSpace):
    write_json(path, label_space_to_dict(space))


def load_label_space(path) -> LabelSpace:
    return label_space_from_dict(read_json(path), str(path))


# ------------------------------------------------------------------ labels

def labeling_to_names(labeling: Labeling, space: LabelSpace) -> dict[str, list[str]]:
    out = {}
    for i, row in enumerate(labeling.values):
        names = [space.class_names[k] for k in np.nonzero(row == 1)[0]]
        out[str(i)] = names or [UNLABELED]
    return out


def names_to_labeling(labels: dict, space: LabelSpace, n_segments: int, where="labels") -> Labeling:
    Y = np.zeros((n_segments, space.K))
    for key, names in labels.items():
        try:
            i = int(key)
        except (TypeError, ValueError):
            raise MalformedFile(f"{where}: segment key {key!r} is not an integer") from None
        if not 0 <= i < n_segments:
            raise IndexOutOfRange(f"{where}: labels reference segment {i}, scene has {n_segments}")
        if isinstance(names, str):
            names = [names]
        for name in names:
            if name == UNLABELED:
                continue
            if name not in space.class_names:
                raise UnknownClass(f"{where}: segment {i} has unknown class {name!r}")
            Y[i, space.class_names.index(name)] = 1.0
    return Labeling(Y)


# ------------------------------------------------------------------ scenes

@dataclass(eq=False)
class SceneDocument:
    scene: Scene
    labels: dict = field(default_factory=dict)             # segment id -> class names
    predicted_labels: dict = field(default_factory=dict)
    precomputed_visual: dict = field(default_factory=dict)  # segment id -> 48 floats

    def truth(self, space: LabelSpace) -> Labeling:
        return names_to_labeling(self.labels, space, self.scene.n_segments)

    def predicted(self, space: LabelSpace) -> Labeling:
        return names_to_labeling(self.predicted_labels, space, self.scene.n_segments,
                                 "predicted_labels")


def scene_to_dict(doc: SceneDocument) -> dict:
    sc = doc.scene
    pts = [[*map(float, p), *map(float, c), int(v)]
           for p, c, v in zip(sc.positions, sc.colors, sc.view_ids)]
    out = {"format_version": FORMAT_VERSION,
           "views": [{"view_id": v.view_id, "origin": [float(x) for x in v.origin]} for v in sc.views],
           "points": pts}
    if sc.segments:
        out["segments"] = [{"id": s.id, "point_indices": [int(i) for i in s.point_indices]}
                           for s in sc.segments]
    if doc.labels:
        out["labels"] = {str(k): list(v) for k, v in doc.labels.items()}
    if doc.predicted_labels:
        out["predicted_labels"] = {str(k): list(v) for k, v in doc.predicted_labels.items()}
    if doc.precomputed_visual:
        out["precomputed_visual"] = {str(k): [float(x) for x in v]
                                     for k, v in doc.precomputed_visual.items()}
    if sc.generator is not None:
        out["generator"] = sc.generator
    return out


def scene_from_dict(d: dict, where="scene") -> SceneDocument:
    if not isinstance(d, dict):
        raise MalformedFile(f"{where}: expected a JSON object")
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{where}: format_version {version!r}, expected {FORMAT_VERSION}")
    views_raw = _require(d, "views", list, where)
    points = _require(d, "points", list, where)
    try:
        views = tuple(CameraView(int(v["view_id"]), v["origin"]) for v in views_raw)
        P = np.array(points, float).reshape(-1, 7)
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedFile(f"{where}: bad views or points ({e})") from None
    if len(P) != len(points):
        raise MalformedFile(f"{where}: every point needs 7 entries [x,y,z,r,g,b,view_id]")
    vid = P[:, 6]
    if np.any(vid != np.round(vid)):
        raise MalformedFile(f"{where}: view ids must be integers")
    segs = d.get("segments", [])
    index_lists = []
    for pos, s in enumerate(segs):
        if not isinstance(s, dict) or "point_indices" not in s:
            raise MalformedFile(f"{where}: segment entry {pos} lacks point_indices")
        sid = s.get("id", pos)
        if sid != pos:
            raise MalformedFile(f"{where}: segment ids must be 0..N-1 in order; got {sid} at {pos}")
        idx = np.asarray(s["point_indices"])
        if idx.size == 0 or idx.dtype.kind not in "iu":
            raise MalformedFile(f"{where}: segment {sid} needs a non-empty integer index list")
        if idx.min() < 0 or idx.max() >= len(P):
            raise IndexOutOfRange(f"{where}: segment {sid} references point index "
                                  f"{int(idx.max() if idx.max() >= len(P) else idx.min())} "
                                  f"outside 0..{len(P) - 1}")
        index_lists.append(idx)
    try:
        scene = Scene(P[:, :3], P[:, 3:6], vid.astype(np.int64), views, (), d.get("generator"))
        if index_lists:
            scene = scene.with_segments(index_lists)
    except StructureError as e:
        raise MalformedFile(f"{where}: {e}") from None
    n = scene.n_segments
    for key in ("labels", "predicted_labels", "precomputed_visual"):
        block = d.get(key, {})
        if not isinstance(block, dict):
            raise MalformedFile(f"{where}: {key!r} must be an object keyed by segment id")
        for k in block:
            if not str(k).lstrip("-").isdigit():
                raise MalformedFile(f"{where}: {key} key {k!r} is not a segment id")
            if not 0 <= int(k) < n:
                raise IndexOutOfRange(f"{where}: {key} references segment {k}, scene has {n}")
    visual = {}
    for k, v in d.get("precomputed_visual", {}).items():
        v = np.asarray(v, float)
        if v.shape != (48,):
            raise MalformedFile(f"{where}: precomputed_visual for segment {k} needs 48 floats")
        visual[int(k)] = v
    norm = lambda block: {int(k): [v] if isinstance(v, str) else list(v) for k, v in block.items()}
    return SceneDocument(scene, norm(d.get("labels", {})), norm(d.get("predicted_labels", {})), visual)


def save_scene(path, scene_or_doc, truth: Labeling | None = None, space: LabelSpace | None = None,
               predicted: Labeling | None = None):
    doc = scene_or_doc if isinstance(scene_or_doc, SceneDocument) else SceneDocument(scene_or_doc)
    if truth is not None or predicted is not None:
        if space is None:
            raise ValueError("a label space is needed to write class names")
        doc = SceneDocument(doc.scene,
                            labeling_to_names(truth, space) if truth is not None else doc.labels,
                            labeling_to_names(predicted, space) if predicted is not None
                            else doc.predicted_labels,
                            doc.precomputed_visual)
    write_json(path, scene_to_dict(doc))


def load_scene(path) -> SceneDocument:
    if not os.path.exists(path):
        raise FileNotFoundError(f"scene file {path} does not exist")
    return scene_from_dict(read_json(path), str(path))


# ------------------------------------------------------------------ models

def save_model(path, config: ModelConfig, weights: Weights, meta: dict | None = None):
    doc = {"layout_version": LAYOUT_VERSION,
           "config": {"scheme": config.scheme.value, "node_dim": config.node_dim,
                      "oa_dim": config.oa_dim, "na_dim": config.na_dim,
                      "context_range": config.context_range, "C": config.C},
           "label_space": label_space_to_dict(config.label_space),
           "class_names": list(config.label_space.class_names),
           "layout": layout_descriptor(config),
           "weights": [float(x) for x in weights.to_vector()],
           "meta": meta or {}}
    write_json(path, doc)


def load_model(path):
    """Returns (config, weights, meta); rejects files from another weight layout."""
    d = read_json(path)
    where = str(path)
    if not isinstance(d, dict):
        raise MalformedFile(f"{where}: expected a JSON object")
    if d.get("layout_version") != LAYOUT_VERSION:
        raise VersionMismatch(f"{where}: layout_version {d.get('layout_version')!r}, "
                              f"expected {LAYOUT_VERSION}")
    space = label_space_from_dict(_require(d, "label_space", dict, where), where)
    cfg = _require(d, "config", dict, where)
    try:
        config = ModelConfig(label_space=space, **cfg)
    except (TypeError, ValueError) as e:
        raise MalformedFile(f"{where}: bad config ({e})") from None
    if d.get("layout") != json.loads(json.dumps(layout_descriptor(config))):
        raise VersionMismatch(f"{where}: stored weight layout differs from this build's layout")
    vec = _require(d, "weights", list, where)
    if len(vec) != parameter_count(config):
        raise MalformedFile(f"{where}: {len(vec)} weights, layout needs {parameter_count(config)}")
    return config, Weights.from_vector(config, vec), d.get("meta", {})
