"""Deterministic synthetic scenes with planted geometric and contextual structure.

A scene is a set of rectangular patches (horizontal or vertical), one segment
per patch.  Relation rules stack an instance of one class above an instance
of another inside a vertical band; stacks ("clusters") are spread over the
room with a minimum horizontal gap so that unrelated clusters do not touch.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from matplotlib.colors import hsv_to_rgb

from .scene import CameraView, LabelSpace, Labeling, Scene

GENERATOR_NAME = "scenemrf.synthgen/1 numpy.random.PCG64"


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PatchTemplate:
    orientation: str = "horizontal"         # or "vertical"
    size: tuple[float, float] = (0.3, 0.3)  # (width, depth) or (width, height)
    height: tuple[float, float] = (0.4, 1.0)  # centroid z range when not stacked


@dataclass(frozen=True)
class ColorModel:
    hue: float
    saturation: float = 0.6
    value: float = 0.7
    spread: float = 0.02


@dataclass(frozen=True)
class RelationRule:
    """Each ``upper`` instance sits ``dz`` above a distinct ``lower`` instance."""

    upper: str
    lower: str
    dz: tuple[float, float]
    max_offset: float = 0.05

    @property
    def name(self) -> str:
        return f"{self.upper} above {self.lower}"


@dataclass(frozen=True)
class SceneSpec:
    classes: tuple[str, ...]
    templates: dict[str, PatchTemplate]
    colors: dict[str, ColorModel]
    counts: dict[str, int]
    relations: tuple[RelationRule, ...] = ()
    objects: dict[str, tuple[str, ...]] = field(default_factory=dict)
    seed: int = 0
    noise: float = 0.0
    spacing: float = 0.03
    room: tuple[float, float] = (6.0, 6.0)
    n_views: int = 4
    camera_height: float = 2.0
    separation: float = 1.0
    separable: bool = False
    retries: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "relations", tuple(
            r if isinstance(r, RelationRule) else RelationRule(**r) for r in self.relations))
        declared = set(self.classes)
        if self.noise < 0:
            raise GenerationError("noise must be non-negative")
        for name, table in (("templates", self.templates), ("colors", self.colors)):
            missing = declared - set(table)
            if missing:
                raise GenerationError(f"{name} missing for classes {sorted(missing)}")
        for r in self.relations:
            for c in (r.upper, r.lower):
                if c not in declared:
                    raise GenerationError(f"rule '{r.name}' references undeclared class {c!r}")
        unknown = set(self.counts) - declared
        if unknown:
            raise GenerationError(f"counts given for undeclared classes {sorted(unknown)}")
        for obj, parts in self.objects.items():
            if set(parts) - declared:
                raise GenerationError(f"object {obj!r} lists undeclared parts")
        if self.separable:
            self._check_separable()

    def _check_separable(self):
        cols = [self.colors[c] for c in self.classes]
        for a in range(len(cols)):
            for b in range(a + 1, len(cols)):
                dh = abs(cols[a].hue - cols[b].hue)
                dh = min(dh, 1 - dh)
                if dh < 2 * (cols[a].spread + cols[b].spread):
                    raise GenerationError(
                        f"separable spec needs hue means >= 4 sigma apart: "
                        f"{self.classes[a]} vs {self.classes[b]}")
        bands = sorted(r.dz for r in self.relations)
        for (lo1, hi1), (lo2, hi2) in zip(bands, bands[1:]):
            if lo2 <= hi1:
                raise GenerationError("separable spec needs disjoint relation bands")

    def label_space(self) -> LabelSpace:
        return LabelSpace.from_names(self.classes, self.objects)

    def with_seed(self, seed: int) -> "SceneSpec":
        d = dict(self.__dict__)
        d["seed"] = int(seed)
        return SceneSpec(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["relations"] = [asdict(r) for r in self.relations]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        d["templates"] = {k: PatchTemplate(**{kk: tuple(vv) if isinstance(vv, list) else vv
                                              for kk, vv in v.items()})
                          for k, v in d["templates"].items()}
        d["colors"] = {k: ColorModel(**v) for k, v in d["colors"].items()}
        d["relations"] = tuple(RelationRule(r["upper"], r["lower"], tuple(r["dz"]),
                                            r.get("max_offset", 0.05))
                               for r in d.get("relations", ()))
        d["objects"] = {k: tuple(v) for k, v in d.get("objects", {}).items()}
        for key in ("room",):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class _Instance:
    cls: str
    parent: int | None = None
    rule: int | None = None
    center: np.ndarray | None = None
    yaw: float = 0.0
    children: list = field(default_factory=list)


def _patch_points(tpl: PatchTemplate, center, yaw, spacing):
    a, b = tpl.size
    us = np.arange(-a / 2, a / 2 + 1e-9, spacing)
    vs = np.arange(-b / 2, b / 2 + 1e-9, spacing)
    U, V = np.meshgrid(us - us.mean(), vs - vs.mean(), indexing="ij")
    U, V = U.ravel(), V.ravel()
    e1 = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    if tpl.orientation == "vertical":
        e2 = np.array([0.0, 0.0, 1.0])
    else:
        e2 = np.array([-np.sin(yaw), np.cos(yaw), 0.0])
    return center + U[:, None] * e1 + V[:, None] * e2


def _footprint(tpl: PatchTemplate) -> float:
    a, b = tpl.size
    return 0.5 * (np.hypot(a, b) if tpl.orientation == "horizontal" else a)


def generate_scene(spec: SceneSpec):
    """Build one scene and its exclusive ground-truth labeling from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    insts: list[_Instance] = []
    for c in spec.classes:
        insts += [_Instance(c) for _ in range(int(spec.counts.get(c, 0)))]
    by_class = {c: [i for i, x in enumerate(insts) if x.cls == c] for c in spec.classes}

    for ri, rule in enumerate(spec.relations):
        uppers = [i for i in by_class[rule.upper] if insts[i].parent is None]
        lowers = [i for i in by_class[rule.lower]
                  if all(insts[ch].rule != ri for ch in insts[i].children)]
        if len(uppers) > len(lowers):
            raise GenerationError(f"rule '{rule.name}' unsatisfiable: {len(uppers)} "
                                  f"{rule.upper} but only {len(lowers)} free {rule.lower}")
        order = rng.permutation(len(lowers))
        for u, li in zip(uppers, order):
            lo = lowers[li]
            # a stack must not loop back on itself
            anc = lo
            while anc is not None:
                if anc == u:
                    raise GenerationError(f"rule '{rule.name}' creates a cyclic stack")
                anc = insts[anc].parent
            insts[u].parent, insts[u].rule = lo, ri
            insts[lo].children.append(u)

    def place(i, center):
        inst = insts[i]
        inst.center = center
        inst.yaw = rng.uniform(0, np.pi)
        for ch in inst.children:
            rule = spec.relations[insts[ch].rule]
            r = rule.max_offset * np.sqrt(rng.uniform())
            ang = rng.uniform(0, 2 * np.pi)
            dz = rng.uniform(*rule.dz)
            place(ch, center + np.array([r * np.cos(ang), r * np.sin(ang), dz]))

    def radius(i):
        inst = insts[i]
        own = _footprint(spec.templates[inst.cls])
        kids = [spec.relations[insts[ch].rule].max_offset + radius(ch) for ch in inst.children]
        return max([own] + kids)

    placed = []  # (xy, radius)
    Lx, Ly = spec.room
    for i, inst in enumerate(insts):
        if inst.parent is not None:
            continue
        rad = radius(i)
        tpl = spec.templates[inst.cls]
        for _ in range(spec.retries):
            xy = rng.uniform([rad, rad], [Lx - rad, Ly - rad])
            if all(np.hypot(*(xy - q)) >= rad + qr + spec.separation for q, qr in placed):
                break
        else:
            if inst.children:
                what = f"rule '{spec.relations[insts[inst.children[0]].rule].name}'"
            else:
                what = f"class {inst.cls!r}"
            raise GenerationError(f"could not place {what} after {spec.retries} attempts; "
                                  f"room too small for the requested counts")
        placed.append((xy, rad))
        place(i, np.array([xy[0], xy[1], rng.uniform(*tpl.height)]))

    n_views = max(1, spec.n_views)
    R = 0.45 * min(Lx, Ly)
    ang = 2 * np.pi * np.arange(n_views) / n_views + np.pi / 4
    origins = np.stack([Lx / 2 + R * np.cos(ang), Ly / 2 + R * np.sin(ang),
                        np.full(n_views, spec.camera_height)], axis=1)
    views = tuple(CameraView(v, origins[v]) for v in range(n_views))

    pos, col, vid, index_lists = [], [], [], []
    start = 0
    K = len(spec.classes)
    labels = []
    for inst in insts:
        tpl = spec.templates[inst.cls]
        pts = _patch_points(tpl, inst.center, inst.yaw, spec.spacing)
        if spec.noise > 0:
            pts = pts + rng.normal(0.0, spec.noise, pts.shape)
        cm = spec.colors[inst.cls]
        hsv = np.column_stack([
            np.mod(cm.hue + cm.spread * rng.standard_normal(len(pts)), 1.0),
            np.clip(cm.saturation + cm.spread * rng.standard_normal(len(pts)), 0, 1),
            np.clip(cm.value + cm.spread * rng.standard_normal(len(pts)), 0, 1),
        ])
        view = int(np.argmin(np.linalg.norm(origins[:, :2] - inst.center[:2], axis=1)))
        pos.append(pts)
        col.append(np.clip(hsv_to_rgb(hsv), 0, 1))
        vid.append(np.full(len(pts), view))
        index_lists.append(np.arange(start, start + len(pts)))
        start += len(pts)
        labels.append(spec.classes.index(inst.cls))

    planted = [{"upper": i, "lower": x.parent, "rule": x.rule}
               for i, x in enumerate(insts) if x.parent is not None]
    meta = {"name": GENERATOR_NAME, "seed": int(spec.seed), "relations": planted}
    scene = Scene(np.vstack(pos), np.vstack(col), np.concatenate(vid), views, (), meta)
    scene = scene.with_segments(index_lists)
    return scene, Labeling.from_classes(labels, K)


def audit_scene(scene: Scene, truth: Labeling, spec: SceneSpec) -> list[str]:
    """Re-check every planted relation; returns a list of problems (empty when clean)."""
    problems = []
    meta = scene.generator or {}
    classes = truth.classes()
    tol = 4 * spec.noise + 1e-9
    for rel in meta.get("relations", []):
        rule = spec.relations[rel["rule"]]
        u, lo = scene.segments[rel["upper"]], scene.segments[rel["lower"]]
        if spec.classes[classes[u.id]] != rule.upper or spec.classes[classes[lo.id]] != rule.lower:
            problems.append(f"{rule.name}: segment classes {classes[u.id]}, {classes[lo.id]} mismatch")
            continue
        dz = u.centroid[2] - lo.centroid[2]
        if not (rule.dz[0] - tol <= dz <= rule.dz[1] + tol):
            problems.append(f"{rule.name}: dz={dz:.4f} outside {rule.dz}")
        off = np.hypot(*(u.centroid[:2] - lo.centroid[:2]))
        if off > rule.max_offset + tol:
            problems.append(f"{rule.name}: horizontal offset {off:.4f} > {rule.max_offset}")
    counts = np.bincount(classes[classes >= 0], minlength=len(spec.classes))
    for c, n in spec.counts.items():
        if counts[spec.classes.index(c)] != n:
            problems.append(f"class {c}: {counts[spec.classes.index(c)]} segments, expected {n}")
    return problems


def scene_seeds(seed: int, n: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0] >> np.uint64(1)) for c in children]


def generate_dataset(specs, n_scenes: int, seed: int):
    """``n_scenes`` scenes cycling through ``specs`` with per-scene derived seeds."""
    if n_scenes < 1:
        raise GenerationError("n_scenes must be at least 1")
    if isinstance(specs, SceneSpec):
        specs = [specs]
    return [generate_scene(specs[i % len(specs)].with_seed(s))
            for i, s in enumerate(scene_seeds(seed, n_scenes))]


# ------------------------------------------------------------------ presets

def stacked_spec(seed: int = 0, per_class: int = 3, noise: float = 0.003) -> SceneSpec:
    """Visually identical flat patches whose identity is only carried by stacking.

    Two stack kinds differ solely in their vertical gap (about 0.30 m vs
    0.16 m), so node features cannot tell the four classes apart and
    associative edges cannot either.
    """
    classes = ("upperA", "lowerA", "upperB", "lowerB")
    grey = ColorModel(hue=0.6, saturation=0.15, value=0.6, spread=0.03)
    flat = PatchTemplate("horizontal", (0.3, 0.3), (0.2, 1.2))
    return SceneSpec(
        classes=classes,
        templates={c: flat for c in classes},
        colors={c: grey for c in classes},
        counts={c: per_class for c in classes},
        relations=(RelationRule("upperA", "lowerA", (0.28, 0.32), 0.05),
                   RelationRule("upperB", "lowerB", (0.14, 0.18), 0.05)),
        objects={"stackA": ("upperA", "lowerA"), "stackB": ("upperB", "lowerB")},
        seed=seed, noise=noise, spacing=0.04, room=(7.0, 7.0), separation=1.0,
    )


def separable_spec(seed: int = 0, noise: float = 0.002) -> SceneSpec:
    """Six office-like classes, about 20 segments per scene, hues at least 4 sigma apart."""
    classes = ("tableTop", "monitor", "keyboard", "chairBase", "chairBack", "book")
    hues = (0.05, 0.25, 0.45, 0.65, 0.85, 0.15)
    colors = {c: ColorModel(h, 0.7, 0.75, 0.01) for c, h in zip(classes, hues)}
    templates = {
        "tableTop": PatchTemplate("horizontal", (0.6, 0.4), (0.7, 0.8)),
        "monitor": PatchTemplate("vertical", (0.35, 0.25), (1.0, 1.1)),
        "keyboard": PatchTemplate("horizontal", (0.3, 0.12), (0.75, 0.8)),
        "chairBase": PatchTemplate("horizontal", (0.35, 0.35), (0.4, 0.5)),
        "chairBack": PatchTemplate("vertical", (0.35, 0.3), (0.8, 0.9)),
        "book": PatchTemplate("horizontal", (0.2, 0.15), (0.2, 1.4)),
    }
    return SceneSpec(
        classes=classes, templates=templates, colors=colors,
        counts={"tableTop": 4, "monitor": 3, "keyboard": 4, "chairBase": 3, "chairBack": 3, "book": 3},
        relations=(RelationRule("monitor", "tableTop", (0.25, 0.35), 0.1),
                   RelationRule("chairBack", "chairBase", (0.38, 0.45), 0.05)),
        objects={"table": ("tableTop",), "computer": ("monitor", "keyboard"),
                 "chair": ("chairBase", "chairBack"), "book": ("book",)},
        seed=seed, noise=noise, spacing=0.04, room=(9.0, 9.0), separation=0.5, separable=True,
    )


def frustrated_spec(seed: int = 0, per_class: int = 3, noise: float = 0.003) -> SceneSpec:
    """Three-level stacks of identical patches next to free-standing, distinctly colored boxes.

    Within 0.4 m every stack is a triangle; the shelf levels can only be told
    apart through their pairwise terms, so the relaxation tends to leave them
    undecided while the boxes stay easy.
    """
    shelves = ("shelfBottom", "shelfMiddle", "shelfTop")
    grey = ColorModel(hue=0.1, saturation=0.2, value=0.5, spread=0.03)
    flat = PatchTemplate("horizontal", (0.3, 0.3), (0.2, 0.9))
    return SceneSpec(
        classes=shelves + ("box",),
        templates={**{c: flat for c in shelves},
                   "box": PatchTemplate("horizontal", (0.25, 0.25), (0.2, 1.2))},
        colors={**{c: grey for c in shelves},
                "box": ColorModel(hue=0.6, saturation=0.8, value=0.8, spread=0.02)},
        counts={**{c: per_class for c in shelves}, "box": per_class},
        relations=(RelationRule("shelfTop", "shelfMiddle", (0.16, 0.19), 0.03),
                   RelationRule("shelfMiddle", "shelfBottom", (0.16, 0.19), 0.03)),
        objects={"shelf": shelves, "box": ("box",)},
        seed=seed, noise=noise, spacing=0.04, room=(7.0, 7.0), separation=1.0,
    )


PRESETS = {"stacked": stacked_spec, "separable": separable_spec, "frustrated": frustrated_spec}
