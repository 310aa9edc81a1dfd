"""Command-line entry point: ``scenemrf <command> ...``.

Exit codes: 0 success, 2 usage, 3-6 file format problems (malformed,
version, index range, unknown class), 7 generation, 8 configuration,
9 numerical/inference failure, 1 anything else.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import io
from .evaluation import cross_validate, context_sweep, format_sweep, score
from .features import NA_FEATURE_NAMES, NODE_FEATURE_NAMES, OA_FEATURE_NAMES, FeatureParams
from .graph import FeatureCache
from .learning import TrainingExample, predict, train
from .model import ConfigurationError, ModelConfig
from .segmentation import SegmentationParams, segment_scene
from .synthgen import PRESETS, GenerationError, SceneSpec, generate_dataset

LABEL_SPACE_FILE = "label_space.json"
EXIT_GENERATION, EXIT_CONFIG, EXIT_NUMERIC = 7, 8, 9


class UsageError(Exception):
    pass


def _scene_paths(inputs) -> list[Path]:
    out = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            out += sorted(q for q in p.glob("*.json") if q.name != LABEL_SPACE_FILE)
        elif p.exists():
            out.append(p)
        else:
            raise FileNotFoundError(f"input {p} does not exist")
    if not out:
        raise UsageError("no scene files given")
    return out


def _label_space(args, paths):
    path = Path(args.label_space) if args.label_space else paths[0].parent / LABEL_SPACE_FILE
    if not path.exists():
        raise FileNotFoundError(f"label space file {path} not found (use --label-space)")
    return io.load_label_space(path)


def _examples(paths, space):
    caches, truths = [], []
    for p in paths:
        doc = io.load_scene(p)
        if not doc.scene.n_segments:
            raise UsageError(f"{p} has no segments; run 'segment' first")
        caches.append(FeatureCache(doc.scene, FeatureParams(), doc.precomputed_visual))
        truths.append(doc.truth(space))
    return caches, truths


def _timing(t0, what):
    print(f"{what} wall_time={time.perf_counter() - t0:.3f}s", file=sys.stderr)


# ------------------------------------------------------------------ commands

def cmd_segment(args):
    t0 = time.perf_counter()
    doc = io.load_scene(args.input)
    params = SegmentationParams(args.angle, args.distance, args.min_points, args.k)
    scene, dropped = segment_scene(doc.scene, params)
    io.save_scene(args.output, io.SceneDocument(scene))
    print(f"segments={scene.n_segments} dropped_points={len(dropped)}")
    _timing(t0, "segment")


def cmd_featurize(args):
    t0 = time.perf_counter()
    doc = io.load_scene(args.input)
    cache = FeatureCache(doc.scene, FeatureParams(), doc.precomputed_visual)
    g = cache.graph(args.context_range)
    g.check_finite()
    io.write_json(args.output, {
        "context_range": args.context_range,
        "node_feature_names": list(NODE_FEATURE_NAMES),
        "oa_feature_names": list(OA_FEATURE_NAMES),
        "na_feature_names": list(NA_FEATURE_NAMES),
        "node_features": g.node_features.tolist(),
        "edges": g.edges.tolist(),
        "oa_features": g.oa_features.tolist(),
        "na_features": g.na_features.tolist(),
    })
    print(f"segments={g.N} edges={g.n_edges}")
    _timing(t0, "featurize")


def cmd_gen(args):
    t0 = time.perf_counter()
    if args.spec:
        spec = SceneSpec.from_dict(io.read_json(args.spec))
    elif args.preset:
        spec = PRESETS[args.preset]()
    else:
        raise UsageError("gen needs --spec or --preset")
    out = Path(args.out)
    data = generate_dataset(spec, args.n, args.seed)
    for i, (scene, truth) in enumerate(data):
        io.save_scene(out / f"scene_{i:03d}.json", scene, truth, spec.label_space())
    io.save_label_space(out / LABEL_SPACE_FILE, spec.label_space())
    print(f"scenes={len(data)} out={out}")
    _timing(t0, "gen")


def _config(args, space):
    return ModelConfig(args.scheme, space, context_range=args.context_range, C=args.C)


def cmd_train(args):
    t0 = time.perf_counter()
    paths = _scene_paths(args.inputs)
    space = _label_space(args, paths)
    config = _config(args, space)
    caches, truths = _examples(paths, space)
    examples = [TrainingExample(c.graph(args.context_range), t, p.stem)
                for c, t, p in zip(caches, truths, paths)]
    if args.folds:
        res = cross_validate(examples, config, args.folds, args.seed, C=args.C, eps=args.eps,
                             train_inference=args.inference, predict_inference=args.inference)
        for f, rep in enumerate(res.fold_reports):
            print(f"fold={f} micro_precision={rep.micro_precision:.6f} "
                  f"micro_recall={rep.micro_recall:.6f} macro_precision={rep.macro_precision:.6f} "
                  f"macro_recall={rep.macro_recall:.6f}")
        print(f"mean micro_precision={res.micro_precision:.6f} micro_recall={res.micro_recall:.6f} "
              f"macro_precision={res.macro_precision:.6f} macro_recall={res.macro_recall:.6f}")
    if args.out:
        result = train(examples, config, eps=args.eps, inference=args.inference)
        if not result.converged:
            print("warning: iteration limit reached before the termination certificate",
                  file=sys.stderr)
        meta = {"iterations": result.iterations, "converged": result.converged,
                "max_violation": result.max_violation, "slack": result.slack, "eps": args.eps,
                "inference": args.inference, "exact_constraints": result.exact_constraints,
                "scenes": [p.name for p in paths]}
        io.save_model(args.out, config, result.weights, meta)
        print(f"iterations={result.iterations} converged={result.converged} "
              f"max_violation={result.max_violation:.6g} slack={result.slack:.6g} model={args.out}")
    if not args.folds and not args.out:
        raise UsageError("train needs --out and/or --folds")
    _timing(t0, "train")


def cmd_predict(args):
    t0 = time.perf_counter()
    config, weights, _ = io.load_model(args.model)
    paths = _scene_paths(args.inputs)
    out = Path(args.out)
    many = len(paths) > 1 or out.is_dir()
    for p in paths:
        doc = io.load_scene(p)
        cache = FeatureCache(doc.scene, FeatureParams(), doc.precomputed_visual)
        g = cache.graph(config.context_range if args.context_range is None else args.context_range)
        labels = predict(g, weights, config, args.inference)
        names = io.labeling_to_names(labels, config.label_space)
        target = out / p.name if many else out
        io.save_scene(target, io.SceneDocument(doc.scene, doc.labels, names, doc.precomputed_visual))
        n_abst = sum(v == [io.UNLABELED] for v in names.values())
        print(f"scene={p.name} segments={g.N} abstained={n_abst} out={target}")
    if many:
        io.save_label_space(out / LABEL_SPACE_FILE, config.label_space)
    _timing(t0, "predict")


def cmd_eval(args):
    paths = _scene_paths(args.inputs)
    space = _label_space(args, paths)
    truths, preds = [], []
    for p in paths:
        doc = io.load_scene(p)
        truths.append(doc.truth(space))
        preds.append(doc.predicted(space))
    rep = score(truths, preds, space, allow_abstentions=True)
    print(rep.table())
    print()
    print("\n".join(rep.rows()))


def cmd_sweep(args):
    t0 = time.perf_counter()
    paths = _scene_paths(args.inputs)
    space = _label_space(args, paths)
    ranges = [float(x) for x in args.ranges.split(",")]
    config = _config(args, space)
    caches, truths = _examples(paths, space)
    rows = context_sweep(caches, truths, ranges, config, args.folds or 4, args.seed, C=args.C,
                         eps=args.eps, train_inference=args.inference,
                         predict_inference=args.inference)
    table = format_sweep(rows)
    if args.out:
        io.atomic_write_text(args.out, table + "\n")
    print(table)
    _timing(t0, "sweep")


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scenemrf", description="3D scene segment labeling")
    ap.add_argument("-v", "--verbose", action="store_true", help="log training iterations")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_flags(p, inference=("mip", "exact", "relaxed")):
        p.add_argument("--scheme", choices=["node", "assoc", "nonassoc", "parsimon"],
                       default="parsimon")
        p.add_argument("--C", type=float, default=0.1)
        p.add_argument("--eps", type=float, default=0.1)
        p.add_argument("--context-range", type=float, default=0.3)
        p.add_argument("--inference", choices=list(inference), default="mip")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--folds", type=int, default=0)
        p.add_argument("--label-space")

    p = sub.add_parser("segment", help="over-segment a raw point cloud")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--angle", type=float, default=0.35)
    p.add_argument("--distance", type=float, default=0.05)
    p.add_argument("--min-points", type=int, default=50)
    p.add_argument("--k", type=int, default=15)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("featurize", help="write node and edge features of a segmented scene")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--context-range", type=float, default=0.3)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("gen", help="generate synthetic scenes")
    p.add_argument("--spec")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model, optionally with k-fold cross-validation")
    p.add_argument("inputs", nargs="+")
    model_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label scenes with a trained model")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--inference", choices=["exact", "mip", "graphcut"], default="mip")
    p.add_argument("--context-range", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predicted against ground-truth labels")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--label-space")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="context-range sweep")
    p.add_argument("inputs", nargs="+")
    model_flags(p)
    p.add_argument("--ranges", default="0.05,0.1,0.2,0.3,0.4,0.6")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as e:
        ap.print_usage(sys.stderr)
        print(f"error[usage]: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error[input]: {e}", file=sys.stderr)
        return 2
    except io.FileFormatError as e:
        print(f"error[format]: {e}", file=sys.stderr)
        return e.code
    except GenerationError as e:
        print(f"error[generation]: {e}", file=sys.stderr)
        return EXIT_GENERATION
    except ConfigurationError as e:
        print(f"error[configuration]: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ArithmeticError) as e:
        print(f"error[numeric]: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as e:  # noqa: BLE001
        print(f"error[internal]: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
