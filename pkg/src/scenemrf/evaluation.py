"""Precision/recall scoring, scene-level k-fold cross-validation and the context-range sweep."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .graph import FeatureCache
from .learning import TrainingExample, predict, train
from .model import ModelConfig
from .scene import LabelMode, LabelSpace, Labeling


class LabelSpaceMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PRReport:
    micro_precision: float
    micro_recall: float
    macro_precision: float
    macro_recall: float
    class_names: tuple[str, ...]
    precision: np.ndarray = field(repr=False)   # per class, nan when never predicted
    recall: np.ndarray = field(repr=False)      # per class, nan when no support
    support: np.ndarray = field(repr=False)
    predicted: np.ndarray = field(repr=False)
    excluded_classes: tuple[str, ...] = ()
    n_abstained: int = 0

    def rows(self) -> list[str]:
        """Machine-parseable key=value lines: one summary line, then one per class."""
        out = [f"summary micro_precision={self.micro_precision:.6f} micro_recall={self.micro_recall:.6f} "
               f"macro_precision={self.macro_precision:.6f} macro_recall={self.macro_recall:.6f} "
               f"abstained={self.n_abstained} excluded={','.join(self.excluded_classes) or '-'}"]
        for k, name in enumerate(self.class_names):
            out.append(f"class name={name} precision={self.precision[k]:.6f} "
                       f"recall={self.recall[k]:.6f} support={int(self.support[k])} "
                       f"predicted={int(self.predicted[k])}")
        return out

    def table(self) -> str:
        w = max(8, *(len(n) for n in self.class_names))
        lines = [f"{'class':<{w}}  precision  recall  support",
                 "-" * (w + 28)]
        for k, name in enumerate(self.class_names):
            p = "   -" if np.isnan(self.precision[k]) else f"{self.precision[k]:9.4f}"
            r = "   -" if np.isnan(self.recall[k]) else f"{self.recall[k]:6.4f}"
            lines.append(f"{name:<{w}}  {p:>9}  {r:>6}  {int(self.support[k]):7d}")
        lines.append("-" * (w + 28))
        lines.append(f"micro P/R  {self.micro_precision:.4f} / {self.micro_recall:.4f}")
        lines.append(f"macro P/R  {self.macro_precision:.4f} / {self.macro_recall:.4f}")
        if self.excluded_classes:
            lines.append("excluded from macro (no support): " + ", ".join(self.excluded_classes))
        if self.n_abstained:
            lines.append(f"abstained segments: {self.n_abstained}")
        return "\n".join(lines)


def _ratio(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(b > 0, a / np.where(b > 0, b, 1), np.nan)


def score(truth: list[Labeling], pred: list[Labeling], space: LabelSpace,
          allow_abstentions: bool = True) -> PRReport:
    """Pooled (micro) and per-class averaged (macro) precision and recall.

    Exclusive mode counts segments; truth rows that are all zero are ignored.
    A prediction that is not one-hot is an abstention: it lowers recall but
    is left out of precision denominators.  Multi-label mode counts
    (segment, attribute) entries.  Classes without support are excluded from
    the macro averages and listed in the report; a class with support that
    is never predicted has precision 0 in the macro average.
    """
    if isinstance(truth, Labeling):
        truth, pred = [truth], [pred]
    if len(truth) != len(pred):
        raise ValueError("truth and prediction lists differ in length")
    K = space.K
    tp = np.zeros(K)
    npred = np.zeros(K)
    sup = np.zeros(K)
    abstained = 0
    for T, P in zip(truth, pred):
        A, B = T.values, P.values
        if A.shape != B.shape or A.shape[1] != K:
            raise LabelSpaceMismatch(f"labeling shape {A.shape} / {B.shape} does not fit {K} classes")
        if space.mode is LabelMode.MULTILABEL:
            A, B = A > 0.5, B > 0.5
            tp += (A & B).sum(axis=0)
            npred += B.sum(axis=0)
            sup += A.sum(axis=0)
            continue
        t, p = T.classes(), P.classes()
        if np.any(A[t < 0].any(axis=1)):
            raise LabelSpaceMismatch("exclusive ground truth must be one-hot or unlabeled")
        keep = t >= 0
        t, p = t[keep], p[keep]
        miss = p < 0
        if miss.any() and not allow_abstentions:
            raise ValueError(f"{int(miss.sum())} abstained segments but abstentions are disallowed")
        abstained += int(miss.sum())
        np.add.at(sup, t, 1)
        np.add.at(npred, p[~miss], 1)
        np.add.at(tp, t[(p == t)], 1)
    prec, rec = _ratio(tp, npred), _ratio(tp, sup)
    has = sup > 0
    macro_p = float(np.mean(np.nan_to_num(prec[has], nan=0.0))) if has.any() else float("nan")
    macro_r = float(np.mean(rec[has])) if has.any() else float("nan")
    micro_p = float(tp.sum() / npred.sum()) if npred.sum() else 0.0
    micro_r = float(tp.sum() / sup.sum()) if sup.sum() else float("nan")
    excluded = tuple(n for n, h in zip(space.class_names, has) if not h)
    return PRReport(micro_p, micro_r, macro_p, macro_r, tuple(space.class_names),
                    prec, rec, sup, npred, excluded, abstained)


def kfold_split(scene_ids, k: int, seed: int = 0) -> list[list]:
    """Partition scenes into k folds of near-equal size (sizes differ by at most one)."""
    ids = list(scene_ids)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(ids):
        raise ValueError(f"k={k} exceeds the number of scenes ({len(ids)})")
    perm = np.random.default_rng(seed).permutation(len(ids))
    return [[ids[i] for i in part] for part in np.array_split(perm, k)]


@dataclass
class CVResult:
    fold_reports: list[PRReport]
    fold_C: list[float]
    train_time: float
    pooled: PRReport

    def _mean(self, attr):
        return float(np.mean([getattr(r, attr) for r in self.fold_reports]))

    @property
    def micro_precision(self):
        return self._mean("micro_precision")

    @property
    def micro_recall(self):
        return self._mean("micro_recall")

    @property
    def macro_precision(self):
        return self._mean("macro_precision")

    @property
    def macro_recall(self):
        return self._mean("macro_recall")


def cross_validate(examples: list[TrainingExample], config: ModelConfig, k: int = 4, seed: int = 0,
                   C: float | None = None, C_grid=None, eps: float = 0.1,
                   train_inference: str = "mip", predict_inference: str = "mip",
                   max_iter: int = 500) -> CVResult:
    """k-fold CV at scene granularity; metrics are averaged over folds.

    With ``C_grid`` the regularization constant of each outer fold is chosen
    by an inner cross-validation on that fold's training scenes.
    """
    folds = kfold_split(range(len(examples)), k, seed)
    reports, chosen, truths, preds = [], [], [], []
    train_time = 0.0
    for f, test_idx in enumerate(folds):
        train_idx = [i for g, fold in enumerate(folds) if g != f for i in fold]
        tr = [examples[i] for i in train_idx]
        c = C if C is not None else config.C
        if C_grid is not None and len(tr) >= 2:
            inner_k = min(k - 1 if k > 2 else 2, len(tr))
            best = None
            for cand in C_grid:
                res = cross_validate(tr, config, inner_k, seed + 1, C=cand, eps=eps,
                                     train_inference=train_inference,
                                     predict_inference=predict_inference, max_iter=max_iter)
                key = res.micro_recall + res.micro_precision
                if best is None or key > best[0] + 1e-12:
                    best = (key, cand)
            c = best[1]
        t0 = time.perf_counter()
        model = train(tr, config, C=c, eps=eps, inference=train_inference, max_iter=max_iter)
        train_time += time.perf_counter() - t0
        T = [examples[i].truth for i in test_idx]
        P = [predict(examples[i].graph, model.weights, config, predict_inference) for i in test_idx]
        reports.append(score(T, P, config.label_space))
        chosen.append(c)
        truths += T
        preds += P
    return CVResult(reports, chosen, train_time, score(truths, preds, config.label_space))


def context_sweep(caches: list[FeatureCache], truths: list[Labeling], ranges, config: ModelConfig,
                  k: int = 4, seed: int = 0, C: float | None = None, eps: float = 0.1,
                  train_inference: str = "mip", predict_inference: str = "mip") -> list[dict]:
    """Retrain and evaluate at every context range; node and pair features come from the caches."""
    ranges = [float(r) for r in ranges]
    if not ranges or any(r <= 0 for r in ranges):
        raise ValueError("context ranges must be positive")
    if any(b < a for a, b in zip(ranges, ranges[1:])):
        raise ValueError("context ranges must be sorted ascending")
    rows = []
    for r in ranges:
        cfg = config.with_(context_range=r)
        graphs = [c.graph(r) for c in caches]
        examples = [TrainingExample(g, t, str(i)) for i, (g, t) in enumerate(zip(graphs, truths))]
        res = cross_validate(examples, cfg, k, seed, C=C, eps=eps,
                             train_inference=train_inference, predict_inference=predict_inference)
        rows.append({"range": r, "micro_precision": res.micro_precision,
                     "micro_recall": res.micro_recall,
                     "edges": int(sum(g.n_edges for g in graphs)),
                     "train_time": res.train_time})
    return rows


def format_sweep(rows: list[dict]) -> str:
    head = "range\tmicro_precision\tmicro_recall\tedges\ttrain_time"
    body = [f"{r['range']:.4g}\t{r['micro_precision']:.6f}\t{r['micro_recall']:.6f}\t"
            f"{r['edges']}\t{r['train_time']:.3f}" for r in rows]
    return "\n".join([head] + body)
