"""Max-margin training with the 1-slack cutting-plane algorithm (margin rescaling).

Per iteration, loss-augmented inference finds the most violated labeling of
every training scene. Their averaged joint-feature difference and loss make
one aggregated constraint ``w . g >= L - xi``. The dual QP over the working
set is re-solved by pairwise coordinate ascent.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .graph import SceneGraph
from .inference import (RoundingPolicy, compile_qp, infer_exact, infer_mip,
                        infer_relaxed, round_relaxed)
from .model import ModelConfig, Weights, discriminant, joint_feature_map, parameter_count
from .scene import LabelMode, Labeling, hamming_loss, validate_labeling

log = logging.getLogger(__name__)

INFERENCE_METHODS = ("mip", "exact", "relaxed")


@dataclass(frozen=True, eq=False)
class TrainingExample:
    graph: SceneGraph
    truth: Labeling
    scene_id: str = ""


@dataclass
class CuttingPlaneState:
    C: float
    eps: float
    dim: int
    G: list = field(default_factory=list)      # aggregated Psi differences
    L: list = field(default_factory=list)      # aggregated losses
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    w: np.ndarray | None = None
    gram: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        if self.C <= 0 or self.eps <= 0:
            raise ValueError("C and eps must be positive")
        if self.w is None:
            self.w = np.zeros(self.dim)

    def add(self, g, loss):
        g = np.asarray(g, float)
        row = np.array([gi @ g for gi in self.G] + [g @ g])
        n = len(self.G)
        gram = np.zeros((n + 1, n + 1))
        gram[:n, :n] = self.gram
        gram[n, :] = row
        gram[:, n] = row
        self.gram = gram
        self.G.append(g)
        self.L.append(float(loss))
        self.alpha = np.append(self.alpha, 0.0)

    def dual(self) -> float:
        a = self.alpha
        return float(a @ np.asarray(self.L) - 0.5 * a @ self.gram @ a) if len(a) else 0.0

    def slack(self, w=None) -> float:
        """Smallest slack satisfying every working-set constraint at ``w``."""
        if not self.G:
            return 0.0
        w = self.w if w is None else w
        return max(0.0, max(L - w @ g for g, L in zip(self.G, self.L)))

    def primal(self) -> float:
        return 0.5 * float(self.w @ self.w) + self.C * self.slack()


def solve_qp_subproblem(state: CuttingPlaneState, tol: float | None = None,
                        max_iter: int = 1_000_000) -> CuttingPlaneState:
    """Maximize sum a_c L_c - 1/2 |sum a_c g_c|^2 over a >= 0, sum a <= C.

    A slack coordinate with zero loss and zero feature vector turns the
    inequality into an equality, so SMO-style pair updates keep feasibility.
    Stops when the maximal KKT violation is at most ``tol`` (1e-6 C).
    """
    n = len(state.L)
    if n == 0:
        raise ValueError("working set is empty")
    C = state.C
    tol = 1e-6 * C if tol is None else tol
    Q = np.zeros((n + 1, n + 1))
    Q[:n, :n] = state.gram
    lin = np.append(np.asarray(state.L, float), 0.0)
    a = np.append(state.alpha, max(0.0, C - state.alpha.sum()))
    grad = lin - Q @ a
    # loss-scale tolerance on the gradient spread
    for _ in range(max_iter):
        up = int(np.argmax(grad))
        movable = a > 0
        movable_grad = np.where(movable, grad, np.inf)
        down = int(np.argmin(movable_grad))
        gap = grad[up] - movable_grad[down]
        if gap <= tol or up == down:
            break
        eta = Q[up, up] + Q[down, down] - 2 * Q[up, down]
        step = a[down] if eta <= 1e-18 else min(a[down], gap / eta)
        a[up] += step
        a[down] -= step
        grad -= step * (Q[:, up] - Q[:, down])
    state.alpha = np.maximum(a[:n], 0.0)
    state.w = np.asarray(state.G).T @ state.alpha
    return state


def subproblem_gap(state: CuttingPlaneState) -> float:
    return state.primal() - state.dual()


def _loss_offsets(truth: Labeling, mode: LabelMode):
    T = truth.values
    if mode is LabelMode.MULTILABEL:
        return 1.0 - 2.0 * T, float(T.sum())
    labeled = T.any(axis=1, keepdims=True)
    return np.where(labeled, 1.0 - T, 0.0), 0.0


def loss_augmented_infer(example: TrainingExample, weights: Weights, config: ModelConfig,
                         inference: str = "mip", node_budget: int | None = None):
    """argmax_y [loss(y_true, y) + score(y)]; returns (y_hat, violation, exact flag)."""
    space = config.label_space
    qp = compile_qp(example.graph, weights, config)
    offset, const = _loss_offsets(example.truth, space.mode)
    aug = qp.with_unary_offset(offset, const)
    exact = True
    if inference == "exact":
        y_hat, _ = infer_exact(aug, space)
    elif inference == "mip":
        kw = {} if node_budget is None else {"node_budget": node_budget}
        res = infer_mip(aug, space, **kw)
        y_hat, exact = res.labeling, res.optimal
    elif inference == "relaxed":
        y_hat = round_relaxed(infer_relaxed(aug), aug, space, RoundingPolicy.EXHAUST)
        exact = False
    else:
        raise ValueError(f"unknown inference method {inference!r}; use one of {INFERENCE_METHODS}")
    loss = hamming_loss(example.truth, y_hat, mode=space.mode)
    violation = (loss + discriminant(example.graph, y_hat, weights, config)
                 - discriminant(example.graph, example.truth, weights, config))
    return y_hat, float(violation), exact


@dataclass(eq=False)
class TrainResult:
    weights: Weights
    trace: list[dict]
    converged: bool
    max_violation: float
    slack: float
    eps: float
    C: float
    inference: str
    exact_constraints: bool   # every constraint came from an exact argmax
    wall_time: float

    @property
    def certificate(self) -> bool:
        return self.converged and self.max_violation <= self.slack + self.eps

    @property
    def iterations(self) -> int:
        return len(self.trace)


def _check_dataset(dataset, config):
    if not dataset:
        raise ValueError("training set is empty")
    for ex in dataset:
        ex.graph.check_finite()
        if ex.truth.shape != (ex.graph.N, config.K):
            raise ValueError(f"scene {ex.scene_id!r}: labeling shape {ex.truth.shape} "
                             f"!= ({ex.graph.N}, {config.K})")
        bad = validate_labeling(ex.truth, config.label_space, allow_unlabeled=True)
        if bad:
            raise ValueError(f"scene {ex.scene_id!r}: invalid ground truth rows {bad}")


def train(dataset: list[TrainingExample], config: ModelConfig, C: float | None = None,
          eps: float = 0.1, inference: str = "mip", max_iter: int = 500,
          node_budget: int | None = None, callback=None) -> TrainResult:
    """Cutting-plane training from zero weights.

    Stops when the most violated aggregated constraint exceeds the current
    slack by at most ``eps``.  One log line per iteration, key=value formatted.
    ``callback(row, weights)`` sees each trace row with the weights it was
    computed at.
    """
    C = config.C if C is None else C
    _check_dataset(dataset, config)
    t0 = time.perf_counter()
    state = CuttingPlaneState(C, eps, parameter_count(config))
    psi_true = [joint_feature_map(ex.graph, ex.truth, config) for ex in dataset]
    trace, exact_all, converged = [], True, False
    max_violation = slack = 0.0
    n = len(dataset)
    for it in range(max_iter):
        weights = Weights.from_vector(config, state.w)
        g = np.zeros(state.dim)
        loss = 0.0
        for ex, pt in zip(dataset, psi_true):
            y_hat, _, exact = loss_augmented_infer(ex, weights, config, inference, node_budget)
            exact_all &= exact
            g += pt - joint_feature_map(ex.graph, y_hat, config)
            loss += hamming_loss(ex.truth, y_hat, mode=config.label_space.mode)
        g /= n
        loss /= n
        max_violation = loss - float(state.w @ g)
        slack = state.slack()
        primal = 0.5 * float(state.w @ state.w) + C * max(0.0, max_violation)
        row = {"iter": it, "dual": state.dual(), "primal": primal,
               "max_violation": max_violation, "slack": slack,
               "constraints": len(state.L), "wall_time": time.perf_counter() - t0}
        trace.append(row)
        log.info(format_log_line(row))
        if callback is not None:
            callback(row, weights)
        if max_violation <= slack + eps:
            converged = True
            break
        state.add(g, loss)
        solve_qp_subproblem(state)
    return TrainResult(Weights.from_vector(config, state.w), trace, converged, max_violation,
                       slack, eps, C, inference, exact_all and inference != "relaxed",
                       time.perf_counter() - t0)


def format_log_line(row: dict) -> str:
    return " ".join(f"{k}={v:.9g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items())


def parse_log_line(line: str) -> dict:
    out = {}
    for tok in line.split():
        k, _, v = tok.partition("=")
        out[k] = int(v) if k in ("iter", "constraints") else float(v)
    return out


def predict(graph: SceneGraph, weights: Weights, config: ModelConfig, inference: str = "mip",
            policy: RoundingPolicy | str = RoundingPolicy.ABSTAIN) -> Labeling:
    """Labels for one scene; ``graphcut`` solves the relaxation and rounds by ``policy``."""
    qp = compile_qp(graph, weights, config)
    space = config.label_space
    if inference == "exact":
        return infer_exact(qp, space)[0]
    if inference == "mip":
        return infer_mip(qp, space).labeling
    if inference in ("graphcut", "relaxed"):
        return round_relaxed(infer_relaxed(qp), qp, space, policy)
    raise ValueError(f"unknown inference method {inference!r}")
