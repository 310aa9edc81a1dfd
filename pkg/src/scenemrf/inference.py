"""MAP inference for the pairwise model.

Three solvers share one instance type:

* :func:`infer_exact` enumerates every labeling (small instances only),
* :func:`infer_relaxed` solves the LP relaxation of the multi-label problem
  (sum-to-one constraint dropped) through the roof-duality network and one
  max-flow computation; the optimum is half-integral,
* :func:`infer_mip` is a best-first branch-and-bound over that relaxation and
  returns a provably optimal labeling in either label mode.

Everything is phrased as *maximization* of ``f(y) = c + h.y + sum J y_p y_q``
over binary indicators, variable ``p = i*K + k`` standing for ``y_i^k``.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .maxflow import min_cut
from .scene import LabelMode, LabelSpace, Labeling

EXACT_LIMIT = 10**7
EXHAUST_LIMIT = 10**6
DEFAULT_NODE_BUDGET = 10**5


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QPInstance:
    """Unary scores theta_i^k (N x K) and per-edge pair scores theta_ij^lk (E x K x K)."""

    unary: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), np.int64))
    pairwise: np.ndarray | None = None
    constant: float = 0.0

    def __post_init__(self):
        U = np.array(self.unary, dtype=float)
        if U.ndim != 2:
            raise ValueError("unary must be N x K")
        N, K = U.shape
        E = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        P = np.zeros((len(E), K, K)) if self.pairwise is None else np.array(self.pairwise, float)
        if P.shape != (len(E), K, K):
            raise ValueError(f"pairwise must be E x K x K, got {P.shape}")
        if len(E) and (E.min() < 0 or E.max() >= N or np.any(E[:, 0] == E[:, 1])):
            raise ValueError("edges must join two distinct existing nodes")
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(P)) and np.isfinite(self.constant)):
            raise ValueError("QP coefficients must be finite (NaN/inf rejected)")
        for a in (U, E, P):
            a.setflags(write=False)
        object.__setattr__(self, "unary", U)
        object.__setattr__(self, "edges", E)
        object.__setattr__(self, "pairwise", P)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def N(self) -> int:
        return self.unary.shape[0]

    @property
    def K(self) -> int:
        return self.unary.shape[1]

    def pair_terms(self) -> dict[tuple[int, int, int, int], float]:
        """Nonzero pair coefficients keyed by (i, j, l, k)."""
        out = {}
        for e, l, k in zip(*np.nonzero(self.pairwise)):
            i, j = self.edges[e]
            out[(int(i), int(j), int(l), int(k))] = float(self.pairwise[e, l, k])
        return out

    def with_unary_offset(self, offset, constant: float = 0.0) -> "QPInstance":
        return QPInstance(self.unary + offset, self.edges, self.pairwise, self.constant + constant)

    def evaluate(self, Y) -> float:
        """Objective of a (possibly half-integral) labeling matrix, z_ij^lk = y_i^l y_j^k."""
        Y = np.asarray(Y.values if isinstance(Y, Labeling) else Y, float)
        val = self.constant + float(np.sum(self.unary * Y))
        if len(self.edges):
            Yi, Yj = Y[self.edges[:, 0]], Y[self.edges[:, 1]]
            val += float(np.einsum("el,elk,ek->", Yi, self.pairwise, Yj))
        return val

    def to_binary(self) -> "BinaryQP":
        N, K = self.unary.shape
        e, l, k = np.nonzero(self.pairwise)
        p = self.edges[e, 0] * K + l
        q = self.edges[e, 1] * K + k
        return BinaryQP(self.constant, self.unary.reshape(-1).copy(), p, q,
                        self.pairwise[e, l, k].copy())


@dataclass(eq=False)
class BinaryQP:
    """maximize c + h.x + sum_m J[m] x[p[m]] x[q[m]] over x in {0,1}^n."""

    c: float
    h: np.ndarray
    p: np.ndarray
    q: np.ndarray
    J: np.ndarray

    @property
    def n(self) -> int:
        return len(self.h)

    def value(self, x) -> float:
        x = np.asarray(x, float)
        return float(self.c + self.h @ x + np.sum(self.J * x[self.p] * x[self.q]))

    def lp_value(self, x) -> float:
        """Value of the standard linearization at x with each z chosen optimally."""
        x = np.asarray(x, float)
        xp, xq = x[self.p], x[self.q]
        z = np.where(self.J > 0, np.minimum(xp, xq), np.maximum(0.0, xp + xq - 1.0))
        return float(self.c + self.h @ x + np.sum(self.J * z))

    def condition(self, fixed: np.ndarray) -> tuple["BinaryQP", np.ndarray]:
        """Substitute variables with ``fixed >= 0``; returns reduced QP and free-variable ids."""
        free = fixed < 0
        val = np.where(fixed == 1, 1.0, 0.0)
        fp, fq = free[self.p], free[self.q]
        c = self.c + float(self.h[~free] @ val[~free])
        both_fixed = ~fp & ~fq
        c += float(np.sum(self.J[both_fixed] * val[self.p[both_fixed]] * val[self.q[both_fixed]]))
        h = self.h.copy()
        m = fp & ~fq
        np.add.at(h, self.p[m], self.J[m] * val[self.q[m]])
        m = ~fp & fq
        np.add.at(h, self.q[m], self.J[m] * val[self.p[m]])
        ids = np.nonzero(free)[0]
        remap = -np.ones(len(h), np.int64)
        remap[ids] = np.arange(len(ids))
        keep = fp & fq
        return BinaryQP(c, h[ids], remap[self.p[keep]], remap[self.q[keep]], self.J[keep].copy()), ids


def compile_qp(graph, weights, config) -> QPInstance:
    """Unary and pairwise scores of a scene graph under the given weights."""
    from .model import ConfigurationError

    if graph.node_features.shape[1] != config.node_dim:
        raise ConfigurationError("graph features do not match the model configuration")
    unary = graph.node_features @ weights.node.T
    P = np.zeros((graph.n_edges, config.K, config.K))
    if graph.n_edges:
        for t, W in zip(config.edge_types, weights.edge):
            P[:, t.l, t.k] += graph.edge_block(t.features) @ W.T
    return QPInstance(unary, graph.edges, P)


def roof_dual(bqp: BinaryQP):
    """Half-integral LP optimum of a binary QP via the implication network.

    Returns ``(x, bound)`` where ``x`` takes values in {0, 0.5, 1}; integral
    entries are strongly persistent (shared by every optimal binary solution)
    and ``bound`` is a certified upper bound on the binary optimum (equal to
    the LP optimum up to rounding).
    """
    n = bqp.n
    if n == 0:
        return np.zeros(0), float(bqp.c)
    # minimize E = -f, rewritten as a posiform with positive coefficients on literals.
    # Literal u has node u for x_u and n+u for its complement; s=2n, t=2n+1.
    a = -bqp.h.astype(float).copy()
    b = -bqp.J
    const = -bqp.c
    p, q = bqp.p, bqp.q
    neg = b < 0
    np.add.at(a, p[neg], b[neg])
    # b<0: b x_p x_q = b x_p + |b| x_p ~x_q.  A term w*u*v becomes arcs
    # u -> ~v and v -> ~u of capacity w/2.
    u = p
    v = np.where(neg, q + n, q)
    comp_v = np.where(v >= n, v - n, v + n)
    comp_u = u + n
    w = np.abs(b) / 2.0
    pos1 = a > 0
    const += float(np.sum(a[~pos1]))
    lin_lit = np.where(pos1, np.arange(n), np.arange(n) + n)  # literal carrying |a|
    lin_w = np.abs(a) / 2.0
    comp_lin = np.where(lin_lit >= n, lin_lit - n, lin_lit + n)
    s, t = 2 * n, 2 * n + 1
    nz = w > 0
    lz = lin_w > 0
    tails = np.concatenate([u[nz], v[nz], lin_lit[lz], np.full(lz.sum(), s)])
    heads = np.concatenate([comp_v[nz], comp_u[nz], np.full(lz.sum(), t), comp_lin[lz]])
    caps = np.concatenate([w[nz], w[nz], lin_w[lz], lin_w[lz]])
    flow, S = min_cut(2 * n + 2, tails, heads, caps, s, t)
    pos_in = S[:n]
    neg_in = S[n:2 * n]
    x = np.full(n, 0.5)
    x[pos_in & ~neg_in] = 1.0
    x[neg_in & ~pos_in] = 0.0
    return x, -(const + flow)


@dataclass(frozen=True, eq=False)
class RelaxedSolution:
    values: np.ndarray
    persistency_mask: np.ndarray
    objective: float
    wall_time: float = 0.0

    @property
    def fractional_segments(self) -> np.ndarray:
        return np.nonzero(~np.all(self.persistency_mask, axis=1))[0]


def infer_relaxed(qp: QPInstance) -> RelaxedSolution:
    """Half-integral optimum of the multi-label LP relaxation (one max-flow)."""
    t0 = time.perf_counter()
    x, bound = roof_dual(qp.to_binary())
    X = x.reshape(qp.N, qp.K)
    mask = X != 0.5
    return RelaxedSolution(X, mask, bound, time.perf_counter() - t0)


# --------------------------------------------------------------------------- exact

def _exclusive_scores(qp: QPInstance, labels: np.ndarray) -> np.ndarray:
    idx = np.arange(qp.N)
    s = qp.constant + qp.unary[idx, labels].sum(axis=1)
    if len(qp.edges):
        e = np.arange(len(qp.edges))
        s = s + qp.pairwise[e, labels[:, qp.edges[:, 0]], labels[:, qp.edges[:, 1]]].sum(axis=1)
    return s


def _digits(start, stop, base, width):
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(idx), width), np.int64)
    for col in range(width - 1, -1, -1):
        out[:, col] = idx % base
        idx //= base
    return out


def infer_exact(qp: QPInstance, space: LabelSpace | LabelMode, chunk: int = 1 << 16):
    """Brute-force optimum; ties go to the lexicographically smallest labeling.

    Exclusive labelings are ordered by their class-index tuples, multi-label
    ones by the flattened 0/1 matrix (segment 0, class 0 most significant).
    """
    mode = space.mode if isinstance(space, LabelSpace) else LabelMode(space)
    N, K = qp.N, qp.K
    if mode is LabelMode.EXCLUSIVE:
        total, base, width = K ** N, K, N
    else:
        total, base, width = 2 ** (N * K), 2, N * K
    if total > EXACT_LIMIT:
        raise InstanceTooLarge(f"{total} labelings exceed the enumeration limit {EXACT_LIMIT}")
    bqp = qp.to_binary() if mode is LabelMode.MULTILABEL else None
    best_val, best_code = -np.inf, None
    for lo in range(0, total, chunk):
        codes = _digits(lo, min(total, lo + chunk), base, width)
        if bqp is None:
            vals = _exclusive_scores(qp, codes)
        else:
            X = codes.astype(float)
            vals = bqp.c + X @ bqp.h + (X[:, bqp.p] * X[:, bqp.q]) @ bqp.J
        m = vals.max()
        tol = 1e-12 * (1.0 + abs(m))
        if m > best_val + tol:
            first = int(np.argmax(vals >= m - tol))
            best_val, best_code = float(vals[first]), codes[first].copy()
    if mode is LabelMode.EXCLUSIVE:
        Y = Labeling.from_classes(best_code, K)
    else:
        Y = Labeling(best_code.reshape(N, K).astype(float))
    return Y, qp.evaluate(Y)


# --------------------------------------------------------------------------- rounding

class RoundingPolicy(str, Enum):
    ABSTAIN = "abstain"
    EXHAUST = "exhaust"


def _best_completion(qp: QPInstance, Y: np.ndarray, rows: np.ndarray, mode: LabelMode) -> np.ndarray:
    """Enumerate the joint assignment of ``rows`` (others held fixed) when small enough."""
    K = qp.K
    rows = np.asarray(rows, np.int64)
    Y = Y.copy()
    if mode is LabelMode.EXCLUSIVE:
        size = K ** len(rows)
    else:
        free_vars = [(i, k) for i in rows for k in range(K) if Y[i, k] == 0.5]
        size = 2 ** len(free_vars)
    if len(rows) == 0:
        return Y
    if size > EXHAUST_LIMIT:
        for i in rows:
            Y[i] = 0.0
            if mode is LabelMode.EXCLUSIVE:
                Y[i, int(np.argmax(qp.unary[i]))] = 1.0
            else:
                Y[i] = np.where(Y[i] == 0.5, (qp.unary[i] > 0).astype(float), Y[i])
        return Y
    sub = _restrict(qp, Y, rows, mode)
    lab, _ = infer_exact(sub, mode)
    if mode is LabelMode.EXCLUSIVE:
        Y[rows] = lab.values
    else:
        bits = lab.values.reshape(-1)
        for (i, k), b in zip(free_vars, bits):
            Y[i, k] = b
    return Y


def _restrict(qp: QPInstance, Y: np.ndarray, rows: np.ndarray, mode: LabelMode) -> QPInstance:
    """QP over ``rows`` with every other segment clamped to its value in Y."""
    K = qp.K
    inside = np.zeros(qp.N, bool)
    inside[rows] = True
    local = -np.ones(qp.N, np.int64)
    local[rows] = np.arange(len(rows))
    U = qp.unary[rows].copy()
    const = qp.constant + float(np.sum(qp.unary[~inside] * Y[~inside]))
    sub_edges, sub_pw = [], []
    for e, (i, j) in enumerate(qp.edges):
        P = qp.pairwise[e]
        if inside[i] and inside[j]:
            sub_edges.append((local[i], local[j]))
            sub_pw.append(P)
        elif inside[i]:
            U[local[i]] += P @ Y[j]
        elif inside[j]:
            U[local[j]] += Y[i] @ P
        else:
            const += float(Y[i] @ P @ Y[j])
    if mode is LabelMode.MULTILABEL:
        # variables already integral inside the rows are clamped through huge unaries
        sub = QPInstance(U, np.array(sub_edges, np.int64).reshape(-1, 2),
                         np.array(sub_pw).reshape(-1, K, K), const)
        return _clamp_integral(sub, Y[rows])
    return QPInstance(U, np.array(sub_edges, np.int64).reshape(-1, 2),
                      np.array(sub_pw).reshape(-1, K, K), const)


def _clamp_integral(sub: QPInstance, Yrows: np.ndarray) -> QPInstance:
    """Collapse a multi-label QP to its 0.5-valued variables (one pseudo-class per variable)."""
    bqp = sub.to_binary()
    flat = Yrows.reshape(-1)
    fixed = np.where(flat == 0.5, -1, flat).astype(np.int64)
    red, _ = bqp.condition(fixed)
    n = red.n
    # express the reduced binary QP as an n x 1 multilabel instance
    edges = np.stack([red.p, red.q], axis=1) if len(red.p) else np.zeros((0, 2), np.int64)
    same = red.p == red.q
    h = red.h.copy()
    np.add.at(h, red.p[same], red.J[same])
    keep = ~same
    return QPInstance(h.reshape(n, 1), edges[keep], red.J[keep].reshape(-1, 1, 1), red.c)


def round_relaxed(solution: RelaxedSolution, qp: QPInstance, space: LabelSpace,
                  policy: RoundingPolicy | str = RoundingPolicy.ABSTAIN) -> Labeling:
    """Turn a half-integral solution into a labeling.

    ``abstain`` leaves undecided segments unlabeled (all-zero row).  In
    exclusive mode a segment is undecided when its row is fractional or not a
    clean one-hot.  ``exhaust`` enumerates the undecided segments jointly with
    the rest clamped, falling back to per-segment best unary above 10^6
    combinations.
    """
    policy = RoundingPolicy(policy)
    X = np.array(solution.values, float)
    exclusive = space.mode is LabelMode.EXCLUSIVE
    frac_rows = np.any(X == 0.5, axis=1)
    if exclusive:
        undecided = frac_rows | (X.sum(axis=1) != 1)
    else:
        undecided = frac_rows
    if policy is RoundingPolicy.ABSTAIN:
        if exclusive:
            X[undecided] = 0.0
        else:
            X[X == 0.5] = 0.0
            # multi-label abstention: fractional attributes are dropped, row kept
        return Labeling(X)
    rows = np.nonzero(undecided)[0]
    if exclusive:
        X[rows] = 0.0
    return Labeling(_best_completion(qp, X, rows, space.mode))


def abstained_segments(labeling: Labeling) -> np.ndarray:
    return np.nonzero(labeling.unlabeled())[0]


# --------------------------------------------------------------------------- MIP

@dataclass(frozen=True, eq=False)
class MIPResult:
    labeling: Labeling
    objective: float
    optimal: bool
    bound: float
    nodes: int
    branches: int
    wall_time: float

    def __iter__(self):
        return iter((self.labeling, self.objective))


def _icm_exclusive(qp: QPInstance, labels: np.ndarray, max_sweeps: int = 20) -> np.ndarray:
    labels = labels.copy()
    nbrs = [[] for _ in range(qp.N)]
    for e, (i, j) in enumerate(qp.edges):
        nbrs[i].append((e, j, True))
        nbrs[j].append((e, i, False))
    for _ in range(max_sweeps):
        changed = False
        for i in range(qp.N):
            s = qp.unary[i].copy()
            for e, j, first in nbrs[i]:
                s += qp.pairwise[e][:, labels[j]] if first else qp.pairwise[e][labels[j], :]
            k = int(np.argmax(s))
            if s[k] > s[labels[i]] + 1e-12 * (1 + abs(s[k])):
                labels[i] = k
                changed = True
        if not changed:
            break
    return labels


def _icm_binary(bqp: BinaryQP, x: np.ndarray, max_sweeps: int = 20,
                coupling: np.ndarray | None = None) -> np.ndarray:
    x = np.asarray(x, float).copy()
    if coupling is None:
        coupling = _dense_coupling(bqp)
    g = bqp.h + coupling @ x
    for _ in range(max_sweeps):
        changed = False
        for v in range(bqp.n):
            want = 1.0 if g[v] > 0 else 0.0
            if want != x[v] and abs(g[v]) > 1e-12:
                g += (want - x[v]) * coupling[:, v]
                x[v] = want
                changed = True
        if not changed:
            break
    return x


def _dense_coupling(bqp: BinaryQP) -> np.ndarray:
    M = np.zeros((bqp.n, bqp.n))
    np.add.at(M, (bqp.p, bqp.q), bqp.J)
    np.add.at(M, (bqp.q, bqp.p), bqp.J)
    return M


class _Search:
    """Best-first branch-and-bound state shared by both label modes."""

    def __init__(self, qp: QPInstance, mode: LabelMode, node_budget: int):
        self.qp = qp
        self.mode = mode
        self.N, self.K = qp.N, qp.K
        self.bqp = qp.to_binary()
        self.coupling = _dense_coupling(self.bqp) if mode is LabelMode.MULTILABEL else None
        self.node_budget = node_budget
        self.best_val = -np.inf
        self.best_x = None
        self.nodes = 0
        self.branches = 0
        scale = np.abs(self.bqp.h).sum() + np.abs(self.bqp.J).sum() + abs(self.bqp.c)
        self.tol = 1e-11 * (1.0 + scale)

    # incumbents -----------------------------------------------------------
    def offer(self, x: np.ndarray):
        if self.mode is LabelMode.EXCLUSIVE:
            X = x.reshape(self.N, self.K)
            labels = np.where(X.sum(axis=1) > 0, X.argmax(axis=1), self.qp.unary.argmax(axis=1))
            labels = _icm_exclusive(self.qp, labels)
            x = np.zeros(self.N * self.K)
            x[np.arange(self.N) * self.K + labels] = 1.0
        else:
            x = _icm_binary(self.bqp, x, coupling=self.coupling)
        val = self.bqp.value(x)
        if val > self.best_val:
            self.best_val, self.best_x = val, x

    # bounds ---------------------------------------------------------------
    def relax(self, fixed: np.ndarray, lam: np.ndarray | None):
        """Relaxed bound at a node; exclusive mode adds Lagrange shifts of the row sums."""
        red, ids = self.bqp.condition(fixed)
        if self.mode is LabelMode.MULTILABEL or lam is None:
            xr, bound = roof_dual(red)
            return self._lift(fixed, ids, xr), bound
        rows = ids // self.K
        open_rows = self._open_rows(fixed)
        best = None
        lam = lam.copy()
        steps = 12 if self.nodes == 0 else 4
        for it in range(steps):
            shifted = BinaryQP(red.c - float(lam[open_rows].sum()), red.h + lam[rows],
                               red.p, red.q, red.J)
            xr, bound = roof_dual(shifted)
            if best is None or bound < best[1]:
                best = (xr, bound, lam.copy())
            g = np.zeros(self.N)
            np.add.at(g, rows, xr)
            g = g - 1.0
            g[~open_rows] = 0.0
            gg = float(g @ g)
            if gg < 1e-12:
                break
            gap = bound - self.best_val if np.isfinite(self.best_val) else \
                0.1 * (1.0 + abs(bound))
            if gap <= self.tol:
                break
            lam -= (gap / gg) * g
        xr, bound, lam = best
        return self._lift(fixed, ids, xr), bound, lam

    def _open_rows(self, fixed: np.ndarray) -> np.ndarray:
        F = fixed.reshape(self.N, self.K)
        return ~np.any(F == 1, axis=1)

    def _lift(self, fixed, ids, xr):
        x = np.where(fixed == 1, 1.0, 0.0)
        x[ids] = xr
        return x

    # branching ------------------------------------------------------------
    def propagate(self, fixed: np.ndarray) -> np.ndarray | None:
        """Apply the exclusive row rules; None when a row becomes infeasible."""
        if self.mode is LabelMode.MULTILABEL:
            return fixed
        F = fixed.reshape(self.N, self.K).copy()
        ones = (F == 1).sum(axis=1)
        if np.any(ones > 1):
            return None
        for i in np.nonzero(ones == 1)[0]:
            F[i][F[i] < 0] = 0
        free = (F < 0).sum(axis=1)
        if np.any((ones == 0) & (free == 0)):
            return None
        for i in np.nonzero((ones == 0) & (free == 1))[0]:
            F[i][F[i] < 0] = 1
        return F.reshape(-1)

    def feasible(self, x: np.ndarray) -> bool:
        if np.any(x == 0.5):
            return False
        if self.mode is LabelMode.MULTILABEL:
            return True
        return bool(np.all(x.reshape(self.N, self.K).sum(axis=1) == 1))

    def pick_branch_var(self, fixed: np.ndarray, x: np.ndarray) -> int:
        free = fixed < 0
        cand = free & (x == 0.5)
        if not cand.any() and self.mode is LabelMode.EXCLUSIVE:
            X = x.reshape(self.N, self.K)
            bad_rows = X.sum(axis=1) != 1
            cand = free & np.repeat(bad_rows, self.K)
        if not cand.any():
            cand = free
        ids = np.nonzero(cand)[0]
        mag = np.abs(self.bqp.h[ids])
        return int(ids[np.argmax(mag)])


def _components(qp: QPInstance) -> list[np.ndarray]:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    active = np.any(qp.pairwise != 0, axis=(1, 2))
    E = qp.edges[active]
    A = coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(qp.N, qp.N))
    _, comp = connected_components(A, directed=False)
    return [np.nonzero(comp == c)[0] for c in range(comp.max() + 1)] if qp.N else []


def _sub_instance(qp: QPInstance, nodes: np.ndarray) -> QPInstance:
    local = -np.ones(qp.N, np.int64)
    local[nodes] = np.arange(len(nodes))
    keep = (local[qp.edges[:, 0]] >= 0) & (local[qp.edges[:, 1]] >= 0) if len(qp.edges) else \
        np.zeros(0, bool)
    return QPInstance(qp.unary[nodes], local[qp.edges[keep]], qp.pairwise[keep])


def infer_mip(qp: QPInstance, space: LabelSpace | LabelMode, mode: LabelMode | str | None = None,
              node_budget: int = DEFAULT_NODE_BUDGET) -> MIPResult:
    """Optimal labeling of the integer program by branch-and-bound.

    The problem splits over connected components of the interaction graph;
    isolated segments are solved directly and every other component by its
    own search.  Bounds come from the roof-dual relaxation of each
    subproblem; in exclusive mode the row constraints are enforced by
    branching and the bounds are tightened with a few Lagrangian subgradient
    steps on the row sums.  If the node budget runs out the best incumbent is
    returned with ``optimal=False``.
    """
    t0 = time.perf_counter()
    if mode is None:
        mode = space.mode if isinstance(space, LabelSpace) else space
    mode = LabelMode(mode)
    Y = np.zeros((qp.N, qp.K))
    optimal, bound, nodes, branches = True, qp.constant, 0, 0
    for comp in _components(qp):
        if len(comp) == 1:
            u = qp.unary[comp[0]]
            if mode is LabelMode.EXCLUSIVE:
                Y[comp[0], int(np.argmax(u))] = 1.0
                bound += float(u.max())
            else:
                Y[comp[0]] = u > 0
                bound += float(np.maximum(u, 0).sum())
            nodes += 1
            continue
        res = _infer_mip_connected(_sub_instance(qp, comp), mode, node_budget)
        Y[comp] = res.labeling.values
        optimal &= res.optimal
        bound += res.bound
        nodes += res.nodes
        branches += res.branches
    Y = Labeling(Y)
    return MIPResult(Y, qp.evaluate(Y), optimal, float(bound), nodes, branches,
                     time.perf_counter() - t0)


def _infer_mip_connected(qp: QPInstance, mode: LabelMode, node_budget: int) -> MIPResult:
    t0 = time.perf_counter()
    S = _Search(qp, mode, node_budget)
    n = S.bqp.n
    counter = itertools.count()
    root = S.propagate(-np.ones(n, np.int64))
    lam0 = np.zeros(S.N) if mode is LabelMode.EXCLUSIVE else None
    heap = []

    def expand(fixed, lam):
        out = S.relax(fixed, lam)
        x, bound = out[0], out[1]
        lam = out[2] if len(out) == 3 else None
        S.nodes += 1
        if mode is LabelMode.MULTILABEL:
            # strongly persistent variables of the subproblem are fixed for its subtree
            fixed = np.where((fixed < 0) & (x != 0.5), x, fixed).astype(np.int64)
        S.offer(np.where(x == 0.5, (S.bqp.h > 0).astype(float), x))
        if S.feasible(x):
            val = S.bqp.value(x)
            if val > S.best_val:
                S.best_val, S.best_x = val, x.copy()
            return
        if bound <= S.best_val + S.tol:
            return
        heapq.heappush(heap, (-bound, next(counter), fixed, x, lam))

    expand(root, lam0)
    global_bound = -heap[0][0] if heap else S.best_val
    optimal = True
    while heap:
        negb, _, fixed, x, lam = heapq.heappop(heap)
        global_bound = -negb
        if -negb <= S.best_val + S.tol:
            continue
        if S.nodes >= node_budget:
            optimal = False
            heapq.heappush(heap, (negb, next(counter), fixed, x, lam))
            break
        v = S.pick_branch_var(fixed, x)
        S.branches += 1
        for val in (1, 0):
            child = fixed.copy()
            child[v] = val
            child = S.propagate(child)
            if child is None:
                continue
            if np.all(child >= 0):
                xc = child.astype(float)
                if S.feasible(xc):
                    S.nodes += 1
                    cval = S.bqp.value(xc)
                    if cval > S.best_val:
                        S.best_val, S.best_x = cval, xc
                continue
            expand(child, lam)
    if not heap:
        global_bound = S.best_val
    else:
        global_bound = max(S.best_val, -heap[0][0])
    Y = Labeling(S.best_x.reshape(S.N, S.K))
    return MIPResult(Y, qp.evaluate(Y), optimal, float(global_bound), S.nodes, S.branches,
                     time.perf_counter() - t0)
