"""A tour of the three inference routes on tiny hand-made problems.

Run:  python3 demos/01_inference_tour.py
"""
import numpy as np

from scenemrf.inference import QPInstance, infer_exact, infer_mip, infer_relaxed, round_relaxed
from scenemrf.scene import LabelMode, LabelSpace

np.set_printoptions(precision=3, suppress=True)

# --- 1. an attractive (submodular) chain: the relaxation is already exact
rng = np.random.default_rng(0)
chain = QPInstance(rng.normal(size=(5, 3)) - 1.5, [[i, i + 1] for i in range(4)],
                   np.abs(rng.normal(size=(4, 3, 3))))
sol = infer_relaxed(chain)
print("attractive chain")
print("  relaxed values\n", sol.values)
print("  every entry persistent:", bool(sol.persistency_mask.all()))
print("  relaxed objective %.4f, exact multi-label optimum %.4f"
      % (sol.objective, infer_exact(chain, LabelMode.MULTILABEL)[1]))

# --- 2. a frustrated triangle: three nodes that each want "on" but repel pairwise
tri = QPInstance([[1.0], [1.0], [1.0]], [[0, 1], [1, 2], [0, 2]], -3.0 * np.ones((3, 1, 1)))
sol = infer_relaxed(tri)
print("\nfrustrated triangle")
print("  relaxed values", sol.values.ravel(), "(half-integral, nothing persistent)")
print("  relaxed bound %.2f >= exact %.2f" % (sol.objective, infer_exact(tri, LabelMode.MULTILABEL)[1]))
space = LabelSpace(("on",), mode=LabelMode.MULTILABEL)
for policy in ("abstain", "exhaust"):
    Y = round_relaxed(sol, tri, space, policy)
    print(f"  rounding '{policy}':", Y.values.ravel(), "objective", tri.evaluate(Y))

# --- 3. the exclusive MIP against brute force on a random dense problem
qp = QPInstance(rng.normal(size=(7, 4)), [[i, j] for i in range(7) for j in range(i + 1, 7)],
                rng.normal(size=(21, 4, 4)))
res = infer_mip(qp, LabelMode.EXCLUSIVE)
Y, best = infer_exact(qp, LabelMode.EXCLUSIVE)
print("\nrandom dense instance, 7 nodes x 4 classes")
print("  MIP labels  ", res.labeling.classes(), "objective %.6f" % res.objective,
      f"({res.nodes} search nodes, {res.branches} branches)")
print("  enumeration ", Y.classes(), "objective %.6f" % best)
print("  root relaxation bound %.6f" % infer_relaxed(qp).objective)
