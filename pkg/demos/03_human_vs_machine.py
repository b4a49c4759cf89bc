"""Comparing decision makers with a machine ROC: where aggregate points mislead.

Run with ``python3 demos/03_human_vs_machine.py``. Each ``# %%`` block is a cell.
"""

# %% Population ROCs built from the true propensity have no concave violations
from rocinfer.scenarios import (ScenarioSpec, generate, jensen_demo, lemma1_demo, lemma2_demo,
                                lemma3_demo, lemma4_demo, lemma5_demo, proc_curve)

for kind, res in lemma1_demo().items():
    print(f"{kind:26s} concavity violations: {res['violations']}")

# %% Averaging distinct points on one concave ROC lands strictly below it
jn = jensen_demo()
print(f"average point ({jn.average.fpr:.3f}, {jn.average.tpr:.3f}); "
      f"curve there {jn.curve_at_average:.3f}; gap {jn.margin:.4f}")

# %% Cutoffs that vary with a feature push the aggregate pair below the optimal ROC
l2 = lemma2_demo(draws=200_000, seed=0)
print(f"aggregate ({l2.aggregate.fpr:.3f}, {l2.aggregate.tpr:.3f}); "
      f"optimal TPR {l2.beta_optimal:.3f}; margin {l2.margin:.4f} (se {l2.se:.4f})")

# %% A decision rule monotone in the propensity reproduces the machine ROC exactly
print("PROC == MROC:", lemma3_demo(n=5000, seed=0)["identical_point_sets"])

# %% One common cutoff with a misspecified decision model collapses the PROC to a point
l4 = lemma4_demo(n=50_000, seed=0)
print(f"aggregate pair ({l4.aggregate.fpr:.3f}, {l4.aggregate.tpr:.3f}); "
      f"binned PROC spread {l4.max_interior_distance:.4f}")

# %% Extra information u: the ROC of p(x, u) dominates the ROC of p(x)
l5 = lemma5_demo(draws=200_000, seed=0)
print("dominates:", l5.dominates, " strict somewhere:", l5.strict)
print(f"aggregate pair sits {l5.aggregate_gap:.2e} below the p(x, u) curve")

# %% Predicted-decision ROC from a fitted decision model on a simulated sample
sim = generate(ScenarioSpec("info_monotone", 5000, 1))
proc = proc_curve(sim.data, "logit")
print(f"PROC points: {len(proc.curve)}; area {proc.curve.area():.4f}")
