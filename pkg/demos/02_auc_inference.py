"""AUC standard errors, model comparison and the maximum-AUC estimator.

Run with ``python3 demos/02_auc_inference.py``. Each ``# %%`` block is a cell.
"""

# %% Baseline data with known coefficients (1, -0.5)
import numpy as np

from rocinfer.auc import (auc_influence, compare_models, sauc, selection_criterion,
                          table1_bootstrap)
from rocinfer.data import split
from rocinfer.models import fit_logit_mle, fit_max_auc
from rocinfer.scenarios import ScenarioSpec, generate

data = generate(ScenarioSpec("logit_baseline", 20000, seed=3)).data
train, test = split(data, 0.5, seed=3)

# %% Sample AUC: concordant positive/negative pairs, ties count zero
theta = np.array([1.0, -0.5])
print(f"SAUC at the true coefficients: {sauc(data.X @ theta, data.y):.4f}")

# %% Split-sample AUC with an influence-function standard error
fit = fit_logit_mle(train, fix_intercept_zero=True)
est = auc_influence(test, fit)
print(f"AUC {est.value:.4f} +- {est.std:.4f} (parameter noise included: "
      f"{est.includes_estimation_uncertainty})")

# %% Resample-and-resplit bootstrap summaries (kept small here)
summary = table1_bootstrap(data, B=30, seed=0)["summary"]
for name, s in summary.items():
    print(f"{name:11s} mean {s['mean']:.4f}  std {s['std']:.4f}")

# %% Which single feature ranks better? A paired comparison on one evaluation half
one = fit_logit_mle(train, True, features=[0])
two = fit_logit_mle(train, True, features=[1])
res = compare_models(test, one, two)
print(f"A1 {res.a1.value:.4f}  A2 {res.a2.value:.4f}  diff {res.diff:.4f} +- {res.std_diff:.4f}"
      f"  z {res.z:.1f}  p {res.p_value:.1e}")

# %% Maximum-AUC fit: first slope normalized to 1, the rest chosen to maximize SAUC
mx = fit_max_auc(train, seed=0)
print("max-AUC theta", mx.model.theta.round(4), "SAUC", round(mx.criterion_value, 4))
print("penalized criterion, both features vs x1 alone:",
      round(selection_criterion(mx.criterion_value, 1, train.n), 4),
      round(selection_criterion(sauc(train.X[:, 0], train.y), 0, train.n), 4))
