"""ROC curves and pointwise confidence bands on the logit baseline design.

Run with ``python3 demos/01_roc_bands.py``. Each ``# %%`` block is a cell.
"""

# %% Simulate the baseline design and split it 1:1
import numpy as np

from rocinfer.bands import bootstrap_band, horizontal_band, monotone_band, vertical_band
from rocinfer.data import split
from rocinfer.models import ModelRecipe, fit_logit_mle
from rocinfer.roc import empirical_roc
from rocinfer.scenarios import ScenarioSpec, generate, population_beta

spec = ScenarioSpec("logit_baseline", 20000, seed=1)
data = generate(spec).data
train, test = split(data, 0.5, seed=1)
print(f"n={data.n}, prevalence={data.y.mean():.3f}")

# %% Fit on the training half, trace the ROC on the evaluation half
fit = fit_logit_mle(train, fix_intercept_zero=True)
curve = empirical_roc(fit.model.scores(test), test.y)
print("theta_hat", fit.model.theta.round(4), "+-", fit.std_errors.round(4))
print(f"{len(curve)} ROC points, trapezoid area {curve.area():.4f}")

# %% Analytic band: the influence term carries both the evaluation and training noise
grid = np.round(np.arange(0.1, 0.91, 0.1), 10)
band = vertical_band(test, fit, grid, level=0.95)
truth = population_beta(spec, grid)
print(" alpha  beta_hat  lower   upper   truth")
for row in zip(grid, band.beta_hat, band.lower, band.upper, truth):
    print("  %.1f   %.4f   %.4f  %.4f  %.4f" % row)

# %% Percentile bootstrap band from resample-then-split replicates
boot = bootstrap_band(data, ModelRecipe("logit_mle", fix_intercept_zero=True), 200, grid, seed=2)
print("half-width ratio bootstrap/analytic:",
      np.round((boot.upper - boot.lower) / (band.upper - band.lower), 2))

# %% The same region read horizontally: FPR interval at each TPR level
hb = horizontal_band(monotone_band(band), beta_grid=[0.5, 0.7, 0.9])
for b, lo, hi in zip(hb.beta_grid, hb.alpha_lower, hb.alpha_upper):
    print(f"TPR {b:.1f}: FPR in [{lo:.3f}, {hi:.3f}]")

# %% Widths shrink at the root-n rate
for n in (2000, 8000, 32000):
    tr, te = split(generate(ScenarioSpec("logit_baseline", n, seed=n)).data, 0.5, seed=0)
    hw = vertical_band(te, fit_logit_mle(tr), grid).half_width.mean()
    print(f"n={n:6d}  mean half-width {hw:.4f}  x sqrt(n) {hw * np.sqrt(n):.3f}")
