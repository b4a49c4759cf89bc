"""AUC estimation, influence-function standard errors and model comparison.

The AUC of record uses the strict kernel ``1(s_i > s_j) y_i (1 - y_j)``, so
tied scores count zero.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import __version__, _rng
from ._ustat import concordant_pairs, count_above, count_below, smoothed_pair_mean
from .bands import bootstrap_replicates, stack_influence
from .data import Dataset, split_indices
from .errors import DegenerateComparisonError, UndefinedRateError
from .models import FitResult, LogitModel, ModelRecipe, influence_step, numeric_moment_derivative


@dataclass(frozen=True, eq=False)
class AucEstimate:
    value: float
    xi: np.ndarray
    std: float
    includes_estimation_uncertainty: bool
    split_aware: bool = False
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"value": self.value, "std": self.std, "n_influence": len(self.xi),
                "includes_estimation_uncertainty": self.includes_estimation_uncertainty,
                "split_aware": self.split_aware, "notes": list(self.notes)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def xi_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "xi"])
            for i, v in enumerate(self.xi):
                w.writerow([i, repr(float(v))])


@dataclass(frozen=True, eq=False)
class ComparisonResult:
    a1: AucEstimate
    a2: AucEstimate
    diff: float
    std_diff: float
    z: float
    p_value: float
    alternative: str = "two-sided"

    def to_dict(self) -> dict:
        return {"version": __version__, "a1": self.a1.value, "a2": self.a2.value,
                "std1": self.a1.std, "std2": self.a2.std, "diff": self.diff,
                "std_diff": self.std_diff, "z": self.z, "p_value": self.p_value,
                "alternative": self.alternative}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _labels(labels):
    y = np.asarray(labels).astype(int)
    n1 = int(y.sum())
    if n1 == 0 or n1 == len(y):
        raise UndefinedRateError("AUC needs both label classes")
    return y, n1, len(y) - n1


def sauc(scores, labels) -> float:
    """Sample AUC: share of (positive, negative) pairs with the positive strictly higher."""
    s = np.asarray(scores, dtype=float)
    y, n1, n0 = _labels(labels)
    if len(s) != len(y):
        raise ValueError("scores and labels differ in length")
    return concordant_pairs(s, y) / (n1 * n0)


def sauc_parametric(model: LogitModel, data: Dataset) -> float:
    """AUC with model probabilities standing in for the labels.

    ``sum_{ij} 1(p_i > p_j) p_i (1 - p_j) / (n^2 p_hat (1 - p_hat))`` with
    ``p_hat`` the label prevalence.
    """
    _, n1, n0 = _labels(data.y)
    idx = model.index(data.X)
    p = model.scores(data)
    order = np.argsort(idx, kind="stable")
    idx_sorted = idx[order]
    cum = np.r_[0.0, np.cumsum(1 - p[order])]
    below = np.searchsorted(idx_sorted, idx, side="left")
    num = float(np.sum(p * cum[below]))
    return num / (n1 * n0)


def pauc_monte_carlo(dgp, theta, draws: int = 10**6, seed: int = 0) -> tuple[float, float]:
    """Population AUC of the index ``x'theta`` under the true propensity of ``dgp``.

    Returns ``(value, standard error)``. Pairs are symmetrized: each draw
    contributes the kernel in both orders, so at the true index every pair
    attains its maximum and comparisons across ``theta`` with the same
    ``seed`` share their draws.
    """
    from .scenarios import sample_features

    rng = _rng.stream(seed, 0)
    X, p = sample_features(dgp, 2 * draws, rng)
    theta = np.asarray(theta, dtype=float)
    s = X @ theta
    s1, s2, p1, p2 = s[:draws], s[draws:], p[:draws], p[draws:]
    num = 0.5 * ((s1 > s2) * p1 * (1 - p2) + (s2 > s1) * p2 * (1 - p1))
    den = 0.5 * (p1 * (1 - p2) + p2 * (1 - p1))
    value = num.mean() / den.mean()
    resid = (num - value * den) / den.mean()
    return float(value), float(resid.std(ddof=1) / np.sqrt(draws))


def _auc_kernel_influence(index, y):
    """Value and centred Hajek projection terms ``eta1 + eta2`` (divided by p(1-p))."""
    y, n1, n0 = _labels(y)
    n = len(y)
    pos = y == 1
    A = concordant_pairs(index, y) / (n1 * n0)
    p_hat = n1 / n
    f_below = count_below(index, np.sort(index[~pos])) / n
    g_above = count_above(index, np.sort(index[pos])) / n
    eta = np.where(pos, f_below - A * (1 - p_hat), g_above - A * p_hat)
    return A, eta / (p_hat * (1 - p_hat)), p_hat


def auc_gradient(fit: FitResult, data: Dataset) -> np.ndarray:
    """Derivative of the smoothed population AUC in the parameters.

    The pair indicator is replaced by ``expit(diff / (h * sd(index)))`` with
    ``h = n^(-1/5)``, so the derivative is invariant to rescaling the index.
    """
    Z = fit.design(data)
    y = data.y == 1
    n = data.n
    h = n ** -0.2

    def smoothed(t):
        idx = Z @ t
        sd = idx.std()
        if sd == 0:
            return 0.0
        return smoothed_pair_mean(idx[y], idx[~y], h * sd)

    return numeric_moment_derivative(smoothed, fit.params(), influence_step(n, fit.params()))


def auc_influence(data: Dataset, fit: FitResult, criterion_of_fit: str | None = None,
                  known_theta: bool = False, in_sample: bool = False) -> AucEstimate:
    """Sample AUC of the fitted index on ``data`` with its influence values.

    The parameter term ``g' kappa_i`` is dropped for max-AUC fits (it vanishes
    at first order) and in ``known_theta`` mode. As for ROC bands, a fit from
    a separate training sample contributes its own block of influence rows.
    """
    criterion = criterion_of_fit or fit.objective
    if criterion not in ("log-likelihood", "sample-AUC"):
        raise ValueError(f"unknown fit criterion {criterion!r}")
    index = fit.model.index(data.X)
    A, base, _ = _auc_kernel_influence(index, data.y)
    use_kappa = not known_theta and criterion == "log-likelihood"
    if use_kappa:
        if in_sample and fit.kappa.shape[0] != data.n:
            raise ValueError("in-sample influence needs one kappa row per data row")
        pp = data.n_pos * data.n_neg / data.n**2
        g = auc_gradient(fit, data) / pp
        xi = base + fit.kappa @ g if in_sample else stack_influence(base, True, g, fit.kappa)
    else:
        xi = base
    std = float(np.sqrt(max(np.var(xi), 0.0) / len(xi)))
    return AucEstimate(float(A), xi, std, use_kappa)


def split_aware_auc(data: Dataset, fit: FitResult, known_theta: bool = False) -> AucEstimate:
    """AUC on the evaluation rows (``split == 0``) of a flagged dataset.

    ``fit`` must have been estimated on the ``split == 1`` rows; those rows
    carry the parameter-uncertainty term.
    """
    if data.split is None:
        raise ValueError("dataset has no split column")
    ev = data.subset(np.flatnonzero(data.split == 0))
    if not ev.has_both_classes():
        raise UndefinedRateError("evaluation part needs both label classes")
    n_train = int(np.sum(data.split == 1))
    use_kappa = not known_theta and fit.objective == "log-likelihood" and n_train > 0
    if use_kappa and fit.kappa.shape[0] != n_train:
        raise ValueError("fit must come from the split == 1 rows")
    est = auc_influence(ev, fit, known_theta=not use_kappa)
    return AucEstimate(est.value, est.xi, est.std, est.includes_estimation_uncertainty,
                       split_aware=True,
                       notes=("sample splitting increases the variance relative to "
                              "full-sample evaluation",))


def compare_models(data: Dataset, fit1: FitResult, fit2: FitResult,
                   alternative: str = "two-sided", known_theta: bool = False,
                   in_sample: bool = False) -> ComparisonResult:
    """First-order test of equal AUC for two fits evaluated on the same rows.

    ``alternative`` is ``"two-sided"``, ``"greater"`` (model 1 better) or
    ``"less"``.
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    e1 = auc_influence(data, fit1, known_theta=known_theta, in_sample=in_sample)
    e2 = auc_influence(data, fit2, known_theta=known_theta, in_sample=in_sample)
    if len(e1.xi) != len(e2.xi):
        raise ValueError("both fits must come from the same training rows")
    d = e1.xi - e2.xi
    std = float(np.sqrt(np.var(d) / len(d)))
    scale = max(e1.std, e2.std, 1e-300)
    if std <= 1e-8 * scale or std == 0:
        raise DegenerateComparisonError(
            "influence values of the two models coincide (nested or identical models); "
            "the first-order test is degenerate")
    diff = e1.value - e2.value
    z = diff / std
    if alternative == "two-sided":
        pv = 2 * norm.sf(abs(z))
    elif alternative == "greater":
        pv = norm.sf(z)
    else:
        pv = norm.cdf(z)
    return ComparisonResult(e1, e2, float(diff), std, float(z), float(pv), alternative)


def default_kappa_rule(n: int) -> float:
    return float(n) ** (-1.0 / 3.0)


def selection_criterion(auc: float, dim_theta: int, n: int, kappa_rule=None) -> float:
    """Penalized AUC ``A - kappa_n * dim``; larger is better.

    ``kappa_rule`` maps ``n`` to ``kappa_n``; it should satisfy
    ``kappa_n -> 0`` and ``sqrt(n) kappa_n -> inf``. Default ``n^(-1/3)``.
    """
    rule = kappa_rule or default_kappa_rule
    return float(auc - rule(n) * dim_theta)


# ---------------------------------------------------------------- bootstrap pipelines

def _resample_split(data, seed, r, max_tries=20):
    for attempt in range(max_tries):
        rng = _rng.stream(seed, r, attempt)
        idx = rng.integers(0, data.n, data.n)
        yb = data.y[idx]
        if yb.sum() < 2 or len(yb) - yb.sum() < 2:
            continue
        a, b = split_indices(yb, 0.5, int(rng.integers(2**62)))
        return data.subset(idx[a]), data.subset(idx[b]), int(rng.integers(2**62))
    raise UndefinedRateError(f"replicate {r}: resamples keep missing a class")


def _summary(rows: np.ndarray, names) -> dict:
    return {name: {"mean": float(rows[:, j].mean()), "std": float(rows[:, j].std(ddof=1))}
            for j, name in enumerate(names)}


def table1_bootstrap(data: Dataset, B: int = 200, seed: int = 0, include_max_auc: bool = False,
                     features=None, threads: int | None = None) -> dict:
    """Resample, split 1:1, fit on the first half, evaluate AUC on the second.

    The logit fit has no intercept. Returns means and standard deviations of
    the coefficients and of the AUC across replicates, plus the replicate table.
    """
    mle = ModelRecipe("logit_mle", features, fix_intercept_zero=True)
    mrc = ModelRecipe("max_auc", features, compute_influence=False)

    def one(r):
        train, test, sub = _resample_split(data, seed, r)
        f = mle.fit(train)
        row = list(f.model.theta) + [sauc(f.model.index(test.X), test.y)]
        if include_max_auc:
            g = mrc.fit(train, seed=sub)
            row += list(g.model.theta) + [sauc(g.model.index(test.X), test.y)]
        return row

    rows = np.array(bootstrap_replicates(one, B, threads))
    k = len(features) if features is not None else data.k
    names = [f"mle_theta{j + 1}" for j in range(k)] + ["mle_auc"]
    if include_max_auc:
        names += [f"maxauc_theta{j + 1}" for j in range(k)] + ["maxauc_auc"]
    return {"B": B, "seed": seed, "columns": names, "replicates": rows,
            "summary": _summary(rows, names)}


def table2_bootstrap(data: Dataset, recipe1: ModelRecipe | None = None,
                     recipe2: ModelRecipe | None = None, B: int = 1000, seed: int = 0,
                     threads: int | None = None) -> dict:
    """Bootstrap comparison of two models fitted and evaluated on split halves.

    Defaults are no-intercept logits on the first and on the second feature.
    Each replicate records A1, A2, their difference, and the analytic
    standard errors from :func:`compare_models`.
    """
    r1 = recipe1 or ModelRecipe("logit_mle", (0,), fix_intercept_zero=True)
    r2 = recipe2 or ModelRecipe("logit_mle", (1,), fix_intercept_zero=True)

    def one(r):
        train, test, sub = _resample_split(data, seed, r)
        c = compare_models(test, r1.fit(train, seed=sub), r2.fit(train, seed=sub))
        return [c.a1.value, c.a2.value, c.diff, c.std_diff, c.a1.std, c.a2.std]

    rows = np.array(bootstrap_replicates(one, B, threads))
    names = ["a1", "a2", "diff", "std_diff_analytic", "std1_analytic", "std2_analytic"]
    return {"B": B, "seed": seed, "columns": names, "replicates": rows,
            "bootstrap": {"a1_mean": float(rows[:, 0].mean()), "a2_mean": float(rows[:, 1].mean()),
                          "diff_mean": float(rows[:, 2].mean()),
                          "diff_std": float(rows[:, 2].std(ddof=1))},
            "theoretical": {"diff_std": float(rows[:, 3].mean()),
                            "a1_std": float(rows[:, 4].mean()),
                            "a2_std": float(rows[:, 5].mean())}}
