"""Pointwise confidence bands for the ROC curve.

Analytic bands come from the per-observation influence values ``psi_i`` of
``beta_hat(alpha)``; bootstrap bands resample the whole sample, re-split,
re-fit and re-evaluate. Horizontal bands invert the vertical envelopes.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from . import __version__, _rng
from .data import Dataset, split_indices
from .errors import (DegenerateDensityError, InversionError, RangeError,
                     ReplicateFailureError)
from .models import FitResult, ModelRecipe, influence_step, numeric_moment_derivative
from .roc import empirical_roc


# ---------------------------------------------------------------- density

@dataclass(frozen=True)
class DensityEstimate:
    """Gaussian KDE on [0,1] with reflection at both boundaries."""

    data: np.ndarray
    bandwidth: float

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape)
        inside = (x >= 0) & (x <= 1)
        h = self.bandwidth
        for start in range(0, len(self.data), 4096):
            s = self.data[start:start + 4096]
            xi = x[inside, None]
            out[inside] += (norm.pdf((xi - s) / h) + norm.pdf((xi + s) / h)
                            + norm.pdf((xi - (2 - s)) / h)).sum(axis=1)
        out /= len(self.data) * h
        return out


def silverman_bandwidth(values) -> float:
    v = np.asarray(values, dtype=float)
    sd = v.std(ddof=1)
    iqr = np.subtract(*np.percentile(v, [75, 25]))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * len(v) ** -0.2


def estimate_score_density(scores) -> DensityEstimate:
    s = np.asarray(scores, dtype=float)
    if len(s) < 30:
        raise DegenerateDensityError(f"density estimation needs at least 30 scores, got {len(s)}")
    if np.any((s < 0) | (s > 1)):
        raise ValueError("scores must lie in [0,1]")
    h = silverman_bandwidth(s)
    if not h > 0:
        raise DegenerateDensityError("all scores are identical")
    return DensityEstimate(s, float(h))


# ---------------------------------------------------------------- influence

@dataclass(frozen=True, eq=False)
class InfluenceResult:
    """Influence values of ``beta_hat(alpha)``; ``se = sigma / sqrt(len(psi))``.

    When the fit comes from a separate training sample, ``psi`` stacks the
    evaluation rows and then the training rows, each block rescaled so that
    ``sigma**2 / len(psi)`` is the sum of the two sampling variances.
    """

    psi: np.ndarray
    sigma: float
    mean: float
    alpha: float
    c_alpha: float
    beta_hat: float
    g: np.ndarray
    n_eval: int
    n_train: int
    includes_estimation_uncertainty: bool
    p_c: float = float("nan")
    q_c: float = float("nan")

    @property
    def se(self) -> float:
        return self.sigma / np.sqrt(len(self.psi))


def _cutoff_index(neg_index_sorted_desc, alpha):
    """Smallest cutoff whose empirical size does not exceed ``alpha``."""
    m = int(np.floor(alpha * len(neg_index_sorted_desc) + 1e-12))
    return neg_index_sorted_desc[m] if m < len(neg_index_sorted_desc) else -np.inf


def stack_influence(eval_part, train_part, g, kappa):
    """Combine evaluation-sample and training-sample influence blocks."""
    if train_part:
        n_e, n_t = len(eval_part), kappa.shape[0]
        total = n_e + n_t
        return np.r_[eval_part * total / n_e, (kappa @ g) * total / n_t]
    return eval_part


def psi_influence(data: Dataset, fit: FitResult, alpha: float, in_sample: bool = False,
                  known_theta: bool = False) -> InfluenceResult:
    """Influence values of ``beta_hat(alpha)`` for the fitted score on ``data``.

    ``in_sample=True`` means ``fit`` was estimated on exactly these rows, so
    the parameter term is added row by row; otherwise the fit is treated as
    coming from an independent training sample. ``known_theta`` drops the
    parameter term altogether.
    """
    if not (0.0 < alpha < 1.0):
        raise RangeError(f"alpha={alpha} outside (0,1)")
    data.require_both_classes("ROC inference")
    if not known_theta and not fit.converged:
        warnings.warn("fit did not converge; parameter influence may be unreliable",
                      RuntimeWarning, stacklevel=2)
    Z = fit.design(data)
    theta = fit.params()
    idx = Z @ theta
    y = data.y.astype(float)
    n = data.n
    p_hat = y.mean()
    neg_desc = np.sort(idx[y == 0])[::-1]
    k = _cutoff_index(neg_desc, alpha)
    if not np.isfinite(k):
        raise RangeError(f"alpha={alpha} is not attainable")
    c = float(expit(k))
    if not 0 < c < 1:
        raise RangeError(f"cutoff for alpha={alpha} sits at the boundary of the score range")
    flag = (idx > k).astype(float)
    beta_hat = flag[y == 1].mean()
    r = c / (1 - c)
    base = (y * (flag - beta_hat) - r * (1 - y) * (flag - alpha)) / p_hat

    use_kappa = not known_theta
    if use_kappa and in_sample and fit.kappa.shape[0] != n:
        raise ValueError("in-sample influence needs one kappa row per data row")
    if use_kappa:
        sd = idx.std()
        h = n ** -0.2 * (sd if sd > 0 else 1.0)

        def q_moment(t):
            return np.mean(y * expit((Z @ t - k) / h))

        def p_moment(t):
            return np.mean((1 - y) * expit((Z @ t - k) / h))

        eps = influence_step(n, theta)
        g = (numeric_moment_derivative(q_moment, theta, eps)
             - r * numeric_moment_derivative(p_moment, theta, eps)) / p_hat
        if in_sample:
            psi = base + fit.kappa @ g
        else:
            psi = stack_influence(base, True, g, fit.kappa)
    else:
        g = np.zeros_like(theta)
        psi = base

    p_c = q_c = float("nan")
    scores = fit.model.scores(data)
    if n >= 30 and np.ptp(scores) > 0:
        f = float(estimate_score_density(scores)(c)[0])
        q_c, p_c = -c * f, -(1 - c) * f
    return InfluenceResult(psi, float(np.sqrt(np.mean(psi**2))), float(psi.mean()), float(alpha),
                           c, float(beta_hat), g, n, fit.n_obs,
                           use_kappa, p_c, q_c)


# ---------------------------------------------------------------- bands

@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    """Pointwise band over an FPR grid; ``sigma_hat / sqrt(n)`` is the standard error."""

    alpha_grid: np.ndarray
    beta_hat: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    method: str  # "analytic" | "bootstrap"
    sigma_hat: np.ndarray
    n: int
    clipped: np.ndarray
    B: int | None = None
    seed: int | None = None
    replicates: np.ndarray | None = None

    @property
    def half_width(self) -> np.ndarray:
        return (self.upper - self.lower) / 2

    def contains(self, alpha, beta, tol: float = 0.0) -> np.ndarray:
        """Vertical-region membership with linear interpolation between gridpoints."""
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        lo = np.interp(alpha, self.alpha_grid, self.lower)
        hi = np.interp(alpha, self.alpha_grid, self.upper)
        inside = (alpha >= self.alpha_grid[0]) & (alpha <= self.alpha_grid[-1])
        return inside & (beta >= lo - tol) & (beta <= hi + tol)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha", "beta_hat", "lower", "upper", "sigma_hat"])
            for row in zip(self.alpha_grid, self.beta_hat, self.lower, self.upper, self.sigma_hat):
                w.writerow([repr(float(v)) for v in row])

    def to_dict(self) -> dict:
        return {"version": __version__, "level": self.level, "method": self.method,
                "B": self.B, "seed": self.seed, "n": self.n,
                "alpha": self.alpha_grid.tolist(), "beta_hat": self.beta_hat.tolist(),
                "lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "sigma_hat": self.sigma_hat.tolist(), "clipped": self.clipped.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_level(level):
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0,1), got {level}")


def _check_grid(alpha_grid):
    grid = np.asarray(alpha_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("alpha grid must be a nonempty 1-D list")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("alpha grid must be strictly increasing")
    if grid[0] <= 0 or grid[-1] >= 1:
        raise RangeError("alpha gridpoints must lie in (0,1)")
    return grid


def vertical_band(data: Dataset, fit: FitResult, alpha_grid, level: float = 0.95,
                  in_sample: bool = False, known_theta: bool = False) -> ConfidenceBand:
    """Analytic pointwise band ``beta_hat +- z * sigma_hat / sqrt(n)``, clipped to [0,1]."""
    _check_level(level)
    grid = _check_grid(alpha_grid)
    infl = [psi_influence(data, fit, a, in_sample, known_theta) for a in grid]
    beta = np.array([r.beta_hat for r in infl])
    sigma = np.array([r.sigma for r in infl])
    n_eff = len(infl[0].psi)
    d = norm.ppf(1 - (1 - level) / 2) * sigma / np.sqrt(n_eff)
    lo, hi = beta - d, beta + d
    clipped = (lo < 0) | (hi > 1)
    return ConfidenceBand(grid, beta, np.clip(lo, 0, 1), np.clip(hi, 0, 1), level, "analytic",
                          sigma, n_eff, clipped)


def beta_at(scores, labels, alpha_grid) -> np.ndarray:
    """Empirical TPR at the smallest cutoff with FPR not above each alpha."""
    return empirical_roc(scores, labels).tpr_at(alpha_grid)


def _one_replicate(data, recipe, grid, seed, r, max_tries):
    for attempt in range(max_tries):
        rng = _rng.stream(seed, r, attempt)
        idx = rng.integers(0, data.n, data.n)
        yb = data.y[idx]
        if yb.sum() < 2 or len(yb) - yb.sum() < 2:
            continue
        try:
            a, b = split_indices(yb, 0.5, int(rng.integers(2**62)))
        except Exception:
            continue
        train, test = data.subset(idx[a]), data.subset(idx[b])
        fit = recipe.fit(train, seed=int(rng.integers(2**62)))
        return beta_at(fit.model.scores(test), test.y, grid)
    raise ReplicateFailureError(f"replicate {r}: no usable resample in {max_tries} draws")


def bootstrap_replicates(fn, B, threads=None):
    """Evaluate ``fn(r)`` for ``r = 0..B-1``; results are ordered by ``r``."""
    threads = threads or int(os.environ.get("ROCINFER_THREADS", "1"))
    if threads <= 1:
        return [fn(r) for r in range(B)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(B)))


def bootstrap_band(data: Dataset, model_recipe: ModelRecipe, B: int, alpha_grid,
                   level: float = 0.95, seed: int = 0, threads: int | None = None,
                   max_tries: int = 20) -> ConfidenceBand:
    """Percentile bootstrap band.

    Each replicate resamples all rows with replacement, splits 1:1, fits
    ``model_recipe`` on the first half and evaluates ``beta_hat`` on the
    second. Replicate ``r`` draws only from the stream ``(seed, r)``, so the
    band does not depend on ``threads``.
    """
    _check_level(level)
    grid = _check_grid(alpha_grid)
    if B < 2:
        raise ValueError("B must be at least 2")
    if B < 100:
        warnings.warn(f"B={B} is small for percentile bands; use at least 100",
                      UserWarning, stacklevel=2)
    reps = np.array(bootstrap_replicates(
        lambda r: _one_replicate(data, model_recipe, grid, seed, r, max_tries), B, threads))
    eta = 1 - level
    lo = np.quantile(reps, eta / 2, axis=0, method="inverted_cdf")
    hi = np.quantile(reps, 1 - eta / 2, axis=0, method="inverted_cdf")
    a, b = split_indices(data.y, 0.5, seed)
    train, test = data.subset(a), data.subset(b)
    fit = model_recipe.fit(train, seed=seed)
    beta = beta_at(fit.model.scores(test), test.y, grid)
    sigma = reps.std(axis=0, ddof=1) * np.sqrt(test.n)
    return ConfidenceBand(grid, beta, lo, hi, level, "bootstrap", sigma, test.n,
                          np.zeros(len(grid), dtype=bool), B, seed, reps)


# ---------------------------------------------------------------- horizontal

def pava(values, weights=None) -> np.ndarray:
    """Least-squares nondecreasing fit by pooling adjacent violators."""
    v = np.asarray(values, dtype=float)
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    means, wts, counts = [], [], []
    for x, wx in zip(v, w):
        means.append(x)
        wts.append(wx)
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, c2 = means.pop(), wts.pop(), counts.pop()
            m1, w1, c1 = means.pop(), wts.pop(), counts.pop()
            means.append((m1 * w1 + m2 * w2) / (w1 + w2))
            wts.append(w1 + w2)
            counts.append(c1 + c2)
    return np.repeat(means, counts)


def _left_inverse(xs, ys, targets):
    """``inf{x : y(x) >= t}`` for nondecreasing piecewise-linear ``y``; ``+inf`` if empty."""
    t = np.asarray(targets, dtype=float)
    out = np.full(t.shape, np.inf)
    out[t <= ys[0]] = xs[0]
    mid = (t > ys[0]) & (t <= ys[-1])
    j = np.searchsorted(ys, t[mid], side="left")
    y0, y1, x0, x1 = ys[j - 1], ys[j], xs[j - 1], xs[j]
    out[mid] = x0 + (t[mid] - y0) / (y1 - y0) * (x1 - x0)
    return out


def _right_inverse(xs, ys, targets):
    """``sup{x : y(x) <= t}`` for nondecreasing piecewise-linear ``y``; ``-inf`` if empty."""
    t = np.asarray(targets, dtype=float)
    out = np.full(t.shape, -np.inf)
    out[t >= ys[-1]] = xs[-1]
    mid = (t >= ys[0]) & (t < ys[-1])
    j = np.searchsorted(ys, t[mid], side="right") - 1
    y0, y1, x0, x1 = ys[j], ys[j + 1], xs[j], xs[j + 1]
    out[mid] = x0 + (t[mid] - y0) / (y1 - y0) * (x1 - x0)
    return out


@dataclass(frozen=True, eq=False)
class HorizontalBand:
    """FPR bounds ``[alpha_lower(beta), alpha_upper(beta)]`` over a TPR grid.

    ``vertical`` is the (monotonized) vertical band that was inverted; the
    two regions coincide.
    """

    beta_grid: np.ndarray
    alpha_lower: np.ndarray
    alpha_upper: np.ndarray
    level: float
    vertical: ConfidenceBand

    def bounds(self, beta):
        v = self.vertical
        return (_left_inverse(v.alpha_grid, v.upper, beta),
                _right_inverse(v.alpha_grid, v.lower, beta))

    def contains(self, alpha, beta, tol: float = 0.0) -> np.ndarray:
        lo, hi = self.bounds(beta)
        alpha = np.asarray(alpha, dtype=float)
        return (alpha >= lo - tol) & (alpha <= hi + tol)

    def to_vertical(self, alpha_grid):
        """Re-invert the stored horizontal bounds into vertical envelopes."""
        a = np.asarray(alpha_grid, dtype=float)
        upper = _right_inverse(self.beta_grid, self.alpha_lower, a)
        lower = _left_inverse(self.beta_grid, self.alpha_upper, a)
        return lower, upper


def monotone_band(band: ConfidenceBand) -> ConfidenceBand:
    """Pool adjacent violators in ``beta_hat`` and widen envelopes to be nondecreasing."""
    beta = pava(band.beta_hat)
    upper = np.maximum.accumulate(band.upper)
    lower = np.minimum.accumulate(band.lower[::-1])[::-1]
    if np.array_equal(beta, band.beta_hat) and np.array_equal(upper, band.upper) \
            and np.array_equal(lower, band.lower):
        return band
    return ConfidenceBand(band.alpha_grid, beta, lower, upper, band.level, band.method,
                          band.sigma_hat, band.n, band.clipped, band.B, band.seed, band.replicates)


def horizontal_band(band: ConfidenceBand, beta_grid=None) -> HorizontalBand:
    """Invert a vertical band into FPR bounds at each TPR level.

    ``alpha_lower(beta) = inf{alpha : upper(alpha) >= beta}`` and
    ``alpha_upper(beta) = sup{alpha : lower(alpha) <= beta}``. The default TPR
    grid is the set of envelope knot values, which makes re-inversion exact.
    """
    mono = monotone_band(band)
    if not np.all(np.isfinite(mono.beta_hat)) or np.ptp(mono.beta_hat) == 0:
        raise InversionError("beta_hat is flat over the grid; the band cannot be inverted")
    if beta_grid is None:
        beta_grid = np.unique(np.r_[mono.lower, mono.upper])
        beta_grid = beta_grid[(beta_grid >= mono.lower[0]) & (beta_grid <= mono.upper[-1])]
    beta_grid = np.asarray(beta_grid, dtype=float)
    lo = _left_inverse(mono.alpha_grid, mono.upper, beta_grid)
    hi = _right_inverse(mono.alpha_grid, mono.lower, beta_grid)
    return HorizontalBand(beta_grid, lo, hi, band.level, mono)
