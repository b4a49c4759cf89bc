"""ROC curves and the decision-theoretic helpers built on them.

Classification always uses the strict rule ``score > c``. Tied scores move
together, so a tie block produces a single (possibly diagonal) step.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import UndefinedRateError

CONCAVITY_TOL = 1e-12


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: float | None = None

    def __post_init__(self):
        for v in (self.fpr, self.tpr):
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ValueError(f"rates must lie in [0,1], got {v}")


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Ordered ROC points, thresholds strictly decreasing from ``+inf``.

    ``n_pos``/``n_neg`` are class counts, or total class weights for curves
    built from population weights.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    n_pos: float
    n_neg: float

    def __len__(self):
        return len(self.fpr)

    @property
    def points(self) -> list[RocPoint]:
        return [RocPoint(float(a), float(b), float(c))
                for c, a, b in zip(self.thresholds, self.fpr, self.tpr)]

    def point_set(self, decimals=12) -> set[tuple[float, float]]:
        return set(zip(np.round(self.fpr, decimals).tolist(), np.round(self.tpr, decimals).tolist()))

    def area(self) -> float:
        """Trapezoidal area (ties count one half). Diagnostic only."""
        return float(np.sum(np.diff(self.fpr) * (self.tpr[1:] + self.tpr[:-1]) / 2))

    def tpr_at(self, alpha):
        """Step estimate: TPR at the smallest cutoff whose FPR does not exceed ``alpha``."""
        alpha = np.asarray(alpha, dtype=float)
        idx = np.searchsorted(self.fpr, alpha + 1e-12, side="right") - 1
        return self.tpr[np.clip(idx, 0, None)]

    def interp(self, alpha):
        """Piecewise-linear TPR at ``alpha`` (the randomized-rule frontier)."""
        # at repeated fpr values take the upper end of the vertical segment
        fpr, keep = np.unique(self.fpr[::-1], return_index=True)
        tpr = self.tpr[::-1][keep]
        return np.interp(alpha, fpr, tpr)

    def to_dict(self) -> dict:
        return {"threshold": [float(t) for t in self.thresholds],
                "fpr": self.fpr.tolist(), "tpr": self.tpr.tolist(),
                "n_pos": self.n_pos, "n_neg": self.n_neg}

    def to_json(self) -> str:
        # +inf is written as the string "inf" to keep the output strict JSON
        d = self.to_dict()
        d["threshold"] = ["inf" if np.isinf(t) else t for t in d["threshold"]]
        return json.dumps(d)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "fpr", "tpr"])
            for t, a, b in zip(self.thresholds, self.fpr, self.tpr):
                w.writerow([repr(float(t)), repr(float(a)), repr(float(b))])


def weighted_roc(scores, w_pos, w_neg) -> RocCurve:
    """ROC of ``scores`` where row ``i`` carries positive weight ``w_pos[i]``
    and negative weight ``w_neg[i]``.

    With 0/1 label weights this is the empirical ROC; with weights
    ``p(x_i)`` and ``1 - p(x_i)`` it is a Monte Carlo population ROC.
    """
    s = np.asarray(scores, dtype=float)
    w1 = np.asarray(w_pos, dtype=float)
    w0 = np.asarray(w_neg, dtype=float)
    if not (s.shape == w1.shape == w0.shape) or s.ndim != 1:
        raise ValueError("scores and weights must be 1-D arrays of equal length")
    tot1, tot0 = w1.sum(), w0.sum()
    if tot1 <= 0 or tot0 <= 0:
        raise UndefinedRateError("ROC needs positive weight in both classes")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    last_of_group = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    cum1 = np.cumsum(w1[order])[last_of_group]
    cum0 = np.cumsum(w0[order])[last_of_group]
    values = s_sorted[last_of_group]
    below = np.r_[values[1:], np.nextafter(values[-1], -np.inf)]
    thresholds = np.r_[np.inf, below]
    tpr = np.r_[0.0, np.minimum(cum1 / tot1, 1.0)]
    fpr = np.r_[0.0, np.minimum(cum0 / tot0, 1.0)]
    tpr[-1] = fpr[-1] = 1.0
    return RocCurve(thresholds, fpr, tpr, float(tot1), float(tot0))


def empirical_roc(scores, labels) -> RocCurve:
    y = np.asarray(labels)
    if len(y) != len(np.asarray(scores)):
        raise ValueError("scores and labels differ in length")
    if not (0 < y.sum() < len(y)):
        raise UndefinedRateError("empirical ROC needs both label classes")
    y = y.astype(float)
    return weighted_roc(scores, y, 1.0 - y)


def aggregate_pair(decisions, labels) -> RocPoint:
    """Pooled (FPR, TPR) of observed binary decisions."""
    d = np.asarray(decisions, dtype=float)
    y = np.asarray(labels, dtype=float)
    n1 = y.sum()
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedRateError("aggregate pair needs both label classes")
    return RocPoint(float(((1 - y) * d).sum() / n0), float((y * d).sum() / n1))


def posterior_odds_curve(curve: RocCurve, p: float) -> list[tuple[float, float]]:
    """P(Y=1 | flagged) along the curve; ``nan`` where nothing is flagged."""
    if not 0 < p < 1:
        raise ValueError("prevalence must lie in (0,1)")
    out = []
    for a, b in zip(curve.fpr, curve.tpr):
        # ratio form: p + (1 - p) is exactly 1 in binary floating point, so the
        # diagonal returns p and a zero false positive rate returns 1 without rounding
        if b > 0:
            out.append((float(a), float(p / (p + (1 - p) * (a / b)))))
        else:
            out.append((float(a), 0.0 if a > 0 else float("nan")))
    return out


@dataclass(frozen=True)
class CostSpec:
    """False-positive cost ``c0r``, false-negative cost ``c1a``, prevalence ``p``."""

    c0r: float
    c1a: float
    p: float

    def __post_init__(self):
        if self.c0r < 0 or self.c1a < 0 or self.c0r + self.c1a <= 0:
            raise ValueError("costs must be nonnegative and not both zero")
        if not 0 < self.p < 1:
            raise ValueError("prevalence must lie in (0,1)")

    @property
    def phi(self):
        return self.p * self.c1a

    @property
    def eta(self):
        return (1 - self.p) * self.c0r


def cost_implied_cutoff(spec: CostSpec) -> float:
    """Propensity cutoff minimizing expected loss for the given cost matrix."""
    a = spec.eta / (1 - spec.p)
    b = spec.phi / spec.p
    return a / (b + a)


@dataclass(frozen=True)
class UndefinedGroup:
    n_pos: int
    n_neg: int
    reason: str = "group lacks one of the label classes"


def conditional_roc(data, scores, group_of: int | str | Callable) -> Mapping:
    """One empirical ROC per group; groups missing a class map to :class:`UndefinedGroup`.

    ``group_of`` is a feature index, a feature name, or a callable returning a
    group label per row.
    """
    if callable(group_of):
        groups = np.asarray(group_of(data))
    else:
        j = data.feature_index(group_of) if isinstance(group_of, str) else group_of
        groups = data.X[:, j]
    scores = np.asarray(scores, dtype=float)
    out = {}
    for g in np.unique(groups):
        m = groups == g
        y = data.y[m]
        key = g.item() if hasattr(g, "item") else g
        if 0 < y.sum() < len(y):
            out[key] = empirical_roc(scores[m], y)
        else:
            out[key] = UndefinedGroup(int(y.sum()), int(len(y) - y.sum()))
    return out


def concavity_violations(curve: RocCurve, tol: float = CONCAVITY_TOL) -> list[int]:
    """Indices of points where the piecewise-linear curve turns upward."""
    a, b = np.asarray(curve.fpr), np.asarray(curve.tpr)
    da, db = np.diff(a), np.diff(b)
    keep = (da != 0) | (db != 0)
    idx = np.flatnonzero(keep) + 1  # index of each segment's end point
    da, db = da[keep], db[keep]
    # cross > 0 means the slope increased from one segment to the next
    cross = da[:-1] * db[1:] - db[:-1] * da[1:]
    return [int(idx[i]) for i in np.flatnonzero(cross > tol)]


def mixture_point(p1: RocPoint, p2: RocPoint, w: float) -> RocPoint:
    """Operating point of the rule that applies ``p1``'s rule with probability ``w``."""
    if not 0 <= w <= 1:
        raise ValueError("w must lie in [0,1]")
    return RocPoint(w * p1.fpr + (1 - w) * p2.fpr, w * p1.tpr + (1 - w) * p2.tpr)
