"""Parametric propensity models ``p(x, theta) = expit(intercept + x'theta)``.

Two estimators are provided: logit maximum likelihood and the maximum-AUC
(maximum rank correlation) estimator. Both return a :class:`FitResult` that
carries per-observation influence values ``kappa`` with
``sqrt(n) (theta_hat - theta*) ~ n^{-1/2} sum_i kappa_i``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from . import _rng
from ._ustat import concordant_pairs, count_above, count_below
from .data import Dataset
from .errors import DimensionError, NonIdentifiedError, RankError, SeparationError

_P_LO = np.finfo(float).tiny
_P_HI = 1.0 - np.finfo(float).eps / 2


@dataclass(frozen=True, eq=False)
class LogitModel:
    theta: np.ndarray
    intercept: float = 0.0
    features: tuple[int, ...] | None = None  # columns of Dataset.X; None = all

    def __post_init__(self):
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))
        if self.features is not None:
            object.__setattr__(self, "features", tuple(int(j) for j in self.features))
            if len(self.features) != len(self.theta):
                raise DimensionError("one coefficient per selected feature is required")

    def design(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if self.features is not None:
            X = X[:, list(self.features)]
        if X.shape[1] != len(self.theta):
            raise DimensionError(f"expected {len(self.theta)} features, got {X.shape[1]}")
        return X

    def index(self, X) -> np.ndarray:
        return self.design(X) @ self.theta + self.intercept

    def scores(self, data_or_X) -> np.ndarray:
        """Predicted probabilities for every row of a Dataset (or its full X)."""
        X = data_or_X.X if isinstance(data_or_X, Dataset) else data_or_X
        return np.clip(expit(self.index(X)), _P_LO, _P_HI)

    def scaled(self, factor: float) -> "LogitModel":
        return replace(self, theta=self.theta * factor, intercept=self.intercept * factor)


def predict(model: LogitModel, x) -> np.ndarray | float:
    """Probability for a feature vector (or rows of vectors) in the model's own feature space."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(model.theta):
        raise DimensionError(f"expected {len(model.theta)} features, got {x.shape[-1]}")
    p = np.clip(expit(x @ model.theta + model.intercept), _P_LO, _P_HI)
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True, eq=False)
class FitResult:
    model: LogitModel
    kappa: np.ndarray  # (n_obs, n_params)
    vcov: np.ndarray  # asymptotic covariance of sqrt(n)(theta_hat - theta*)
    objective: str  # "log-likelihood" | "sample-AUC"
    converged: bool
    param_names: tuple[str, ...]
    fit_intercept: bool = False
    iterations: int = 0
    criterion_value: float = float("nan")
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_obs(self) -> int:
        return self.kappa.shape[0]

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.vcov) / self.n_obs)

    def params(self) -> np.ndarray:
        if self.fit_intercept:
            return np.r_[self.model.intercept, self.model.theta]
        return self.model.theta.copy()

    def design(self, data_or_X) -> np.ndarray:
        """Rows ``z_i`` with ``index_i = z_i' params()``."""
        X = data_or_X.X if isinstance(data_or_X, Dataset) else data_or_X
        Xs = self.model.design(X)
        return np.c_[np.ones(len(Xs)), Xs] if self.fit_intercept else Xs

    def with_params(self, vec) -> LogitModel:
        vec = np.asarray(vec, dtype=float)
        if self.fit_intercept:
            return replace(self.model, intercept=float(vec[0]), theta=vec[1:])
        return replace(self.model, theta=vec)

    def to_dict(self) -> dict:
        return {"theta": self.model.theta.tolist(), "intercept": self.model.intercept,
                "vcov": self.vcov.tolist(), "objective": self.objective,
                "converged": bool(self.converged)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _resolve_features(data: Dataset, features) -> tuple[int, ...]:
    if features is None:
        return tuple(range(data.k))
    return tuple(data.feature_index(f) if isinstance(f, str) else int(f) for f in features)


def _loglik(Z, y, beta, pen):
    eta = Z @ beta
    return np.mean(y * eta - np.logaddexp(0.0, eta)) - 0.5 * np.sum(pen * beta**2)


def fit_logit_mle(train: Dataset, fix_intercept_zero: bool = False, features=None,
                  ridge: float = 0.0, tol: float = 1e-8, max_iter: int = 100) -> FitResult:
    """Logit maximum likelihood by damped Newton iterations.

    ``ridge`` adds ``ridge/2 * |theta|^2`` to the mean negative log-likelihood
    (the intercept is never penalized); with ``ridge=0`` perfectly separated
    data raise :class:`SeparationError`.
    """
    train.require_both_classes("logit MLE")
    feats = _resolve_features(train, features)
    Xs = train.X[:, list(feats)]
    n = train.n
    Z = Xs if fix_intercept_zero else np.c_[np.ones(n), Xs]
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise RankError("design matrix is rank deficient (collinear features)")
    y = train.y.astype(float)
    pen = np.full(Z.shape[1], float(ridge))
    if not fix_intercept_zero:
        pen[0] = 0.0
    beta = np.zeros(Z.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(Z @ beta)
        grad = Z.T @ (y - p) / n - pen * beta
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        H = (Z.T * (p * (1 - p))) @ Z / n + np.diag(pen)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        f0 = _loglik(Z, y, beta, pen)
        t = 1.0
        while _loglik(Z, y, beta + t * step, pen) < f0 - 1e-15 and t > 1e-10:
            t *= 0.5
        beta = beta + t * step
    eta = Z @ beta
    if ridge == 0 and np.all((2 * y - 1) * eta > 0):
        raise SeparationError("features perfectly separate the labels; the MLE does not exist")
    p = expit(eta)
    info = (Z.T * (p * (1 - p))) @ Z / n + np.diag(pen)
    score = Z * (y - p)[:, None] - pen * beta
    kappa = np.linalg.solve(info, score.T).T
    vcov = kappa.T @ kappa / n
    names = tuple(train.feature_names[j] for j in feats)
    model = LogitModel(beta if fix_intercept_zero else beta[1:],
                       0.0 if fix_intercept_zero else float(beta[0]), feats)
    return FitResult(model, kappa, vcov, "log-likelihood", converged,
                     names if fix_intercept_zero else ("intercept",) + names,
                     fit_intercept=not fix_intercept_zero, iterations=it,
                     criterion_value=float(_loglik(Z, y, beta, pen)))


def numeric_moment_derivative(fn, at, step) -> np.ndarray:
    """Central-difference gradient of a scalar function of a parameter vector."""
    at = np.asarray(at, dtype=float)
    step = np.broadcast_to(np.asarray(step, dtype=float), at.shape)
    if np.any(step <= 0):
        raise ValueError("step must be positive")
    grad = np.empty_like(at)
    for j in range(at.size):
        e = np.zeros_like(at)
        e[j] = step[j]
        grad[j] = (fn(at + e) - fn(at - e)) / (2 * step[j])
    return grad


def influence_step(n: int, at=None):
    """Numerical-derivative step for influence estimation, ``n^(-1/6)``.

    With ``at`` given, the step is scaled per coordinate by ``|at_j|`` (or 1
    for a zero coordinate) so a difference never flips a coefficient's sign.
    """
    eps = float(n) ** (-1.0 / 6.0)
    if at is None:
        return eps
    a = np.abs(np.asarray(at, dtype=float))
    return eps * np.where(a > 0, a, 1.0)


def _sauc_of_index(index, y, n1, n0):
    return concordant_pairs(index, y) / (n1 * n0)


def _tau(index, y, n):
    """Per-observation projected rank-correlation kernel."""
    pos = y == 1
    out = np.empty(len(index))
    out[pos] = count_below(index[pos], np.sort(index[~pos]))
    out[~pos] = count_above(index[~pos], np.sort(index[pos]))
    return out / n


def fit_max_auc(train: Dataset, features=None, n_restarts: int = 8, seed: int = 0,
                compute_influence: bool = True) -> FitResult:
    """Maximum-AUC (maximum rank correlation) estimator.

    The index is ``x'(s, theta)`` with the first coefficient fixed at ``s = +-1``
    (the sign of the logit MLE's first slope); only the remaining coefficients
    are searched, by Nelder-Mead from the rescaled MLE and ``n_restarts``
    random perturbations of it. ``compute_influence=False`` skips the
    numerical-derivative influence step (``kappa`` and ``vcov`` are then nan),
    which is all a bootstrap loop needs.
    """
    feats = _resolve_features(train, features)
    if len(feats) < 2:
        raise NonIdentifiedError("max-AUC needs at least two features; with one the "
                                 "normalized coefficient vector has no free parameter")
    train.require_both_classes("max-AUC estimation")
    Xs = train.X[:, list(feats)]
    y = train.y.astype(int)
    n, n1 = train.n, train.n_pos
    n0 = n - n1
    try:
        b = fit_logit_mle(train, features=feats).model.theta
    except (SeparationError, RankError):
        b = np.linalg.lstsq(np.c_[np.ones(n), Xs], y - y.mean(), rcond=None)[0][1:]
    sign = 1.0 if b[0] >= 0 else -1.0
    scale = abs(b[0]) if abs(b[0]) > 1e-12 else 1.0
    start = b[1:] / scale

    def value(t):
        return _sauc_of_index(Xs @ np.r_[sign, t], y, n1, n0)

    rng = _rng.stream(seed, 0)
    starts = [start] + [start + rng.normal(0.0, 0.5, size=start.shape) * (1 + np.abs(start))
                        for _ in range(n_restarts)]
    best_t, best_v, all_v = None, -np.inf, []
    ok = True
    for x0 in starts:
        delta = 0.1 * np.maximum(1.0, np.abs(x0))
        simplex = np.vstack([x0] + [x0 + np.eye(len(x0))[j] * delta[j] for j in range(len(x0))])
        res = minimize(lambda t: -value(t), x0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-4, "fatol": 1e-12,
                                "maxiter": 400 * len(x0)})
        v = -float(res.fun)
        all_v += [v, value(x0)]
        if v > best_v:
            best_t, best_v = np.asarray(res.x, dtype=float), v
    if np.ptp(all_v) == 0:
        probes = [value(best_t + d * e) for e in np.eye(len(best_t)) for d in (-10, -1, 1, 10)]
        if np.ptp(probes + [best_v]) == 0:
            raise NonIdentifiedError("sample AUC is flat in every free direction")

    theta = np.r_[sign, best_t]
    names = tuple(train.feature_names[j] for j in feats)
    if not compute_influence:
        nan = np.full((n, len(theta)), np.nan)
        return FitResult(LogitModel(theta, 0.0, feats), nan, nan[:len(theta)].copy(), "sample-AUC",
                         ok, names, criterion_value=best_v)
    eps = influence_step(n)
    m = len(best_t)
    grads = np.empty((n, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = eps
        grads[:, j] = (_tau(Xs @ np.r_[sign, best_t + e], y, n)
                       - _tau(Xs @ np.r_[sign, best_t - e], y, n)) / (2 * eps)

    def mean_tau(t):
        return 2.0 * concordant_pairs(Xs @ np.r_[sign, t], y) / n**2

    hess = np.empty((m, m))
    for j in range(m):
        for l in range(j, m):
            ej = np.eye(m)[j] * eps
            el = np.eye(m)[l] * eps
            hess[j, l] = hess[l, j] = (mean_tau(best_t + ej + el) - mean_tau(best_t + ej - el)
                                       - mean_tau(best_t - ej + el)
                                       + mean_tau(best_t - ej - el)) / (4 * eps**2)
    V = hess / 2.0
    notes = ()
    if np.all(np.linalg.eigvalsh(V) < 0):
        kappa_free = -np.linalg.solve(V, grads.T).T
    else:
        ok = False
        notes = ("numerical Hessian of the rank criterion is not negative definite",)
        warnings.warn(notes[0], RuntimeWarning, stacklevel=2)
        kappa_free = -(np.linalg.pinv(V) @ grads.T).T
    kappa = np.c_[np.zeros(n), kappa_free]
    vcov = kappa.T @ kappa / n
    model = LogitModel(theta, 0.0, feats)
    return FitResult(model, kappa, vcov, "sample-AUC", ok, names, fit_intercept=False,
                     criterion_value=best_v, notes=notes)


@dataclass(frozen=True)
class ModelRecipe:
    """A reusable fitting procedure, applied afresh to each (re)sampled training set."""

    kind: str = "logit_mle"  # "logit_mle" | "max_auc"
    features: tuple | None = None
    fix_intercept_zero: bool = False
    ridge: float = 0.0
    compute_influence: bool = True

    def __post_init__(self):
        if self.kind not in ("logit_mle", "max_auc"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(self.features))

    def fit(self, data: Dataset, seed: int = 0) -> FitResult:
        if self.kind == "logit_mle":
            return fit_logit_mle(data, self.fix_intercept_zero, self.features, self.ridge)
        return fit_max_auc(data, self.features, seed=seed,
                           compute_influence=self.compute_influence)
