"""Simulation scenarios: machine vs human decision ROCs.

Each :class:`ScenarioSpec` names a data-generating process with a true
propensity ``p(x) = P(Y=1 | x)`` and, where defined, a human decision ``d``.
Demo functions evaluate population quantities by Monte Carlo on weighted
ROCs: a draw ``x_i`` counts ``p(x_i)`` towards positives and ``1 - p(x_i)``
towards negatives, which removes outcome noise from the comparison.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.linalg import qr
from scipy.optimize import brentq
from scipy.special import expit, logit
from scipy.stats import beta as beta_dist
from scipy.stats import norm

from . import __version__, _rng
from .data import Dataset
from .errors import SeparationError, UndefinedRateError, UnknownScenarioError
from .models import FitResult, fit_logit_mle
from .roc import RocCurve, RocPoint, concavity_violations, empirical_roc, weighted_roc

KINDS = ("logit_baseline", "misspecified_homogeneous", "incentive_feature_cutoff",
         "info_monotone", "info_wrong_sign", "info_two_dim", "random_cutoff_independent",
         "custom")

_DEFAULTS = {
    "logit_baseline": {"beta": (1.0, -0.5), "mean1": 2.0, "sd1": 1.0, "mean2": 0.0, "sd2": 1.0},
    "misspecified_homogeneous": {"cutoff": 0.5, "frequency": 10.0},
    "incentive_feature_cutoff": {"band_low": 0.5, "band_high": 0.75},
    "info_monotone": {"cutoff": 0.5, "x_sd": 1.0},
    "info_wrong_sign": {"cutoff": 0.5, "x_sd": 1.0},
    "info_two_dim": {"cutoff": 0.5, "x2_sd": 0.3, "u_sd": 2.0, "u_effect": 1.0,
                     "human": "wrong"},
    "random_cutoff_independent": {"a": 2.0, "b": 2.0},
    "custom": {},
}

# kinds whose machine propensity is p(x) = x with x ~ Uniform(0,1)
UNIFORM_KINDS = ("misspecified_homogeneous", "incentive_feature_cutoff",
                 "random_cutoff_independent")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    n: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnknownScenarioError(f"unknown scenario kind {self.kind!r}; "
                                       f"choose from {', '.join(KINDS)}")
        if int(self.n) < 1:
            raise ValueError("n must be at least 1")
        unknown = set(self.params) - set(_DEFAULTS[self.kind]) if self.kind != "custom" else set()
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged = {**_DEFAULTS[self.kind], **self.params}
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed))
        self._validate()

    def _validate(self):
        p = self.params
        if self.kind == "logit_baseline":
            if len(p["beta"]) != 2 or p["sd1"] <= 0 or p["sd2"] <= 0:
                raise ValueError("logit_baseline needs two coefficients and positive sds")
        elif self.kind in ("misspecified_homogeneous", "info_monotone", "info_wrong_sign",
                           "info_two_dim"):
            if not 0 < p["cutoff"] < 1:
                raise ValueError("cutoff must lie in (0,1)")
        if self.kind == "incentive_feature_cutoff" and not 0 <= p["band_low"] < p["band_high"] <= 1:
            raise ValueError("need 0 <= band_low < band_high <= 1")
        if self.kind == "info_two_dim":
            if p["human"] not in ("wrong", "correct"):
                raise ValueError("human must be 'wrong' or 'correct'")
            if p["x2_sd"] <= 0 or p["u_sd"] <= 0:
                raise ValueError("standard deviations must be positive")
        if self.kind == "random_cutoff_independent" and (p["a"] <= 0 or p["b"] <= 0):
            raise ValueError("Beta parameters must be positive")
        if self.kind == "custom":
            for key in ("sampler", "propensity"):
                if not callable(p.get(key)):
                    raise ValueError(f"custom scenarios need a callable {key!r} parameter")

    def with_n(self, n: int) -> "ScenarioSpec":
        return ScenarioSpec(self.kind, n, self.seed, dict(self.params))

    def describe(self) -> dict:
        params = {k: (v.__name__ if callable(v) else list(v) if isinstance(v, tuple) else v)
                  for k, v in self.params.items()}
        return {"kind": self.kind, "n": self.n, "seed": self.seed, "params": params,
                "propensity": PROPENSITY_TEXT[self.kind]}


PROPENSITY_TEXT = {
    "logit_baseline": "p(x) = expit(beta1*x1 + beta2*x2), x1 ~ N(mean1, sd1^2), "
                      "x2 ~ N(mean2, sd2^2) independent; y = 1(p(x) > B), B ~ U(0,1)",
    "misspecified_homogeneous": "x ~ U(0,1), p(x) = x; d = 1(|sin(frequency*x)| > cutoff)",
    "incentive_feature_cutoff": "x ~ U(0,1), p(x) = x, eta ~ U(0,1); d = 1(p(x) > c(x,eta)) with "
                                "c = eta outside (band_low, band_high) and eta*x^2 inside",
    "info_monotone": "x ~ N(0, x_sd^2), p(x) = expit(x), u ~ U(0,1); d = 1(expit(x+u) > cutoff)",
    "info_wrong_sign": "x ~ N(0, x_sd^2), p(x) = expit(x), u ~ U(0,1); "
                       "d = 1(expit(-x+u) > cutoff)",
    "info_two_dim": "x1 ~ N(0,1), x2 ~ N(0, x2_sd^2), u ~ N(0, u_sd^2); human='wrong': "
                    "p = expit(x1+x2), d = 1(expit(x1-x2+u) > cutoff); human='correct': "
                    "p(x,u) = expit(x1+x2+u_effect*u), d = 1(p(x,u) > cutoff)",
    "random_cutoff_independent": "x ~ U(0,1), p(x) = x, S ~ Beta(a,b) independent; d = 1(p(x) > S)",
    "custom": "user-supplied sampler and propensity",
}


# ---------------------------------------------------------------- cutoff policies

@dataclass(frozen=True)
class CutoffPolicy:
    """How a decision maker picks the cutoff ``c`` in ``d = 1(p(x) > c)``.

    ``form`` is ``"constant"`` (``c0``), ``"random_independent"`` (``dist``, a
    frozen scipy distribution of ``S``) or ``"feature_dependent"`` (``fn(x,
    eta)`` with ``eta ~ U(0,1)``; ``acceptance_fn(x, p)`` may give the
    acceptance probability in closed form).
    """

    form: str
    c0: float | None = None
    dist: object | None = None
    fn: Callable | None = None
    acceptance_fn: Callable | None = None

    def __post_init__(self):
        if self.form == "constant" and self.c0 is None:
            raise ValueError("constant policy needs c0")
        if self.form == "random_independent" and self.dist is None:
            raise ValueError("random_independent policy needs dist")
        if self.form == "feature_dependent" and self.fn is None:
            raise ValueError("feature_dependent policy needs fn")
        if self.form not in ("constant", "random_independent", "feature_dependent"):
            raise ValueError(f"unknown policy form {self.form!r}")

    def acceptance(self, x, p) -> np.ndarray:
        """``lambda(x) = P(p(x) > c)`` under the cutoff law."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if self.form == "constant":
            return (p > self.c0).astype(float)
        if self.form == "random_independent":
            return self.dist.cdf(p)
        if self.acceptance_fn is not None:
            return np.clip(self.acceptance_fn(x, p), 0, 1)
        etas = (np.arange(4000) + 0.5) / 4000
        return np.mean([p > self.fn(x, e) for e in etas], axis=0)

    def decide(self, x, p, rng) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if self.form == "constant":
            return (p > self.c0).astype(float)
        if self.form == "random_independent":
            return (p > self.dist.rvs(size=p.shape, random_state=rng)).astype(float)
        return (p > self.fn(x, rng.uniform(size=p.shape))).astype(float)


def fig5_policy(band_low: float = 0.5, band_high: float = 0.75) -> CutoffPolicy:
    """Cutoff ``eta`` outside the band and ``eta * x^2`` inside it."""

    def fn(x, eta):
        inside = (x > band_low) & (x < band_high)
        outside = (x < band_low) | (x > band_high)
        return eta * outside + eta * x**2 * inside

    def acc(x, p):
        inside = (x > band_low) & (x < band_high)
        outside = (x < band_low) | (x > band_high)
        lam_out = np.clip(p, 0, 1)
        lam_in = np.clip(np.divide(p, x**2, out=np.ones_like(x), where=x != 0), 0, 1)
        return np.where(outside, lam_out, np.where(inside, lam_in, (p > 0).astype(float)))

    return CutoffPolicy("feature_dependent", fn=fn, acceptance_fn=acc)


def policy_for(spec: ScenarioSpec) -> CutoffPolicy | None:
    if spec.kind == "incentive_feature_cutoff":
        return fig5_policy(spec.params["band_low"], spec.params["band_high"])
    if spec.kind == "random_cutoff_independent":
        return CutoffPolicy("random_independent", dist=beta_dist(spec.params["a"], spec.params["b"]))
    return None


# ---------------------------------------------------------------- generation

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(80)
_GH_WEIGHTS = _GH_WEIGHTS / np.sqrt(2 * np.pi)


def _marginal_expit(index, scale):
    """``E expit(index + scale * Z)`` for standard normal ``Z``."""
    index = np.asarray(index, dtype=float)
    return expit(index[..., None] + scale * _GH_NODES) @ _GH_WEIGHTS


def sample_features(spec: ScenarioSpec, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` feature rows and their machine propensity ``p(x) = P(Y=1 | x)``."""
    pr = spec.params
    k = spec.kind
    if k == "logit_baseline":
        X = np.c_[rng.normal(pr["mean1"], pr["sd1"], n), rng.normal(pr["mean2"], pr["sd2"], n)]
        return X, expit(X @ np.asarray(pr["beta"], dtype=float))
    if k in UNIFORM_KINDS:
        x = rng.uniform(size=n)
        return x[:, None], x.copy()
    if k in ("info_monotone", "info_wrong_sign"):
        x = rng.normal(0.0, pr["x_sd"], n)
        return x[:, None], expit(x)
    if k == "info_two_dim":
        X = np.c_[rng.normal(0.0, 1.0, n), rng.normal(0.0, pr["x2_sd"], n)]
        s = X.sum(axis=1)
        if pr["human"] == "correct":
            return X, _marginal_expit(s, pr["u_effect"] * pr["u_sd"])
        return X, expit(s)
    X = np.asarray(pr["sampler"](rng, n), dtype=float)
    X = X.reshape(n, -1)
    return X, np.asarray(pr["propensity"](X), dtype=float)


@dataclass(frozen=True, eq=False)
class SimulatedData:
    data: Dataset
    true_p: np.ndarray  # P(Y=1 | x) for each row
    q_true: np.ndarray | None  # P(D=1 | x) where decisions exist
    spec: ScenarioSpec
    p_xu: np.ndarray | None = None  # P(Y=1 | x, u) when humans see u

    def propensity(self, X) -> np.ndarray:
        return true_propensity(self.spec, X)

    @property
    def description(self) -> dict:
        return self.spec.describe()

    def save(self, csv_path) -> str:
        """Write the data CSV and a sidecar JSON next to it; returns the JSON path."""
        from .data import save_csv

        save_csv(self.data, csv_path)
        side = str(csv_path)[:-4] + ".json" if str(csv_path).endswith(".csv") \
            else str(csv_path) + ".json"
        with open(side, "w") as fh:
            json.dump({"version": __version__, "spec": self.description}, fh, indent=2)
        return side


def true_propensity(spec: ScenarioSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    pr = spec.params
    if spec.kind == "logit_baseline":
        return expit(X @ np.asarray(pr["beta"], dtype=float))
    if spec.kind in UNIFORM_KINDS:
        return X[:, 0].copy()
    if spec.kind in ("info_monotone", "info_wrong_sign"):
        return expit(X[:, 0])
    if spec.kind == "info_two_dim":
        s = X.sum(axis=1)
        if pr["human"] == "correct":
            return _marginal_expit(s, pr["u_effect"] * pr["u_sd"])
        return expit(s)
    return np.asarray(pr["propensity"](X), dtype=float)


def generate(spec: ScenarioSpec) -> SimulatedData:
    """Draw a dataset; bit-reproducible for a fixed spec."""
    n, pr, k = spec.n, spec.params, spec.kind
    rx, ry, rd = (_rng.stream(spec.seed, j) for j in range(3))
    X, p = sample_features(spec, n, rx)
    p_y, p_xu, d, q = p, None, None, None
    x = X[:, 0]
    if k == "misspecified_homogeneous":
        d = (np.abs(np.sin(pr["frequency"] * x)) > pr["cutoff"]).astype(float)
        q = d.copy()
    elif k in ("incentive_feature_cutoff", "random_cutoff_independent"):
        pol = policy_for(spec)
        d = pol.decide(x, p, rd)
        q = pol.acceptance(x, p)
    elif k in ("info_monotone", "info_wrong_sign"):
        sign = 1.0 if k == "info_monotone" else -1.0
        u = rd.uniform(size=n)
        t = logit(pr["cutoff"])
        d = (sign * x + u > t).astype(float)
        q = np.clip(1.0 - (t - sign * x), 0.0, 1.0)
    elif k == "info_two_dim":
        u = rd.normal(0.0, pr["u_sd"], n)
        t = logit(pr["cutoff"])
        if pr["human"] == "wrong":
            d = (X[:, 0] - X[:, 1] + u > t).astype(float)
            q = norm.cdf((X[:, 0] - X[:, 1] - t) / pr["u_sd"])
        else:
            s = X.sum(axis=1)
            p_xu = expit(s + pr["u_effect"] * u)
            p_y = p_xu
            d = (p_xu > pr["cutoff"]).astype(float)
            scale = abs(pr["u_effect"]) * pr["u_sd"]
            q = norm.cdf((s - t) / scale) if scale > 0 else (s > t).astype(float)
    elif k == "custom" and callable(pr.get("decision")):
        d = np.asarray(pr["decision"](rd, X, p), dtype=float)
    y = (p_y > ry.uniform(size=n)).astype(np.int8)
    names = tuple(f"x{j + 1}" for j in range(X.shape[1]))
    return SimulatedData(Dataset(y, X, names, d), p, q, spec, p_xu)


# ---------------------------------------------------------------- population ROC

def population_roc(scores, p) -> RocCurve:
    """Monte Carlo population ROC of ``scores`` when rows have propensity ``p``."""
    p = np.asarray(p, dtype=float)
    return weighted_roc(scores, p, 1.0 - p)


def _normal_index(spec):
    """Mean and sd of the logit index for kinds whose p(x) is expit of a normal."""
    pr = spec.params
    if spec.kind == "logit_baseline":
        b = np.asarray(pr["beta"], dtype=float)
        return (b[0] * pr["mean1"] + b[1] * pr["mean2"],
                float(np.hypot(b[0] * pr["sd1"], b[1] * pr["sd2"])))
    if spec.kind in ("info_monotone", "info_wrong_sign"):
        return 0.0, float(pr["x_sd"])
    if spec.kind == "info_two_dim" and pr["human"] == "wrong":
        return 0.0, float(np.hypot(1.0, pr["x2_sd"]))
    return None


def _normal_index_rates(mu, sd, cutoffs):
    # the normal density is negligible beyond 12 sd; finite limits keep quad on the mass
    lo_z, hi_z = mu - 12 * sd, mu + 12 * sd
    dens = lambda z: norm.pdf(z, mu, sd)  # noqa: E731

    def quad(f, lo):
        lo = max(lo, lo_z)
        if lo >= hi_z:
            return 0.0
        return integrate.quad(f, lo, hi_z, epsabs=1e-14, epsrel=1e-12, limit=200)[0]

    prev = quad(lambda z: expit(z) * dens(z), lo_z)
    alpha, beta = [], []
    for c in cutoffs:
        if c <= 0:
            alpha.append(1.0)
            beta.append(1.0)
            continue
        if c >= 1:
            alpha.append(0.0)
            beta.append(0.0)
            continue
        t = logit(c)
        beta.append(quad(lambda z: expit(z) * dens(z), t) / prev)
        alpha.append(quad(lambda z: expit(-z) * dens(z), t) / (1 - prev))
    return np.array(alpha), np.array(beta)


def analytic_roc(spec: ScenarioSpec, gridpoints=201, mc_draws: int = 10**6) -> RocCurve:
    """Population ROC of the true propensity at a grid of cutoffs ``c``.

    Closed form when ``p(x) = x`` on U(0,1): ``alpha = (1-c)^2``,
    ``beta = 1 - c^2``. Quadrature when ``p(x)`` is the logistic of a normal
    index. Otherwise a seeded Monte Carlo evaluation with ``mc_draws`` rows.
    ``(0,0)`` and ``(1,1)`` are always included.
    """
    c = np.linspace(0, 1, gridpoints) if np.isscalar(gridpoints) else np.asarray(gridpoints, float)
    c = np.unique(np.r_[0.0, np.clip(c, 0, 1), 1.0])[::-1]
    if spec.kind in UNIFORM_KINDS:
        alpha, beta = (1 - c) ** 2, 1 - c**2
    elif (ni := _normal_index(spec)) is not None:
        alpha, beta = _normal_index_rates(*ni, c)
    else:
        _, p = sample_features(spec, mc_draws, _rng.stream(spec.seed, 99))
        ps = np.sort(p)
        cw1 = np.r_[np.cumsum((ps)[::-1])[::-1], 0.0]
        cw0 = np.r_[np.cumsum((1 - ps)[::-1])[::-1], 0.0]
        j = np.searchsorted(ps, c, side="right")
        beta, alpha = cw1[j] / cw1[0], cw0[j] / cw0[0]
    return RocCurve(c, np.asarray(alpha, float), np.asarray(beta, float), 1.0, 1.0)


def population_beta(spec: ScenarioSpec, alpha) -> np.ndarray:
    """Optimal population TPR at FPR ``alpha`` (piecewise-linear between fine cutoffs)."""
    alpha = np.asarray(alpha, dtype=float)
    if spec.kind in UNIFORM_KINDS:
        cc = 1 - np.sqrt(np.clip(alpha, 0, 1))
        return 1 - cc**2
    ni = _normal_index(spec)
    if ni is not None:
        mu, sd = ni

        def at(a):
            if a <= 0:
                return 0.0
            if a >= 1:
                return 1.0
            f = lambda t: _normal_index_rates(mu, sd, [expit(t)])[0][0] - a
            t = brentq(f, mu - 40 * sd - 40, mu + 40 * sd + 40, xtol=1e-12)
            return float(_normal_index_rates(mu, sd, [expit(t)])[1][0])

        return np.vectorize(at)(alpha)
    return analytic_roc(spec, 2001).interp(alpha)


# ---------------------------------------------------------------- PROC

@dataclass(frozen=True, eq=False)
class ProcResult:
    curve: RocCurve
    q_scores: np.ndarray
    recipe: str
    q_fit: FitResult | None = None
    bin_edges: np.ndarray | None = None


def _poly_basis(X, degree):
    Xc = (X - X.mean(axis=0)) / np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
    return np.column_stack([Xc**k for k in range(1, degree + 1)])


def proc_curve(data: Dataset, model_recipe: str = "logit", degree: int = 3, bins: int = 50,
               ridge: float | None = None, bin_feature: int = 0) -> ProcResult:
    """ROC of a model ``q_hat(x)`` of the human decisions, scored against outcomes.

    ``model_recipe``: ``"logit"`` (logit in x), ``"poly"`` (logit on powers of
    standardized features up to ``degree``) or ``"binned"`` (decision rate
    within ``bins`` quantile bins of one feature). A separating logit is
    refitted with ridge ``1e-3`` unless ``ridge`` is given.
    """
    if data.d is None or np.isnan(data.d).any():
        raise ValueError("proc_curve needs a complete decision column")
    data.require_both_classes("PROC")
    d = data.d.astype(np.int8)
    if d.min() == d.max():
        raise UndefinedRateError("decisions contain a single class; q(x) cannot be fitted")
    if model_recipe in ("logit", "poly"):
        X = data.X if model_recipe == "logit" else _poly_basis(data.X, degree)
        names = tuple(f"z{j}" for j in range(X.shape[1]))
        dd = Dataset(d, X, names)
        try:
            fit = fit_logit_mle(dd, ridge=ridge or 0.0)
        except SeparationError:
            if ridge is not None:
                raise
            fit = fit_logit_mle(dd, ridge=1e-3)
        q = fit.model.scores(X)
        return ProcResult(empirical_roc(q, data.y), q, model_recipe, q_fit=fit)
    if model_recipe == "binned":
        x = data.X[:, bin_feature]
        edges = np.unique(np.quantile(x, np.linspace(0, 1, bins + 1)))
        which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
        rate = np.bincount(which, weights=d, minlength=len(edges) - 1) / \
            np.maximum(np.bincount(which, minlength=len(edges) - 1), 1)
        q = rate[which]
        return ProcResult(empirical_roc(q, data.y), q, "binned", bin_edges=edges)
    raise ValueError(f"unknown model recipe {model_recipe!r}")


# ---------------------------------------------------------------- demos

def _batch_se(fn, n, batches):
    vals = [fn(slice(b * n // batches, (b + 1) * n // batches)) for b in range(batches)]
    return float(np.std(vals, ddof=1) / np.sqrt(batches))


@dataclass(frozen=True)
class Lemma2Report:
    aggregate: RocPoint
    beta_optimal: float
    margin: float
    se: float
    draws: int

    def to_dict(self):
        return {"pfpr": self.aggregate.fpr, "ptpr": self.aggregate.tpr,
                "beta_optimal": self.beta_optimal, "margin": self.margin, "se": self.se,
                "draws": self.draws}


def lemma2_demo(spec: ScenarioSpec | None = None, policy: CutoffPolicy | None = None,
                draws: int = 10**6, seed: int = 0, batches: int = 20) -> Lemma2Report:
    """Aggregate (FPR, TPR) of a cutoff policy vs the optimal ROC at the same FPR.

    The optimal ROC is the Monte Carlo population ROC of the true propensity
    on the same draws; the standard error comes from batch means.
    """
    spec = spec or ScenarioSpec("incentive_feature_cutoff", draws, seed)
    policy = policy or policy_for(spec)
    if policy is None:
        raise ValueError(f"scenario {spec.kind} has no cutoff policy; pass one")
    X, p = sample_features(spec, draws, _rng.stream(seed, 0))
    lam = policy.acceptance(X[:, 0], p)

    def margin_of(sl):
        pp, ll = p[sl], lam[sl]
        fpr = np.sum((1 - pp) * ll) / np.sum(1 - pp)
        tpr = np.sum(pp * ll) / np.sum(pp)
        return float(population_roc(pp, pp).interp(fpr)) - tpr, fpr, tpr

    margin, fpr, tpr = margin_of(slice(None))
    se = _batch_se(lambda sl: margin_of(sl)[0], draws, batches)
    return Lemma2Report(RocPoint(float(fpr), float(tpr)), float(margin + tpr), float(margin),
                        se, draws)


@dataclass(frozen=True, eq=False)
class Lemma4Report:
    aggregate: RocPoint
    proc_true_q: RocCurve
    proc_binned: RocCurve
    max_interior_distance: float  # binned PROC interior points vs the aggregate pair
    mroc: RocCurve

    def to_dict(self):
        return {"pfpr": self.aggregate.fpr, "ptpr": self.aggregate.tpr,
                "proc_true_q_points": len(self.proc_true_q),
                "proc_binned_points": len(self.proc_binned),
                "max_interior_distance": self.max_interior_distance,
                "mroc_tpr_at_pfpr": float(self.mroc.interp(self.aggregate.fpr))}


def lemma4_demo(n: int = 10**5, seed: int = 0, bins: int = 400) -> Lemma4Report:
    """Homogeneous cutoff with a misspecified human model: the PROC is a single point."""
    from .roc import aggregate_pair

    sim = generate(ScenarioSpec("misspecified_homogeneous", n, seed))
    data = sim.data
    agg = aggregate_pair(data.d, data.y)
    true_q = empirical_roc(sim.q_true, data.y)
    binned = proc_curve(data, "binned", bins=bins).curve
    corner = ((binned.fpr == 0) & (binned.tpr == 0)) | ((binned.fpr == 1) & (binned.tpr == 1))
    inner = ~corner
    dist = np.hypot(binned.fpr[inner] - agg.fpr, binned.tpr[inner] - agg.tpr)
    return Lemma4Report(agg, true_q, binned, float(dist.max()) if dist.size else 0.0,
                        empirical_roc(sim.true_p, data.y))


@dataclass(frozen=True, eq=False)
class Lemma5Report:
    alpha_grid: np.ndarray
    roc_xu: np.ndarray
    roc_x: np.ndarray
    aggregate: RocPoint
    aggregate_gap: float  # ROC(p(x,u)) at the aggregate FPR minus aggregate TPR

    @property
    def dominates(self) -> bool:
        return bool(np.all(self.roc_xu >= self.roc_x - 1e-12))

    @property
    def strict(self) -> bool:
        return bool(np.any(self.roc_xu > self.roc_x + 1e-12))

    def to_dict(self):
        return {"alpha": self.alpha_grid.tolist(), "roc_xu": self.roc_xu.tolist(),
                "roc_x": self.roc_x.tolist(), "dominates": self.dominates,
                "strict": self.strict, "pfpr": self.aggregate.fpr, "ptpr": self.aggregate.tpr,
                "aggregate_gap": self.aggregate_gap}


def lemma5_demo(u_effect: float = 1.0, draws: int = 10**6, seed: int = 0,
                alpha_grid=None, cutoff: float = 0.5) -> Lemma5Report:
    """ROC of ``p(x,u)`` against the machine ROC of ``p(x) = E[p(x,u) | x]``.

    Both curves weight draws by ``p(x,u)``, so they share one population.
    """
    grid = np.linspace(0.05, 0.95, 19) if alpha_grid is None else np.asarray(alpha_grid, float)
    spec = ScenarioSpec("info_two_dim", draws, seed,
                        {"human": "correct", "u_effect": u_effect, "cutoff": cutoff})
    sim = generate(spec)
    pxu = sim.p_xu
    roc_xu = population_roc(pxu, pxu)
    roc_x = weighted_roc(sim.true_p, pxu, 1 - pxu)
    lam = (pxu > cutoff).astype(float)
    agg = RocPoint(float(np.sum((1 - pxu) * lam) / np.sum(1 - pxu)),
                   float(np.sum(pxu * lam) / np.sum(pxu)))
    gap = float(roc_xu.interp(agg.fpr)) - agg.tpr
    return Lemma5Report(grid, roc_xu.interp(grid), roc_x.interp(grid), agg, gap)


@dataclass(frozen=True, eq=False)
class JensenReport:
    points: list
    average: RocPoint
    curve_at_average: float
    margin: float

    def to_dict(self):
        return {"points": [[p.fpr, p.tpr] for p in self.points],
                "average": [self.average.fpr, self.average.tpr],
                "curve_at_average": self.curve_at_average, "margin": self.margin}


def jensen_demo(J: int = 10, spec: ScenarioSpec | None = None) -> JensenReport:
    """Average of ``J`` distinct points on the population ROC, compared with the curve."""
    spec = spec or ScenarioSpec("misspecified_homogeneous", 1)
    cuts = np.linspace(0.05, 0.95, J)
    curve = analytic_roc(spec, cuts)
    inner = (curve.thresholds > 0) & (curve.thresholds < 1)
    pts = [RocPoint(float(a), float(b)) for a, b in zip(curve.fpr[inner], curve.tpr[inner])]
    a_bar = float(np.mean([p.fpr for p in pts]))
    b_bar = float(np.mean([p.tpr for p in pts]))
    f = float(population_beta(spec, a_bar))
    return JensenReport(pts, RocPoint(a_bar, b_bar), f, f - b_bar)


def lemma1_demo(kinds=("logit_baseline", "misspecified_homogeneous", "info_monotone",
                       "info_two_dim"), gridpoints: int = 201) -> dict:
    """Concavity check of population ROCs; returns violation counts per kind."""
    out = {}
    for kind in kinds:
        curve = analytic_roc(ScenarioSpec(kind, 1), gridpoints)
        out[kind] = {"violations": len(concavity_violations(curve)), "curve": curve}
    return out


def lemma3_demo(n: int = 20000, seed: int = 0) -> dict:
    """A decision model monotone in the propensity yields the machine's ROC exactly."""
    sim = generate(ScenarioSpec("info_monotone", n, seed))
    data = sim.data
    mroc = empirical_roc(fit_logit_mle(data).model.scores(data), data.y)
    proc = proc_curve(data, "logit").curve
    same = mroc.point_set() == proc.point_set()
    return {"identical_point_sets": bool(same), "mroc": mroc, "proc": proc}


# ---------------------------------------------------------------- heterogeneity

@dataclass(frozen=True, eq=False)
class HeterogeneityFit:
    """Least-squares polynomial ``h_hat(p, x)`` of decision rates on propensities."""

    coef: np.ndarray
    terms: tuple  # exponent tuples over (p, x_1, ..., x_k)
    degree: int
    monotonicity_pass: bool
    min_derivative: float
    p_grid: np.ndarray
    derivative_grid: np.ndarray
    fitted_raw: np.ndarray
    fitted_clipped: np.ndarray
    residual_rmse: float
    poor_fit: bool
    dropped_terms: tuple
    x_center: np.ndarray
    x_scale: np.ndarray

    def _design(self, p, X):
        Xs = (np.asarray(X, float).reshape(len(p), -1) - self.x_center) / self.x_scale
        V = np.c_[np.asarray(p, float), Xs]
        return np.column_stack([np.prod(V**np.array(t), axis=1) for t in self.terms])

    def predict(self, p, X) -> np.ndarray:
        return self._design(p, X) @ self.coef

    def predict_clipped(self, p, X) -> np.ndarray:
        return np.clip(self.predict(p, X), 0, 1)


def recover_heterogeneity(p_scores, q_scores, x, degree: int = 5, tol: float = 1e-3,
                          grid_size: int = 201, poor_fit_rmse: float = 0.05) -> HeterogeneityFit:
    """Fit ``q = h(p, x)`` by polynomial least squares and test monotonicity in ``p``.

    Terms are all monomials in ``(p, x)`` of total degree at most ``degree``,
    pure powers of ``p`` first; terms that are linearly dependent on earlier
    ones are dropped with a warning. Monotonicity passes when the derivative
    in ``p`` is at least ``-tol`` on a grid of ``p`` (1st to 99th percentile)
    with features held at their medians.
    """
    p = np.asarray(p_scores, dtype=float)
    q = np.asarray(q_scores, dtype=float)
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if np.any((p < 0) | (p > 1)) or np.any((q < 0) | (q > 1)):
        raise ValueError("scores must lie in [0,1]")
    X = np.asarray(x, dtype=float).reshape(len(p), -1)
    k = X.shape[1]
    center = X.mean(axis=0)
    scale = np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
    V = np.c_[p, (X - center) / scale]
    terms = [tuple([0] * (k + 1))]
    for deg in range(1, degree + 1):
        for c in itertools.combinations_with_replacement(range(k + 1), deg):
            terms.append(tuple(c.count(j) for j in range(k + 1)))
    terms.sort(key=lambda t: (sum(t[1:]) > 0, sum(t)))
    D = np.column_stack([np.prod(V**np.array(t), axis=1) for t in terms])
    keep, dropped = [], []
    for j in range(D.shape[1]):
        trial = D[:, keep + [j]]
        _, R = qr(trial, mode="economic")
        diag = np.abs(np.diag(R))
        if diag[-1] > 1e-9 * diag.max():
            keep.append(j)
        else:
            dropped.append(terms[j])
    if dropped:
        warnings.warn(f"dropped {len(dropped)} linearly dependent polynomial terms",
                      UserWarning, stacklevel=2)
    kept_terms = tuple(terms[j] for j in keep)
    coef, *_ = np.linalg.lstsq(D[:, keep], q, rcond=None)
    fitted = D[:, keep] @ coef
    rmse = float(np.sqrt(np.mean((q - fitted) ** 2)))
    lo, hi = np.quantile(p, [0.01, 0.99])
    grid = np.linspace(lo, hi, grid_size)
    med = np.median(X, axis=0)
    fit = HeterogeneityFit(coef, kept_terms, degree, True, 0.0, grid, np.zeros(grid_size),
                           fitted, np.clip(fitted, 0, 1), rmse, rmse > poor_fit_rmse,
                           tuple(dropped), center, scale)
    step = 1e-6
    Xg = np.tile(med, (grid_size, 1))
    deriv = (fit.predict(grid + step, Xg) - fit.predict(grid - step, Xg)) / (2 * step)
    mind = float(deriv.min())
    return HeterogeneityFit(coef, kept_terms, degree, bool(mind >= -tol), mind, grid, deriv,
                            fitted, np.clip(fitted, 0, 1), rmse, rmse > poor_fit_rmse,
                            tuple(dropped), center, scale)
