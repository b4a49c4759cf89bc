import json
import warnings

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.special import expit
from scipy.stats import norm

from conftest import baseline_data
from rocinfer.bands import (ConfidenceBand, bootstrap_band, estimate_score_density,
                            horizontal_band, monotone_band, pava, psi_influence, vertical_band)
from rocinfer.data import split
from rocinfer.errors import DegenerateDensityError, InversionError, RangeError
from rocinfer.models import ModelRecipe, fit_logit_mle

GRID = np.round(np.arange(0.1, 0.91, 0.1), 10)


@pytest.fixture(scope="module")
def halves():
    return split(baseline_data(20000, 21), 0.5, seed=1)


@pytest.fixture(scope="module")
def train_fit(halves):
    return fit_logit_mle(halves[0])


def linear_band(d=0.05):
    grid = np.linspace(0.1, 0.9, 81)
    return ConfidenceBand(grid, grid.copy(), grid - d, grid + d, 0.95, "analytic",
                          np.ones_like(grid), 100, np.zeros(len(grid), bool))


class TestDensity:
    def test_uniform(self):
        u = np.random.default_rng(0).uniform(size=10**5)
        dens = estimate_score_density(u)
        vals = dens(np.linspace(0.1, 0.9, 41))
        assert np.all(np.abs(vals - 1) < 0.1)

    def test_integrates_to_one(self):
        s = expit(np.random.default_rng(1).normal(1, 1, 10**4))
        x = np.linspace(0, 1, 2001)
        assert abs(trapezoid(estimate_score_density(s)(x), x) - 1) < 0.01

    def test_nonnegative(self):
        s = np.random.default_rng(2).beta(0.5, 3, 500)
        assert np.all(estimate_score_density(s)(np.linspace(-0.5, 1.5, 201)) >= 0)

    def test_degenerate(self):
        with pytest.raises(DegenerateDensityError):
            estimate_score_density(np.full(50, 0.5))

    def test_too_few(self):
        with pytest.raises(DegenerateDensityError):
            estimate_score_density(np.linspace(0.1, 0.9, 10))


class TestPsiInfluence:
    def test_known_theta_isolates_two_moment_terms(self, halves, train_fit):
        test = halves[1]
        res = psi_influence(test, train_fit, 0.3, known_theta=True)
        # two-moment terms computed from scratch
        idx = train_fit.model.index(test.X)
        y = test.y
        neg = np.sort(idx[y == 0])[::-1]
        cut = neg[int(np.floor(0.3 * len(neg)))]
        flag = idx > cut
        beta = flag[y == 1].mean()
        r = expit(cut) / (1 - expit(cut))
        term = (y * (flag - beta) - r * (1 - y) * (flag - 0.3)) / y.mean()
        assert abs(res.sigma**2 - np.mean(term**2)) < 1e-10
        assert not res.includes_estimation_uncertainty
        assert flag[y == 0].mean() <= 0.3

    def test_independent_training_sample_adds_uncorrelated_block(self, halves, train_fit):
        test = halves[1]
        full = psi_influence(test, train_fit, 0.3)
        known = psi_influence(test, train_fit, 0.3, known_theta=True)
        n_e, n_t = test.n, train_fit.n_obs
        total = n_e + n_t
        # eval block is the known-theta term, training block is kappa @ g, on disjoint rows
        np.testing.assert_allclose(full.psi[:n_e], known.psi * total / n_e, rtol=1e-12)
        var_sum = np.mean(known.psi**2) / n_e + np.mean((train_fit.kappa @ full.g) ** 2) / n_t
        assert full.se**2 == pytest.approx(var_sum, rel=1e-10)
        assert np.isfinite(full.sigma) and full.se > known.se

    def test_mean_diagnostic(self, halves, train_fit):
        for a in (0.1, 0.3, 0.5, 0.8):
            res = psi_influence(halves[1], train_fit, a)
            assert abs(res.mean) < 3 * res.sigma / np.sqrt(len(res.psi))

    def test_in_sample_mean(self, baseline_10k):
        fit = fit_logit_mle(baseline_10k, True)
        res = psi_influence(baseline_10k, fit, 0.4, in_sample=True)
        assert len(res.psi) == baseline_10k.n
        assert abs(res.mean) < 3 * res.sigma / np.sqrt(baseline_10k.n)

    def test_density_plugins(self, halves, train_fit):
        res = psi_influence(halves[1], train_fit, 0.3)
        assert res.p_c < 0 and res.q_c < 0
        assert res.q_c / res.p_c == pytest.approx(res.c_alpha / (1 - res.c_alpha))

    def test_range(self, halves, train_fit):
        for a in (0.0, 1.0, -0.2):
            with pytest.raises(RangeError):
                psi_influence(halves[1], train_fit, a)

    @pytest.mark.slow
    def test_sigma_matches_monte_carlo(self):
        # fresh training and evaluation samples of 10000 each, 500 times
        betas = []
        for r in range(500):
            train, test = baseline_data(10000, 5000 + r), baseline_data(10000, 6000 + r)
            fit = fit_logit_mle(train, True)
            neg = np.sort(fit.model.index(test.X)[test.y == 0])[::-1]
            cut = neg[int(np.floor(0.3 * len(neg)))]
            betas.append((fit.model.index(test.X)[test.y == 1] > cut).mean())
        train, test = baseline_data(10000, 4998), baseline_data(10000, 4999)
        res = psi_influence(test, fit_logit_mle(train, True), 0.3)
        assert res.se == pytest.approx(np.std(betas, ddof=1), rel=0.15)


class TestVerticalBand:
    def test_half_width_definition(self, halves, train_fit):
        band = vertical_band(halves[1], train_fit, GRID, level=0.95)
        d = norm.ppf(0.975) * band.sigma_hat / np.sqrt(band.n)
        ok = ~band.clipped
        assert ok.all()
        np.testing.assert_allclose(band.upper - band.beta_hat, d, rtol=1e-12)
        np.testing.assert_allclose(band.beta_hat - band.lower, d, rtol=1e-12)

    def test_ordering_and_clipping(self, halves, train_fit):
        band = vertical_band(halves[1], train_fit, [0.01, 0.5, 0.99], level=0.999)
        assert np.all((band.lower <= band.beta_hat) & (band.beta_hat <= band.upper))
        assert np.all((band.lower >= 0) & (band.upper <= 1))

    def test_four_times_n_halves_width(self):
        def width(n, seed):
            train, test = split(baseline_data(2 * n, seed), 0.5, seed)
            return vertical_band(test, fit_logit_mle(train, True), GRID[1:-1]).half_width

        ratio = width(5000, 31) / width(20000, 32)
        assert np.all(np.abs(ratio - 2) < 0.3)

    def test_bad_inputs(self, halves, train_fit):
        with pytest.raises(ValueError):
            vertical_band(halves[1], train_fit, GRID, level=1.2)
        with pytest.raises(RangeError):
            vertical_band(halves[1], train_fit, [0.0, 0.5])
        with pytest.raises(ValueError):
            vertical_band(halves[1], train_fit, [0.5, 0.3])

    def test_serialization(self, tmp_path, halves, train_fit):
        band = vertical_band(halves[1], train_fit, GRID)
        band.to_csv(tmp_path / "b.csv")
        rows = (tmp_path / "b.csv").read_text().splitlines()
        assert rows[0] == "alpha,beta_hat,lower,upper,sigma_hat" and len(rows) == len(GRID) + 1
        d = json.loads(band.to_json())
        assert {"version", "level", "method", "B", "seed"} <= set(d)


class TestHorizontalBand:
    def test_linear_band(self):
        hb = horizontal_band(linear_band(0.05), beta_grid=np.linspace(0.15, 0.85, 71))
        np.testing.assert_allclose(hb.alpha_lower, hb.beta_grid - 0.05, atol=1e-12)
        np.testing.assert_allclose(hb.alpha_upper, hb.beta_grid + 0.05, atol=1e-12)

    def test_round_trip(self, halves, train_fit):
        band = monotone_band(vertical_band(halves[1], train_fit, np.linspace(0.05, 0.95, 91)))
        hb = horizontal_band(band)
        lower, upper = hb.to_vertical(band.alpha_grid)
        inner = slice(1, -1)
        np.testing.assert_allclose(lower[inner], band.lower[inner], atol=1e-6)
        np.testing.assert_allclose(upper[inner], band.upper[inner], atol=1e-6)

    def test_relations(self):
        hb = horizontal_band(linear_band(0.05), beta_grid=[0.3, 0.5])
        v = hb.vertical
        np.testing.assert_allclose(np.interp(hb.alpha_lower, v.alpha_grid, v.upper), [0.3, 0.5])
        np.testing.assert_allclose(np.interp(hb.alpha_upper, v.alpha_grid, v.lower), [0.3, 0.5])

    def test_membership_equivalence(self, halves, train_fit):
        raw = vertical_band(halves[1], train_fit, np.linspace(0.02, 0.98, 49))
        hb = horizontal_band(raw)
        rng = np.random.default_rng(0)
        a, b = rng.uniform(size=10**4), rng.uniform(size=10**4)
        np.testing.assert_array_equal(hb.vertical.contains(a, b), hb.contains(a, b))
        assert hb.contains(a, b).sum() > 100

    def test_pava(self):
        np.testing.assert_allclose(pava([1, 3, 2, 4]), [1, 2.5, 2.5, 4])
        np.testing.assert_allclose(pava([3, 2, 1]), [2, 2, 2])

    def test_flat_band(self):
        band = linear_band()
        flat = ConfidenceBand(band.alpha_grid, np.full(81, 0.5), band.lower * 0 + 0.4,
                              band.upper * 0 + 0.6, 0.95, "analytic", band.sigma_hat, 100,
                              band.clipped)
        with pytest.raises(InversionError):
            horizontal_band(flat)


@pytest.fixture(scope="module")
def small():
    return baseline_data(2000, 41)


class TestBootstrapBand:
    def test_deterministic(self, small):
        a = bootstrap_band(small, ModelRecipe(), 100, GRID, seed=3)
        b = bootstrap_band(small, ModelRecipe(), 100, GRID, seed=3)
        np.testing.assert_array_equal(a.lower, b.lower)
        np.testing.assert_array_equal(a.upper, b.upper)

    def test_thread_count_irrelevant(self, small):
        a = bootstrap_band(small, ModelRecipe(), 100, GRID, seed=5, threads=1)
        b = bootstrap_band(small, ModelRecipe(), 100, GRID, seed=5, threads=4)
        np.testing.assert_array_equal(a.replicates, b.replicates)

    def test_two_replicates_min_max(self, small):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            band = bootstrap_band(small, ModelRecipe(), 2, GRID, seed=1)
        np.testing.assert_array_equal(band.lower, band.replicates.min(axis=0))
        np.testing.assert_array_equal(band.upper, band.replicates.max(axis=0))

    def test_small_B(self, small):
        with pytest.warns(UserWarning):
            bootstrap_band(small, ModelRecipe(), 10, GRID)
        with pytest.raises(ValueError):
            bootstrap_band(small, ModelRecipe(), 1, GRID)

    @pytest.mark.slow
    def test_sigma_matches_analytic(self, baseline_20k):
        boot = bootstrap_band(baseline_20k, ModelRecipe(), 1000, [0.5], seed=0, threads=4)
        train, test = split(baseline_20k, 0.5, seed=0)
        res = psi_influence(test, fit_logit_mle(train), 0.5)
        assert boot.replicates[:, 0].std(ddof=1) == pytest.approx(res.se, rel=0.15)
