"""Bayes engine: log-posterior assembly against independently coded density
terms, prior recovery, chain determinism and health, derived dose curves,
and the dose-only comparator."""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from doseopt.pkpd import (
    DomainError,
    DoseGrid,
    ModelParams,
    PatientPk,
    PdParams,
    PkPopulation,
    ToxicityLink,
)
from doseopt.posterior import (
    THETA_NAMES,
    ComparatorPriorSpec,
    DoseCurves,
    McmcSettings,
    PatientRecord,
    Phase1Data,
    PosteriorDraws,
    PriorSpec,
    comparator_dose_curves,
    dose_curves,
    log_posterior,
    sample_comparator_posterior,
    sample_posterior,
    tail_prob,
)

GRID = DoseGrid((15.0, 30.0, 60.0, 90.0, 120.0))


def make_draws(theta_rows) -> PosteriorDraws:
    theta = np.asarray(theta_rows, dtype=float)
    return PosteriorDraws(names=THETA_NAMES, theta=theta,
                          latent_v=np.empty((len(theta), 0)),
                          latent_k=np.empty((len(theta), 0)),
                          acceptance={}, settings=McmcSettings(10, 0, 1))


def theta_row(alpha_v=5.0, lambda_v=1.0, alpha_k=4.0, lambda_k=1.0, sigma=1.0,
              beta0=-3.0, beta1=1.0, e_max=0.5, ed50=40.0, gamma=None):
    if gamma is None:
        gamma = 2.0 / alpha_k
    return (alpha_v, lambda_v, alpha_k, lambda_k, sigma, beta0, beta1,
            e_max, ed50, gamma)


def random_instance(rng):
    """Random parameters, latents, and a small dataset on the grid."""
    pk = PkPopulation(alpha_v=1.0 + rng.uniform(0.5, 8.0),
                      lambda_v=rng.uniform(0.3, 3.0),
                      alpha_k=1.0 + rng.uniform(0.5, 8.0),
                      lambda_k=rng.uniform(0.3, 3.0))
    params = ModelParams(
        pk=pk,
        tox=ToxicityLink(beta0=rng.normal(-3, 1), beta1=rng.uniform(0.2, 2.0)),
        pd=PdParams(e_max=rng.uniform(0.2, 2.0), ed50=rng.uniform(5, 60),
                    gamma=2.0 / pk.alpha_k),
        sigma=rng.uniform(0.4, 2.0),
    )
    patients, latents = [], []
    for _ in range(rng.integers(1, 5)):
        n_obs = int(rng.integers(0, 4))
        times = tuple(sorted(rng.uniform(0.5, 24, size=n_obs).tolist()))
        eff = rng.choice([0, 1, None])
        patients.append(PatientRecord(
            dose_amount=float(rng.choice(GRID.amounts)),
            times=times,
            log_concentrations=tuple(rng.normal(0, 1, size=n_obs).tolist()),
            dlt=int(rng.integers(0, 2)),
            efficacy=None if eff is None else int(eff),
        ))
        latents.append(PatientPk(v=rng.uniform(0.5, 10), k=rng.uniform(0.2, 6)))
    return params, latents, Phase1Data(GRID, patients)


def scripted_log_posterior(params, latents, data, prior, include_efficacy):
    """Independent per-term assembly with scipy densities and an arctan
    cumulative effect coded separately from the library."""
    pk, tox, pd = params.pk, params.tox, params.pd
    total = 0.0
    total += stats.gamma.logpdf(pk.alpha_v - 1, prior.alpha_v_shift_shape,
                                scale=1 / prior.alpha_v_shift_rate)
    total += stats.gamma.logpdf(pk.lambda_v, prior.lambda_v_shape,
                                scale=1 / prior.lambda_v_rate)
    total += stats.gamma.logpdf(pk.alpha_k - 1, prior.alpha_k_shift_shape,
                                scale=1 / prior.alpha_k_shift_rate)
    total += stats.gamma.logpdf(pk.lambda_k, prior.lambda_k_shape,
                                scale=1 / prior.lambda_k_rate)
    total += stats.gamma.logpdf(params.sigma, prior.sigma_shape,
                                scale=1 / prior.sigma_rate)
    total += stats.norm.logpdf(tox.beta0, prior.beta0_mean,
                               math.sqrt(prior.beta0_var))
    total += stats.lognorm.logpdf(tox.beta1, math.sqrt(prior.beta1_log_var),
                                  scale=math.exp(prior.beta1_log_mean))
    total += stats.lognorm.logpdf(pd.e_max, math.sqrt(prior.e_max_log_var),
                                  scale=math.exp(prior.e_max_log_mean))
    total += stats.gamma.logpdf(pd.ed50, prior.ed50_shape,
                                scale=1 / prior.ed50_rate)

    for rec, lat in zip(data.patients, latents):
        for t, lx in zip(rec.times, rec.log_concentrations):
            mean = math.log(rec.dose_amount / lat.v) - lat.k * t
            total += stats.norm.logpdf(lx, mean, params.sigma)
        total += stats.gamma.logpdf(lat.v, pk.alpha_v, scale=1 / pk.lambda_v)
        total += stats.gamma.logpdf(lat.k, pk.alpha_k, scale=1 / pk.lambda_k)

    counts = data.dose_counts()
    for i, d in enumerate(GRID.amounts):
        n, y = int(counts["n"][i]), int(counts["dlt"][i])
        if n:
            auc = d * pk.lambda_v * pk.lambda_k / ((pk.alpha_v - 1) * (pk.alpha_k - 1))
            p = float(expit(tox.beta0 + tox.beta1 * math.log(auc)))
            total += y * math.log(p) + (n - y) * math.log1p(-p)
        m, z = int(counts["eff_known"][i]), int(counts["eff"][i])
        if include_efficacy and m:
            c = (d * pk.lambda_v * pk.lambda_k ** pk.alpha_k
                 / (pk.alpha_v - 1)) ** pd.gamma / pd.ed50 ** pd.gamma
            eta = math.sqrt(c) * pd.e_max * (math.pi / 2
                                             - math.atan(pk.lambda_k / math.sqrt(c)))
            q = 1.0 - math.exp(-eta)
            total += z * math.log(q) + (m - z) * math.log1p(-q)
    return total


def batch_mcse(x: np.ndarray, n_batches: int = 25) -> float:
    n = len(x) // n_batches * n_batches
    batches = x[:n].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / math.sqrt(n_batches))


class TestLogPosterior:
    def test_matches_scripted_terms(self):
        rng = np.random.default_rng(314)
        prior = PriorSpec()
        for i in range(100):
            params, latents, data = random_instance(rng)
            include = bool(i % 2)
            got = log_posterior(params, latents, data, prior, include)
            want = scripted_log_posterior(params, latents, data, prior, include)
            assert got == pytest.approx(want, abs=1e-10), f"instance {i}"

    def test_empty_data_is_prior_only(self):
        from doseopt.posterior import log_prior
        params, _, _ = random_instance(np.random.default_rng(0))
        prior = PriorSpec()
        empty = Phase1Data(GRID)
        assert log_posterior(params, [], empty, prior) == pytest.approx(
            log_prior(params, prior), abs=1e-12)

    def test_misaligned_latents(self):
        params, latents, data = random_instance(np.random.default_rng(1))
        with pytest.raises(DomainError):
            log_posterior(params, latents + [PatientPk(1, 1)], data, PriorSpec())

    def test_support_enforced_by_types(self):
        # invalid components are unrepresentable rather than -inf
        with pytest.raises(DomainError):
            ModelParams(pk=PkPopulation(2, 1, 2, 1),
                        tox=ToxicityLink(-3, 1.0),
                        pd=PdParams(0.5, 40.0, 1.0), sigma=-1.0)


class TestPriorRecovery:
    # analytic prior moments: mean, sd
    MOMENTS = {
        "alpha_v": (5.0, 2.0),
        "lambda_v": (1.0, 1.0),
        "alpha_k": (4.0, math.sqrt(3.0)),
        "lambda_k": (1.0, 1.0),
        "sigma": (1.0, 1.0 / math.sqrt(3.0)),
        "beta0": (-3.0, math.sqrt(10.0)),
        "beta1": (math.exp(0.5), math.sqrt((math.e - 1) * math.e)),
        "e_max": (math.exp(-0.75), math.sqrt((math.exp(0.5) - 1) * math.exp(-1.5))),
        "ed50": (40.0, math.sqrt(80.0)),
    }

    def test_empty_data_recovers_prior(self):
        draws = sample_posterior(Phase1Data(GRID), PriorSpec(),
                                 McmcSettings(42_000, 2_000, 8), seed=2024)
        for name, (mean, sd) in self.MOMENTS.items():
            x = draws.col(name)
            se = batch_mcse(x)
            assert abs(x.mean() - mean) < 3 * se, \
                f"{name}: {x.mean():.3f} vs {mean:.3f} (se {se:.4f})"
            sd_se = batch_mcse((x - x.mean()) ** 2) / (2 * sd)
            assert abs(x.std(ddof=1) - sd) < 4 * max(sd_se, 0.01 * sd), \
                f"{name} sd: {x.std(ddof=1):.3f} vs {sd:.3f}"

    def test_tied_hill_factor(self):
        draws = sample_posterior(Phase1Data(GRID), PriorSpec(),
                                 McmcSettings(2_000, 1_000, 4), seed=5)
        assert np.allclose(draws.col("gamma") * draws.col("alpha_k"), 2.0)


def synthetic_data(seed: int, n_patients: int = 30,
                   tox_probs=(0.11, 0.19, 0.31, 0.39, 0.46)) -> Phase1Data:
    """Patients drawn from the volume~Gamma(4,1), rate~Gamma(3,1), noise-sd 1
    generating law, spread evenly over the grid."""
    rng = np.random.default_rng(seed)
    times = (1.0, 3.0, 5.0, 7.0, 12.0, 24.0)
    data = Phase1Data(GRID)
    for i in range(n_patients):
        idx = i % GRID.size
        d = GRID.amounts[idx]
        v = rng.gamma(4.0, 1.0)
        k = rng.gamma(3.0, 1.0 / 1.0)
        logx = tuple(math.log(d / v) - k * t + rng.normal(0, 1.0) for t in times)
        data.add(PatientRecord(dose_amount=d, times=times,
                               log_concentrations=logx,
                               dlt=int(rng.random() < tox_probs[idx]),
                               efficacy=int(rng.random() < 0.3)))
    return data


class TestSampler:
    def test_deterministic_given_seed(self):
        data = synthetic_data(11)
        a = sample_posterior(data, PriorSpec(), McmcSettings(800, 400, 2),
                             include_efficacy=True, seed=99)
        b = sample_posterior(data, PriorSpec(), McmcSettings(800, 400, 2),
                             include_efficacy=True, seed=99)
        assert np.array_equal(a.theta, b.theta)
        assert np.array_equal(a.latent_v, b.latent_v)
        assert np.array_equal(a.latent_k, b.latent_k)

    def test_retained_draws_valid(self):
        data = synthetic_data(3)
        draws = sample_posterior(data, PriorSpec(), McmcSettings(1_000, 500, 2),
                                 include_efficacy=True, seed=17)
        assert np.all(draws.col("alpha_v") > 1)
        assert np.all(draws.col("alpha_k") > 1)
        for name in ("lambda_v", "lambda_k", "sigma", "beta1", "e_max", "ed50"):
            assert np.all(draws.col(name) > 0)
        assert np.all(draws.col("gamma") * draws.col("alpha_k") > 1)
        assert np.all(draws.latent_v > 0)
        assert np.all(draws.latent_k > 0)

    def test_acceptance_rates_after_adaptation(self):
        data = synthetic_data(29)
        draws = sample_posterior(data, PriorSpec(), McmcSettings(4_000, 2_000, 4),
                                 include_efficacy=True, seed=8)
        for name, rate in draws.acceptance.items():
            assert 0.1 <= rate <= 0.6, f"{name}: {rate:.3f}"

    def test_retained_count(self):
        data = Phase1Data(GRID)
        draws = sample_posterior(data, PriorSpec(), McmcSettings(1_000, 400, 7),
                                 seed=0)
        assert draws.n_draws == math.ceil((1_000 - 400) / 7)

    def test_doubling_data_does_not_hurt(self):
        # median absolute error of the posterior mean toxicity curve over 20
        # seeds, 30 vs 60 patients on fixed ground truth
        truth = np.array([0.11, 0.19, 0.31, 0.39, 0.46])
        errs = {30: [], 60: []}
        for seed in range(20):
            for n in (30, 60):
                data = synthetic_data(1_000 + seed, n_patients=n)
                draws = sample_posterior(data, PriorSpec(),
                                         McmcSettings(1_500, 700, 2),
                                         seed=10_000 + seed)
                p_hat = dose_curves(draws, GRID).tox.mean(axis=0)
                errs[n].extend(np.abs(p_hat - truth).tolist())
        assert np.median(errs[60]) <= np.median(errs[30])


class TestDoseCurves:
    def test_flat_slope_gives_constant_row(self):
        draws = make_draws([theta_row(beta1=1e-15)])
        curves = dose_curves(draws, GRID)
        assert np.allclose(curves.tox[0], curves.tox[0, 0])

    def test_rows_monotone(self):
        rng = np.random.default_rng(4)
        rows = [theta_row(alpha_v=1 + rng.uniform(0.5, 8), lambda_v=rng.uniform(0.3, 3),
                          alpha_k=1 + rng.uniform(0.5, 8), lambda_k=rng.uniform(0.3, 3),
                          beta0=rng.normal(-3, 1), beta1=rng.uniform(0.2, 2),
                          e_max=rng.uniform(0.2, 2), ed50=rng.uniform(5, 60))
                for _ in range(50)]
        curves = dose_curves(make_draws(rows), GRID)
        assert np.all(np.diff(curves.tox, axis=1) >= 0)
        assert np.all(np.diff(curves.eff, axis=1) >= -1e-15)
        assert np.all((curves.tox > 0) & (curves.tox < 1))
        assert np.all((curves.eff >= 0) & (curves.eff <= 1))

    def test_matches_scalar_operations(self):
        from doseopt.pkpd import efficacy_prob, toxicity_prob
        row = theta_row(alpha_v=4.2, lambda_v=0.8, alpha_k=3.1, lambda_k=1.4,
                        beta0=-2.5, beta1=0.9, e_max=0.7, ed50=25.0)
        curves = dose_curves(make_draws([row]), GRID)
        pk = PkPopulation(4.2, 0.8, 3.1, 1.4)
        tox = ToxicityLink(-2.5, 0.9)
        pd = PdParams(0.7, 25.0, 2.0 / 3.1)
        for j, d in enumerate(GRID.amounts):
            assert curves.tox[0, j] == pytest.approx(toxicity_prob(d, pk, tox),
                                                     rel=1e-12)
            assert curves.eff[0, j] == pytest.approx(efficacy_prob(d, pk, pd),
                                                     rel=1e-10)

    def test_posterior_mean_is_column_mean(self):
        rows = [theta_row(beta0=-3.0), theta_row(beta0=-2.0)]
        curves = dose_curves(make_draws(rows), GRID)
        assert np.allclose(curves.tox.mean(axis=0),
                           (curves.tox[0] + curves.tox[1]) / 2)

    def test_free_hill_quadrature_rows(self):
        row = theta_row(gamma=0.9)  # hill*alpha_k = 3.6 -> quadrature path
        curves = dose_curves(make_draws([row]), GRID)
        assert np.all(np.diff(curves.eff[0]) >= 0)

    def test_empty_draws_rejected(self):
        with pytest.raises(DomainError):
            dose_curves(make_draws(np.empty((0, 10))), GRID)


class TestTailProb:
    def test_all_above(self):
        m = np.full((50, 3), 0.9)
        assert tail_prob(m, 2, 0.3, ">") == 1.0

    def test_symmetric_pairs(self):
        eps = 0.01
        col = np.array([0.3 - eps, 0.3 + eps] * 500)
        m = col[:, None]
        assert tail_prob(m, 1, 0.3, ">") == 0.5
        assert tail_prob(m, 1, 0.3, "<") == 0.5

    def test_uniform_draws(self):
        rng = np.random.default_rng(77)
        m = rng.uniform(0, 1, size=(1000, 1))
        got = tail_prob(m, 1, 0.3, ">")
        assert got == pytest.approx(0.7, abs=0.045)

    def test_direction_validation(self):
        with pytest.raises(DomainError):
            tail_prob(np.ones((5, 2)), 1, 0.5, ">=")


class TestComparator:
    MOMENTS = {
        "beta0": (-3.0, 10.0),
        "beta1": (1.0, math.sqrt((math.exp(2) - 1))),
        "e_max": (math.exp(-0.75), math.sqrt((math.exp(0.5) - 1) * math.exp(-1.5))),
        "ed50": (100.0, math.sqrt(1000.0)),
        "gamma": (1.0, math.sqrt(10.0)),
    }

    def test_prior_recovery(self):
        draws = sample_comparator_posterior(
            Phase1Data(GRID), ComparatorPriorSpec(),
            McmcSettings(82_000, 2_000, 8), seed=314)
        for name, (mean, _) in self.MOMENTS.items():
            x = draws.col(name)
            se = batch_mcse(x)
            assert abs(x.mean() - mean) < 3 * se, \
                f"{name}: {x.mean():.3f} vs {mean} (se {se:.4f})"

    def test_deterministic(self):
        data = synthetic_data(2)
        a = sample_comparator_posterior(data, ComparatorPriorSpec(),
                                        McmcSettings(600, 300, 2),
                                        include_efficacy=True, seed=1)
        b = sample_comparator_posterior(data, ComparatorPriorSpec(),
                                        McmcSettings(600, 300, 2),
                                        include_efficacy=True, seed=1)
        assert np.array_equal(a.theta, b.theta)

    def test_flat_slope_row(self):
        draws = PosteriorDraws(
            names=("beta0", "beta1", "e_max", "ed50", "gamma"),
            theta=np.array([[-3.0, 1e-15, 0.5, 40.0, 1.0]]),
            latent_v=np.empty((1, 0)), latent_k=np.empty((1, 0)),
            acceptance={}, settings=McmcSettings(10, 0, 1))
        curves = comparator_dose_curves(draws, GRID)
        assert np.allclose(curves.tox[0], curves.tox[0, 0])
        assert np.all(np.diff(curves.eff[0]) >= 0)

    def test_fits_with_data(self):
        data = synthetic_data(8)
        draws = sample_comparator_posterior(data, ComparatorPriorSpec(),
                                            McmcSettings(2_000, 1_000, 2),
                                            include_efficacy=True, seed=12)
        for rate in draws.acceptance.values():
            assert 0.05 <= rate <= 0.7
        curves = comparator_dose_curves(draws, GRID)
        assert np.all((curves.tox > 0) & (curves.tox < 1))

    def test_vectorized_curves_match_parameter_point(self):
        from doseopt.posterior import ComparatorParams
        point = ComparatorParams(beta0=-2.5, beta1=0.8, e_max=0.6, ed50=55.0,
                                 gamma=1.3)
        draws = PosteriorDraws(
            names=("beta0", "beta1", "e_max", "ed50", "gamma"),
            theta=np.array([[-2.5, 0.8, 0.6, 55.0, 1.3]]),
            latent_v=np.empty((1, 0)), latent_k=np.empty((1, 0)),
            acceptance={}, settings=McmcSettings(10, 0, 1))
        curves = comparator_dose_curves(draws, GRID)
        for j, d in enumerate(GRID.amounts):
            assert curves.tox[0, j] == pytest.approx(point.toxicity_prob(d),
                                                     rel=1e-12)
            assert curves.eff[0, j] == pytest.approx(point.efficacy_prob(d),
                                                     rel=1e-12)

    def test_parameter_point_validation(self):
        from doseopt.posterior import ComparatorParams
        with pytest.raises(DomainError):
            ComparatorParams(beta0=0.0, beta1=-1.0, e_max=1.0, ed50=1.0,
                             gamma=1.0)
        with pytest.raises(DomainError):
            ComparatorParams(beta0=math.inf, beta1=1.0, e_max=1.0, ed50=1.0,
                             gamma=1.0)


class TestDrawsExport:
    def test_csv_round_trip(self, tmp_path):
        import csv

        from doseopt.posterior import draws_to_csv

        data = synthetic_data(4, n_patients=3)
        draws = sample_posterior(data, PriorSpec(), McmcSettings(200, 100, 5),
                                 seed=6)
        path = tmp_path / "draws.csv"
        draws_to_csv(draws, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:10] == list(THETA_NAMES)
        assert rows[0][10:] == ["latent_v_1", "latent_v_2", "latent_v_3",
                                "latent_k_1", "latent_k_2", "latent_k_3"]
        assert len(rows) == 1 + draws.n_draws
        back = np.array([[float(x) for x in row] for row in rows[1:]])
        assert np.allclose(back[:, :10], draws.theta, rtol=1e-11)


class TestPatientRecord:
    def test_validation(self):
        with pytest.raises(DomainError):
            PatientRecord(30.0, times=(1, 2), log_concentrations=(0.5,), dlt=0)
        with pytest.raises(DomainError):
            PatientRecord(30.0, times=(2, 1), log_concentrations=(0.5, 0.2), dlt=0)
        with pytest.raises(DomainError):
            PatientRecord(30.0, dlt=2)
        with pytest.raises(DomainError):
            PatientRecord(30.0, dlt=0, efficacy=3)

    def test_pending_efficacy_excluded_from_counts(self):
        data = Phase1Data(GRID, [
            PatientRecord(15.0, dlt=0, efficacy=1),
            PatientRecord(15.0, dlt=1, efficacy=None),
            PatientRecord(15.0, dlt=0, efficacy=0),
        ])
        counts = data.dose_counts()
        assert counts["n"][0] == 3
        assert counts["dlt"][0] == 1
        assert counts["eff_known"][0] == 2
        assert counts["eff"][0] == 1

    def test_off_grid_dose_rejected(self):
        with pytest.raises(DomainError):
            Phase1Data(GRID, [PatientRecord(17.0, dlt=0)])
