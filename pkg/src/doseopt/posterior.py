"""Joint Bayesian inference for the PK/PD dose-response model.

The posterior combines, per patient, a lognormal likelihood for the observed
concentration series, gamma population priors on the latent volume and
elimination rate, and per-dose Bernoulli likelihoods for toxicity (always)
and efficacy (optional, since efficacy reads out much later than toxicity).

Sampling is by component-wise adaptive random-walk Metropolis: one block per
scalar parameter (positive parameters proposed on the log scale, the
toxicity intercept on the natural scale) plus per-patient latent blocks.
Step sizes adapt toward a 0.3 acceptance rate during burn-in and are frozen
afterwards.  A sampler instance is single threaded; independent runs with
different seeds are safe to execute concurrently.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .pkpd import (
    CLOSED_FORM_TOL,
    DomainError,
    DoseGrid,
    ModelParams,
    PatientPk,
    PkPopulation,
    ToxicityLink,
    _auc_population,
    _conc_patient,
    _cumulative_effect,
)

THETA_NAMES = ("alpha_v", "lambda_v", "alpha_k", "lambda_k", "sigma",
               "beta0", "beta1", "e_max", "ed50", "gamma")

COMPARATOR_NAMES = ("beta0", "beta1", "e_max", "ed50", "gamma")

ADAPT_TARGET = 0.3


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PatientRecord:
    """One subject: assigned dose, concentration series, and binary outcomes.

    efficacy may be None while the response is still pending; such patients
    contribute their PK and toxicity terms but are excluded from the
    efficacy counts.
    """

    dose_amount: float
    times: tuple[float, ...] = ()
    log_concentrations: tuple[float, ...] = ()
    dlt: int = 0
    efficacy: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "log_concentrations",
                           tuple(float(x) for x in self.log_concentrations))
        if len(self.times) != len(self.log_concentrations):
            raise DomainError("times and log_concentrations must align")
        if any(not math.isfinite(t) for t in self.times):
            raise DomainError("times must be finite")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise DomainError("times must be strictly increasing")
        if any(not math.isfinite(x) for x in self.log_concentrations):
            raise DomainError("log concentrations must be finite")
        if self.dlt not in (0, 1):
            raise DomainError(f"dlt must be 0 or 1, got {self.dlt!r}")
        if self.efficacy not in (0, 1, None):
            raise DomainError(f"efficacy must be 0, 1 or None, got {self.efficacy!r}")


@dataclass
class Phase1Data:
    """Accrued dose-finding data against a fixed dose grid."""

    grid: DoseGrid
    patients: list[PatientRecord] = field(default_factory=list)

    def __post_init__(self):
        for rec in self.patients:
            self.grid.index_of(rec.dose_amount)

    def add(self, record: PatientRecord) -> None:
        self.grid.index_of(record.dose_amount)
        self.patients.append(record)

    def dose_counts(self) -> dict[str, np.ndarray]:
        """Per-grid-dose tallies: enrolled, DLTs, efficacy known, responses."""
        size = self.grid.size
        n = np.zeros(size, dtype=int)
        dlt = np.zeros(size, dtype=int)
        eff_known = np.zeros(size, dtype=int)
        eff = np.zeros(size, dtype=int)
        for rec in self.patients:
            i = self.grid.index_of(rec.dose_amount) - 1
            n[i] += 1
            dlt[i] += rec.dlt
            if rec.efficacy is not None:
                eff_known[i] += 1
                eff[i] += rec.efficacy
        return {"n": n, "dlt": dlt, "eff_known": eff_known, "eff": eff}


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters of the parameter prior g(theta).

    Gamma distributions are shape-rate; the second normal and lognormal
    parameter is a variance.  The volume and elimination shapes are modelled
    as 1 + Gamma so the population closed forms stay defined.

    gamma_policy:
      "tied" - the hill factor is 2 / alpha_k on every draw, which keeps the
               cumulative effect on its arctan closed form;
      "free" - the hill factor gets its own Gamma prior and the cumulative
               effect is evaluated by quadrature.
    """

    alpha_v_shift_shape: float = 4.0
    alpha_v_shift_rate: float = 1.0
    lambda_v_shape: float = 1.0
    lambda_v_rate: float = 1.0
    alpha_k_shift_shape: float = 3.0
    alpha_k_shift_rate: float = 1.0
    lambda_k_shape: float = 1.0
    lambda_k_rate: float = 1.0
    sigma_shape: float = 3.0
    sigma_rate: float = 3.0
    beta0_mean: float = -3.0
    beta0_var: float = 10.0
    beta1_log_mean: float = 0.0
    beta1_log_var: float = 1.0
    e_max_log_mean: float = -1.0
    e_max_log_var: float = 0.5
    ed50_shape: float = 20.0
    ed50_rate: float = 0.5
    gamma_policy: str = "tied"
    gamma_shape: float = 0.1
    gamma_rate: float = 0.1

    def __post_init__(self):
        for name in ("alpha_v_shift_shape", "alpha_v_shift_rate",
                     "lambda_v_shape", "lambda_v_rate",
                     "alpha_k_shift_shape", "alpha_k_shift_rate",
                     "lambda_k_shape", "lambda_k_rate",
                     "sigma_shape", "sigma_rate", "beta0_var",
                     "beta1_log_var", "e_max_log_var",
                     "ed50_shape", "ed50_rate", "gamma_shape", "gamma_rate"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0")
        if self.gamma_policy not in ("tied", "free"):
            raise DomainError(f"gamma_policy must be 'tied' or 'free', "
                              f"got {self.gamma_policy!r}")


@dataclass(frozen=True)
class ComparatorParams:
    """Parameter point of the dose-only comparator model."""

    beta0: float
    beta1: float
    e_max: float
    ed50: float
    gamma: float

    def __post_init__(self):
        if not math.isfinite(self.beta0):
            raise DomainError("beta0 must be finite")
        for name in ("beta1", "e_max", "ed50", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise DomainError(f"{name} must be finite and > 0")

    def toxicity_prob(self, dose_amount: float) -> float:
        return float(expit(self.beta0 + self.beta1 * math.log(dose_amount)))

    def efficacy_prob(self, dose_amount: float) -> float:
        frac = float(expit(self.gamma * (math.log(dose_amount)
                                         - math.log(self.ed50))))
        return -math.expm1(-self.e_max * frac)


@dataclass(frozen=True)
class ComparatorPriorSpec:
    """Priors for the dose-only comparator model (logistic toxicity on log
    dose, saturating efficacy in dose, no concentration data)."""

    beta0_mean: float = -3.0
    beta0_var: float = 100.0
    beta1_log_mean: float = -1.0
    beta1_log_var: float = 2.0
    e_max_log_mean: float = -1.0
    e_max_log_var: float = 0.5
    ed50_shape: float = 10.0
    ed50_rate: float = 0.1
    gamma_shape: float = 0.1
    gamma_rate: float = 0.1


@dataclass(frozen=True)
class McmcSettings:
    iterations: int = 10_000
    burnin: int = 5_000
    thin: int = 5

    def __post_init__(self):
        if not 0 <= self.burnin <= self.iterations:
            raise DomainError("need iterations >= burnin >= 0")
        if self.thin < 1:
            raise DomainError("thin must be >= 1")


@dataclass
class PosteriorDraws:
    """Retained MCMC draws plus chain metadata.

    theta has one column per THETA_NAMES entry; latent_v / latent_k hold the
    per-patient volume and elimination draws aligned to the data's patient
    order (zero-width for empty data).
    """

    names: tuple[str, ...]
    theta: np.ndarray
    latent_v: np.ndarray
    latent_k: np.ndarray
    acceptance: dict[str, float]
    settings: McmcSettings
    seed: object = None

    def col(self, name: str) -> np.ndarray:
        return self.theta[:, self.names.index(name)]

    @property
    def n_draws(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class DoseCurves:
    """Per-draw, per-dose toxicity and efficacy probability matrices."""

    tox: np.ndarray
    eff: np.ndarray


# ---------------------------------------------------------------------------
# Log densities
# ---------------------------------------------------------------------------

def _gamma_logpdf(x: float, shape: float, rate: float) -> float:
    if x <= 0.0:
        return -math.inf
    return (shape * math.log(rate) - math.lgamma(shape)
            + (shape - 1.0) * math.log(x) - rate * x)


def _normal_logpdf(x: float, mean: float, var: float) -> float:
    return -0.5 * math.log(2.0 * math.pi * var) - (x - mean) ** 2 / (2.0 * var)


def _lognormal_logpdf(x: float, log_mean: float, log_var: float) -> float:
    if x <= 0.0:
        return -math.inf
    lx = math.log(x)
    return -lx - 0.5 * math.log(2.0 * math.pi * log_var) \
        - (lx - log_mean) ** 2 / (2.0 * log_var)


def _bernoulli_loglik(prob: float, events: int, total: int) -> float:
    if total == 0:
        return 0.0
    if prob <= 0.0:
        return 0.0 if events == 0 else -math.inf
    if prob >= 1.0:
        return 0.0 if events == total else -math.inf
    return events * math.log(prob) + (total - events) * math.log1p(-prob)


def log_prior(params: ModelParams, prior: PriorSpec) -> float:
    """Log prior density g(theta) of the dose-level parameters."""
    pk, tox, pd = params.pk, params.tox, params.pd
    total = _gamma_logpdf(pk.alpha_v - 1.0, prior.alpha_v_shift_shape,
                          prior.alpha_v_shift_rate)
    total += _gamma_logpdf(pk.lambda_v, prior.lambda_v_shape, prior.lambda_v_rate)
    total += _gamma_logpdf(pk.alpha_k - 1.0, prior.alpha_k_shift_shape,
                           prior.alpha_k_shift_rate)
    total += _gamma_logpdf(pk.lambda_k, prior.lambda_k_shape, prior.lambda_k_rate)
    total += _gamma_logpdf(params.sigma, prior.sigma_shape, prior.sigma_rate)
    total += _normal_logpdf(tox.beta0, prior.beta0_mean, prior.beta0_var)
    total += _lognormal_logpdf(tox.beta1, prior.beta1_log_mean, prior.beta1_log_var)
    total += _lognormal_logpdf(pd.e_max, prior.e_max_log_mean, prior.e_max_log_var)
    total += _gamma_logpdf(pd.ed50, prior.ed50_shape, prior.ed50_rate)
    if prior.gamma_policy == "free":
        total += _gamma_logpdf(pd.gamma, prior.gamma_shape, prior.gamma_rate)
    return total


def log_posterior(params: ModelParams, latents: list[PatientPk],
                  data: Phase1Data, prior: PriorSpec,
                  include_efficacy: bool = False) -> float:
    """Reference (non-incremental) joint log posterior density.

    Returns -inf for parameters outside the support.  Used for testing and
    small-data evaluation; the sampler maintains the same quantity through
    cached components.
    """
    if len(latents) != len(data.patients):
        raise DomainError("latents must align with patients")
    pk, tox, pd = params.pk, params.tox, params.pd
    if prior.gamma_policy == "free" and pd.gamma * pk.alpha_k <= 1.0:
        return -math.inf

    total = log_prior(params, prior)
    if not math.isfinite(total):
        return -math.inf

    sigma = params.sigma
    for rec, lat in zip(data.patients, latents):
        for t, log_x in zip(rec.times, rec.log_concentrations):
            mean = math.log(_conc_patient(rec.dose_amount, lat.v, lat.k, t))
            total += _normal_logpdf(log_x, mean, sigma * sigma)
        total += _gamma_logpdf(lat.v, pk.alpha_v, pk.lambda_v)
        total += _gamma_logpdf(lat.k, pk.alpha_k, pk.lambda_k)

    counts = data.dose_counts()
    for i, amount in enumerate(data.grid.amounts):
        if counts["n"][i] > 0:
            p = _toxicity_prob_scalar(amount, pk, tox)
            total += _bernoulli_loglik(p, int(counts["dlt"][i]), int(counts["n"][i]))
        if include_efficacy and counts["eff_known"][i] > 0:
            eta = _cumulative_effect(amount, pk.alpha_v, pk.lambda_v, pk.alpha_k,
                                     pk.lambda_k, pd.e_max, pd.ed50, pd.gamma)
            q = -math.expm1(-eta)
            total += _bernoulli_loglik(q, int(counts["eff"][i]),
                                       int(counts["eff_known"][i]))
    return total


def _toxicity_prob_scalar(amount: float, pk: PkPopulation, tox: ToxicityLink) -> float:
    return _toxicity_prob_raw(amount, pk.alpha_v, pk.lambda_v, pk.alpha_k,
                              pk.lambda_k, tox.beta0, tox.beta1)


def _toxicity_prob_raw(amount, av, lv, ak, lk, b0, b1) -> float:
    z = b0 + b1 * math.log(_auc_population(amount, av, lv, ak, lk))
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


# ---------------------------------------------------------------------------
# Main sampler
# ---------------------------------------------------------------------------

class _StepAdapter:
    """Robbins-Monro log step-size adaptation toward a target acceptance."""

    def __init__(self, initial_log_step: float = math.log(0.5)):
        self.log_step = initial_log_step
        self.t = 0
        self.proposed = 0
        self.accepted = 0
        self.frozen = False

    @property
    def step(self) -> float:
        return math.exp(self.log_step)

    def update(self, accepted: bool, tracking: bool) -> None:
        if not self.frozen:
            self.t += 1
            self.log_step += (float(accepted) - ADAPT_TARGET) / self.t ** 0.7
        if tracking:
            self.proposed += 1
            self.accepted += int(accepted)

    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def _tox_loglik_grid(log_amounts, n_d, y_d, av, lv, ak, lk, b0, b1) -> float:
    # plain-Python loop: the grid has a handful of doses and this sits on the
    # sampler's innermost path
    if not log_amounts:
        return 0.0
    base = math.log(lv) + math.log(lk) - math.log(av - 1.0) - math.log(ak - 1.0)
    total = 0.0
    for la, n, y in zip(log_amounts, n_d, y_d):
        z = b0 + b1 * (la + base)
        if z >= 0.0:
            l1p = math.log1p(math.exp(-z))
            total += y * -l1p + (n - y) * (-z - l1p)
        else:
            l1p = math.log1p(math.exp(z))
            total += y * (z - l1p) + (n - y) * -l1p
    return total


def _eff_loglik_grid(amounts, m_d, z_d, av, lv, ak, lk, emax, ed50, gam) -> float:
    if not amounts:
        return 0.0
    if gam * ak <= 1.0:
        return -math.inf
    closed = abs(gam * ak - 2.0) < CLOSED_FORM_TOL
    scale = lv * lk ** ak / (av - 1.0) / ed50
    total = 0.0
    for a, m, zc in zip(amounts, m_d, z_d):
        if closed:
            c = (a * scale) ** gam
            root = math.sqrt(c)
            eta = root * emax * (math.pi / 2.0 - math.atan(lk / root))
        else:
            eta = _cumulative_effect(a, av, lv, ak, lk, emax, ed50, gam)
        # q = 1 - exp(-eta):  log q = log(-expm1(-eta)),  log(1 - q) = -eta
        if zc > 0:
            q = -math.expm1(-eta)
            if q <= 0.0:
                return -math.inf
            total += zc * math.log(q)
        total += (m - zc) * -eta
    return total


def sample_posterior(data: Phase1Data, prior: PriorSpec,
                     settings: McmcSettings, include_efficacy: bool = False,
                     seed=None) -> PosteriorDraws:
    """Draw from the joint posterior by adaptive Metropolis-within-Gibbs.

    With no patients the chain simply explores the prior; that is documented
    behaviour, not an error.  Draws are deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    n_pat = len(data.patients)
    tied = prior.gamma_policy == "tied"

    # Flattened concentration observations (handles ragged series).
    obs_logx, obs_t, obs_pat, obs_logd = [], [], [], []
    for i, rec in enumerate(data.patients):
        for t, lx in zip(rec.times, rec.log_concentrations):
            obs_logx.append(lx)
            obs_t.append(t)
            obs_pat.append(i)
            obs_logd.append(math.log(rec.dose_amount))
    obs_logx = np.asarray(obs_logx)
    obs_t = np.asarray(obs_t)
    obs_pat = np.asarray(obs_pat, dtype=int)
    obs_logd = np.asarray(obs_logd)
    m_total = len(obs_logx)

    counts = data.dose_counts()
    tox_mask = counts["n"] > 0
    tox_amounts = tuple(a for a, keep in zip(data.grid.amounts, tox_mask) if keep)
    tox_log_amounts = tuple(math.log(a) for a in tox_amounts)
    tox_n = tuple(float(x) for x in counts["n"][tox_mask])
    tox_y = tuple(float(x) for x in counts["dlt"][tox_mask])
    eff_mask = counts["eff_known"] > 0
    eff_amounts = tuple(a for a, keep in zip(data.grid.amounts, eff_mask) if keep)
    eff_m = tuple(float(x) for x in counts["eff_known"][eff_mask])
    eff_z = tuple(float(x) for x in counts["eff"][eff_mask])

    # Initial point: prior means.
    av = 1.0 + prior.alpha_v_shift_shape / prior.alpha_v_shift_rate
    lv = prior.lambda_v_shape / prior.lambda_v_rate
    ak = 1.0 + prior.alpha_k_shift_shape / prior.alpha_k_shift_rate
    lk = prior.lambda_k_shape / prior.lambda_k_rate
    sigma = prior.sigma_shape / prior.sigma_rate
    b0 = prior.beta0_mean
    b1 = math.exp(prior.beta1_log_mean + prior.beta1_log_var / 2.0)
    emax = math.exp(prior.e_max_log_mean + prior.e_max_log_var / 2.0)
    ed50 = prior.ed50_shape / prior.ed50_rate
    gam = 2.0 / ak if tied else prior.gamma_shape / prior.gamma_rate

    lat_v = np.full(n_pat, av / lv)
    lat_k = np.full(n_pat, ak / lk)
    log_lat_v = np.log(lat_v) if n_pat else lat_v.copy()
    log_lat_k = np.log(lat_k) if n_pat else lat_k.copy()

    def residual_ss() -> np.ndarray:
        if m_total == 0:
            return np.zeros(n_pat)
        r = obs_logx - obs_logd + log_lat_v[obs_pat] + lat_k[obs_pat] * obs_t
        return np.bincount(obs_pat, weights=r * r, minlength=n_pat)

    ssr = residual_ss()
    sst = float(ssr.sum())
    sum_v, sum_log_v = float(lat_v.sum()), float(log_lat_v.sum())
    sum_k, sum_log_k = float(lat_k.sum()), float(log_lat_k.sum())

    def lat_v_loglik(a: float, r: float) -> float:
        if n_pat == 0:
            return 0.0
        return (n_pat * (a * math.log(r) - math.lgamma(a))
                + (a - 1.0) * sum_log_v - r * sum_v)

    def lat_k_loglik(a: float, r: float) -> float:
        if n_pat == 0:
            return 0.0
        return (n_pat * (a * math.log(r) - math.lgamma(a))
                + (a - 1.0) * sum_log_k - r * sum_k)

    def pk_loglik(s: float) -> float:
        if m_total == 0:
            return 0.0
        return (-m_total * math.log(s)
                - 0.5 * m_total * math.log(2.0 * math.pi)
                - sst / (2.0 * s * s))

    def tox_loglik(av_, lv_, ak_, lk_, b0_, b1_) -> float:
        return _tox_loglik_grid(tox_log_amounts, tox_n, tox_y,
                                av_, lv_, ak_, lk_, b0_, b1_)

    def eff_loglik(av_, lv_, ak_, lk_, emax_, ed50_, gam_) -> float:
        if not include_efficacy:
            return 0.0
        return _eff_loglik_grid(eff_amounts, eff_m, eff_z,
                                av_, lv_, ak_, lk_, emax_, ed50_, gam_)

    ll_lat_v = lat_v_loglik(av, lv)
    ll_lat_k = lat_k_loglik(ak, lk)
    ll_tox = tox_loglik(av, lv, ak, lk, b0, b1)
    ll_eff = eff_loglik(av, lv, ak, lk, emax, ed50, gam)

    theta_block_names = ["alpha_v", "lambda_v", "alpha_k", "lambda_k", "sigma",
                         "beta0", "beta1", "e_max", "ed50"]
    if not tied:
        theta_block_names.append("gamma")
    adapters = {name: _StepAdapter() for name in theta_block_names}
    adapters["beta0"].log_step = math.log(1.0)
    if settings.burnin == 0:
        for a in adapters.values():
            a.frozen = True
    lat_steps = np.full(n_pat, math.log(0.5))
    lat_t = 0
    lat_proposed = 0
    lat_accepted = 0

    n_retained = max(0, (settings.iterations - settings.burnin
                         + settings.thin - 1) // settings.thin)
    theta_out = np.empty((n_retained, len(THETA_NAMES)))
    lat_v_out = np.empty((n_retained, n_pat))
    lat_k_out = np.empty((n_retained, n_pat))
    retained = 0

    def mh_accept(adapter: _StepAdapter, delta: float, tracking: bool) -> bool:
        ok = math.isfinite(delta) and (delta >= 0.0
                                       or rng.random() < math.exp(delta))
        adapter.update(ok, tracking)
        return ok

    for it in range(settings.iterations):
        tracking = it >= settings.burnin

        # alpha_v: log(alpha_v - 1) walk
        ad = adapters["alpha_v"]
        x = math.log(av - 1.0)
        x_new = x + ad.step * rng.standard_normal()
        av_new = 1.0 + math.exp(x_new)
        new_lat = lat_v_loglik(av_new, lv)
        new_tox = tox_loglik(av_new, lv, ak, lk, b0, b1)
        new_eff = eff_loglik(av_new, lv, ak, lk, emax, ed50, gam)
        delta = ((new_lat + new_tox + new_eff
                  + _gamma_logpdf(av_new - 1.0, prior.alpha_v_shift_shape,
                                  prior.alpha_v_shift_rate) + x_new)
                 - (ll_lat_v + ll_tox + ll_eff
                    + _gamma_logpdf(av - 1.0, prior.alpha_v_shift_shape,
                                    prior.alpha_v_shift_rate) + x))
        if mh_accept(ad, delta, tracking):
            av, ll_lat_v, ll_tox, ll_eff = av_new, new_lat, new_tox, new_eff

        # lambda_v: log walk
        ad = adapters["lambda_v"]
        x = math.log(lv)
        x_new = x + ad.step * rng.standard_normal()
        lv_new = math.exp(x_new)
        new_lat = lat_v_loglik(av, lv_new)
        new_tox = tox_loglik(av, lv_new, ak, lk, b0, b1)
        new_eff = eff_loglik(av, lv_new, ak, lk, emax, ed50, gam)
        delta = ((new_lat + new_tox + new_eff
                  + _gamma_logpdf(lv_new, prior.lambda_v_shape,
                                  prior.lambda_v_rate) + x_new)
                 - (ll_lat_v + ll_tox + ll_eff
                    + _gamma_logpdf(lv, prior.lambda_v_shape,
                                    prior.lambda_v_rate) + x))
        if mh_accept(ad, delta, tracking):
            lv, ll_lat_v, ll_tox, ll_eff = lv_new, new_lat, new_tox, new_eff

        # alpha_k: log(alpha_k - 1) walk; in tied mode the hill factor moves
        # with it, keeping the closed form applicable
        ad = adapters["alpha_k"]
        x = math.log(ak - 1.0)
        x_new = x + ad.step * rng.standard_normal()
        ak_new = 1.0 + math.exp(x_new)
        gam_new = 2.0 / ak_new if tied else gam
        new_lat = lat_k_loglik(ak_new, lk)
        new_tox = tox_loglik(av, lv, ak_new, lk, b0, b1)
        new_eff = eff_loglik(av, lv, ak_new, lk, emax, ed50, gam_new)
        delta = ((new_lat + new_tox + new_eff
                  + _gamma_logpdf(ak_new - 1.0, prior.alpha_k_shift_shape,
                                  prior.alpha_k_shift_rate) + x_new)
                 - (ll_lat_k + ll_tox + ll_eff
                    + _gamma_logpdf(ak - 1.0, prior.alpha_k_shift_shape,
                                    prior.alpha_k_shift_rate) + x))
        if not tied and gam_new * ak_new <= 1.0:
            delta = -math.inf
        if mh_accept(ad, delta, tracking):
            ak, gam = ak_new, gam_new
            ll_lat_k, ll_tox, ll_eff = new_lat, new_tox, new_eff

        # lambda_k: log walk
        ad = adapters["lambda_k"]
        x = math.log(lk)
        x_new = x + ad.step * rng.standard_normal()
        lk_new = math.exp(x_new)
        new_lat = lat_k_loglik(ak, lk_new)
        new_tox = tox_loglik(av, lv, ak, lk_new, b0, b1)
        new_eff = eff_loglik(av, lv, ak, lk_new, emax, ed50, gam)
        delta = ((new_lat + new_tox + new_eff
                  + _gamma_logpdf(lk_new, prior.lambda_k_shape,
                                  prior.lambda_k_rate) + x_new)
                 - (ll_lat_k + ll_tox + ll_eff
                    + _gamma_logpdf(lk, prior.lambda_k_shape,
                                    prior.lambda_k_rate) + x))
        if mh_accept(ad, delta, tracking):
            lk, ll_lat_k, ll_tox, ll_eff = lk_new, new_lat, new_tox, new_eff

        # sigma: log walk, touches only the concentration likelihood
        ad = adapters["sigma"]
        x = math.log(sigma)
        x_new = x + ad.step * rng.standard_normal()
        sigma_new = math.exp(x_new)
        delta = ((pk_loglik(sigma_new)
                  + _gamma_logpdf(sigma_new, prior.sigma_shape,
                                  prior.sigma_rate) + x_new)
                 - (pk_loglik(sigma)
                    + _gamma_logpdf(sigma, prior.sigma_shape,
                                    prior.sigma_rate) + x))
        if mh_accept(ad, delta, tracking):
            sigma = sigma_new

        # beta0: natural-scale walk
        ad = adapters["beta0"]
        b0_new = b0 + ad.step * rng.standard_normal()
        new_tox = tox_loglik(av, lv, ak, lk, b0_new, b1)
        delta = ((new_tox + _normal_logpdf(b0_new, prior.beta0_mean,
                                           prior.beta0_var))
                 - (ll_tox + _normal_logpdf(b0, prior.beta0_mean,
                                            prior.beta0_var)))
        if mh_accept(ad, delta, tracking):
            b0, ll_tox = b0_new, new_tox

        # beta1: log walk
        ad = adapters["beta1"]
        x = math.log(b1)
        x_new = x + ad.step * rng.standard_normal()
        b1_new = math.exp(x_new)
        new_tox = tox_loglik(av, lv, ak, lk, b0, b1_new)
        delta = ((new_tox + _lognormal_logpdf(b1_new, prior.beta1_log_mean,
                                              prior.beta1_log_var) + x_new)
                 - (ll_tox + _lognormal_logpdf(b1, prior.beta1_log_mean,
                                               prior.beta1_log_var) + x))
        if mh_accept(ad, delta, tracking):
            b1, ll_tox = b1_new, new_tox

        # e_max: log walk
        ad = adapters["e_max"]
        x = math.log(emax)
        x_new = x + ad.step * rng.standard_normal()
        emax_new = math.exp(x_new)
        new_eff = eff_loglik(av, lv, ak, lk, emax_new, ed50, gam)
        delta = ((new_eff + _lognormal_logpdf(emax_new, prior.e_max_log_mean,
                                              prior.e_max_log_var) + x_new)
                 - (ll_eff + _lognormal_logpdf(emax, prior.e_max_log_mean,
                                               prior.e_max_log_var) + x))
        if mh_accept(ad, delta, tracking):
            emax, ll_eff = emax_new, new_eff

        # ed50: log walk
        ad = adapters["ed50"]
        x = math.log(ed50)
        x_new = x + ad.step * rng.standard_normal()
        ed50_new = math.exp(x_new)
        new_eff = eff_loglik(av, lv, ak, lk, emax, ed50_new, gam)
        delta = ((new_eff + _gamma_logpdf(ed50_new, prior.ed50_shape,
                                          prior.ed50_rate) + x_new)
                 - (ll_eff + _gamma_logpdf(ed50, prior.ed50_shape,
                                           prior.ed50_rate) + x))
        if mh_accept(ad, delta, tracking):
            ed50, ll_eff = ed50_new, new_eff

        # gamma: only a block of its own under the free policy
        if not tied:
            ad = adapters["gamma"]
            x = math.log(gam)
            x_new = x + ad.step * rng.standard_normal()
            gam_new = math.exp(x_new)
            if gam_new * ak <= 1.0:
                delta = -math.inf
            else:
                new_eff = eff_loglik(av, lv, ak, lk, emax, ed50, gam_new)
                delta = ((new_eff + _gamma_logpdf(gam_new, prior.gamma_shape,
                                                  prior.gamma_rate) + x_new)
                         - (ll_eff + _gamma_logpdf(gam, prior.gamma_shape,
                                                   prior.gamma_rate) + x))
            if mh_accept(ad, delta, tracking):
                gam, ll_eff = gam_new, new_eff

        # Latents: independent per-patient Metropolis steps, vectorized.
        # Each patient's conditional involves only their own concentration
        # residuals and gamma prior terms, so simultaneous accept/reject per
        # patient is exactly patient-by-patient updating.
        if n_pat:
            prop_log_v = log_lat_v + np.exp(lat_steps) * rng.standard_normal(n_pat)
            prop_log_k = log_lat_k + np.exp(lat_steps) * rng.standard_normal(n_pat)
            prop_v = np.exp(prop_log_v)
            prop_k = np.exp(prop_log_k)
            if m_total:
                r = (obs_logx - obs_logd + prop_log_v[obs_pat]
                     + prop_k[obs_pat] * obs_t)
                ssr_prop = np.bincount(obs_pat, weights=r * r, minlength=n_pat)
            else:
                ssr_prop = ssr
            # gamma log density plus log-scale Jacobian collapses to
            # shape * log(x) - rate * x
            delta_vec = (
                -(ssr_prop - ssr) / (2.0 * sigma * sigma)
                + av * (prop_log_v - log_lat_v) - lv * (prop_v - lat_v)
                + ak * (prop_log_k - log_lat_k) - lk * (prop_k - lat_k)
            )
            accept = np.log(rng.random(n_pat)) < delta_vec
            if accept.any():
                lat_v = np.where(accept, prop_v, lat_v)
                lat_k = np.where(accept, prop_k, lat_k)
                log_lat_v = np.where(accept, prop_log_v, log_lat_v)
                log_lat_k = np.where(accept, prop_log_k, log_lat_k)
                ssr = np.where(accept, ssr_prop, ssr)
                sst = float(ssr.sum())
                sum_v, sum_log_v = float(lat_v.sum()), float(log_lat_v.sum())
                sum_k, sum_log_k = float(lat_k.sum()), float(log_lat_k.sum())
                ll_lat_v = lat_v_loglik(av, lv)
                ll_lat_k = lat_k_loglik(ak, lk)
            if it < settings.burnin:
                lat_t += 1
                lat_steps += (accept.astype(float) - ADAPT_TARGET) / lat_t ** 0.7
            if tracking:
                lat_proposed += n_pat
                lat_accepted += int(accept.sum())

        if tracking and (it - settings.burnin) % settings.thin == 0:
            theta_out[retained] = (av, lv, ak, lk, sigma, b0, b1, emax, ed50, gam)
            lat_v_out[retained] = lat_v
            lat_k_out[retained] = lat_k
            retained += 1

        if it + 1 == settings.burnin:
            for a in adapters.values():
                a.frozen = True

    acceptance = {name: a.rate() for name, a in adapters.items()}
    if n_pat:
        acceptance["latents"] = (lat_accepted / lat_proposed) if lat_proposed else 0.0

    return PosteriorDraws(
        names=THETA_NAMES,
        theta=theta_out[:retained],
        latent_v=lat_v_out[:retained],
        latent_k=lat_k_out[:retained],
        acceptance=acceptance,
        settings=settings,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Posterior summaries
# ---------------------------------------------------------------------------

def dose_curves(draws: PosteriorDraws, grid: DoseGrid) -> DoseCurves:
    """Toxicity and efficacy probability curves over the grid, one row per
    retained draw."""
    if draws.n_draws == 0:
        raise DomainError("no retained draws")
    amounts = np.asarray(grid.amounts)
    av = draws.col("alpha_v")[:, None]
    lv = draws.col("lambda_v")[:, None]
    ak = draws.col("alpha_k")[:, None]
    lk = draws.col("lambda_k")[:, None]
    b0 = draws.col("beta0")[:, None]
    b1 = draws.col("beta1")[:, None]
    emax = draws.col("e_max")[:, None]
    ed50 = draws.col("ed50")[:, None]
    gam = draws.col("gamma")[:, None]

    auc = amounts[None, :] * lv * lk / ((av - 1.0) * (ak - 1.0))
    tox = 1.0 / (1.0 + np.exp(-(b0 + b1 * np.log(auc))))

    closed = np.abs(gam * ak - 2.0)[:, 0] < CLOSED_FORM_TOL
    eta = np.empty_like(auc)
    if closed.any():
        idx = np.flatnonzero(closed)
        c = ((amounts[None, :] * lv[idx] * lk[idx] ** ak[idx] / (av[idx] - 1.0))
             ** gam[idx] / ed50[idx] ** gam[idx])
        root = np.sqrt(c)
        eta[idx] = root * emax[idx] * (math.pi / 2.0 - np.arctan(lk[idx] / root))
    for s in np.flatnonzero(~closed):
        eta[s] = [_cumulative_effect(a, av[s, 0], lv[s, 0], ak[s, 0], lk[s, 0],
                                     emax[s, 0], ed50[s, 0], gam[s, 0])
                  for a in amounts]
    eff = -np.expm1(-eta)
    return DoseCurves(tox=tox, eff=eff)


def tail_prob(curve_matrix: np.ndarray, dose_index: int, threshold: float,
              direction: str) -> float:
    """Fraction of draws strictly beyond the threshold at a 1-based dose
    index; direction is ">" or "<"."""
    col = np.asarray(curve_matrix)[:, dose_index - 1]
    if len(col) == 0:
        raise DomainError("empty curve matrix")
    if direction == ">":
        return float(np.mean(col > threshold))
    if direction == "<":
        return float(np.mean(col < threshold))
    raise DomainError(f"direction must be '>' or '<', got {direction!r}")


def posterior_mean_curves(draws: PosteriorDraws, grid: DoseGrid) -> dict[str, np.ndarray]:
    curves = dose_curves(draws, grid)
    return {"tox": curves.tox.mean(axis=0), "eff": curves.eff.mean(axis=0)}


def draws_to_csv(draws: PosteriorDraws, path) -> None:
    """Write retained draws as CSV for trace diagnostics: one row per draw,
    parameter columns first, then per-patient latents."""
    import csv

    n_pat = draws.latent_v.shape[1]
    header = list(draws.names) \
        + [f"latent_v_{i + 1}" for i in range(n_pat)] \
        + [f"latent_k_{i + 1}" for i in range(n_pat)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in range(draws.n_draws):
            row = [f"{x:.12g}" for x in draws.theta[s]]
            row += [f"{x:.12g}" for x in draws.latent_v[s]]
            row += [f"{x:.12g}" for x in draws.latent_k[s]]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Dose-only comparator model
# ---------------------------------------------------------------------------

def sample_comparator_posterior(data: Phase1Data, prior: ComparatorPriorSpec,
                                settings: McmcSettings,
                                include_efficacy: bool = False,
                                seed=None) -> PosteriorDraws:
    """Posterior for the dose-only comparator: logistic toxicity on the log
    dose amount and saturating (Emax-in-dose) efficacy, ignoring PK data."""
    rng = np.random.default_rng(seed)
    counts = data.dose_counts()
    tox_mask = counts["n"] > 0
    amounts_t = tuple(a for a, keep in zip(data.grid.amounts, tox_mask) if keep)
    log_amounts_t = tuple(math.log(a) for a in amounts_t)
    n_d = tuple(float(x) for x in counts["n"][tox_mask])
    y_d = tuple(float(x) for x in counts["dlt"][tox_mask])
    eff_mask = counts["eff_known"] > 0
    amounts_e = tuple(a for a, keep in zip(data.grid.amounts, eff_mask) if keep)
    log_amounts_e = tuple(math.log(a) for a in amounts_e)
    m_d = tuple(float(x) for x in counts["eff_known"][eff_mask])
    z_d = tuple(float(x) for x in counts["eff"][eff_mask])

    b0 = prior.beta0_mean
    b1 = math.exp(prior.beta1_log_mean + prior.beta1_log_var / 2.0)
    emax = math.exp(prior.e_max_log_mean + prior.e_max_log_var / 2.0)
    ed50 = prior.ed50_shape / prior.ed50_rate
    gam = prior.gamma_shape / prior.gamma_rate

    def tox_ll(b0_, b1_):
        total = 0.0
        for la, n, y in zip(log_amounts_t, n_d, y_d):
            z = b0_ + b1_ * la
            if z >= 0.0:
                l1p = math.log1p(math.exp(-z))
                total += y * -l1p + (n - y) * (-z - l1p)
            else:
                l1p = math.log1p(math.exp(z))
                total += y * (z - l1p) + (n - y) * -l1p
        return total

    def eff_ll(emax_, ed50_, gam_):
        if not include_efficacy:
            return 0.0
        log_ed50 = math.log(ed50_)
        total = 0.0
        for la, m, zc in zip(log_amounts_e, m_d, z_d):
            # d^g / (ed50^g + d^g) = expit(g * (log d - log ed50)); the
            # logistic form cannot overflow for extreme hill factors
            z = gam_ * (la - log_ed50)
            if z >= 0.0:
                frac = 1.0 / (1.0 + math.exp(-z))
            else:
                ez = math.exp(z)
                frac = ez / (1.0 + ez)
            eta = emax_ * frac
            if zc > 0:
                q = -math.expm1(-eta)
                if q <= 0.0:
                    return -math.inf
                total += zc * math.log(q)
            total += (m - zc) * -eta
        return total

    ll_tox = tox_ll(b0, b1)
    ll_eff = eff_ll(emax, ed50, gam)

    adapters = {name: _StepAdapter() for name in COMPARATOR_NAMES}
    adapters["beta0"].log_step = math.log(1.0)
    if settings.burnin == 0:
        for a in adapters.values():
            a.frozen = True

    n_retained = max(0, (settings.iterations - settings.burnin
                         + settings.thin - 1) // settings.thin)
    theta_out = np.empty((n_retained, len(COMPARATOR_NAMES)))
    retained = 0

    def mh(adapter, delta, tracking):
        ok = math.isfinite(delta) and (delta >= 0.0
                                       or rng.random() < math.exp(delta))
        adapter.update(ok, tracking)
        return ok

    for it in range(settings.iterations):
        tracking = it >= settings.burnin

        ad = adapters["beta0"]
        b0_new = b0 + ad.step * rng.standard_normal()
        new_tox = tox_ll(b0_new, b1)
        delta = ((new_tox + _normal_logpdf(b0_new, prior.beta0_mean, prior.beta0_var))
                 - (ll_tox + _normal_logpdf(b0, prior.beta0_mean, prior.beta0_var)))
        if mh(ad, delta, tracking):
            b0, ll_tox = b0_new, new_tox

        ad = adapters["beta1"]
        x = math.log(b1)
        x_new = x + ad.step * rng.standard_normal()
        b1_new = math.exp(x_new)
        new_tox = tox_ll(b0, b1_new)
        delta = ((new_tox + _lognormal_logpdf(b1_new, prior.beta1_log_mean,
                                              prior.beta1_log_var) + x_new)
                 - (ll_tox + _lognormal_logpdf(b1, prior.beta1_log_mean,
                                               prior.beta1_log_var) + x))
        if mh(ad, delta, tracking):
            b1, ll_tox = b1_new, new_tox

        ad = adapters["e_max"]
        x = math.log(emax)
        x_new = x + ad.step * rng.standard_normal()
        emax_new = math.exp(x_new)
        new_eff = eff_ll(emax_new, ed50, gam)
        delta = ((new_eff + _lognormal_logpdf(emax_new, prior.e_max_log_mean,
                                              prior.e_max_log_var) + x_new)
                 - (ll_eff + _lognormal_logpdf(emax, prior.e_max_log_mean,
                                               prior.e_max_log_var) + x))
        if mh(ad, delta, tracking):
            emax, ll_eff = emax_new, new_eff

        ad = adapters["ed50"]
        x = math.log(ed50)
        x_new = x + ad.step * rng.standard_normal()
        ed50_new = math.exp(x_new)
        new_eff = eff_ll(emax, ed50_new, gam)
        delta = ((new_eff + _gamma_logpdf(ed50_new, prior.ed50_shape,
                                          prior.ed50_rate) + x_new)
                 - (ll_eff + _gamma_logpdf(ed50, prior.ed50_shape,
                                           prior.ed50_rate) + x))
        if mh(ad, delta, tracking):
            ed50, ll_eff = ed50_new, new_eff

        ad = adapters["gamma"]
        x = math.log(gam)
        x_new = x + ad.step * rng.standard_normal()
        gam_new = math.exp(x_new)
        new_eff = eff_ll(emax, ed50, gam_new)
        delta = ((new_eff + _gamma_logpdf(gam_new, prior.gamma_shape,
                                          prior.gamma_rate) + x_new)
                 - (ll_eff + _gamma_logpdf(gam, prior.gamma_shape,
                                           prior.gamma_rate) + x))
        if mh(ad, delta, tracking):
            gam, ll_eff = gam_new, new_eff

        if tracking and (it - settings.burnin) % settings.thin == 0:
            theta_out[retained] = (b0, b1, emax, ed50, gam)
            retained += 1

        if it + 1 == settings.burnin:
            for a in adapters.values():
                a.frozen = True

    return PosteriorDraws(
        names=COMPARATOR_NAMES,
        theta=theta_out[:retained],
        latent_v=np.empty((retained, 0)),
        latent_k=np.empty((retained, 0)),
        acceptance={name: a.rate() for name, a in adapters.items()},
        settings=settings,
        seed=seed,
    )


def comparator_dose_curves(draws: PosteriorDraws, grid: DoseGrid) -> DoseCurves:
    """Dose-response curves for the dose-only comparator draws."""
    if draws.n_draws == 0:
        raise DomainError("no retained draws")
    amounts = np.asarray(grid.amounts)
    b0 = draws.col("beta0")[:, None]
    b1 = draws.col("beta1")[:, None]
    emax = draws.col("e_max")[:, None]
    ed50 = draws.col("ed50")[:, None]
    gam = draws.col("gamma")[:, None]
    tox = 1.0 / (1.0 + np.exp(-(b0 + b1 * np.log(amounts)[None, :])))
    z = gam * (np.log(amounts)[None, :] - np.log(ed50))
    eta = emax * expit(z)
    return DoseCurves(tox=tox, eff=-np.expm1(-eta))
