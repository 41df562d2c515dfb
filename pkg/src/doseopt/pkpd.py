"""One-compartment PK and latent sigmoid-Emax PD mathematics.

Patient-level drug concentration follows first-order elimination,
c(t) = (d/V) exp(-k t).  Population-level curves arise by integrating the
patient curve over gamma priors on the volume of distribution V and the
elimination rate k, which yields closed forms for the concentration curve,
the AUC, and the cumulative drug effect.  Toxicity is linked to log AUC on
the logit scale; efficacy is linked to the cumulative effect through
q = 1 - exp(-eta).

All operations here are pure functions of their arguments and safe to call
concurrently.  Dose inputs are physical amounts (mass units), not grid
indices.
"""

import math
from dataclasses import dataclass

from scipy import integrate
from scipy.special import expit


class DomainError(ValueError):
    """An input lies outside the mathematical domain of a model quantity."""


# Shape parameters within this distance of 1 are rejected: the closed forms
# divide by (shape - 1).
SHAPE_ONE_EPS = 1e-9

# |gamma * alpha_k - 2| below this uses the arctan closed form for the
# cumulative effect instead of quadrature.
CLOSED_FORM_TOL = 1e-12


def _check_finite_positive(name: str, value: float) -> None:
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DoseGrid:
    """Ordered grid of candidate dose amounts.

    Indices into the grid are 1-based everywhere in this package; amounts are
    the physical quantities used inside all model formulas.
    """

    amounts: tuple[float, ...]

    def __post_init__(self):
        amounts = tuple(float(a) for a in self.amounts)
        object.__setattr__(self, "amounts", amounts)
        if len(amounts) < 2:
            raise DomainError("dose grid needs at least two doses")
        for a in amounts:
            _check_finite_positive("dose amount", a)
        if any(b <= a for a, b in zip(amounts, amounts[1:])):
            raise DomainError("dose amounts must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.amounts)

    def amount(self, index: int) -> float:
        """Dose amount at 1-based index."""
        if not 1 <= index <= len(self.amounts):
            raise DomainError(f"dose index {index} outside 1..{len(self.amounts)}")
        return self.amounts[index - 1]

    def index_of(self, amount: float) -> int:
        """1-based index of an exact amount."""
        try:
            return self.amounts.index(float(amount)) + 1
        except ValueError:
            raise DomainError(f"amount {amount!r} not on the dose grid") from None

    def __len__(self) -> int:
        return len(self.amounts)


@dataclass(frozen=True)
class PkPopulation:
    """Gamma-prior hyperparameters for patient volume and elimination rate.

    V ~ Gamma(alpha_v, lambda_v), k ~ Gamma(alpha_k, lambda_k), shape-rate
    parameterization.  The population closed forms require both shapes > 1.
    """

    alpha_v: float
    lambda_v: float
    alpha_k: float
    lambda_k: float

    def __post_init__(self):
        if not math.isfinite(self.alpha_v) or self.alpha_v <= 1.0 + SHAPE_ONE_EPS:
            raise DomainError(f"alpha_v must exceed 1, got {self.alpha_v!r}")
        if not math.isfinite(self.alpha_k) or self.alpha_k <= 1.0 + SHAPE_ONE_EPS:
            raise DomainError(f"alpha_k must exceed 1, got {self.alpha_k!r}")
        _check_finite_positive("lambda_v", self.lambda_v)
        _check_finite_positive("lambda_k", self.lambda_k)


@dataclass(frozen=True)
class PatientPk:
    """Patient-specific volume of distribution and elimination rate."""

    v: float
    k: float

    def __post_init__(self):
        _check_finite_positive("v", self.v)
        _check_finite_positive("k", self.k)


@dataclass(frozen=True)
class ToxicityLink:
    """Logistic link from log population AUC to the toxicity probability."""

    beta0: float
    beta1: float

    def __post_init__(self):
        if not math.isfinite(self.beta0):
            raise DomainError(f"beta0 must be finite, got {self.beta0!r}")
        _check_finite_positive("beta1", self.beta1)


@dataclass(frozen=True)
class PdParams:
    """Sigmoid Emax parameters for the drug-effect intensity."""

    e_max: float
    ed50: float
    gamma: float = 1.0

    def __post_init__(self):
        _check_finite_positive("e_max", self.e_max)
        _check_finite_positive("ed50", self.ed50)
        _check_finite_positive("gamma", self.gamma)


@dataclass(frozen=True)
class ModelParams:
    """All dose-level model parameters.

    Cross-component invariant: gamma * alpha_k > 1, otherwise the cumulative
    effect integral diverges.
    """

    pk: PkPopulation
    tox: ToxicityLink
    pd: PdParams
    sigma: float

    def __post_init__(self):
        _check_finite_positive("sigma", self.sigma)
        if self.pd.gamma * self.pk.alpha_k <= 1.0:
            raise DomainError(
                "gamma * alpha_k must exceed 1 for the cumulative effect "
                f"to converge, got {self.pd.gamma * self.pk.alpha_k!r}"
            )


# ---------------------------------------------------------------------------
# Scalar kernels
#
# The underscore functions below are the single source of truth for the model
# formulas.  They take raw floats (no validation) so the MCMC sampler can call
# them in a tight loop; the public operations wrap them with domain checks.
# ---------------------------------------------------------------------------

def _conc_patient(d: float, v: float, k: float, t: float) -> float:
    return d / v * math.exp(-k * t)


def _conc_population(d: float, av: float, lv: float, ak: float, lk: float,
                     t: float) -> float:
    return d * lv / (av - 1.0) * (lk / (lk + t)) ** ak


def _auc_population(d: float, av: float, lv: float, ak: float, lk: float) -> float:
    return d * lv * lk / ((av - 1.0) * (ak - 1.0))


def _toxicity_prob(d: float, av: float, lv: float, ak: float, lk: float,
                   b0: float, b1: float) -> float:
    return float(expit(b0 + b1 * math.log(_auc_population(d, av, lv, ak, lk))))


def _effect_scale(d: float, av: float, lv: float, ak: float, lk: float,
                  ed50: float, gam: float) -> float:
    """C(d): the dose-dependent scale of the cumulative-effect integrand."""
    return (d * lv * lk ** ak / (av - 1.0)) ** gam / ed50 ** gam


def _eta_closed_form(c: float, emax: float, lk: float) -> float:
    root = math.sqrt(c)
    return root * emax * (math.pi / 2.0 - math.atan(lk / root))


def _eta_quadrature(c: float, emax: float, lk: float, m: float) -> float:
    """Integrate emax * c / (x^m + c) over [lk, inf).

    The improper integral is truncated at X where the analytic tail bound
    c * emax * X^(1-m) / (m-1) drops below 1e-10 of the partial sum; the far
    tail is then negligible.  For exponents m barely above 1 the required X
    explodes, so past a cap the (accurate to O(c X^(1-2m))) tail estimate is
    added instead of extending the interval.
    """
    def integrand(x: float) -> float:
        return 1.0 / (x ** m + c)

    upper = max(4.0 * lk, 8.0 * c ** (1.0 / m), 8.0)
    partial = 0.0
    lo = lk
    for _ in range(64):
        piece, _err = integrate.quad(integrand, lo, upper,
                                     epsabs=1e-10, epsrel=1e-10, limit=400)
        partial += c * emax * piece
        tail = c * emax * upper ** (1.0 - m) / (m - 1.0)
        if tail <= 1e-10 * partial or upper > 1e15:
            if upper > 1e15 and tail > 1e-10 * partial:
                partial += tail
            return partial
        lo = upper
        upper *= 8.0
    return partial


def _cumulative_effect(d: float, av: float, lv: float, ak: float, lk: float,
                       emax: float, ed50: float, gam: float) -> float:
    if d == 0.0:
        return 0.0
    m = gam * ak
    c = _effect_scale(d, av, lv, ak, lk, ed50, gam)
    if abs(m - 2.0) < CLOSED_FORM_TOL:
        return _eta_closed_form(c, emax, lk)
    return _eta_quadrature(c, emax, lk, m)


def _efficacy_prob(d: float, av: float, lv: float, ak: float, lk: float,
                   emax: float, ed50: float, gam: float) -> float:
    return -math.expm1(-_cumulative_effect(d, av, lv, ak, lk, emax, ed50, gam))


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def concentration_patient(d: float, pk: PatientPk, t: float) -> float:
    """Patient-level concentration (d/V) exp(-k t) at time t >= 0."""
    _check_finite_positive("dose", d)
    if not math.isfinite(t) or t < 0.0:
        raise DomainError(f"time must be finite and >= 0, got {t!r}")
    return _conc_patient(d, pk.v, pk.k, t)


def concentration_population(d: float, pk: PkPopulation, t: float) -> float:
    """Population-level concentration: the patient curve averaged over the
    gamma priors, d*lambda_v/(alpha_v-1) * (lambda_k/(lambda_k+t))^alpha_k."""
    _check_finite_positive("dose", d)
    if not math.isfinite(t) or t < 0.0:
        raise DomainError(f"time must be finite and >= 0, got {t!r}")
    return _conc_population(d, pk.alpha_v, pk.lambda_v, pk.alpha_k, pk.lambda_k, t)


def auc_patient(d: float, pk: PatientPk, t_ref: float = math.inf) -> float:
    """Patient AUC on [0, t_ref]: d/(V k) * (1 - exp(-k t_ref)).

    t_ref may be infinite, giving the total exposure d/(V k).
    """
    _check_finite_positive("dose", d)
    if math.isnan(t_ref) or t_ref < 0.0:
        raise DomainError(f"t_ref must be >= 0, got {t_ref!r}")
    if math.isinf(t_ref):
        return d / (pk.v * pk.k)
    return d / (pk.v * pk.k) * -math.expm1(-pk.k * t_ref)


def auc_population(d: float, pk: PkPopulation) -> float:
    """Dose-level AUC: d*lambda_v*lambda_k / ((alpha_v-1)(alpha_k-1)).

    Equals the integral of the population concentration curve over [0, inf);
    linear in the dose amount.
    """
    _check_finite_positive("dose", d)
    return _auc_population(d, pk.alpha_v, pk.lambda_v, pk.alpha_k, pk.lambda_k)


def toxicity_prob(d: float, pk: PkPopulation, tox: ToxicityLink) -> float:
    """Toxicity probability: expit(beta0 + beta1 * log AUC(d))."""
    _check_finite_positive("dose", d)
    return _toxicity_prob(d, pk.alpha_v, pk.lambda_v, pk.alpha_k, pk.lambda_k,
                          tox.beta0, tox.beta1)


def effect_intensity(d: float, pk: PkPopulation, pd: PdParams, t: float) -> float:
    """Sigmoid Emax drug-effect intensity at the population concentration."""
    conc = concentration_population(d, pk, t)
    cg = conc ** pd.gamma
    return pd.e_max * cg / (pd.ed50 ** pd.gamma + cg)


def cumulative_effect(d: float, pk: PkPopulation, pd: PdParams) -> float:
    """Cumulative drug effect eta(d): the effect intensity integrated over
    all time.

    Uses the arctan closed form when gamma * alpha_k == 2 (within
    CLOSED_FORM_TOL) and adaptive quadrature otherwise.  Requires
    gamma * alpha_k > 1 for convergence.  eta(0) = 0 by convention.
    """
    if d == 0.0:
        return 0.0
    _check_finite_positive("dose", d)
    if pd.gamma * pk.alpha_k <= 1.0:
        raise DomainError(
            "cumulative effect diverges: gamma * alpha_k = "
            f"{pd.gamma * pk.alpha_k!r} <= 1"
        )
    return _cumulative_effect(d, pk.alpha_v, pk.lambda_v, pk.alpha_k,
                              pk.lambda_k, pd.e_max, pd.ed50, pd.gamma)


def efficacy_prob(d: float, pk: PkPopulation, pd: PdParams) -> float:
    """Efficacy probability 1 - exp(-eta(d)); zero at zero effect, tending
    to one as the cumulative effect grows."""
    return -math.expm1(-cumulative_effect(d, pk, pd))
