"""Built-in numerical validation suite.

Re-runs the independent oracle checks that anchor the engine's mathematics:
closed forms against quadrature, the benchmark utility table, the conjugate
Beta update, and the exactly solvable adaptive-randomization case.  The
``validate`` CLI subcommand prints one line per check and exits nonzero on
any failure.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import pkpd
from .phase2 import (
    ArmState,
    Phase2Config,
    UtilityWeights,
    bar_probabilities,
    expected_utility,
    outcome_cell_probs,
    utility_posterior,
)
from .scenarios import phase1_scenarios, seamless_scenarios

# Reference utility rows for the bundled scenarios (independent-cell rule,
# weights (1, 0.6, 0.4, 0)); the seamless rows are exact to 3 decimals, the
# phase1 rows are 2-decimal values so their tolerance is looser.
SEAMLESS_UTILITIES = {
    "sc1": (0.508, 0.496, 0.452, 0.400, 0.320),
    "sc2": (0.508, 0.556, 0.632, 0.700, 0.680),
    "sc3": (0.868, 0.796, 0.632, 0.460, 0.320),
    "sc4": (0.508, 0.616, 0.812, 0.520, 0.320),
    "sc5": (0.868, 0.616, 0.452, 0.520, 0.680),
    "sc6": (0.508, 0.616, 0.632, 0.580, 0.500),
    "sc7": (0.508, 0.496, 0.484, 0.472, 0.460),
    "sc8": (0.508, 0.556, 0.664, 0.772, 0.820),
    "sc9": (0.868, 0.796, 0.664, 0.532, 0.460),
    "sc10": (0.508, 0.616, 0.844, 0.592, 0.460),
    "sc11": (0.868, 0.616, 0.484, 0.592, 0.820),
    "sc12": (0.508, 0.616, 0.664, 0.652, 0.640),
}
SEAMLESS_CONTROL_UTILITY = 0.452
PHASE1_UTILITIES = {
    "sc1": (0.41, 0.39, 0.38, 0.38, 0.38),
    "sc2": (0.43, 0.43, 0.44, 0.44, 0.44),
    "sc3": (0.46, 0.47, 0.48, 0.48, 0.47),
    "sc4": (0.43, 0.45, 0.48, 0.50, 0.52),
}
SEAMLESS_TOL = 0.005
PHASE1_TOL = 0.01


@dataclass
class CheckResult:
    name: str
    passed: bool
    observed: str
    expected: str
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"[{status}] {self.name}: observed {self.observed}, expected {self.expected}"
        if self.detail:
            msg += f" ({self.detail})"
        return msg


def _random_population(rng) -> pkpd.PkPopulation:
    return pkpd.PkPopulation(
        alpha_v=1.0 + rng.uniform(0.5, 9.0),
        lambda_v=rng.uniform(0.2, 3.0),
        alpha_k=1.0 + rng.uniform(0.5, 9.0),
        lambda_k=rng.uniform(0.2, 3.0),
    )


def check_auc_quadrature(n_sets: int = 20, seed: int = 1404) -> CheckResult:
    """Closed-form dose-level AUC vs adaptive quadrature of the population
    concentration curve over [0, inf)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_sets):
        pk = _random_population(rng)
        d = rng.uniform(5.0, 150.0)
        exact = pkpd.auc_population(d, pk)
        quad, _ = integrate.quad(
            lambda t: pkpd.concentration_population(d, pk, t),
            0.0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=400)
        worst = max(worst, abs(exact - quad) / abs(quad))
    return CheckResult("auc-closed-form-vs-quadrature", worst < 1e-8,
                       f"max rel err {worst:.2e}", "rel err < 1e-8",
                       f"{n_sets} random parameter sets")


def check_effect_quadrature(n_sets: int = 20, seed: int = 2718,
                            effect_fn=None) -> CheckResult:
    """Arctan closed form of the cumulative effect vs direct quadrature of
    the effect-intensity curve, on parameter sets with hill * alpha_k = 2."""
    fn = effect_fn or pkpd.cumulative_effect
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_sets):
        pk = _random_population(rng)
        pd_ = pkpd.PdParams(e_max=rng.uniform(0.2, 3.0),
                            ed50=rng.uniform(0.5, 50.0),
                            gamma=2.0 / pk.alpha_k)
        d = rng.uniform(5.0, 150.0)
        closed = fn(d, pk, pd_)
        quad, _ = integrate.quad(
            lambda t: pkpd.effect_intensity(d, pk, pd_, t),
            0.0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=400)
        worst = max(worst, abs(closed - quad) / abs(quad))
    return CheckResult("effect-closed-form-vs-quadrature", worst < 1e-8,
                       f"max rel err {worst:.2e}", "rel err < 1e-8",
                       f"{n_sets} random parameter sets with hill*alpha_k=2")


def check_utility_table() -> CheckResult:
    """Expected utilities of every bundled scenario against the reference
    rows under independent outcome cells."""
    weights = UtilityWeights()
    worst = 0.0
    bad = None
    for name, sc in seamless_scenarios().items():
        refs = SEAMLESS_UTILITIES[name]
        for eff, tox, ref in zip(sc.true_eff, sc.true_tox, refs):
            err = abs(expected_utility(outcome_cell_probs(eff, tox), weights) - ref)
            if err > SEAMLESS_TOL and bad is None:
                bad = f"seamless {name}"
            worst = max(worst, err)
    control_err = abs(expected_utility(
        outcome_cell_probs(0.2, 0.17), weights) - SEAMLESS_CONTROL_UTILITY)
    if control_err > SEAMLESS_TOL and bad is None:
        bad = "seamless control"
    phase1_worst = 0.0
    for name, sc in phase1_scenarios().items():
        refs = PHASE1_UTILITIES[name]
        for eff, tox, ref in zip(sc.true_eff, sc.true_tox, refs):
            err = abs(expected_utility(outcome_cell_probs(eff, tox), weights) - ref)
            if err > PHASE1_TOL and bad is None:
                bad = f"phase1 {name}"
            phase1_worst = max(phase1_worst, err)
    passed = bad is None
    return CheckResult("utility-reference-table", passed,
                       f"max err seamless {worst:.4f}, phase1 {phase1_worst:.4f}",
                       f"<= {SEAMLESS_TOL} / {PHASE1_TOL}",
                       bad or "all 16 scenarios + control")


def check_beta_update() -> CheckResult:
    """Conjugate Beta update of the quasi-binomial utility posterior."""
    cfg = Phase2Config()
    arm = ArmState(arm_id=1, eff_no_tox=3, eff_tox=1, no_eff_no_tox=4, no_eff_tox=2)
    a, b = utility_posterior(arm, cfg)
    pooled = utility_posterior(arm, cfg, phase1_arm=arm)
    ok = (abs(a - 6.2) < 1e-12 and abs(b - 5.8) < 1e-12
          and abs(pooled[0] - 11.4) < 1e-12 and abs(pooled[1] - 10.6) < 1e-12)
    return CheckResult("beta-posterior-update", ok,
                       f"Beta({a:.6g}, {b:.6g}); pooled Beta({pooled[0]:.6g}, {pooled[1]:.6g})",
                       "Beta(6.2, 5.8); pooled Beta(11.4, 10.6)")


def check_bar_exact_case(draws: int = 100_000, seed: int = 31415) -> CheckResult:
    """Monte Carlo randomization probabilities against the exactly solvable
    Beta(2,1) vs Beta(1,2) pair, whose winner probability is 5/6."""
    xi = bar_probabilities([(2.0, 1.0), (1.0, 2.0)], draws, seed)
    err = abs(xi[0] - 5.0 / 6.0)
    return CheckResult("bar-exact-case", err < 0.01,
                       f"xi = ({xi[0]:.4f}, {xi[1]:.4f})",
                       "(0.8333, 0.1667) within 0.01",
                       f"{draws} draws")


def run_all(effect_fn=None) -> list[CheckResult]:
    """Run every check; an alternative cumulative-effect implementation can
    be injected to demonstrate the suite localizes a perturbation."""
    return [
        check_auc_quadrature(),
        check_effect_quadrature(effect_fn=effect_fn),
        check_utility_table(),
        check_beta_update(),
        check_bar_exact_case(),
    ]
