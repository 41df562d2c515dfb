"""Bundled benchmark scenarios and their matching trial designs.

Two suites ship with the package.  The "phase1" suite exercises escalation
and graduation only (four toxicity profiles against one efficacy curve,
30-patient trials).  The "seamless" suite runs the full two-phase flow
against a shared control arm (two toxicity profiles crossed with six
efficacy shapes: flat, rising, falling, peaked, U-shaped, plateau).
"""

from .phase1 import Phase1Config
from .phase2 import Phase2Config, UtilityWeights
from .pkpd import DoseGrid
from .posterior import McmcSettings, PriorSpec
from .simulate import PkGen, Scenario, TrialDesign

BENCHMARK_GRID = DoseGrid((15.0, 30.0, 60.0, 90.0, 120.0))
SAMPLE_TIMES = (1.0, 3.0, 5.0, 7.0, 12.0, 24.0)

PHASE1_PK_GEN = PkGen(v_shape=4.0, v_rate=1.0, k_shape=3.0, k_rate=1.0, sigma=1.0)
SEAMLESS_PK_GEN = PkGen(v_shape=10.0, v_rate=1.0, k_shape=9.0, k_rate=1.5, sigma=4.0)

_PHASE1_EFF = (0.12, 0.18, 0.27, 0.33, 0.37)
_PHASE1_TOX = {
    "sc1": (0.17, 0.29, 0.45, 0.55, 0.62),
    "sc2": (0.11, 0.19, 0.31, 0.39, 0.46),
    "sc3": (0.04, 0.09, 0.20, 0.30, 0.39),
    "sc4": (0.11, 0.16, 0.21, 0.24, 0.27),
}

_SEAMLESS_TOX_LOW = (0.03, 0.06, 0.09, 0.12, 0.15)
_SEAMLESS_TOX_HIGH = (0.03, 0.06, 0.17, 0.30, 0.50)
_SEAMLESS_EFF = {
    1: (0.2, 0.2, 0.2, 0.2, 0.2),
    2: (0.2, 0.3, 0.5, 0.7, 0.8),
    3: (0.8, 0.7, 0.5, 0.3, 0.2),
    4: (0.2, 0.4, 0.8, 0.4, 0.2),
    5: (0.8, 0.4, 0.2, 0.4, 0.8),
    6: (0.2, 0.4, 0.5, 0.5, 0.5),
}
_CONTROL_TOX = 0.17
_CONTROL_EFF = 0.2


def phase1_scenarios() -> dict[str, Scenario]:
    return {
        name: Scenario(
            label=f"phase1-{name}",
            grid=BENCHMARK_GRID,
            true_tox=tox,
            true_eff=_PHASE1_EFF,
            pk_gen=PHASE1_PK_GEN,
            sample_times=SAMPLE_TIMES,
        )
        for name, tox in _PHASE1_TOX.items()
    }


def seamless_scenarios() -> dict[str, Scenario]:
    out = {}
    for k in range(1, 13):
        eff = _SEAMLESS_EFF[(k - 1) % 6 + 1]
        tox = _SEAMLESS_TOX_HIGH if k <= 6 else _SEAMLESS_TOX_LOW
        out[f"sc{k}"] = Scenario(
            label=f"seamless-sc{k}",
            grid=BENCHMARK_GRID,
            true_tox=tox,
            true_eff=eff,
            pk_gen=SEAMLESS_PK_GEN,
            sample_times=SAMPLE_TIMES,
            control_tox=_CONTROL_TOX,
            control_eff=_CONTROL_EFF,
        )
    return out


def phase1_design(mcmc: McmcSettings | None = None,
                  weights: UtilityWeights | None = None) -> TrialDesign:
    """Escalation-only design: 0.3 toxicity target, graduation bars at
    (0.3 toxicity, 0.2 efficacy) with 0.6 confidence each."""
    return TrialDesign(
        phase1=Phase1Config(
            target_tox_prob=0.3,
            grad_tox_threshold=0.3,
            grad_eff_threshold=0.2,
            grad_tox_confidence=0.6,
            grad_eff_confidence=0.6,
            cohort_size=3,
            max_n=30,
        ),
        prior=PriorSpec(),
        mcmc=mcmc or McmcSettings(),
        phase2=None,
        weights=weights or UtilityWeights(),
    )


def seamless_design(mcmc: McmcSettings | None = None,
                    weights: UtilityWeights | None = None) -> TrialDesign:
    """Two-phase design: 0.2 toxicity target in escalation, graduation bars
    (0.2, 0.2) at 0.6 confidence, then a 150-patient randomized comparison
    in cohorts of 10 with selection confidences (0.7, 0.9)."""
    w = weights or UtilityWeights()
    return TrialDesign(
        phase1=Phase1Config(
            target_tox_prob=0.2,
            grad_tox_threshold=0.2,
            grad_eff_threshold=0.2,
            grad_tox_confidence=0.6,
            grad_eff_confidence=0.6,
            cohort_size=3,
            max_n=30,
        ),
        prior=PriorSpec(),
        mcmc=mcmc or McmcSettings(),
        phase2=Phase2Config(
            cohort_size=10,
            max_n=150,
            tox_threshold=0.2,
            eff_threshold=0.2,
            select_tox_confidence=0.7,
            select_eff_confidence=0.9,
            weights=w,
        ),
        weights=w,
    )


def get_scenario(suite: str, name: str) -> Scenario:
    suites = {"phase1": phase1_scenarios, "seamless": seamless_scenarios}
    if suite not in suites:
        raise KeyError(f"unknown suite {suite!r}; expected one of {sorted(suites)}")
    table = suites[suite]()
    if name not in table:
        raise KeyError(f"unknown scenario {name!r} in suite {suite!r}; "
                       f"expected one of {sorted(table)}")
    return table[name]


def get_design(suite: str, mcmc: McmcSettings | None = None,
               weights: UtilityWeights | None = None) -> TrialDesign:
    if suite == "phase1":
        return phase1_design(mcmc, weights)
    if suite == "seamless":
        return seamless_design(mcmc, weights)
    raise KeyError(f"unknown suite {suite!r}")
