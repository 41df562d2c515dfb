"""Single-trial simulation and replication harness.

A simulated trial runs the cohort-by-cohort escalation loop against a
ground-truth scenario, refits the posterior after every cohort, applies the
graduation rule once all efficacy outcomes are in, then (when configured)
carries the graduates plus a control arm through the adaptively randomized
comparison to a final recommendation.  Replicates own isolated seed streams
derived from the master seed by counter splitting, so results are identical
for any degree of parallelism.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .phase1 import (
    EscalationState,
    Phase1Config,
    TERMINATE,
    graduate,
    next_dose,
    phase1_arm_states,
    select_with_utility,
)
from .phase2 import (
    ArmState,
    Phase2Config,
    UtilityWeights,
    bar_probabilities,
    candidate_set,
    equal_allocation,
    expected_utility,
    outcome_cell_probs,
    randomize_cohort,
    select_arm,
    utility_posterior,
)
from .pkpd import DomainError, DoseGrid
from .posterior import (
    ComparatorPriorSpec,
    McmcSettings,
    PatientRecord,
    Phase1Data,
    PriorSpec,
    comparator_dose_curves,
    dose_curves,
    sample_comparator_posterior,
    sample_posterior,
)

MODEL_PK = "pk"
MODEL_DOSE_ONLY = "dose_only"


@dataclass(frozen=True)
class PkGen:
    """Ground-truth generator for patient PK: gamma laws for volume and
    elimination rate plus the log-scale concentration noise."""

    v_shape: float = 10.0
    v_rate: float = 1.0
    k_shape: float = 9.0
    k_rate: float = 1.5
    sigma: float = 4.0

    def __post_init__(self):
        for name in ("v_shape", "v_rate", "k_shape", "k_rate"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0")
        if self.sigma < 0:
            raise DomainError("sigma must be >= 0")


@dataclass(frozen=True)
class Scenario:
    """Ground truth for one simulated trial family."""

    label: str
    grid: DoseGrid
    true_tox: tuple[float, ...]
    true_eff: tuple[float, ...]
    pk_gen: PkGen
    sample_times: tuple[float, ...] = (1.0, 3.0, 5.0, 7.0, 12.0, 24.0)
    control_tox: float | None = None
    control_eff: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "true_tox", tuple(float(p) for p in self.true_tox))
        object.__setattr__(self, "true_eff", tuple(float(p) for p in self.true_eff))
        object.__setattr__(self, "sample_times",
                           tuple(float(t) for t in self.sample_times))
        if len(self.true_tox) != self.grid.size or len(self.true_eff) != self.grid.size:
            raise DomainError("truth vectors must align with the dose grid")
        for p in self.true_tox + self.true_eff:
            if not 0.0 <= p <= 1.0:
                raise DomainError("truth probabilities must lie in [0, 1]")
        if any(b <= a for a, b in zip(self.sample_times, self.sample_times[1:])):
            raise DomainError("sample times must be strictly increasing")
        if (self.control_tox is None) != (self.control_eff is None):
            raise DomainError("control_tox and control_eff must come together")

    @property
    def has_control(self) -> bool:
        return self.control_tox is not None


@dataclass(frozen=True)
class TrialDesign:
    """Everything a simulated trial needs besides the scenario truth."""

    phase1: Phase1Config = field(default_factory=Phase1Config)
    prior: PriorSpec = field(default_factory=PriorSpec)
    mcmc: McmcSettings = field(default_factory=McmcSettings)
    phase2: Phase2Config | None = None
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    model: str = MODEL_PK
    comparator_prior: ComparatorPriorSpec = field(default_factory=ComparatorPriorSpec)

    def __post_init__(self):
        if self.model not in (MODEL_PK, MODEL_DOSE_ONLY):
            raise DomainError(f"model must be '{MODEL_PK}' or '{MODEL_DOSE_ONLY}'")


@dataclass
class Phase1Result:
    data: Phase1Data
    graduates: list[int]
    selected_with_utility: int | None
    enrollment: np.ndarray
    dlt_counts: np.ndarray
    terminated: bool
    n_cohorts: int


@dataclass
class Phase2Result:
    arms: list[ArmState]
    candidate: list[int]
    recommendation: int | None
    xi_history: list[np.ndarray]


@dataclass
class TrialOutcome:
    """Flat per-replicate record used by the aggregator."""

    phase1_enrollment: np.ndarray
    total_enrollment: np.ndarray
    control_n: int
    graduates: list[int]
    selected_with_utility: int | None
    candidate: list[int]
    recommendation: int | None
    terminated: bool


@dataclass
class OperatingCharacteristics:
    """Replication-averaged metrics, one entry per grid dose (plus control)."""

    scenario_label: str
    mode: str
    dose_amounts: tuple[float, ...]
    true_tox: tuple[float, ...]
    true_eff: tuple[float, ...]
    utilities: tuple[float, ...]
    control_utility: float | None
    avg_patients_phase1: np.ndarray
    avg_patients_total: np.ndarray
    avg_control_patients: float
    sel_pct: np.ndarray
    sel_pct_with_u: np.ndarray
    pct_no_recommendation: float
    avg_total_n: float
    n_reps: int
    failures: list[tuple[int, str]]
    config_echo: dict


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def generate_patient(scenario: Scenario, dose_index: int, seed) -> PatientRecord:
    """Draw one patient at a dose: latent PK, noisy log concentrations at the
    scenario's sample schedule, then independent DLT and efficacy outcomes."""
    rng = _as_rng(seed)
    d = scenario.grid.amount(dose_index)
    gen = scenario.pk_gen
    v = rng.gamma(gen.v_shape, 1.0 / gen.v_rate)
    k = rng.gamma(gen.k_shape, 1.0 / gen.k_rate)
    times = np.asarray(scenario.sample_times)
    means = math.log(d / v) - k * times
    log_x = means + gen.sigma * rng.standard_normal(len(times))
    dlt = int(rng.random() < scenario.true_tox[dose_index - 1])
    eff = int(rng.random() < scenario.true_eff[dose_index - 1])
    return PatientRecord(dose_amount=d, times=tuple(times),
                         log_concentrations=tuple(log_x), dlt=dlt, efficacy=eff)


def _fit(data: Phase1Data, design: TrialDesign, include_efficacy: bool, seed):
    if design.model == MODEL_PK:
        draws = sample_posterior(data, design.prior, design.mcmc,
                                 include_efficacy=include_efficacy, seed=seed)
        return dose_curves(draws, data.grid)
    draws = sample_comparator_posterior(data, design.comparator_prior, design.mcmc,
                                        include_efficacy=include_efficacy, seed=seed)
    return comparator_dose_curves(draws, data.grid)


def _next_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


def simulate_phase1(scenario: Scenario, design: TrialDesign, seed) -> Phase1Result:
    """Run escalation to completion or termination, then apply the
    graduation rule on the efficacy-inclusive posterior.

    Efficacy outcomes are generated at enrollment but never enter the
    escalation posterior, mirroring their slow clinical readout.
    """
    rng = _as_rng(seed)
    cfg = design.phase1
    grid = scenario.grid
    state = EscalationState(current_dose_index=cfg.start_dose_index,
                            data=Phase1Data(grid))
    n_cohorts = 0

    while True:
        size = min(cfg.cohort_size, cfg.max_n - state.n_enrolled)
        for _ in range(size):
            state.data.add(generate_patient(scenario, state.current_dose_index, rng))
        n_cohorts += 1
        if state.n_enrolled >= cfg.max_n:
            break
        curves = _fit(state.data, design, False, _next_seed(rng))
        decision = next_dose(state, curves, grid, cfg)
        if decision.action == TERMINATE:
            state.terminated = True
            state.termination_reason = "no safe dose"
            break
        state.current_dose_index = decision.dose_index

    counts = state.data.dose_counts()
    if state.terminated:
        graduates, selected = [], None
    else:
        curves = _fit(state.data, design, True, _next_seed(rng))
        graduates = graduate(curves, grid, cfg)
        selected = select_with_utility(graduates, state.data, design.weights,
                                       seed=_next_seed(rng))
    return Phase1Result(
        data=state.data,
        graduates=graduates,
        selected_with_utility=selected,
        enrollment=counts["n"],
        dlt_counts=counts["dlt"],
        terminated=state.terminated,
        n_cohorts=n_cohorts,
    )


def simulate_phase2(graduates, scenario: Scenario, cfg: Phase2Config, seed,
                    phase1_arms: dict[int, ArmState] | None = None) -> Phase2Result:
    """Randomized comparison of the graduated doses against the control arm.

    The first cohort splits equally (remainders to the lowest arm ids);
    every later cohort is allocated by the posterior probabilities of
    having the highest expected utility, updated each cohort.
    """
    graduates = sorted(graduates)
    if not graduates:
        return Phase2Result(arms=[], candidate=[], recommendation=None,
                            xi_history=[])
    if not scenario.has_control:
        raise DomainError(f"scenario {scenario.label!r} has no control arm")
    rng = _as_rng(seed)
    arm_ids = [0] + graduates
    arms = [ArmState(arm_id=i) for i in arm_ids]
    truth = {0: (scenario.control_tox, scenario.control_eff)}
    for idx in graduates:
        truth[idx] = (scenario.true_tox[idx - 1], scenario.true_eff[idx - 1])

    pooled = phase1_arms if cfg.include_phase1_data and phase1_arms else {}
    xi_history: list[np.ndarray] = []
    enrolled = 0
    allocation = equal_allocation(len(arm_ids), min(cfg.cohort_size, cfg.max_n))

    while True:
        for pos, (arm, arm_id) in enumerate(zip(arms, arm_ids)):
            tox_p, eff_p = truth[arm_id]
            for _ in range(int(allocation[pos])):
                tox = rng.random() < tox_p
                eff = rng.random() < eff_p
                cell = {(True, False): 0, (True, True): 1,
                        (False, False): 2, (False, True): 3}[(eff, tox)]
                arm.add(cell)
        enrolled += int(allocation.sum())
        if enrolled >= cfg.max_n:
            break
        params = [utility_posterior(arm, cfg, pooled.get(arm.arm_id))
                  for arm in arms]
        xi = bar_probabilities(params, cfg.bar_draws, _next_seed(rng))
        xi_history.append(xi)
        allocation = randomize_cohort(xi, min(cfg.cohort_size, cfg.max_n - enrolled),
                                      _next_seed(rng))

    chosen = candidate_set(arms, cfg)
    recommendation = select_arm(arms, cfg, _next_seed(rng),
                                phase1_arms=pooled or None)
    return Phase2Result(arms=arms, candidate=chosen,
                        recommendation=recommendation, xi_history=xi_history)


def run_trial(scenario: Scenario, design: TrialDesign, seed) -> TrialOutcome:
    """One complete replicate: escalation, graduation, then the randomized
    phase when at least one dose graduates and the design has one."""
    rng = _as_rng(seed)
    p1 = simulate_phase1(scenario, design, rng)
    total = p1.enrollment.astype(int).copy()
    control_n = 0
    chosen: list[int] = []
    recommendation = None
    if design.phase2 is not None and p1.graduates:
        pooled = phase1_arm_states(p1.data, p1.graduates) \
            if design.phase2.include_phase1_data else None
        p2 = simulate_phase2(p1.graduates, scenario, design.phase2, rng,
                             phase1_arms=pooled)
        chosen = p2.candidate
        recommendation = p2.recommendation
        for arm in p2.arms:
            if arm.arm_id == 0:
                control_n = arm.n
            else:
                total[arm.arm_id - 1] += arm.n
    return TrialOutcome(
        phase1_enrollment=p1.enrollment,
        total_enrollment=total,
        control_n=control_n,
        graduates=p1.graduates,
        selected_with_utility=p1.selected_with_utility,
        candidate=chosen,
        recommendation=recommendation,
        terminated=p1.terminated,
    )


def _replicate_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


def _run_replicate(scenario: Scenario, design: TrialDesign, master_seed: int,
                   index: int):
    try:
        rng = np.random.default_rng(_replicate_seed(master_seed, index))
        return index, run_trial(scenario, design, rng), None
    except Exception as exc:  # recorded, not fatal (within the failure budget)
        return index, None, f"{type(exc).__name__}: {exc}"


def run_replications(scenario: Scenario, design: TrialDesign, n_reps: int,
                     master_seed: int, parallelism: int = 1) -> OperatingCharacteristics:
    """Replicate the trial and aggregate operating characteristics.

    The per-replicate seed stream depends only on (master_seed, index), and
    aggregation runs in index order, so the result is independent of the
    parallelism degree.  A scenario run aborts when more than 1% of
    replicates fail.
    """
    if n_reps < 1:
        raise DomainError("n_reps must be >= 1")
    if parallelism <= 1:
        results = [_run_replicate(scenario, design, master_seed, i)
                   for i in range(n_reps)]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            chunk = max(1, n_reps // (parallelism * 4))
            results = list(pool.map(_run_replicate,
                                    [scenario] * n_reps, [design] * n_reps,
                                    [master_seed] * n_reps, range(n_reps),
                                    chunksize=chunk))
    results.sort(key=lambda r: r[0])
    outcomes = [r[1] for r in results if r[2] is None]
    failures = [(r[0], r[2]) for r in results if r[2] is not None]
    if len(failures) > 0.01 * n_reps:
        raise RuntimeError(
            f"{len(failures)}/{n_reps} replicates failed, exceeding the 1% "
            f"budget; first failure: {failures[0]}"
        )
    return aggregate(scenario, design, outcomes, n_reps, failures)


def aggregate(scenario: Scenario, design: TrialDesign, outcomes, n_reps: int,
              failures) -> OperatingCharacteristics:
    size = scenario.grid.size
    n_ok = len(outcomes)
    if n_ok == 0:
        raise RuntimeError("no successful replicates to aggregate")
    mode = "full" if design.phase2 is not None else "phase1"

    sum_p1 = np.zeros(size, dtype=np.int64)
    sum_total = np.zeros(size, dtype=np.int64)
    sum_control = 0
    sel_counts = np.zeros(size, dtype=np.int64)
    sel_u_counts = np.zeros(size, dtype=np.int64)
    none_count = 0
    for out in outcomes:
        sum_p1 += out.phase1_enrollment
        sum_total += out.total_enrollment
        sum_control += out.control_n
        if mode == "full":
            for idx in out.candidate:
                sel_counts[idx - 1] += 1
            if out.recommendation is not None:
                sel_u_counts[out.recommendation - 1] += 1
            else:
                none_count += 1
        else:
            for idx in out.graduates:
                sel_counts[idx - 1] += 1
            if out.selected_with_utility is not None:
                sel_u_counts[out.selected_with_utility - 1] += 1
            else:
                none_count += 1

    avg_p1 = sum_p1 / n_ok
    avg_total = sum_total / n_ok
    avg_control = sum_control / n_ok
    utilities = tuple(
        expected_utility(outcome_cell_probs(e, t), design.weights)
        for e, t in zip(scenario.true_eff, scenario.true_tox)
    )
    control_utility = None
    if scenario.has_control:
        control_utility = expected_utility(
            outcome_cell_probs(scenario.control_eff, scenario.control_tox),
            design.weights)

    return OperatingCharacteristics(
        scenario_label=scenario.label,
        mode=mode,
        dose_amounts=scenario.grid.amounts,
        true_tox=scenario.true_tox,
        true_eff=scenario.true_eff,
        utilities=utilities,
        control_utility=control_utility,
        avg_patients_phase1=avg_p1,
        avg_patients_total=avg_total,
        avg_control_patients=avg_control,
        sel_pct=sel_counts / n_ok,
        sel_pct_with_u=sel_u_counts / n_ok,
        pct_no_recommendation=none_count / n_ok,
        avg_total_n=float(avg_total.sum() + avg_control),
        n_reps=n_ok,
        failures=failures,
        config_echo={
            "model": design.model,
            "phase1": asdict(design.phase1),
            "phase2": asdict(design.phase2) if design.phase2 else None,
            "mcmc": asdict(design.mcmc),
            "weights": asdict(design.weights),
        },
    )
