"""Seamless phase I-II dose-optimization engine.

PK/PD-integrated Bayesian dose-toxicity and dose-efficacy modelling,
model-based escalation with safety and graduation rules, utility-guided
adaptive randomization, trial simulation, and a trial-conduct HTTP service.
"""

from .pkpd import (
    DomainError,
    DoseGrid,
    ModelParams,
    PatientPk,
    PdParams,
    PkPopulation,
    ToxicityLink,
    auc_patient,
    auc_population,
    concentration_patient,
    concentration_population,
    cumulative_effect,
    effect_intensity,
    efficacy_prob,
    toxicity_prob,
)
from .posterior import (
    ComparatorPriorSpec,
    DoseCurves,
    McmcSettings,
    PatientRecord,
    Phase1Data,
    PosteriorDraws,
    PriorSpec,
    dose_curves,
    log_posterior,
    sample_comparator_posterior,
    sample_posterior,
    tail_prob,
)
from .phase1 import (
    DoseDecision,
    EscalationState,
    Phase1Config,
    graduate,
    is_safe,
    next_dose,
    select_with_utility,
)
from .phase2 import (
    ArmState,
    Phase2Config,
    UtilityWeights,
    bar_probabilities,
    candidate_set,
    expected_utility,
    quasi_score,
    randomize_cohort,
    select_arm,
    utility_posterior,
)
from .simulate import (
    OperatingCharacteristics,
    PkGen,
    Scenario,
    TrialDesign,
    generate_patient,
    run_replications,
    run_trial,
    simulate_phase1,
    simulate_phase2,
)

__version__ = "0.1.0"
