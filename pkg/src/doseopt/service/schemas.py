"""Request and response models for the trial-conduct API."""

from pydantic import BaseModel, Field, field_validator


class Phase1ConfigIn(BaseModel):
    target_tox_prob: float = 0.3
    safety_threshold: float | None = None
    safety_cutoff: float = 0.95
    grad_tox_threshold: float = 0.3
    grad_eff_threshold: float = 0.2
    grad_tox_confidence: float = 0.6
    grad_eff_confidence: float = 0.6
    cohort_size: int = 3
    max_n: int = 30
    start_dose_index: int = 1


class Phase2ConfigIn(BaseModel):
    cohort_size: int = 10
    max_n: int = 150
    prior_alpha: float = 1.0
    prior_beta: float = 1.0
    tox_threshold: float = 0.2
    eff_threshold: float = 0.2
    select_tox_confidence: float = 0.7
    select_eff_confidence: float = 0.9
    include_phase1_data: bool = False
    bar_draws: int = 100_000


class McmcSettingsIn(BaseModel):
    iterations: int = 10_000
    burnin: int = 5_000
    thin: int = 5


class UtilityWeightsIn(BaseModel):
    eff_no_tox: float = 1.0
    eff_tox: float = 0.6
    no_eff_no_tox: float = 0.4
    no_eff_tox: float = 0.0


class TrialCreate(BaseModel):
    dose_amounts: list[float] = Field(min_length=2)
    phase1: Phase1ConfigIn = Field(default_factory=Phase1ConfigIn)
    phase2: Phase2ConfigIn | None = Field(default_factory=Phase2ConfigIn)
    mcmc: McmcSettingsIn = Field(default_factory=McmcSettingsIn)
    utility: UtilityWeightsIn = Field(default_factory=UtilityWeightsIn)
    model: str = "pk"
    trial_id: str | None = None

    @field_validator("model")
    @classmethod
    def _model_known(cls, v: str) -> str:
        if v not in ("pk", "dose_only"):
            raise ValueError("model must be 'pk' or 'dose_only'")
        return v


class PatientIn(BaseModel):
    times: list[float] = Field(default_factory=list)
    log_concentrations: list[float] = Field(default_factory=list)
    dlt: int = Field(ge=0, le=1)
    efficacy: int | None = Field(default=None, ge=0, le=1)
    dose_index: int | None = Field(default=None, ge=1)


class CohortOutcomes(BaseModel):
    patients: list[PatientIn] = Field(min_length=1)


class ArmOutcome(BaseModel):
    arm_id: int = Field(ge=0)
    eff_no_tox: int = Field(default=0, ge=0)
    eff_tox: int = Field(default=0, ge=0)
    no_eff_no_tox: int = Field(default=0, ge=0)
    no_eff_tox: int = Field(default=0, ge=0)


class Phase2Outcomes(BaseModel):
    outcomes: list[ArmOutcome] = Field(min_length=1)


class AssignmentOut(BaseModel):
    dose_index: int
    n_patients: int


class TrialCreated(BaseModel):
    trial_id: str
    assignment: AssignmentOut


class DecisionOut(BaseModel):
    action: str
    dose_index: int | None
    posterior_mean_tox: list[float]
    overdose_probs: list[float]
    safe: list[bool]


class CohortResponse(BaseModel):
    trial_id: str
    n_enrolled: int
    decision: DecisionOut
    assignment: AssignmentOut | None
    phase: str


class CompletionResponse(BaseModel):
    trial_id: str
    graduates: list[int]
    selected_with_utility: int | None
    phase: str
    allocation: dict[int, int] | None = None


class Phase2Response(BaseModel):
    trial_id: str
    phase: str
    phase2_enrolled: int
    xi: list[float] | None
    allocation: dict[int, int] | None
    candidate: list[int] | None = None
    recommendation: int | None = None
