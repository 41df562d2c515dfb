"""Dose-escalation decision logic for the phase I portion.

Escalation follows the continual-reassessment principle: assign the next
cohort to the safe dose whose posterior mean toxicity is closest to the
target, with two overrides.  A zero-DLT record at and below the current dose
forces a one-level escalation to speed early exploration, and the chosen
dose may never skip an untried level.  A posterior overdose rule defines
the safe set and terminates the trial when it empties.
"""

from dataclasses import dataclass

import numpy as np

from .phase2 import ArmState, UtilityWeights, bar_probabilities
from .pkpd import DomainError, DoseGrid
from .posterior import DoseCurves, Phase1Data, dose_curves, tail_prob

ESCALATE = "escalate"
STAY = "stay"
DE_ESCALATE = "de-escalate"
TERMINATE = "terminate"


@dataclass(frozen=True)
class Phase1Config:
    """Escalation and graduation thresholds.

    safety_threshold defaults to the toxicity target; a dose is safe while
    the posterior probability of exceeding it stays strictly below
    safety_cutoff.
    """

    target_tox_prob: float = 0.3
    safety_threshold: float | None = None
    safety_cutoff: float = 0.95
    grad_tox_threshold: float = 0.3     # toxicity bar for graduation
    grad_eff_threshold: float = 0.2     # efficacy bar for graduation
    grad_tox_confidence: float = 0.6
    grad_eff_confidence: float = 0.6
    cohort_size: int = 3
    max_n: int = 30
    start_dose_index: int = 1

    def __post_init__(self):
        for name in ("target_tox_prob", "safety_cutoff", "grad_tox_threshold",
                     "grad_eff_threshold", "grad_tox_confidence",
                     "grad_eff_confidence"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")
        if self.safety_threshold is not None and not 0.0 < self.safety_threshold < 1.0:
            raise DomainError("safety_threshold must lie in (0, 1)")
        if self.cohort_size < 1:
            raise DomainError("cohort_size must be >= 1")
        if self.max_n < self.cohort_size:
            raise DomainError("max_n must be >= cohort_size")
        if self.start_dose_index < 1:
            raise DomainError("start_dose_index is 1-based")

    @property
    def overdose_threshold(self) -> float:
        return self.safety_threshold if self.safety_threshold is not None \
            else self.target_tox_prob


@dataclass
class EscalationState:
    """Mutable phase I bookkeeping: current dose, accrued data, termination."""

    current_dose_index: int
    data: Phase1Data
    terminated: bool = False
    termination_reason: str | None = None

    def __post_init__(self):
        if not 1 <= self.current_dose_index <= self.data.grid.size:
            raise DomainError(
                f"current dose index {self.current_dose_index} outside "
                f"1..{self.data.grid.size}")

    def enrollment(self) -> np.ndarray:
        return self.data.dose_counts()["n"]

    def dlt_counts(self) -> np.ndarray:
        return self.data.dose_counts()["dlt"]

    @property
    def n_enrolled(self) -> int:
        return len(self.data.patients)


@dataclass(frozen=True)
class DoseDecision:
    action: str                      # escalate / stay / de-escalate / terminate
    dose_index: int | None
    posterior_mean_tox: tuple[float, ...]
    overdose_probs: tuple[float, ...]
    safe: tuple[bool, ...]


def _as_curves(draws, grid: DoseGrid) -> DoseCurves:
    """Decision functions accept raw posterior draws or precomputed curves."""
    if isinstance(draws, DoseCurves):
        return draws
    return dose_curves(draws, grid)


def is_safe(dose_index: int, draws, grid: DoseGrid, cfg: Phase1Config) -> bool:
    """True while Pr(tox > threshold) stays strictly below the cutoff."""
    curves = _as_curves(draws, grid)
    p = tail_prob(curves.tox, dose_index, cfg.overdose_threshold, ">")
    return p < cfg.safety_cutoff


def _safety_profile(curves: DoseCurves, grid: DoseGrid, cfg: Phase1Config):
    overdose = np.array([tail_prob(curves.tox, i, cfg.overdose_threshold, ">")
                         for i in range(1, grid.size + 1)])
    safe = overdose < cfg.safety_cutoff
    return overdose, safe


def next_dose(state: EscalationState, draws, grid: DoseGrid,
              cfg: Phase1Config) -> DoseDecision:
    """Dose for the next cohort, or termination when no dose is safe.

    Order of rules: the safe set restricts everything; with no DLT at or
    below the current dose the decision is one level up (capped at the top
    and at the safe set); otherwise the safe dose with posterior mean
    toxicity nearest the target wins, except that a jump past an untried
    level collapses to one level up.
    """
    curves = _as_curves(draws, grid)
    if curves.tox.shape[0] == 0:
        raise DomainError("no posterior draws")
    p_hat = curves.tox.mean(axis=0)
    overdose, safe = _safety_profile(curves, grid, cfg)

    def decision(index: int | None, action: str | None = None) -> DoseDecision:
        if index is None:
            act = TERMINATE
        elif action is not None:
            act = action
        elif index > state.current_dose_index:
            act = ESCALATE
        elif index < state.current_dose_index:
            act = DE_ESCALATE
        else:
            act = STAY
        return DoseDecision(action=act, dose_index=index,
                            posterior_mean_tox=tuple(p_hat),
                            overdose_probs=tuple(overdose),
                            safe=tuple(bool(s) for s in safe))

    safe_indices = [i + 1 for i in range(grid.size) if safe[i]]
    if not safe_indices:
        return decision(None)

    current = state.current_dose_index
    counts = state.data.dose_counts()
    dlt = counts["dlt"]
    n = counts["n"]
    max_tried = max((i + 1 for i in range(grid.size) if n[i] > 0),
                    default=current)

    def restrict(target: int) -> int:
        # prefer the highest safe dose at or below the target; failing that
        # the lowest safe dose that does not skip an untried level; safety
        # wins outright if even that is impossible
        at_or_below = [i for i in safe_indices if i <= target]
        if at_or_below:
            return max(at_or_below)
        no_skip = [i for i in safe_indices if i <= max_tried + 1]
        return min(no_skip) if no_skip else min(safe_indices)

    # Acceleration: a clean record at and below the current dose moves one up.
    if int(dlt[:current].sum()) == 0:
        return decision(restrict(min(current + 1, grid.size)))

    # Nearest-to-target among safe doses; ties to the lower (safer) index.
    best = min(safe_indices, key=lambda i: (abs(p_hat[i - 1] - cfg.target_tox_prob), i))
    if best > current + 1 and n[best - 2] == 0:
        return decision(restrict(current + 1))
    return decision(best)


def graduate(draws, grid: DoseGrid, cfg: Phase1Config) -> list[int]:
    """Safe doses whose posterior clears both graduation bars.

    Requires an efficacy-inclusive posterior; returns possibly-empty sorted
    1-based dose indices.
    """
    curves = _as_curves(draws, grid)
    if curves.tox.shape[0] == 0:
        raise DomainError("no posterior draws")
    _, safe = _safety_profile(curves, grid, cfg)
    result = []
    for i in range(1, grid.size + 1):
        if not safe[i - 1]:
            continue
        tox_ok = tail_prob(curves.tox, i, cfg.grad_tox_threshold, "<")
        eff_ok = tail_prob(curves.eff, i, cfg.grad_eff_threshold, ">")
        if tox_ok > cfg.grad_tox_confidence and eff_ok > cfg.grad_eff_confidence:
            result.append(i)
    return result


def phase1_arm_states(data: Phase1Data, dose_indices) -> dict[int, ArmState]:
    """Joint-outcome counts per dose from phase I records; patients whose
    efficacy is still pending are left out entirely."""
    arms = {i: ArmState(arm_id=i) for i in dose_indices}
    for rec in data.patients:
        idx = data.grid.index_of(rec.dose_amount)
        if idx not in arms or rec.efficacy is None:
            continue
        cell = {(1, 0): 0, (1, 1): 1, (0, 0): 2, (0, 1): 3}[(rec.efficacy, rec.dlt)]
        arms[idx].add(cell)
    return arms


def select_with_utility(graduates, data: Phase1Data, weights: UtilityWeights,
                        seed, bar_draws: int = 100_000) -> int | None:
    """Single most promising graduate by posterior probability of highest
    expected utility, computed from the phase I joint outcomes under a
    Beta(1, 1) prior.

    Near-ties (within Monte Carlo resolution, 3 / sqrt(draws)) resolve to
    the lower dose index.
    """
    graduates = sorted(graduates)
    if not graduates:
        return None
    if len(graduates) == 1:
        return graduates[0]
    arms = phase1_arm_states(data, graduates)
    params = []
    for idx in graduates:
        score = sum(w * y for w, y in zip(weights.as_tuple(), arms[idx].counts))
        params.append((1.0 + score, 1.0 + arms[idx].n - score))
    xi = bar_probabilities(params, bar_draws, seed)
    resolution = 3.0 / np.sqrt(bar_draws)
    best = float(xi.max())
    for idx, value in zip(graduates, xi):
        if best - value < resolution:
            return idx
    return graduates[int(np.argmax(xi))]
