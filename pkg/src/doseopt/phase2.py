"""Randomized-comparison machinery: joint-outcome utilities, quasi-binomial
Beta posteriors, Bayesian adaptive randomization, and final arm selection.

Each phase II patient contributes one of four joint outcomes —
(efficacy, no toxicity), (efficacy, toxicity), (no efficacy, no toxicity),
(no efficacy, toxicity) — scored by elicited utility weights.  The total
utility score of an arm behaves as a fractional event count, giving each
arm a conjugate Beta posterior on its expected utility.  Randomization
probabilities are the posterior probabilities of each arm having the
highest expected utility, estimated by Monte Carlo.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

CELL_LABELS = ("eff_no_tox", "eff_tox", "no_eff_no_tox", "no_eff_tox")


@dataclass(frozen=True)
class UtilityWeights:
    """Utility of the four joint outcomes, best (efficacy without toxicity)
    pinned to 1 and worst (toxicity without efficacy) pinned to 0."""

    eff_no_tox: float = 1.0
    eff_tox: float = 0.6
    no_eff_no_tox: float = 0.4
    no_eff_tox: float = 0.0

    def __post_init__(self):
        s = self.as_tuple()
        if any(not 0.0 <= w <= 1.0 for w in s):
            raise ValueError(f"utility weights must lie in [0, 1], got {s}")
        if s[0] != 1.0 or s[3] != 0.0:
            raise ValueError("weights must satisfy eff_no_tox = 1 and no_eff_tox = 0")
        if s[1] > s[0] or s[3] > s[2]:
            raise ValueError("weights must satisfy eff_no_tox >= eff_tox and "
                             "no_eff_no_tox >= no_eff_tox")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.eff_no_tox, self.eff_tox, self.no_eff_no_tox, self.no_eff_tox)


@dataclass
class ArmState:
    """Joint-outcome counts for one arm.  arm_id 0 is the control arm;
    treatment arms carry their dose index."""

    arm_id: int
    eff_no_tox: int = 0
    eff_tox: int = 0
    no_eff_no_tox: int = 0
    no_eff_tox: int = 0

    def __post_init__(self):
        if min(self.counts) < 0:
            raise ValueError(f"outcome counts must be >= 0, got {self.counts}")

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (self.eff_no_tox, self.eff_tox, self.no_eff_no_tox, self.no_eff_tox)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def tox_count(self) -> int:
        return self.eff_tox + self.no_eff_tox

    @property
    def eff_count(self) -> int:
        return self.eff_no_tox + self.eff_tox

    def add(self, cell: int, count: int = 1) -> None:
        """Record `count` patients with joint-outcome cell 0..3."""
        name = CELL_LABELS[cell]
        setattr(self, name, getattr(self, name) + count)


@dataclass(frozen=True)
class Phase2Config:
    cohort_size: int = 10
    max_n: int = 150
    prior_alpha: float = 1.0
    prior_beta: float = 1.0
    tox_threshold: float = 0.2        # toxicity bar a selectable arm must beat
    eff_threshold: float = 0.2        # efficacy bar a selectable arm must beat
    select_tox_confidence: float = 0.7
    select_eff_confidence: float = 0.9
    include_phase1_data: bool = False
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    bar_draws: int = 100_000

    def __post_init__(self):
        if self.cohort_size < 0:
            raise ValueError("cohort_size must be >= 0")
        if self.max_n < self.cohort_size:
            raise ValueError("max_n must be >= cohort_size")
        if self.prior_alpha <= 0 or self.prior_beta <= 0:
            raise ValueError("Beta prior parameters must be > 0")
        for name in ("tox_threshold", "eff_threshold",
                     "select_tox_confidence", "select_eff_confidence"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.bar_draws < 1:
            raise ValueError("bar_draws must be >= 1")


def outcome_cell_probs(eff: float, tox: float) -> tuple[float, float, float, float]:
    """Joint-cell probabilities under independent efficacy and toxicity."""
    return (eff * (1 - tox), eff * tox, (1 - eff) * (1 - tox), (1 - eff) * tox)


def expected_utility(cell_probs, weights: UtilityWeights) -> float:
    """Expected utility sum(s_i * p_i) of an arm with the given joint-cell
    probabilities."""
    probs = tuple(float(p) for p in cell_probs)
    if len(probs) != 4 or min(probs) < 0:
        raise ValueError(f"need 4 nonnegative cell probabilities, got {probs}")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError(f"cell probabilities must sum to 1, got {sum(probs)!r}")
    return sum(w * p for w, p in zip(weights.as_tuple(), probs))


def quasi_score(arm: ArmState, weights: UtilityWeights) -> tuple[float, int]:
    """Total utility score S = sum(s_i * y_i) and patient count of an arm.

    S acts as a fractional event count among n patients, so 0 <= S <= n.
    """
    score = sum(w * y for w, y in zip(weights.as_tuple(), arm.counts))
    return score, arm.n


def utility_posterior(arm: ArmState, cfg: Phase2Config,
                      phase1_arm: ArmState | None = None) -> tuple[float, float]:
    """Beta posterior (a, b) of the arm's expected utility under the
    quasi-binomial likelihood, optionally pooling the dose's earlier
    outcomes."""
    score, n = quasi_score(arm, cfg.weights)
    if phase1_arm is not None:
        s1, n1 = quasi_score(phase1_arm, cfg.weights)
        score += s1
        n += n1
    return cfg.prior_alpha + score, cfg.prior_beta + n - score


def bar_probabilities(beta_params, draws: int, seed) -> np.ndarray:
    """Monte Carlo estimate of each arm's probability of having the highest
    expected utility.

    Samples every arm's Beta posterior `draws` times and counts the rounds
    each arm is the strict maximum; exact ties within a round (measure zero
    for continuous posteriors) are split uniformly at random.  The result is
    a probability vector summing to 1, deterministic given the seed.
    """
    params = [(float(a), float(b)) for a, b in beta_params]
    if len(params) < 2:
        raise ValueError("adaptive randomization needs at least two arms")
    rng = np.random.default_rng(seed)
    samples = np.column_stack([rng.beta(a, b, size=draws) for a, b in params])
    row_max = samples.max(axis=1)
    is_max = samples == row_max[:, None]
    n_ties = is_max.sum(axis=1)
    winners = np.argmax(is_max, axis=1)
    tied_rows = np.flatnonzero(n_ties > 1)
    for row in tied_rows:
        choices = np.flatnonzero(is_max[row])
        winners[row] = choices[rng.integers(len(choices))]
    counts = np.bincount(winners, minlength=len(params))
    return counts / float(draws)


def randomize_cohort(xi, cohort_size: int, seed) -> np.ndarray:
    """Allocate a cohort by independent categorical draws with arm
    probabilities xi; returns per-arm patient counts."""
    xi = np.asarray(xi, dtype=float)
    if abs(xi.sum() - 1.0) > 1e-9:
        raise ValueError(f"randomization probabilities must sum to 1, got {xi.sum()!r}")
    if cohort_size == 0:
        return np.zeros(len(xi), dtype=int)
    rng = np.random.default_rng(seed)
    assignments = rng.choice(len(xi), size=cohort_size, p=xi)
    return np.bincount(assignments, minlength=len(xi))


def equal_allocation(n_arms: int, cohort_size: int) -> np.ndarray:
    """Run-in allocation: split the first cohort equally, remainders to the
    lowest arm ids."""
    base, extra = divmod(cohort_size, n_arms)
    counts = np.full(n_arms, base, dtype=int)
    counts[:extra] += 1
    return counts


def _beta_tail_below(x: float, a: float, b: float) -> float:
    """Pr(p < x) for p ~ Beta(a, b) via the regularized incomplete beta."""
    return float(betainc(a, b, x))


def candidate_set(arms, cfg: Phase2Config) -> list[int]:
    """Treatment arms whose toxicity and efficacy rates clear the selection
    bars with the required posterior confidence.

    Toxicity and efficacy are given independent Beta(1, 1) priors with
    binomial counts from the arm's joint outcomes; the control arm never
    enters the set.
    """
    selected = []
    for arm in arms:
        if arm.arm_id == 0:
            continue
        n = arm.n
        p_tox_ok = _beta_tail_below(cfg.tox_threshold,
                                    1.0 + arm.tox_count, 1.0 + n - arm.tox_count)
        p_eff_ok = 1.0 - _beta_tail_below(cfg.eff_threshold,
                                          1.0 + arm.eff_count, 1.0 + n - arm.eff_count)
        if p_tox_ok > cfg.select_tox_confidence and p_eff_ok > cfg.select_eff_confidence:
            selected.append(arm.arm_id)
    return selected


def select_arm(arms, cfg: Phase2Config, seed,
               phase1_arms: dict[int, ArmState] | None = None) -> int | None:
    """Final recommendation at the end of the randomized comparison.

    Among the arms meeting the selection criteria, the one most likely to
    have the highest expected utility wins; no arm is recommended when the
    set is empty or the control arm is the overall utility favourite.
    """
    eligible = candidate_set(arms, cfg)
    if not eligible:
        return None
    pooled = phase1_arms if cfg.include_phase1_data and phase1_arms else {}
    params = [utility_posterior(arm, cfg, pooled.get(arm.arm_id)) for arm in arms]
    xi = bar_probabilities(params, cfg.bar_draws, seed)
    by_id = {arm.arm_id: i for i, arm in enumerate(arms)}
    best = max(eligible, key=lambda arm_id: (xi[by_id[arm_id]], -arm_id))
    control_pos = by_id.get(0)
    if control_pos is not None and xi[control_pos] >= xi[by_id[best]]:
        return None
    return best
