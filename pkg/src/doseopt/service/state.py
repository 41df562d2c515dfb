"""Trial state reconstruction by event replay.

apply() is a pure transition function; the service records every decision
inside the events, so replay involves no model refits and is bit-exact.
"""

from dataclasses import dataclass, field

from .events import TrialEvent

PHASE1 = "phase1"
PHASE1_FULL = "phase1_full"          # enrollment cap reached, awaiting completion
PHASE2 = "phase2"
DONE = "done"
TERMINATED = "terminated"


@dataclass
class TrialState:
    trial_id: str
    config: dict = field(default_factory=dict)
    phase: str = PHASE1
    seq: int = 0
    patients: list[dict] = field(default_factory=list)
    assignment: dict | None = None          # pending phase 1 cohort
    decision: dict | None = None            # latest escalation decision
    posterior: dict | None = None           # latest posterior summary
    graduates: list[int] | None = None
    selected_with_utility: int | None = None
    arms: dict[int, dict] = field(default_factory=dict)
    allocation: dict[int, int] | None = None   # pending phase 2 cohort
    xi: list[float] | None = None
    phase2_enrolled: int = 0
    candidate: list[int] | None = None
    recommendation: int | None = None
    termination_reason: str | None = None

    @property
    def n_enrolled(self) -> int:
        return len(self.patients)

    def dose_counts(self) -> list[dict]:
        amounts = self.config.get("dose_amounts", [])
        rows = [{"dose_index": i + 1, "dose_amount": a,
                 "n": 0, "dlt": 0, "eff_known": 0, "eff": 0}
                for i, a in enumerate(amounts)]
        for pat in self.patients:
            row = rows[pat["dose_index"] - 1]
            row["n"] += 1
            row["dlt"] += pat["dlt"]
            if pat.get("efficacy") is not None:
                row["eff_known"] += 1
                row["eff"] += pat["efficacy"]
        return rows

    def apply(self, event: TrialEvent) -> None:
        if event.seq != self.seq + 1:
            raise ValueError(f"event {event.seq} applied after seq {self.seq}")
        self.seq = event.seq
        payload = event.payload
        kind = event.kind

        if kind == "created":
            self.config = payload["config"]
        elif kind == "cohortAssigned":
            self.assignment = {"dose_index": payload["dose_index"],
                               "n_patients": payload["n_patients"]}
            if "action" in payload:
                self.decision = {"action": payload["action"],
                                 "dose_index": payload["dose_index"]}
        elif kind == "outcomesRecorded":
            if payload.get("phase") == 2:
                for rec in payload["arms"]:
                    arm = self.arms[rec["arm_id"]]
                    for cell in ("eff_no_tox", "eff_tox",
                                 "no_eff_no_tox", "no_eff_tox"):
                        arm[cell] += rec[cell]
                    self.phase2_enrolled += (rec["eff_no_tox"] + rec["eff_tox"]
                                             + rec["no_eff_no_tox"]
                                             + rec["no_eff_tox"])
                self.allocation = None
            else:
                self.patients.extend(payload["patients"])
                self.assignment = None
                max_n = self.config.get("phase1", {}).get("max_n", 30)
                if len(self.patients) >= max_n:
                    self.phase = PHASE1_FULL
        elif kind == "posteriorComputed":
            self.posterior = payload
            if "decision" in payload:
                self.decision = payload["decision"]
        elif kind == "graduated":
            self.graduates = list(payload["graduates"])
            self.selected_with_utility = payload["selected_with_utility"]
            if self.graduates and payload.get("phase2_opens", False):
                self.phase = PHASE2
                self.arms = {0: _empty_arm(0)}
                for idx in self.graduates:
                    self.arms[idx] = _empty_arm(idx)
            else:
                self.phase = DONE
        elif kind == "randomized":
            self.allocation = {int(k): v for k, v in payload["allocation"].items()}
            self.xi = payload.get("xi")
        elif kind == "recommended":
            self.candidate = list(payload["candidate"])
            self.recommendation = payload["recommendation"]
            self.xi = payload.get("xi", self.xi)
            self.phase = DONE
        elif kind == "terminated":
            self.phase = TERMINATED
            self.termination_reason = payload.get("reason")
            self.assignment = None
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def snapshot(self) -> dict:
        """JSON view of the full trial state."""
        return {
            "trial_id": self.trial_id,
            "phase": self.phase,
            "seq": self.seq,
            "config": self.config,
            "n_enrolled": self.n_enrolled,
            "dose_counts": self.dose_counts(),
            "assignment": self.assignment,
            "decision": self.decision,
            "posterior": self.posterior,
            "graduates": self.graduates,
            "selected_with_utility": self.selected_with_utility,
            "arms": [dict(arm) for _, arm in sorted(self.arms.items())],
            "allocation": ({str(k): v for k, v in self.allocation.items()}
                           if self.allocation is not None else None),
            "xi": self.xi,
            "phase2_enrolled": self.phase2_enrolled,
            "candidate": self.candidate,
            "recommendation": self.recommendation,
            "termination_reason": self.termination_reason,
        }


def _empty_arm(arm_id: int) -> dict:
    return {"arm_id": arm_id, "eff_no_tox": 0, "eff_tox": 0,
            "no_eff_no_tox": 0, "no_eff_tox": 0}


def replay(trial_id: str, events) -> TrialState:
    state = TrialState(trial_id=trial_id)
    for event in events:
        state.apply(event)
    return state
