"""Append-only trial event log, one newline-delimited JSON file per trial.

Every mutation appends TrialEvents; trial state is a pure function of the
event sequence, so a log replay reconstructs state exactly.
"""

import datetime
import hashlib
import json
import re
from pathlib import Path

from pydantic import BaseModel, Field

EVENT_KINDS = ("created", "cohortAssigned", "outcomesRecorded",
               "posteriorComputed", "graduated", "randomized",
               "recommended", "terminated")

_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


class TrialEvent(BaseModel):
    trial_id: str
    seq: int = Field(ge=1)
    timestamp: str
    kind: str
    payload: dict = Field(default_factory=dict)


def valid_trial_id(trial_id: str) -> bool:
    return bool(_ID_RE.match(trial_id))


def decision_seed(trial_id: str, seq: int, label: str = "") -> int:
    """Reproducible seed for any stochastic decision, derived from the trial
    id and the sequence number of the event recording it; the label keeps
    distinct random streams within one event apart."""
    digest = hashlib.sha256(f"{trial_id}:{seq}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63 - 1)


class EventLog:
    """File-backed event store; the caller serializes writers per trial."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, trial_id: str) -> Path:
        return self.data_dir / f"{trial_id}.ndjson"

    def exists(self, trial_id: str) -> bool:
        return self._path(trial_id).exists()

    def trial_ids(self) -> list[str]:
        return sorted(p.stem for p in self.data_dir.glob("*.ndjson"))

    def append(self, event: TrialEvent) -> None:
        with self._path(event.trial_id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event.model_dump(), sort_keys=True) + "\n")

    def read(self, trial_id: str) -> list[TrialEvent]:
        path = self._path(trial_id)
        if not path.exists():
            return []
        events = []
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(TrialEvent.model_validate(json.loads(line)))
        return events


def make_event(trial_id: str, seq: int, kind: str, payload: dict) -> TrialEvent:
    if kind not in EVENT_KINDS:
        raise ValueError(f"unknown event kind {kind!r}")
    return TrialEvent(
        trial_id=trial_id,
        seq=seq,
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        kind=kind,
        payload=payload,
    )
