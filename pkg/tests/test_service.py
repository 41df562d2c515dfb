"""Trial-conduct service: lifecycle, decision parity with the library,
event-log replay, and error codes."""

import pytest
from fastapi.testclient import TestClient

from doseopt.phase1 import EscalationState, Phase1Config, next_dose
from doseopt.pkpd import DoseGrid
from doseopt.posterior import (
    McmcSettings,
    PatientRecord,
    Phase1Data,
    PriorSpec,
    dose_curves,
    sample_posterior,
)
from doseopt.service.app import create_app
from doseopt.service.events import EventLog, decision_seed
from doseopt.service.state import replay

FAST = {"iterations": 400, "burnin": 200, "thin": 2}


@pytest.fixture()
def client(tmp_path):
    return TestClient(create_app(tmp_path / "data"))


def patient(dlt=0, efficacy=None, times=(1.0, 3.0, 5.0), base=0.5):
    return {
        "times": list(times),
        "log_concentrations": [base - 0.4 * t for t in times],
        "dlt": dlt,
        "efficacy": efficacy,
    }


def create_trial(client, trial_id="t1", **overrides):
    body = {
        "dose_amounts": [15, 30, 60, 90, 120],
        "phase1": {"target_tox_prob": 0.2, "max_n": 9},
        "phase2": {"cohort_size": 6, "max_n": 12, "bar_draws": 5000},
        "mcmc": FAST,
        "trial_id": trial_id,
    }
    body.update(overrides)
    resp = client.post("/trials", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()


class TestLifecycle:
    def test_create_assigns_first_cohort(self, client):
        created = create_trial(client)
        assert created["assignment"] == {"dose_index": 1, "n_patients": 3}
        snap = client.get("/trials/t1").json()
        assert snap["phase"] == "phase1"
        assert snap["assignment"] == {"dose_index": 1, "n_patients": 3}

    def test_zero_dlt_cohort_escalates(self, client):
        create_trial(client)
        resp = client.post("/trials/t1/phase1/cohorts",
                           json={"patients": [patient(), patient(), patient()]})
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["decision"]["action"] == "escalate"
        assert body["decision"]["dose_index"] == 2
        assert body["assignment"]["dose_index"] == 2
        assert body["n_enrolled"] == 3

    def test_custom_id_collision(self, client):
        create_trial(client)
        resp = client.post("/trials", json={
            "dose_amounts": [15, 30], "trial_id": "t1"})
        assert resp.status_code == 409

    def test_posterior_endpoint(self, client):
        create_trial(client)
        assert client.get("/trials/t1/posterior").status_code == 404
        client.post("/trials/t1/phase1/cohorts",
                    json={"patients": [patient(), patient(), patient()]})
        post = client.get("/trials/t1/posterior").json()
        assert len(post["tox"]["mean"]) == 5
        assert all(lo <= m <= hi for lo, m, hi in
                   zip(post["tox"]["lo"], post["tox"]["mean"], post["tox"]["hi"]))
        assert post["include_efficacy"] is False

    def test_list_trials(self, client):
        create_trial(client, "a1")
        create_trial(client, "a2")
        assert client.get("/trials").json()["trials"] == ["a1", "a2"]


class TestDecisionParity:
    def test_service_equals_library(self, client, tmp_path):
        create_trial(client)
        cohort = [patient(dlt=0), patient(dlt=1), patient(dlt=0)]
        resp = client.post("/trials/t1/phase1/cohorts",
                           json={"patients": cohort})
        body = resp.json()

        snap = client.get("/trials/t1").json()
        seed = snap["posterior"]["seed"]
        grid = DoseGrid((15, 30, 60, 90, 120))
        data = Phase1Data(grid)
        for p in cohort:
            data.add(PatientRecord(dose_amount=15.0, times=tuple(p["times"]),
                                   log_concentrations=tuple(p["log_concentrations"]),
                                   dlt=p["dlt"], efficacy=p["efficacy"]))
        draws = sample_posterior(data, PriorSpec(), McmcSettings(**FAST),
                                 include_efficacy=False, seed=seed)
        curves = dose_curves(draws, grid)
        cfg = Phase1Config(target_tox_prob=0.2, max_n=9)
        decision = next_dose(EscalationState(1, data), curves, grid, cfg)
        assert body["decision"]["action"] == decision.action
        assert body["decision"]["dose_index"] == decision.dose_index
        assert body["decision"]["posterior_mean_tox"] == pytest.approx(
            list(decision.posterior_mean_tox))

    def test_seed_derived_from_trial_and_sequence(self, client):
        create_trial(client)
        client.post("/trials/t1/phase1/cohorts",
                    json={"patients": [patient(), patient(), patient()]})
        snap = client.get("/trials/t1").json()
        # the posteriorComputed event is seq 4: created, cohortAssigned,
        # outcomesRecorded, posteriorComputed
        assert snap["posterior"]["seed"] == decision_seed("t1", 4)


class TestReplay:
    def test_replay_matches_live_state(self, client, tmp_path):
        create_trial(client)
        client.post("/trials/t1/phase1/cohorts",
                    json={"patients": [patient(), patient(), patient()]})
        client.post("/trials/t1/phase1/cohorts",
                    json={"patients": [patient(dlt=1), patient(), patient()]})
        live = client.get("/trials/t1").json()
        log = EventLog(tmp_path / "data")
        rebuilt = replay("t1", log.read("t1")).snapshot()
        assert rebuilt == live

    def test_restarted_app_reproduces_state(self, tmp_path):
        data_dir = tmp_path / "data"
        client1 = TestClient(create_app(data_dir))
        create_trial(client1)
        client1.post("/trials/t1/phase1/cohorts",
                     json={"patients": [patient(), patient(), patient()]})
        before = client1.get("/trials/t1").json()
        client2 = TestClient(create_app(data_dir))
        after = client2.get("/trials/t1").json()
        assert before == after

    def test_events_are_sequenced(self, client, tmp_path):
        create_trial(client)
        client.post("/trials/t1/phase1/cohorts",
                    json={"patients": [patient(), patient(), patient()]})
        events = EventLog(tmp_path / "data").read("t1")
        assert [e.seq for e in events] == list(range(1, len(events) + 1))
        kinds = [e.kind for e in events]
        assert kinds[:2] == ["created", "cohortAssigned"]
        assert "outcomesRecorded" in kinds
        assert "posteriorComputed" in kinds


class TestPhase2Flow:
    def run_phase1(self, client):
        # lenient graduation bars so the flow reliably reaches phase 2
        create_trial(client, phase1={
            "target_tox_prob": 0.3, "max_n": 6,
            "grad_tox_confidence": 0.05, "grad_eff_confidence": 0.05,
        })
        for _ in range(2):
            resp = client.post("/trials/t1/phase1/cohorts", json={
                "patients": [patient(efficacy=1), patient(efficacy=1),
                             patient(efficacy=0)]})
            assert resp.status_code == 200, resp.text
        done = client.post("/trials/t1/phase1/complete")
        assert done.status_code == 200, done.text
        return done.json()

    def test_full_conduct(self, client):
        done = self.run_phase1(client)
        assert done["graduates"], "graduation should fire with lenient bars"
        assert done["allocation"] is not None
        alloc = {int(k): v for k, v in done["allocation"].items()}
        assert sum(alloc.values()) == 6
        assert 0 in alloc  # control arm participates

        snap = client.get("/trials/t1").json()
        assert snap["phase"] == "phase2"

        outcomes = [{"arm_id": arm, "eff_no_tox": n} for arm, n in alloc.items()]
        resp = client.post("/trials/t1/phase2/outcomes",
                           json={"outcomes": outcomes})
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["xi"] is not None
        assert sum(body["xi"]) == pytest.approx(1.0, abs=1e-9)
        assert body["allocation"] is not None

        # second cohort reaches max_n = 12 and triggers the recommendation
        alloc2 = {int(k): v for k, v in body["allocation"].items()}
        outcomes2 = [{"arm_id": arm, "eff_no_tox": n} for arm, n in alloc2.items()]
        resp2 = client.post("/trials/t1/phase2/outcomes",
                            json={"outcomes": outcomes2})
        assert resp2.status_code == 200, resp2.text
        body2 = resp2.json()
        assert body2["phase"] == "done"
        assert body2["candidate"] is not None
        snap = client.get("/trials/t1").json()
        assert snap["phase"] == "done"
        assert snap["recommendation"] == body2["recommendation"]

    def test_allocation_mismatch_rejected(self, client):
        done = self.run_phase1(client)
        alloc = {int(k): v for k, v in done["allocation"].items()}
        bad = [{"arm_id": arm, "eff_no_tox": n + 1} for arm, n in alloc.items()]
        resp = client.post("/trials/t1/phase2/outcomes", json={"outcomes": bad})
        assert resp.status_code == 422
        assert "allocation" in resp.json()["detail"]

    def test_unknown_arm_rejected(self, client):
        done = self.run_phase1(client)
        alloc = {int(k): v for k, v in done["allocation"].items()}
        outcomes = [{"arm_id": arm, "eff_no_tox": n} for arm, n in alloc.items()]
        outcomes.append({"arm_id": 77, "eff_no_tox": 1})
        resp = client.post("/trials/t1/phase2/outcomes",
                           json={"outcomes": outcomes})
        assert resp.status_code == 422


class TestErrorCodes:
    def test_unknown_trial_404(self, client):
        assert client.get("/trials/nope").status_code == 404
        assert client.post("/trials/nope/phase1/cohorts",
                           json={"patients": [patient()]}).status_code == 404

    def test_phase2_before_graduation_409(self, client):
        create_trial(client)
        resp = client.post("/trials/t1/phase2/outcomes",
                           json={"outcomes": [{"arm_id": 0, "eff_no_tox": 1}]})
        assert resp.status_code == 409

    def test_complete_without_outcomes_409(self, client):
        create_trial(client)
        assert client.post("/trials/t1/phase1/complete").status_code == 409

    def test_double_complete_409(self, client):
        create_trial(client, phase2=None, phase1={
            "target_tox_prob": 0.2, "max_n": 6})
        client.post("/trials/t1/phase1/cohorts",
                    json={"patients": [patient(efficacy=0), patient(efficacy=0),
                                       patient(efficacy=0)]})
        first = client.post("/trials/t1/phase1/complete")
        assert first.status_code == 200
        assert client.post("/trials/t1/phase1/complete").status_code == 409

    def test_malformed_patient_422(self, client):
        create_trial(client)
        bad = {"patients": [{"times": [3, 1], "log_concentrations": [0.1, 0.2],
                             "dlt": 0}]}
        resp = client.post("/trials/t1/phase1/cohorts", json=bad)
        assert resp.status_code == 422

    def test_schema_violation_422(self, client):
        create_trial(client)
        resp = client.post("/trials/t1/phase1/cohorts",
                           json={"patients": [{"dlt": 7}]})
        assert resp.status_code == 422

    def test_cohort_after_phase1_closed_409(self, client):
        create_trial(client, phase1={"target_tox_prob": 0.2, "max_n": 3})
        resp = client.post("/trials/t1/phase1/cohorts",
                           json={"patients": [patient(), patient(), patient()]})
        assert resp.json()["phase"] == "phase1_full"
        again = client.post("/trials/t1/phase1/cohorts",
                            json={"patients": [patient()]})
        assert again.status_code == 409
