"""FastAPI trial-conduct service.

Wraps the decision library behind an event-sourced HTTP API: every mutation
appends events and returns the library's decision for the submitted data.
Stochastic steps (posterior fits, randomization) derive their seeds from
(trial id, event sequence), so every decision is reproducible from the log.

Concurrent mutations on one trial serialize behind a per-trial lock;
different trials proceed independently.
"""

import threading
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from ..phase1 import (
    EscalationState,
    Phase1Config,
    TERMINATE,
    graduate,
    next_dose,
    select_with_utility,
)
from ..phase2 import (
    ArmState,
    Phase2Config,
    UtilityWeights,
    bar_probabilities,
    candidate_set,
    equal_allocation,
    randomize_cohort,
    select_arm,
    utility_posterior,
)
from ..pkpd import DomainError, DoseGrid
from ..posterior import (
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
from .events import EventLog, decision_seed, make_event, valid_trial_id
from .schemas import (
    AssignmentOut,
    CohortOutcomes,
    CohortResponse,
    CompletionResponse,
    DecisionOut,
    Phase2Outcomes,
    Phase2Response,
    TrialCreate,
    TrialCreated,
)
from .state import PHASE1, PHASE1_FULL, PHASE2, TrialState, replay


class TrialRegistry:
    """In-memory states plus per-trial mutation locks over the event log."""

    def __init__(self, data_dir):
        self.log = EventLog(data_dir)
        self.states: dict[str, TrialState] = {}
        self.locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        for trial_id in self.log.trial_ids():
            self.states[trial_id] = replay(trial_id, self.log.read(trial_id))
            self.locks[trial_id] = threading.Lock()

    def create(self, trial_id: str) -> threading.Lock:
        with self._registry_lock:
            if trial_id in self.states or self.log.exists(trial_id):
                raise HTTPException(409, f"trial {trial_id!r} already exists")
            self.states[trial_id] = TrialState(trial_id=trial_id)
            self.locks[trial_id] = threading.Lock()
            return self.locks[trial_id]

    def get(self, trial_id: str) -> TrialState:
        state = self.states.get(trial_id)
        if state is None:
            raise HTTPException(404, f"unknown trial {trial_id!r}")
        return state

    def lock(self, trial_id: str) -> threading.Lock:
        self.get(trial_id)
        return self.locks[trial_id]

    def record(self, state: TrialState, kind: str, payload: dict) -> int:
        event = make_event(state.trial_id, state.seq + 1, kind, payload)
        self.log.append(event)
        state.apply(event)
        return event.seq


def _design_from_config(config: dict):
    phase1 = Phase1Config(**config["phase1"])
    phase2 = Phase2Config(**config["phase2"], weights=UtilityWeights(**config["utility"])) \
        if config.get("phase2") else None
    mcmc = McmcSettings(**config["mcmc"])
    weights = UtilityWeights(**config["utility"])
    grid = DoseGrid(tuple(config["dose_amounts"]))
    return grid, phase1, phase2, mcmc, weights, config.get("model", "pk")


def _phase1_data(state: TrialState, grid: DoseGrid) -> Phase1Data:
    data = Phase1Data(grid)
    for pat in state.patients:
        data.add(PatientRecord(
            dose_amount=grid.amount(pat["dose_index"]),
            times=tuple(pat["times"]),
            log_concentrations=tuple(pat["log_concentrations"]),
            dlt=pat["dlt"],
            efficacy=pat.get("efficacy"),
        ))
    return data


def _fit_curves(state: TrialState, grid: DoseGrid, mcmc: McmcSettings,
                model: str, include_efficacy: bool, seed: int):
    data = _phase1_data(state, grid)
    if model == "dose_only":
        draws = sample_comparator_posterior(data, ComparatorPriorSpec(), mcmc,
                                            include_efficacy=include_efficacy,
                                            seed=seed)
        return data, comparator_dose_curves(draws, grid)
    draws = sample_posterior(data, PriorSpec(), mcmc,
                             include_efficacy=include_efficacy, seed=seed)
    return data, dose_curves(draws, grid)


def _posterior_summary(curves, grid: DoseGrid, cfg: Phase1Config,
                       include_efficacy: bool, seed: int) -> dict:
    tox, eff = curves.tox, curves.eff
    overdose = (tox > cfg.overdose_threshold).mean(axis=0)
    return {
        "seed": seed,
        "include_efficacy": include_efficacy,
        "dose_amounts": list(grid.amounts),
        "tox": {
            "mean": [float(x) for x in tox.mean(axis=0)],
            "lo": [float(x) for x in np.percentile(tox, 2.5, axis=0)],
            "hi": [float(x) for x in np.percentile(tox, 97.5, axis=0)],
        },
        "eff": {
            "mean": [float(x) for x in eff.mean(axis=0)],
            "lo": [float(x) for x in np.percentile(eff, 2.5, axis=0)],
            "hi": [float(x) for x in np.percentile(eff, 97.5, axis=0)],
        },
        "overdose_probs": [float(x) for x in overdose],
        "safe": [bool(x) for x in overdose < cfg.safety_cutoff],
    }


def create_app(data_dir) -> FastAPI:
    app = FastAPI(title="Dose-Optimization Trial Service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    registry = TrialRegistry(data_dir)

    @app.post("/trials", response_model=TrialCreated, status_code=201)
    def create_trial(req: TrialCreate):
        trial_id = req.trial_id or uuid.uuid4().hex[:12]
        if not valid_trial_id(trial_id):
            raise HTTPException(422, "trial_id must match [A-Za-z0-9_-]{1,64}")
        try:
            grid = DoseGrid(tuple(req.dose_amounts))
            config = {
                "dose_amounts": list(grid.amounts),
                "phase1": req.phase1.model_dump(),
                "phase2": req.phase2.model_dump() if req.phase2 else None,
                "mcmc": req.mcmc.model_dump(),
                "utility": req.utility.model_dump(),
                "model": req.model,
            }
            Phase1Config(**config["phase1"])
            if config["phase2"]:
                Phase2Config(**config["phase2"],
                             weights=UtilityWeights(**config["utility"]))
            McmcSettings(**config["mcmc"])
        except (DomainError, ValueError) as exc:
            raise HTTPException(422, str(exc))
        lock = registry.create(trial_id)
        with lock:
            state = registry.get(trial_id)
            registry.record(state, "created", {"config": config})
            start = config["phase1"]["start_dose_index"]
            if start > grid.size:
                raise HTTPException(422, f"start_dose_index {start} outside grid")
            registry.record(state, "cohortAssigned", {
                "dose_index": start,
                "n_patients": config["phase1"]["cohort_size"],
                "action": "start",
            })
        return TrialCreated(
            trial_id=trial_id,
            assignment=AssignmentOut(dose_index=start,
                                     n_patients=config["phase1"]["cohort_size"]),
        )

    @app.post("/trials/{trial_id}/phase1/cohorts", response_model=CohortResponse)
    def submit_cohort(trial_id: str, req: CohortOutcomes):
        with registry.lock(trial_id):
            state = registry.get(trial_id)
            if state.phase != PHASE1:
                raise HTTPException(
                    409, f"trial is in phase {state.phase!r}; phase 1 cohort "
                         "submissions are closed")
            if state.assignment is None:
                raise HTTPException(409, "no cohort assignment is pending")
            grid, p1cfg, _, mcmc, _, model = _design_from_config(state.config)
            assigned = state.assignment["dose_index"]
            patients = []
            for pat in req.patients:
                idx = pat.dose_index or assigned
                if not 1 <= idx <= grid.size:
                    raise HTTPException(422, f"dose_index {idx} outside grid")
                try:
                    PatientRecord(dose_amount=grid.amount(idx),
                                  times=tuple(pat.times),
                                  log_concentrations=tuple(pat.log_concentrations),
                                  dlt=pat.dlt, efficacy=pat.efficacy)
                except DomainError as exc:
                    raise HTTPException(422, str(exc))
                patients.append({
                    "dose_index": idx, "times": list(pat.times),
                    "log_concentrations": list(pat.log_concentrations),
                    "dlt": pat.dlt, "efficacy": pat.efficacy,
                })
            registry.record(state, "outcomesRecorded",
                            {"phase": 1, "patients": patients})

            seed = decision_seed(trial_id, state.seq + 1)
            data, curves = _fit_curves(state, grid, mcmc, model, False, seed)
            esc = EscalationState(current_dose_index=assigned, data=data)
            decision = next_dose(esc, curves, grid, p1cfg)
            summary = _posterior_summary(curves, grid, p1cfg, False, seed)
            summary["decision"] = {"action": decision.action,
                                   "dose_index": decision.dose_index}
            registry.record(state, "posteriorComputed", summary)

            if decision.action == TERMINATE:
                registry.record(state, "terminated", {"reason": "no safe dose"})
                assignment = None
            elif state.phase == PHASE1_FULL:
                assignment = None
            else:
                registry.record(state, "cohortAssigned", {
                    "dose_index": decision.dose_index,
                    "n_patients": min(p1cfg.cohort_size,
                                      p1cfg.max_n - state.n_enrolled),
                    "action": decision.action,
                })
                assignment = AssignmentOut(**state.assignment)

            return CohortResponse(
                trial_id=trial_id,
                n_enrolled=state.n_enrolled,
                decision=DecisionOut(
                    action=decision.action,
                    dose_index=decision.dose_index,
                    posterior_mean_tox=list(decision.posterior_mean_tox),
                    overdose_probs=list(decision.overdose_probs),
                    safe=list(decision.safe),
                ),
                assignment=assignment,
                phase=state.phase,
            )

    @app.post("/trials/{trial_id}/phase1/complete",
              response_model=CompletionResponse)
    def complete_phase1(trial_id: str):
        with registry.lock(trial_id):
            state = registry.get(trial_id)
            if state.phase not in (PHASE1, PHASE1_FULL):
                raise HTTPException(
                    409, f"phase 1 cannot complete from phase {state.phase!r}")
            if state.n_enrolled == 0:
                raise HTTPException(409, "no phase 1 outcomes recorded yet")
            grid, p1cfg, p2cfg, mcmc, weights, model = \
                _design_from_config(state.config)

            seed = decision_seed(trial_id, state.seq + 1)
            data, curves = _fit_curves(state, grid, mcmc, model, True, seed)
            summary = _posterior_summary(curves, grid, p1cfg, True, seed)
            registry.record(state, "posteriorComputed", summary)

            graduates = graduate(curves, grid, p1cfg)
            sel_seed = decision_seed(trial_id, state.seq + 1)
            selected = select_with_utility(graduates, data, weights, sel_seed)
            opens = bool(graduates) and p2cfg is not None
            registry.record(state, "graduated", {
                "graduates": graduates,
                "selected_with_utility": selected,
                "phase2_opens": opens,
                "seed": sel_seed,
            })
            allocation = None
            if opens:
                arm_ids = [0] + graduates
                counts = equal_allocation(len(arm_ids),
                                          min(p2cfg.cohort_size, p2cfg.max_n))
                allocation = {arm_id: int(c) for arm_id, c in zip(arm_ids, counts)}
                registry.record(state, "randomized", {
                    "xi": None,
                    "allocation": {str(k): v for k, v in allocation.items()},
                })
            return CompletionResponse(
                trial_id=trial_id,
                graduates=graduates,
                selected_with_utility=selected,
                phase=state.phase,
                allocation=allocation,
            )

    @app.post("/trials/{trial_id}/phase2/outcomes", response_model=Phase2Response)
    def submit_phase2(trial_id: str, req: Phase2Outcomes):
        with registry.lock(trial_id):
            state = registry.get(trial_id)
            if state.phase != PHASE2:
                raise HTTPException(
                    409, f"phase 2 outcomes rejected in phase {state.phase!r}")
            if state.allocation is None:
                raise HTTPException(409, "no phase 2 cohort allocation is pending")
            grid, _, p2cfg, _, _, _ = _design_from_config(state.config)
            submitted = {}
            for rec in req.outcomes:
                if rec.arm_id not in state.arms:
                    raise HTTPException(422, f"unknown arm_id {rec.arm_id}")
                if rec.arm_id in submitted:
                    raise HTTPException(422, f"duplicate arm_id {rec.arm_id}")
                submitted[rec.arm_id] = (rec.eff_no_tox + rec.eff_tox
                                         + rec.no_eff_no_tox + rec.no_eff_tox)
            for arm_id, expected in state.allocation.items():
                got = submitted.get(arm_id, 0)
                if got != expected:
                    raise HTTPException(
                        422, f"arm {arm_id}: allocation called for {expected} "
                             f"patients, outcomes cover {got}")
            extra = set(submitted) - set(state.allocation)
            if any(submitted[a] > 0 for a in extra):
                raise HTTPException(
                    422, f"outcomes submitted for unallocated arm(s) {sorted(extra)}")

            registry.record(state, "outcomesRecorded", {
                "phase": 2,
                "arms": [rec.model_dump() for rec in req.outcomes],
            })

            arms = [ArmState(**state.arms[k]) for k in sorted(state.arms)]
            if state.phase2_enrolled >= p2cfg.max_n:
                seed = decision_seed(trial_id, state.seq + 1)
                chosen = candidate_set(arms, p2cfg)
                recommendation = select_arm(arms, p2cfg, seed)
                params = [utility_posterior(arm, p2cfg) for arm in arms]
                xi = bar_probabilities(params, p2cfg.bar_draws, seed)
                registry.record(state, "recommended", {
                    "candidate": chosen,
                    "recommendation": recommendation,
                    "xi": [float(x) for x in xi],
                    "seed": seed,
                })
                return Phase2Response(
                    trial_id=trial_id, phase=state.phase,
                    phase2_enrolled=state.phase2_enrolled,
                    xi=state.xi, allocation=None,
                    candidate=chosen, recommendation=recommendation,
                )
            seed = decision_seed(trial_id, state.seq + 1)
            params = [utility_posterior(arm, p2cfg) for arm in arms]
            xi = bar_probabilities(params, p2cfg.bar_draws, seed)
            cohort = min(p2cfg.cohort_size, p2cfg.max_n - state.phase2_enrolled)
            counts = randomize_cohort(
                xi, cohort, decision_seed(trial_id, state.seq + 1, "alloc"))
            allocation = {arm_id: int(c)
                          for arm_id, c in zip(sorted(state.arms), counts)}
            registry.record(state, "randomized", {
                "xi": [float(x) for x in xi],
                "allocation": {str(k): v for k, v in allocation.items()},
                "seed": seed,
            })
            return Phase2Response(
                trial_id=trial_id, phase=state.phase,
                phase2_enrolled=state.phase2_enrolled,
                xi=[float(x) for x in xi], allocation=allocation,
            )

    @app.get("/trials")
    def list_trials():
        return {"trials": registry.log.trial_ids()}

    @app.get("/trials/{trial_id}")
    def get_trial(trial_id: str):
        return registry.get(trial_id).snapshot()

    @app.get("/trials/{trial_id}/posterior")
    def get_posterior(trial_id: str):
        state = registry.get(trial_id)
        if state.posterior is None:
            raise HTTPException(404, "no posterior computed yet")
        return state.posterior

    return app
