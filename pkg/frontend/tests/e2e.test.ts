// End-to-end conduct flow against a running service. Gated on SERVICE_URL;
// run via `npm run e2e`, which starts the service, points SERVICE_URL at it,
// and tears it down.

import { describe, expect, it } from "vitest";

import { TrialApi } from "../src/api";
import { buildTrialView, xiTotal } from "../src/viewmodel";

const base = process.env.SERVICE_URL;
const suite = base ? describe : describe.skip;

const FAST_MCMC = { iterations: 400, burnin: 200, thin: 2 };

function zeroDltPatient() {
  return {
    times: [1, 3, 5],
    log_concentrations: [0.5, -0.3, -1.1],
    dlt: 0,
    efficacy: null as number | null,
  };
}

suite("conduct flow", () => {
  it("shows the escalation decision and stays in lockstep with the service",
     async () => {
    const api = new TrialApi(base!);
    const { trial_id } = await api.createTrial({
      dose_amounts: [15, 30, 60, 90, 120],
      phase1: { target_tox_prob: 0.2, max_n: 9 },
      mcmc: FAST_MCMC,
    });

    await api.submitCohort(trial_id,
                           [zeroDltPatient(), zeroDltPatient(), zeroDltPatient()]);

    // what the console renders after the action...
    const consoleView = buildTrialView(await api.getTrial(trial_id));
    expect(consoleView.decisionText).toBe("Escalate to dose 2");
    expect(consoleView.assignment?.doseIndex).toBe(2);
    expect(consoleView.nEnrolled).toBe(3);

    // ...equals the view built from an independent state fetch
    const independent = buildTrialView(await api.getTrial(trial_id));
    expect(consoleView).toEqual(independent);
  });

  it("renders randomization probabilities that sum to 1.00", async () => {
    const api = new TrialApi(base!);
    const { trial_id } = await api.createTrial({
      dose_amounts: [15, 30, 60, 90, 120],
      phase1: {
        target_tox_prob: 0.3, max_n: 6,
        grad_tox_confidence: 0.05, grad_eff_confidence: 0.05,
      },
      phase2: { cohort_size: 6, max_n: 12, bar_draws: 5000 },
      mcmc: FAST_MCMC,
    });
    const eff = () => ({ ...zeroDltPatient(), efficacy: 1 });
    await api.submitCohort(trial_id, [eff(), eff(), eff()]);
    await api.submitCohort(trial_id, [eff(), eff(), eff()]);
    const done = await api.completePhase1(trial_id);
    expect(done.graduates.length).toBeGreaterThan(0);

    const allocation = done.allocation!;
    const outcomes = Object.entries(allocation).map(([armId, n]) => ({
      arm_id: Number(armId),
      eff_no_tox: n,
      eff_tox: 0,
      no_eff_no_tox: 0,
      no_eff_tox: 0,
    }));
    const resp = await api.submitPhase2(trial_id, outcomes);
    expect(resp.xi).not.toBeNull();

    const view = buildTrialView(await api.getTrial(trial_id));
    expect(view.xiTotal).toBe("1.00");
    expect(xiTotal(resp.xi!)).toBe("1.00");
    expect(view.xiBars!.length).toBe(Object.keys(allocation).length);
  });
});
