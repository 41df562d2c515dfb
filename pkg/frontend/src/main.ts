// Wiring: trial selection, cohort entry, phase II outcome entry, and a 2s
// poll that keeps the rendered view in lockstep with the service state.

import { ApiError, TrialApi } from "./api";
import {
  el,
  renderDecisionPanel,
  renderGraduation,
  renderPhase2Panel,
  renderPosteriorChart,
} from "./render";
import { PatientFormValues, validateCohort } from "./validate";
import { TrialSnapshot } from "./types";
import { buildTrialView } from "./viewmodel";

const POLL_MS = 2000;

const api = new TrialApi("");
let currentTrial: string | null = null;
let lastSeq = -1;
let pollTimer: number | undefined;

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function flash(message: string, isError = true): void {
  const box = $("messages");
  box.textContent = message;
  box.className = isError ? "messages error" : "messages";
  if (message) setTimeout(() => { box.textContent = ""; }, 6000);
}

async function refreshTrialList(): Promise<void> {
  const { trials } = await api.listTrials();
  const list = $("trial-list");
  list.replaceChildren();
  for (const id of trials) {
    const link = el("a", { href: "#", class: "trial-link" }, [id]);
    link.addEventListener("click", (ev) => {
      ev.preventDefault();
      void selectTrial(id);
    });
    list.append(el("li", {}, [link]));
  }
}

async function selectTrial(id: string): Promise<void> {
  currentTrial = id;
  lastSeq = -1;
  $("trial-title").textContent = id;
  await refreshTrialView(true);
  if (pollTimer !== undefined) window.clearInterval(pollTimer);
  pollTimer = window.setInterval(() => void refreshTrialView(false), POLL_MS);
}

function cohortFormRows(): PatientFormValues[] {
  return Array.from(document.querySelectorAll<HTMLElement>(".patient-row"))
    .map((row) => ({
      times: (row.querySelector<HTMLInputElement>(".f-times")!).value,
      concentrations: (row.querySelector<HTMLInputElement>(".f-concs")!).value,
      dlt: (row.querySelector<HTMLSelectElement>(".f-dlt")!).value,
      efficacy: (row.querySelector<HTMLSelectElement>(".f-eff")!).value,
    }));
}

function addPatientRow(container: HTMLElement): void {
  const row = el("div", { class: "patient-row" });
  row.append(
    el("input", { class: "f-times", placeholder: "times, e.g. 1,3,5,7,12,24" }),
    el("span", { class: "err err-times" }),
    el("input", { class: "f-concs", placeholder: "log concentrations" }),
    el("span", { class: "err err-concentrations" }),
  );
  const dlt = el("select", { class: "f-dlt" }) as HTMLSelectElement;
  dlt.append(new Option("DLT: no", "0"), new Option("DLT: yes", "1"));
  const eff = el("select", { class: "f-eff" }) as HTMLSelectElement;
  eff.append(new Option("efficacy: pending", ""),
             new Option("efficacy: no", "0"),
             new Option("efficacy: yes", "1"));
  const remove = el("button", { type: "button" }, ["remove"]);
  remove.addEventListener("click", () => row.remove());
  row.append(dlt, eff, remove);
  container.append(row);
}

function syncCohortForm(snapshot: TrialSnapshot): void {
  const section = $("cohort-entry");
  const rows = $("patient-rows");
  if (snapshot.phase !== "phase1" || !snapshot.assignment) {
    section.classList.add("hidden");
    return;
  }
  section.classList.remove("hidden");
  $("cohort-hint").textContent =
    `Enter outcomes for ${snapshot.assignment.n_patients} patients at dose ` +
    `${snapshot.assignment.dose_index}`;
  const want = snapshot.assignment.n_patients;
  while (rows.children.length < want) addPatientRow(rows);
}

function showFieldErrors(errors: Record<string, string>[]): void {
  document.querySelectorAll<HTMLElement>(".patient-row").forEach((row, i) => {
    for (const field of ["times", "concentrations", "dlt", "efficacy"]) {
      const slot = row.querySelector<HTMLElement>(`.err-${field}`);
      if (slot) slot.textContent = errors[i]?.[field] ?? "";
    }
  });
}

async function submitCohort(): Promise<void> {
  if (!currentTrial) return;
  const { patients, errors } = validateCohort(cohortFormRows());
  showFieldErrors(errors);
  if (!patients) {
    flash("fix the highlighted fields before submitting");
    return;
  }
  try {
    const resp = await api.submitCohort(currentTrial, patients);
    flash(`recorded ${patients.length} patients; ` +
          `decision: ${resp.decision.action}`, false);
    $("patient-rows").replaceChildren();
    await refreshTrialView(true);
  } catch (err) {
    if (err instanceof ApiError) flash(`submission rejected (${err.message})`);
    else throw err;
  }
}

async function completePhase1(): Promise<void> {
  if (!currentTrial) return;
  try {
    const resp = await api.completePhase1(currentTrial);
    flash(`graduation: [${resp.graduates.join(", ")}]`, false);
    await refreshTrialView(true);
  } catch (err) {
    if (err instanceof ApiError) flash(err.message);
    else throw err;
  }
}

function phase2FormRows(snapshot: TrialSnapshot): HTMLElement {
  const form = el("div", { id: "phase2-rows" });
  const alloc = snapshot.allocation ?? {};
  for (const [armId, n] of Object.entries(alloc).sort(
      (a, b) => Number(a[0]) - Number(b[0]))) {
    const row = el("div", { class: "arm-row", "data-arm": armId });
    row.append(el("span", {}, [
      `${armId === "0" ? "control" : "dose " + armId} (${n} patients): `]));
    for (const cell of ["eff_no_tox", "eff_tox", "no_eff_no_tox", "no_eff_tox"]) {
      row.append(el("label", {}, [
        cell.replace(/_/g, " ") + " ",
        el("input", { class: `c-${cell}`, type: "number", min: "0", value: "0" }),
      ]));
    }
    form.append(row);
  }
  return form;
}

async function submitPhase2(): Promise<void> {
  if (!currentTrial) return;
  const outcomes = Array.from(
    document.querySelectorAll<HTMLElement>("#phase2-rows .arm-row")).map((row) => ({
      arm_id: Number(row.dataset.arm),
      eff_no_tox: Number(row.querySelector<HTMLInputElement>(".c-eff_no_tox")!.value),
      eff_tox: Number(row.querySelector<HTMLInputElement>(".c-eff_tox")!.value),
      no_eff_no_tox: Number(
        row.querySelector<HTMLInputElement>(".c-no_eff_no_tox")!.value),
      no_eff_tox: Number(row.querySelector<HTMLInputElement>(".c-no_eff_tox")!.value),
    }));
  try {
    await api.submitPhase2(currentTrial, outcomes);
    await refreshTrialView(true);
  } catch (err) {
    if (err instanceof ApiError) flash(err.message);
    else throw err;
  }
}

async function refreshTrialView(force: boolean): Promise<void> {
  if (!currentTrial) return;
  let snapshot: TrialSnapshot;
  try {
    snapshot = await api.getTrial(currentTrial);
  } catch (err) {
    if (err instanceof ApiError) { flash(err.message); return; }
    throw err;
  }
  if (!force && snapshot.seq === lastSeq) return;
  lastSeq = snapshot.seq;

  const view = buildTrialView(snapshot);
  $("phase-label").textContent =
    `${view.phaseLabel} - ${view.nEnrolled}/${view.maxN} enrolled`;

  const panels = $("panels");
  panels.replaceChildren();
  panels.append(renderDecisionPanel(view));
  const grad = renderGraduation(view);
  if (grad) panels.append(grad);
  const p2 = renderPhase2Panel(view);
  if (p2) panels.append(p2);

  if (snapshot.posterior) {
    const charts = el("section", { class: "panel" });
    charts.append(el("h2", {}, ["Posterior dose curves (mean, 95% interval)"]));
    charts.append(el("h3", {}, ["Toxicity"]));
    charts.append(renderPosteriorChart(snapshot.posterior, "tox",
                                       view.targetTox));
    charts.append(el("h3", {}, ["Efficacy"]));
    charts.append(renderPosteriorChart(snapshot.posterior, "eff", null));
    panels.append(charts);
  }

  syncCohortForm(snapshot);
  const p2entry = $("phase2-entry");
  if (snapshot.phase === "phase2" && snapshot.allocation) {
    p2entry.classList.remove("hidden");
    const holder = $("phase2-form");
    holder.replaceChildren(phase2FormRows(snapshot));
  } else {
    p2entry.classList.add("hidden");
  }
  $("complete-button").classList.toggle(
    "hidden", !["phase1", "phase1_full"].includes(snapshot.phase)
              || snapshot.n_enrolled === 0);
}

async function createTrial(): Promise<void> {
  const amounts = ($("new-doses") as HTMLInputElement).value;
  const doseAmounts = amounts.split(/[,\s]+/).filter(Boolean).map(Number);
  if (doseAmounts.some((d) => !Number.isFinite(d))) {
    flash("dose amounts must be numbers");
    return;
  }
  const target = Number(($("new-target") as HTMLInputElement).value);
  try {
    const resp = await api.createTrial({
      dose_amounts: doseAmounts,
      phase1: { target_tox_prob: target },
    });
    await refreshTrialList();
    await selectTrial(resp.trial_id);
  } catch (err) {
    if (err instanceof ApiError) flash(err.message);
    else throw err;
  }
}

export function start(): void {
  $("create-button").addEventListener("click", () => void createTrial());
  $("submit-cohort").addEventListener("click", () => void submitCohort());
  $("complete-button").addEventListener("click", () => void completePhase1());
  $("add-patient").addEventListener("click",
    () => addPatientRow($("patient-rows")));
  $("submit-phase2").addEventListener("click", () => void submitPhase2());
  void refreshTrialList();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start();
}
