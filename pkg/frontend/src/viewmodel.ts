// Pure mapping from service payloads to what the screen shows. Every number
// here is copied (or formatted) from a service response; the console never
// computes statistics of its own.

import { Decision, PosteriorSummary, TrialSnapshot } from "./types";

export interface DoseRow {
  doseIndex: number;
  amount: number;
  n: number;
  dlt: number;
  effKnown: number;
  eff: number;
  meanTox: number | null;
  distanceToTarget: number | null;
  overdoseProb: number | null;
  safe: boolean | null;
}

export interface XiBar {
  armId: number;
  armLabel: string;
  xi: number;
  pct: string;
  inCandidateSet: boolean;
}

export interface ArmRow {
  armId: number;
  armLabel: string;
  effNoTox: number;
  effTox: number;
  noEffNoTox: number;
  noEffTox: number;
  n: number;
}

export interface TrialView {
  trialId: string;
  phase: string;
  phaseLabel: string;
  seq: number;
  nEnrolled: number;
  maxN: number;
  targetTox: number;
  assignment: { doseIndex: number; nPatients: number } | null;
  decisionText: string | null;
  terminated: boolean;
  terminationReason: string | null;
  doseRows: DoseRow[];
  graduates: number[] | null;
  selectedWithUtility: number | null;
  arms: ArmRow[];
  allocation: { armId: number; n: number }[] | null;
  xiBars: XiBar[] | null;
  xiTotal: string | null;
  phase2Enrolled: number;
  phase2MaxN: number | null;
  candidate: number[] | null;
  recommendation: number | null;
}

const PHASE_LABELS: Record<string, string> = {
  phase1: "Phase I - escalation",
  phase1_full: "Phase I - enrollment complete, awaiting completion",
  phase2: "Phase II - randomized comparison",
  done: "Complete",
  terminated: "Terminated",
};

export function armLabel(armId: number): string {
  return armId === 0 ? "Control" : `Dose ${armId}`;
}

export function decisionText(decision: Decision | null): string | null {
  if (!decision) return null;
  const { action, dose_index } = decision;
  switch (action) {
    case "start":
      return `Start at dose ${dose_index}`;
    case "escalate":
      return `Escalate to dose ${dose_index}`;
    case "stay":
      return `Stay at dose ${dose_index}`;
    case "de-escalate":
      return `De-escalate to dose ${dose_index}`;
    case "terminate":
      return "Terminate: no safe dose";
    default:
      return dose_index === null ? action : `${action} (dose ${dose_index})`;
  }
}

export function formatProb(x: number): string {
  return x.toFixed(3);
}

export function xiTotal(xi: number[]): string {
  return xi.reduce((a, b) => a + b, 0).toFixed(2);
}

export function buildDoseRows(snapshot: TrialSnapshot): DoseRow[] {
  const target = snapshot.config.phase1.target_tox_prob;
  const post = snapshot.posterior;
  return snapshot.dose_counts.map((row, i) => ({
    doseIndex: row.dose_index,
    amount: row.dose_amount,
    n: row.n,
    dlt: row.dlt,
    effKnown: row.eff_known,
    eff: row.eff,
    meanTox: post ? post.tox.mean[i] : null,
    distanceToTarget: post ? Math.abs(post.tox.mean[i] - target) : null,
    overdoseProb: post ? post.overdose_probs[i] : null,
    safe: post ? post.safe[i] : null,
  }));
}

export function buildXiBars(snapshot: TrialSnapshot): XiBar[] | null {
  if (!snapshot.xi) return null;
  const armIds = snapshot.arms.map((a) => a.arm_id).sort((a, b) => a - b);
  const candidate = snapshot.candidate ?? [];
  return snapshot.xi.map((value, i) => ({
    armId: armIds[i],
    armLabel: armLabel(armIds[i]),
    xi: value,
    pct: (100 * value).toFixed(1) + "%",
    inCandidateSet: candidate.includes(armIds[i]),
  }));
}

export function buildTrialView(snapshot: TrialSnapshot): TrialView {
  return {
    trialId: snapshot.trial_id,
    phase: snapshot.phase,
    phaseLabel: PHASE_LABELS[snapshot.phase] ?? snapshot.phase,
    seq: snapshot.seq,
    nEnrolled: snapshot.n_enrolled,
    maxN: snapshot.config.phase1.max_n,
    targetTox: snapshot.config.phase1.target_tox_prob,
    assignment: snapshot.assignment
      ? {
          doseIndex: snapshot.assignment.dose_index,
          nPatients: snapshot.assignment.n_patients,
        }
      : null,
    decisionText: decisionText(snapshot.decision),
    terminated: snapshot.phase === "terminated",
    terminationReason: snapshot.termination_reason,
    doseRows: buildDoseRows(snapshot),
    graduates: snapshot.graduates,
    selectedWithUtility: snapshot.selected_with_utility,
    arms: snapshot.arms.map((a) => ({
      armId: a.arm_id,
      armLabel: armLabel(a.arm_id),
      effNoTox: a.eff_no_tox,
      effTox: a.eff_tox,
      noEffNoTox: a.no_eff_no_tox,
      noEffTox: a.no_eff_tox,
      n: a.eff_no_tox + a.eff_tox + a.no_eff_no_tox + a.no_eff_tox,
    })),
    allocation: snapshot.allocation
      ? Object.entries(snapshot.allocation)
          .map(([armId, n]) => ({ armId: Number(armId), n }))
          .sort((a, b) => a.armId - b.armId)
      : null,
    xiBars: buildXiBars(snapshot),
    xiTotal: snapshot.xi ? xiTotal(snapshot.xi) : null,
    phase2Enrolled: snapshot.phase2_enrolled,
    phase2MaxN: snapshot.config.phase2 ? snapshot.config.phase2.max_n : null,
    candidate: snapshot.candidate,
    recommendation: snapshot.recommendation,
  };
}

export interface PosteriorChartPoint {
  doseIndex: number;
  amount: number;
  mean: number;
  lo: number;
  hi: number;
}

export function chartPoints(post: PosteriorSummary,
                            series: "tox" | "eff"): PosteriorChartPoint[] {
  const band = post[series];
  return post.dose_amounts.map((amount, i) => ({
    doseIndex: i + 1,
    amount,
    mean: band.mean[i],
    lo: band.lo[i],
    hi: band.hi[i],
  }));
}
