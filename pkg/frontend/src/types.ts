// Wire types mirroring the trial service JSON. Field names stay snake_case
// to make the "numbers come verbatim from the service" contract auditable.

export interface Assignment {
  dose_index: number;
  n_patients: number;
}

export interface Decision {
  action: string;
  dose_index: number | null;
}

export interface DoseCountRow {
  dose_index: number;
  dose_amount: number;
  n: number;
  dlt: number;
  eff_known: number;
  eff: number;
}

export interface PosteriorBand {
  mean: number[];
  lo: number[];
  hi: number[];
}

export interface PosteriorSummary {
  seed: number;
  include_efficacy: boolean;
  dose_amounts: number[];
  tox: PosteriorBand;
  eff: PosteriorBand;
  overdose_probs: number[];
  safe: boolean[];
  decision?: Decision;
}

export interface ArmCounts {
  arm_id: number;
  eff_no_tox: number;
  eff_tox: number;
  no_eff_no_tox: number;
  no_eff_tox: number;
}

export interface TrialSnapshot {
  trial_id: string;
  phase: string;
  seq: number;
  config: {
    dose_amounts: number[];
    phase1: { target_tox_prob: number; max_n: number; cohort_size: number;
              [k: string]: unknown };
    phase2: { cohort_size: number; max_n: number; [k: string]: unknown } | null;
    [k: string]: unknown;
  };
  n_enrolled: number;
  dose_counts: DoseCountRow[];
  assignment: Assignment | null;
  decision: Decision | null;
  posterior: PosteriorSummary | null;
  graduates: number[] | null;
  selected_with_utility: number | null;
  arms: ArmCounts[];
  allocation: Record<string, number> | null;
  xi: number[] | null;
  phase2_enrolled: number;
  candidate: number[] | null;
  recommendation: number | null;
  termination_reason: string | null;
}

export interface PatientInput {
  times: number[];
  log_concentrations: number[];
  dlt: number;
  efficacy: number | null;
}

export interface CohortResponse {
  trial_id: string;
  n_enrolled: number;
  decision: Decision & {
    posterior_mean_tox: number[];
    overdose_probs: number[];
    safe: boolean[];
  };
  assignment: Assignment | null;
  phase: string;
}

export interface CompletionResponse {
  trial_id: string;
  graduates: number[];
  selected_with_utility: number | null;
  phase: string;
  allocation: Record<string, number> | null;
}

export interface Phase2Response {
  trial_id: string;
  phase: string;
  phase2_enrolled: number;
  xi: number[] | null;
  allocation: Record<string, number> | null;
  candidate: number[] | null;
  recommendation: number | null;
}
