// Client-side checks applied before a cohort submission leaves the browser.

import { PatientInput } from "./types";

export interface PatientFormValues {
  times: string;
  concentrations: string;
  dlt: string;
  efficacy: string; // "", "0", "1"
}

export interface FieldErrors {
  [field: string]: string;
}

export function parseNumberList(text: string): number[] | null {
  const trimmed = text.trim();
  if (trimmed === "") return [];
  const parts = trimmed.split(/[,;\s]+/).filter((p) => p !== "");
  const values = parts.map(Number);
  return values.every((v) => Number.isFinite(v)) ? values : null;
}

export function validatePatient(values: PatientFormValues):
    { patient: PatientInput | null; errors: FieldErrors } {
  const errors: FieldErrors = {};
  const times = parseNumberList(values.times);
  const concs = parseNumberList(values.concentrations);
  if (times === null) errors.times = "times must be numbers";
  if (concs === null) errors.concentrations = "concentrations must be numbers";
  if (times && times.some((t, i) => i > 0 && t <= times[i - 1])) {
    errors.times = "times must be strictly increasing";
  }
  if (times && concs && times.length !== concs.length) {
    errors.concentrations =
      `expected ${times.length} values to match the sampling times`;
  }
  if (values.dlt !== "0" && values.dlt !== "1") {
    errors.dlt = "DLT outcome must be 0 or 1";
  }
  if (!["", "0", "1"].includes(values.efficacy)) {
    errors.efficacy = "efficacy must be 0, 1 or pending";
  }
  if (Object.keys(errors).length > 0) return { patient: null, errors };
  return {
    patient: {
      times: times as number[],
      log_concentrations: concs as number[],
      dlt: Number(values.dlt),
      efficacy: values.efficacy === "" ? null : Number(values.efficacy),
    },
    errors,
  };
}

export function validateCohort(rows: PatientFormValues[]):
    { patients: PatientInput[] | null; errors: FieldErrors[] } {
  const results = rows.map(validatePatient);
  const errors = results.map((r) => r.errors);
  if (results.some((r) => r.patient === null)) {
    return { patients: null, errors };
  }
  return { patients: results.map((r) => r.patient as PatientInput), errors };
}
