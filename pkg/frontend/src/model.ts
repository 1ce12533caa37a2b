/**
 * View models between the wire payloads and the renderers.
 *
 * TrialView is deliberately phase-agnostic: it is built from the trial
 * payload plus the space declaration and nothing else, so no field can
 * reveal whether the session is still learning or already validating.
 */
import type {
  CoactiveBody,
  FeedbackBody,
  ReportPayload,
  SpacePayload,
  TrialPayload,
} from "./api.js";

export interface ParameterView {
  name: string;
  unit: string;
  value: number;
  lower: number;
  upper: number;
}

export interface TrialView {
  index: number;
  current: ParameterView[];
  previous: ParameterView[] | null;
}

export type PreferenceChoice = "first" | "second" | "none";

export interface CoactiveForm {
  dim: number;
  direction: "higher" | "lower";
  magnitude: number;
}

export interface HistogramView {
  name: string;
  visits: number[];
}

export interface TrialHistoryRow {
  index: number;
  action: number[];
  preference: string;
  coactive: string;
}

export interface ReportView {
  aMax: ParameterView[] | null;
  scored: number;
  preferred: number;
  trials: TrialHistoryRow[];
  histograms: HistogramView[];
}

/** Trailing name suffixes double as units: step_length_m, pelvis_roll_deg. */
export function unitOf(name: string): string {
  const suffix = name.slice(name.lastIndexOf("_") + 1);
  return ["m", "s", "deg", "rad", "hz"].includes(suffix) ? suffix : "";
}

function parameters(space: SpacePayload, values: number[]): ParameterView[] {
  return values.map((value, i) => ({
    name: space.names[i] ?? `x${i}`,
    unit: unitOf(space.names[i] ?? ""),
    value,
    lower: space.lower[i] ?? 0,
    upper: space.upper[i] ?? 1,
  }));
}

export function toTrialView(space: SpacePayload, trial: TrialPayload): TrialView {
  return {
    index: trial.index,
    current: parameters(space, trial.action),
    previous: trial.previous === null ? null : parameters(space, trial.previous),
  };
}

/**
 * Form state to request body. "No preference" maps to preference:"none",
 * and a feedback body without a coactive offer must not carry a coactive
 * key at all (the server treats absence and null alike, but the contract
 * fixture pins absence).
 */
export function buildFeedbackBody(
  trialIndex: number,
  choice: PreferenceChoice,
  coactive: CoactiveForm | null,
): FeedbackBody {
  const body: FeedbackBody = { preference: choice, trial: trialIndex };
  if (coactive !== null) {
    body.coactive = toCoactiveBody(coactive);
  }
  return body;
}

export function toCoactiveBody(form: CoactiveForm): CoactiveBody {
  return {
    dim: form.dim,
    direction: form.direction === "higher" ? 1 : -1,
    magnitude: form.magnitude,
  };
}

export function toReportView(report: ReportPayload): ReportView {
  return {
    aMax: report.a_max === null ? null : parameters(report.space, report.a_max),
    scored: report.validation?.scored ?? 0,
    preferred: report.validation?.preferred ?? 0,
    trials: report.trials.map((t) => ({
      index: t.index,
      action: t.action,
      preference: t.preference,
      coactive:
        t.coactive === null
          ? ""
          : `dim ${t.coactive.dim} ${t.coactive.direction > 0 ? "higher" : "lower"} by ${t.coactive.magnitude}`,
    })),
    histograms: (report.correlation ?? []).map((c) => ({
      name: c.name,
      visits: c.visits,
    })),
  };
}
