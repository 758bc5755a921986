// Form state -> scenario document, with client-side validation that
// mirrors the server rules so most mistakes are caught before a request.

import { parseNumberList } from "./format";
import type { AllocationKind, Mcc, ModelKind, PowerGoal, ScenarioDoc } from "./types";

export interface FormValues {
  kind: ModelKind;
  k: number;
  pi0: string;
  sigmas: string;
  alpha: string;
  beta: string;
  delta1: string;
  delta0: string;
  mcc: Mcc;
  powerGoal: PowerGoal;
  allocation: AllocationKind;
  ratios: string;
  assumedPis: string;
  integerN: boolean;
  plotEnabled: boolean;
  plotQuality: string;
  useEngine: boolean;
  pointsLog2: string;
  randomizations: string;
  seed: string;
}

export type FieldErrors = Partial<Record<keyof FormValues, string>>;

export const MCC_IDS: Mcc[] = [
  "none",
  "bonferroni",
  "sidak",
  "dunnett",
  "holm_bonferroni",
  "holm_sidak",
  "stepdown_dunnett",
  "hochberg",
  "benjamini_hochberg",
  "benjamini_yekutieli",
];

export const MCC_LABELS: Record<Mcc, string> = {
  none: "Unadjusted",
  bonferroni: "Bonferroni",
  sidak: "Sidak",
  dunnett: "Dunnett",
  holm_bonferroni: "Holm (Bonferroni)",
  holm_sidak: "Holm (Sidak)",
  stepdown_dunnett: "Step-down Dunnett",
  hochberg: "Hochberg",
  benjamini_hochberg: "Benjamini-Hochberg",
  benjamini_yekutieli: "Benjamini-Yekutieli",
};

/** Which conditional inputs apply for the current selections. */
export function visibleFields(values: Pick<FormValues, "kind" | "allocation">): {
  pi0: boolean;
  sigmas: boolean;
  ratios: boolean;
  assumedPis: boolean;
} {
  const optimal = values.allocation !== "fixed";
  return {
    pi0: values.kind === "bernoulli",
    sigmas: values.kind === "normal",
    ratios: !optimal,
    assumedPis: optimal && values.kind === "bernoulli",
  };
}

function parseProbability(text: string, field: string, errors: FieldErrors, key: keyof FormValues): number {
  const v = Number(text);
  if (text.trim() === "" || !Number.isFinite(v)) {
    errors[key] = `${field} must be a number`;
    return NaN;
  }
  if (v <= 0 || v >= 1) {
    errors[key] = `${field} must lie strictly between 0 and 1`;
    return NaN;
  }
  return v;
}

function parseNumber(text: string, field: string, errors: FieldErrors, key: keyof FormValues): number {
  const v = Number(text);
  if (text.trim() === "" || !Number.isFinite(v)) {
    errors[key] = `${field} must be a number`;
    return NaN;
  }
  return v;
}

function parseIntIn(
  text: string,
  field: string,
  lo: number,
  hi: number,
  errors: FieldErrors,
  key: keyof FormValues,
): number {
  const v = Number(text);
  if (!Number.isInteger(v) || v < lo || v > hi) {
    errors[key] = `${field} must be an integer between ${lo} and ${hi}`;
    return NaN;
  }
  return v;
}

/**
 * Validate the form and build the request document.  Returns the doc and
 * a map of per-field messages; the doc is null whenever any message is set.
 */
export function buildScenarioDoc(values: FormValues): { doc: ScenarioDoc | null; errors: FieldErrors } {
  const errors: FieldErrors = {};
  const vis = visibleFields(values);

  if (!Number.isInteger(values.k) || values.k < 1 || values.k > 5) {
    errors.k = "number of experimental arms must be an integer between 1 and 5";
  }
  const alpha = parseProbability(values.alpha, "alpha", errors, "alpha");
  const beta = parseProbability(values.beta, "beta", errors, "beta");

  const delta1 = parseNumber(values.delta1, "interesting effect", errors, "delta1");
  const delta0 = parseNumber(values.delta0, "uninteresting effect", errors, "delta0");
  if (!errors.delta1 && delta1 <= 0) {
    errors.delta1 = "interesting effect must be positive";
  }
  if (!errors.delta1 && !errors.delta0 && delta0 >= delta1) {
    errors.delta0 = "uninteresting effect must be strictly below the interesting effect";
  }

  let pi0: number | null = null;
  let sigmas: number[] | null = null;
  if (vis.pi0) {
    pi0 = parseProbability(values.pi0, "control response rate", errors, "pi0");
    if (!errors.pi0 && !errors.delta1 && pi0 + delta1 >= 1) {
      errors.delta1 = "control rate plus the interesting effect must stay below 1";
    }
    if (!errors.pi0 && !errors.delta0 && pi0 + delta0 <= 0) {
      errors.delta0 = "control rate plus the uninteresting effect must stay above 0";
    }
  } else {
    sigmas = parseNumberList(values.sigmas);
    if (sigmas === null || sigmas.length !== values.k + 1) {
      errors.sigmas = `expected ${values.k + 1} standard deviations (control first)`;
    } else if (sigmas.some((s) => s <= 0)) {
      errors.sigmas = "standard deviations must be positive";
    }
  }

  let ratios: number[] | null = null;
  if (vis.ratios) {
    ratios = parseNumberList(values.ratios);
    if (ratios === null || ratios.length !== values.k) {
      errors.ratios = `expected ${values.k} allocation ratios`;
    } else if (ratios.some((r) => r <= 0)) {
      errors.ratios = "allocation ratios must be positive";
    }
  }

  let assumedPis: number[] | null = null;
  if (vis.assumedPis) {
    assumedPis = parseNumberList(values.assumedPis);
    if (assumedPis === null || assumedPis.length !== values.k) {
      errors.assumedPis = `expected ${values.k} assumed response rates (one per experimental arm)`;
    } else if (assumedPis.some((p) => p <= 0 || p >= 1)) {
      errors.assumedPis = "assumed response rates must lie strictly between 0 and 1";
    }
  }

  const quality = parseIntIn(values.plotQuality, "plot quality", 10, 500, errors, "plotQuality");

  let engine: ScenarioDoc["engine"] = null;
  if (values.useEngine) {
    const pointsLog2 = parseIntIn(values.pointsLog2, "log2 points", 10, 24, errors, "pointsLog2");
    const randomizations = parseIntIn(values.randomizations, "randomizations", 1, 64, errors, "randomizations");
    const seed = Number(values.seed);
    if (!Number.isInteger(seed)) {
      errors.seed = "seed must be an integer";
    }
    engine = { points_log2: pointsLog2, randomizations, seed };
  }

  if (Object.keys(errors).length > 0) {
    return { doc: null, errors };
  }
  const doc: ScenarioDoc = {
    version: 1,
    model: {
      kind: values.kind,
      k: values.k,
      sigmas: vis.sigmas ? sigmas : null,
      pi0: vis.pi0 ? pi0 : null,
    },
    alpha,
    beta,
    delta1,
    delta0,
    mcc: values.mcc,
    power_goal: values.powerGoal,
    allocation:
      values.allocation === "fixed"
        ? { kind: "fixed", ratios }
        : { kind: values.allocation, ratios: null },
    assumed_pis: vis.assumedPis ? assumedPis : null,
    integer_n: values.integerN,
    plot: { enabled: values.plotEnabled, quality },
    engine,
  };
  return { doc, errors: {} };
}

/** Populate form values from a scenario document (defaults, reset). */
export function valuesFromDoc(doc: ScenarioDoc): FormValues {
  return {
    kind: doc.model.kind,
    k: doc.model.k,
    pi0: doc.model.pi0 === null || doc.model.pi0 === undefined ? "0.3" : String(doc.model.pi0),
    sigmas: doc.model.sigmas ? doc.model.sigmas.join(", ") : "1, 1, 1",
    alpha: String(doc.alpha),
    beta: String(doc.beta),
    delta1: String(doc.delta1),
    delta0: String(doc.delta0),
    mcc: doc.mcc,
    powerGoal: doc.power_goal,
    allocation: doc.allocation.kind,
    ratios: doc.allocation.ratios ? doc.allocation.ratios.join(", ") : "1, 1",
    assumedPis: doc.assumed_pis ? doc.assumed_pis.join(", ") : "",
    integerN: doc.integer_n,
    plotEnabled: doc.plot.enabled,
    plotQuality: String(doc.plot.quality),
    useEngine: doc.engine !== null && doc.engine !== undefined,
    pointsLog2: String(doc.engine?.points_log2 ?? 16),
    randomizations: String(doc.engine?.randomizations ?? 8),
    seed: String(doc.engine?.seed ?? 0),
  };
}
