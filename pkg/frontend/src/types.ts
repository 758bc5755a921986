// Wire types for the /v1 trial-design API.  Field names and enum ids
// mirror the server schema exactly; unknown keys are rejected server-side.

export type ModelKind = "normal" | "bernoulli";

export type Mcc =
  | "none"
  | "bonferroni"
  | "sidak"
  | "dunnett"
  | "holm_bonferroni"
  | "holm_sidak"
  | "stepdown_dunnett"
  | "hochberg"
  | "benjamini_hochberg"
  | "benjamini_yekutieli";

export type PowerGoal = "min_marginal_lfc" | "conjunctive_ha" | "disjunctive_ha";

export type AllocationKind = "fixed" | "a_optimal" | "d_optimal" | "e_optimal";

export interface ModelSpec {
  kind: ModelKind;
  k: number;
  sigmas?: number[] | null;
  pi0?: number | null;
}

export interface AllocationSpec {
  kind: AllocationKind;
  ratios?: number[] | null;
}

export interface PlotSpec {
  enabled: boolean;
  quality: number;
}

export interface EngineSpec {
  points_log2: number;
  randomizations: number;
  seed: number;
}

export interface ScenarioDoc {
  version: 1;
  model: ModelSpec;
  alpha: number;
  beta: number;
  delta1: number;
  delta0: number;
  mcc: Mcc;
  power_goal: PowerGoal;
  allocation: AllocationSpec;
  assumed_pis?: number[] | null;
  integer_n: boolean;
  plot: PlotSpec;
  engine?: EngineSpec | null;
}

export interface OpCharDict {
  p_con: number;
  p_dis: number;
  p_marginal: number[];
  pher: number;
  fwer_i: number[];
  fwer_ii: number[];
  fdr: number;
  fndr: number;
  pfdr: number | null;
  sensitivity: number;
  specificity: number;
  flags?: string[];
}

export interface CurveSeries {
  quantity: string;
  arm: number | null;
  series: "a" | "b";
  values: (number | null)[];
}

export interface CurvesPayload {
  theta: number[];
  series: CurveSeries[];
  reference: {
    alpha: number;
    power_target: number;
    delta1: number;
    delta0: number;
  };
}

export interface DesignBlock {
  sizes: { n0: number; n: number[]; total: number };
  ratios: number[];
  total_n: number;
  achieved_power: number;
  power_target: number;
  gammas: number[];
  alpha: number;
}

export interface DesignPayload {
  version: number;
  scenario: ScenarioDoc;
  design: DesignBlock;
  opchars: Record<string, OpCharDict>;
  curves: CurvesPayload | null;
  warnings: string[];
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobView {
  id: string;
  state: JobState;
  created: number;
  finished?: number | null;
  warnings: string[];
  result?: DesignPayload | null;
  error?: { type: string; message: string } | null;
}

export interface ApiErrorItem {
  loc: (string | number)[];
  msg: string;
}
