import type { ApiErrorItem, DesignPayload, JobView, ScenarioDoc } from "./types";

/**
 * Server-reported failure: validation problems arrive as a list of
 * {loc, msg} items, numeric failures as a single message.
 */
export class ApiError extends Error {
  readonly status: number;
  readonly errors: ApiErrorItem[];

  constructor(status: number, errors: ApiErrorItem[]) {
    super(errors.map((e) => formatErrorItem(e)).join("; ") || `HTTP ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.errors = errors;
  }
}

export function formatErrorItem(item: ApiErrorItem): string {
  const loc = item.loc.filter((p) => p !== "body").join(".");
  return loc ? `${loc}: ${item.msg}` : item.msg;
}

/** Base URL for the API; same origin unless overridden (tests, dev proxy). */
export function apiBase(): string {
  const override = (globalThis as Record<string, unknown>)["__ARMDESIGN_API__"];
  return typeof override === "string" ? override.replace(/\/$/, "") : "";
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let errors: ApiErrorItem[] = [];
  try {
    const body = (await res.json()) as { errors?: ApiErrorItem[] };
    if (Array.isArray(body.errors)) errors = body.errors;
  } catch {
    // non-JSON error body; fall through with the bare status
  }
  throw new ApiError(res.status, errors);
}

export async function getDefaults(): Promise<ScenarioDoc> {
  const res = await fetch(`${apiBase()}/v1/defaults`);
  await raiseForStatus(res);
  return (await res.json()) as ScenarioDoc;
}

export async function getHealth(): Promise<{ status: string; version: string }> {
  const res = await fetch(`${apiBase()}/v1/health`);
  await raiseForStatus(res);
  return (await res.json()) as { status: string; version: string };
}

/** Returns the job view; state "done" carries the result inline. */
export async function postDesign(doc: ScenarioDoc): Promise<JobView> {
  const res = await fetch(`${apiBase()}/v1/designs`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(doc),
  });
  await raiseForStatus(res);
  return (await res.json()) as JobView;
}

export async function getJob(jobId: string): Promise<JobView> {
  const res = await fetch(`${apiBase()}/v1/jobs/${encodeURIComponent(jobId)}`);
  await raiseForStatus(res);
  return (await res.json()) as JobView;
}

export interface PollOptions {
  initialDelayMs?: number;
  maxDelayMs?: number;
  backoff?: number;
  timeoutMs?: number;
  signal?: AbortSignal;
  onTick?: (view: JobView) => void;
}

function sleep(ms: number, signal?: AbortSignal): Promise<void> {
  return new Promise((resolve, reject) => {
    if (signal?.aborted) {
      reject(new DOMException("polling aborted", "AbortError"));
      return;
    }
    const timer = setTimeout(() => resolve(), ms);
    signal?.addEventListener(
      "abort",
      () => {
        clearTimeout(timer);
        reject(new DOMException("polling aborted", "AbortError"));
      },
      { once: true },
    );
  });
}

/**
 * Poll a queued job until it terminates.  Delay starts at one second and
 * backs off geometrically; an AbortSignal cancels between requests.
 */
export async function pollUntilDone(jobId: string, opts: PollOptions = {}): Promise<JobView> {
  const initial = opts.initialDelayMs ?? 1000;
  const max = opts.maxDelayMs ?? 8000;
  const factor = opts.backoff ?? 1.5;
  const deadline = opts.timeoutMs === undefined ? null : Date.now() + opts.timeoutMs;
  let delay = initial;
  for (;;) {
    await sleep(delay, opts.signal);
    const view = await getJob(jobId);
    opts.onTick?.(view);
    if (view.state === "done" || view.state === "failed") return view;
    if (deadline !== null && Date.now() >= deadline) {
      throw new Error(`job ${jobId} still ${view.state} after timeout`);
    }
    delay = Math.min(delay * factor, max);
  }
}

export interface ReportRequestBody {
  result: DesignPayload;
  format: "md" | "html";
  filename: string;
}

/** Fetch a rendered report; resolves to its text plus the download name. */
export async function postReport(body: ReportRequestBody): Promise<{ text: string; filename: string }> {
  const res = await fetch(`${apiBase()}/v1/report`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  await raiseForStatus(res);
  const disposition = res.headers.get("content-disposition") ?? "";
  const match = /filename="([^"]+)"/.exec(disposition);
  return {
    text: await res.text(),
    filename: match?.[1] ?? `${body.filename}.${body.format}`,
  };
}
