// Application wiring: form state, submission with polling, result and
// plot rendering, report download.  Kept free of module-level DOM access
// so tests can drive initApp against any Document.

import { ApiError, getDefaults, getHealth, pollUntilDone, postDesign, postReport } from "./api";
import type { FieldErrors, FormValues } from "./form";
import { buildScenarioDoc, MCC_IDS, MCC_LABELS, valuesFromDoc, visibleFields } from "./form";
import { buildPlotData, mountPlot } from "./plot";
import { renderResult, renderWarnings } from "./render";
import type { DesignPayload, JobView, ScenarioDoc } from "./types";

// form-field key -> input element id (checkbox fields handled separately)
const TEXT_FIELDS: Record<string, string> = {
  pi0: "pi0",
  sigmas: "sigmas",
  alpha: "alpha",
  beta: "beta",
  delta1: "delta1",
  delta0: "delta0",
  ratios: "ratios",
  assumedPis: "assumed-pis",
  plotQuality: "plot-quality",
  pointsLog2: "points-log2",
  randomizations: "randomizations",
  seed: "seed",
};

export interface AppHandles {
  readValues(): FormValues;
  writeValues(values: FormValues): void;
  submit(): Promise<void>;
  reset(): Promise<void>;
  downloadReport(): Promise<{ text: string; filename: string } | null>;
  lastResult(): DesignPayload | null;
  abortPolling(): void;
}

function input(doc: Document, id: string): HTMLInputElement {
  return doc.getElementById(id) as HTMLInputElement;
}

function select(doc: Document, id: string): HTMLSelectElement {
  return doc.getElementById(id) as HTMLSelectElement;
}

export function initApp(doc: Document): AppHandles {
  const status = doc.getElementById("status")!;
  const warningsHost = doc.getElementById("warnings")!;
  const output = doc.getElementById("output")!;
  const resultHost = doc.getElementById("result")!;
  const plotHost = doc.getElementById("plot")!;
  const plotNote = doc.getElementById("plot-note")!;
  const submitButton = input(doc, "submit");
  let lastResult: DesignPayload | null = null;
  let polling: AbortController | null = null;

  const mccSelect = select(doc, "mcc");
  if (mccSelect.options.length === 0) {
    for (const id of MCC_IDS) {
      const opt = doc.createElement("option");
      opt.value = id;
      opt.textContent = MCC_LABELS[id];
      mccSelect.appendChild(opt);
    }
  }

  function setStatus(text: string, isError = false): void {
    status.textContent = text;
    status.className = isError ? "error" : "";
  }

  function readValues(): FormValues {
    const values: Record<string, unknown> = {
      kind: select(doc, "kind").value,
      k: Number(input(doc, "k").value),
      mcc: mccSelect.value,
      powerGoal: select(doc, "power-goal").value,
      allocation: select(doc, "allocation").value,
      integerN: input(doc, "integer-n").checked,
      plotEnabled: input(doc, "plot-enabled").checked,
      useEngine: input(doc, "use-engine").checked,
    };
    for (const [key, id] of Object.entries(TEXT_FIELDS)) {
      values[key] = input(doc, id).value;
    }
    return values as unknown as FormValues;
  }

  function writeValues(values: FormValues): void {
    select(doc, "kind").value = values.kind;
    input(doc, "k").value = String(values.k);
    mccSelect.value = values.mcc;
    select(doc, "power-goal").value = values.powerGoal;
    select(doc, "allocation").value = values.allocation;
    input(doc, "integer-n").checked = values.integerN;
    input(doc, "plot-enabled").checked = values.plotEnabled;
    input(doc, "use-engine").checked = values.useEngine;
    for (const [key, id] of Object.entries(TEXT_FIELDS)) {
      input(doc, id).value = String(values[key as keyof FormValues]);
    }
    applyVisibility();
  }

  function applyVisibility(): void {
    const vis = visibleFields({
      kind: select(doc, "kind").value as FormValues["kind"],
      allocation: select(doc, "allocation").value as FormValues["allocation"],
    });
    doc.getElementById("row-pi0")!.hidden = !vis.pi0;
    doc.getElementById("row-sigmas")!.hidden = !vis.sigmas;
    doc.getElementById("row-ratios")!.hidden = !vis.ratios;
    doc.getElementById("row-assumed-pis")!.hidden = !vis.assumedPis;
  }

  function clearFieldErrors(): void {
    for (const span of Array.from(doc.querySelectorAll(".field-error"))) {
      span.textContent = "";
    }
  }

  function showFieldErrors(errors: FieldErrors): void {
    for (const [key, message] of Object.entries(errors)) {
      const span = doc.getElementById(`err-${key}`);
      if (span) span.textContent = message ?? "";
    }
  }

  // map server validation locations back onto form fields where possible
  function showServerError(err: ApiError): void {
    const mapped: FieldErrors = {};
    for (const item of err.errors) {
      const tail = item.loc[item.loc.length - 1];
      const key =
        tail === "pi0" || tail === "sigmas" ? (tail as keyof FormValues)
        : tail === "assumed_pis" ? "assumedPis"
        : tail === "ratios" ? "ratios"
        : typeof tail === "string" && tail in TEXT_FIELDS ? (tail as keyof FormValues)
        : null;
      if (key !== null) mapped[key] = item.msg;
    }
    showFieldErrors(mapped);
    setStatus(err.message, true);
  }

  function showResult(payload: DesignPayload): void {
    lastResult = payload;
    output.hidden = false;
    renderResult(resultHost, payload);
    renderWarnings(warningsHost, payload.warnings);
    plotHost.textContent = "";
    plotNote.hidden = true;
    if (payload.curves === null) {
      plotNote.textContent = "Curves disabled for this scenario.";
      plotNote.hidden = false;
      return;
    }
    let chart: unknown = null;
    try {
      chart = mountPlot(plotHost as HTMLElement, buildPlotData(payload.curves));
    } catch {
      chart = null;
    }
    if (chart === null) {
      plotNote.textContent = "Plot unavailable: this environment has no canvas support.";
      plotNote.hidden = false;
    }
  }

  async function submit(): Promise<void> {
    clearFieldErrors();
    polling?.abort();
    const { doc: scenario, errors } = buildScenarioDoc(readValues());
    if (scenario === null) {
      showFieldErrors(errors);
      setStatus("fix the highlighted fields", true);
      return;
    }
    submitButton.disabled = true;
    setStatus("resolving design...");
    try {
      const view = await postDesign(scenario);
      renderWarnings(warningsHost, view.warnings);
      const finished = view.state === "done" || view.state === "failed" ? view : await trackJob(view);
      if (finished.state === "failed") {
        setStatus(`design failed: ${finished.error?.message ?? "unknown error"}`, true);
        return;
      }
      if (finished.result) {
        showResult(finished.result);
        setStatus(`done (job ${finished.id.slice(0, 8)})`);
      }
    } catch (err) {
      if (err instanceof ApiError) {
        showServerError(err);
      } else if ((err as Error).name === "AbortError") {
        setStatus("cancelled");
      } else {
        setStatus(`request failed: ${(err as Error).message}`, true);
      }
    } finally {
      submitButton.disabled = false;
    }
  }

  async function trackJob(view: JobView): Promise<JobView> {
    polling = new AbortController();
    setStatus(`queued as job ${view.id.slice(0, 8)}...`);
    return pollUntilDone(view.id, {
      signal: polling.signal,
      onTick: (tick) => setStatus(`job ${tick.id.slice(0, 8)}: ${tick.state}...`),
    });
  }

  async function reset(): Promise<void> {
    polling?.abort();
    clearFieldErrors();
    const defaults = await getDefaults();
    writeValues(valuesFromDoc(defaults));
    lastResult = null;
    output.hidden = true;
    renderWarnings(warningsHost, []);
    setStatus("defaults loaded");
  }

  async function downloadReport(): Promise<{ text: string; filename: string } | null> {
    if (lastResult === null) {
      setStatus("resolve a design first", true);
      return null;
    }
    const format = select(doc, "report-format").value as "md" | "html";
    const filename = input(doc, "report-filename").value.trim() || "report";
    const report = await postReport({ result: lastResult, format, filename });
    const view = doc.defaultView;
    if (view && typeof view.URL.createObjectURL === "function") {
      const blob = new view.Blob([report.text]);
      const anchor = doc.createElement("a");
      anchor.href = view.URL.createObjectURL(blob);
      anchor.download = report.filename;
      anchor.click();
      view.URL.revokeObjectURL(anchor.href);
    }
    return report;
  }

  doc.getElementById("scenario-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });
  doc.getElementById("reset")!.addEventListener("click", () => void reset());
  doc.getElementById("download-report")!.addEventListener("click", () => void downloadReport());
  select(doc, "kind").addEventListener("change", applyVisibility);
  select(doc, "allocation").addEventListener("change", applyVisibility);
  applyVisibility();

  void getHealth()
    .then((h) => {
      doc.getElementById("service-info")!.textContent = `service ${h.version} ready`;
    })
    .catch(() => {
      doc.getElementById("service-info")!.textContent = "service unreachable";
    });

  return {
    readValues,
    writeValues,
    submit,
    reset,
    downloadReport,
    lastResult: () => lastResult,
    abortPolling: () => polling?.abort(),
  };
}
