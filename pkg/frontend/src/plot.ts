// Operating-characteristic curves with uPlot: drag to zoom, double-click
// to reset, dashed reference lines at alpha, the power target, and the
// two effect sizes.

import uPlot from "uplot";
import type { CurvesPayload } from "./types";

export interface PlotData {
  x: number[];
  series: { label: string; dashed: boolean; values: (number | null)[] }[];
  verticals: { label: string; x: number }[];
  horizontals: { label: string; y: number }[];
}

const SERIES_A_ORDER = ["p_con", "p_dis", "marginal_power"];

function seriesLabel(quantity: string, arm: number | null, series: "a" | "b"): string {
  const base = quantity === "marginal_power" ? `P_${arm}` : quantity === "p_con" ? "P_con" : "P_dis";
  return series === "b" ? `${base} (single-arm)` : base;
}

/**
 * Pick the power-like curves out of the payload: conjunctive, disjunctive
 * and per-arm marginal power as solid lines, the single-arm-moving family
 * dashed.  Error-rate curves stay in the table view.
 */
export function buildPlotData(curves: CurvesPayload): PlotData {
  const series: PlotData["series"] = [];
  for (const wanted of SERIES_A_ORDER) {
    for (const s of curves.series) {
      if (s.series === "a" && s.quantity === wanted) {
        series.push({ label: seriesLabel(s.quantity, s.arm, "a"), dashed: false, values: s.values });
      }
    }
  }
  for (const s of curves.series) {
    if (s.series === "b" && s.quantity === "marginal_power") {
      series.push({ label: seriesLabel(s.quantity, s.arm, "b"), dashed: true, values: s.values });
    }
  }
  const ref = curves.reference;
  return {
    x: curves.theta,
    series,
    verticals: [
      { label: "delta1", x: ref.delta1 },
      { label: "delta0", x: ref.delta0 },
    ],
    horizontals: [
      { label: "alpha", y: ref.alpha },
      { label: "power target", y: ref.power_target },
    ],
  };
}

const PALETTE = ["#1f6feb", "#d1242f", "#1a7f37", "#9a6700", "#8250df", "#bf3989", "#57606a"];

export function canRenderCanvas(doc: Document): boolean {
  try {
    return doc.createElement("canvas").getContext("2d") !== null;
  } catch {
    return false;
  }
}

/**
 * Mount the chart into `host`.  Returns the uPlot instance, or null when
 * the environment has no 2d canvas (headless tests); the caller then shows
 * a plain-text fallback.
 */
export function mountPlot(host: HTMLElement, data: PlotData): uPlot | null {
  if (!canRenderCanvas(host.ownerDocument)) return null;
  host.textContent = "";
  const drawRefs = (u: uPlot): void => {
    const ctx = u.ctx;
    ctx.save();
    ctx.strokeStyle = "#8c959f";
    ctx.setLineDash([6, 6]);
    for (const v of data.verticals) {
      const cx = u.valToPos(v.x, "x", true);
      ctx.beginPath();
      ctx.moveTo(cx, u.bbox.top);
      ctx.lineTo(cx, u.bbox.top + u.bbox.height);
      ctx.stroke();
    }
    for (const h of data.horizontals) {
      const cy = u.valToPos(h.y, "y", true);
      ctx.beginPath();
      ctx.moveTo(u.bbox.left, cy);
      ctx.lineTo(u.bbox.left + u.bbox.width, cy);
      ctx.stroke();
    }
    ctx.restore();
  };
  const opts: uPlot.Options = {
    width: Math.max(host.clientWidth, 560),
    height: 360,
    title: "Power against the moving effect size",
    scales: { x: { time: false }, y: { range: [0, 1] } },
    series: [
      { label: "theta" },
      ...data.series.map((s, i) => ({
        label: s.label,
        stroke: PALETTE[i % PALETTE.length],
        width: 2,
        dash: s.dashed ? [5, 5] : undefined,
        points: { show: false },
      })),
    ],
    axes: [{ label: "effect size" }, { label: "probability" }],
    hooks: { drawClear: [drawRefs] },
    cursor: { drag: { x: true, y: true, uni: 40 } },
  };
  const aligned: uPlot.AlignedData = [
    data.x,
    ...data.series.map((s) => s.values.map((v) => (v === null ? null : v))),
  ] as uPlot.AlignedData;
  const chart = new uPlot(opts, aligned, host);
  host.addEventListener("dblclick", () => {
    chart.setScale("x", { min: data.x[0] ?? 0, max: data.x[data.x.length - 1] ?? 1 });
  });
  return chart;
}
