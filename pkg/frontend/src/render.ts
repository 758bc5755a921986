// Result rendering: plain DOM tables built from the design payload, with
// every number going through the same formatter the server reports use.

import { formatSig } from "./format";
import type { DesignPayload, OpCharDict } from "./types";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  text?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (text !== undefined) node.textContent = text;
  if (className !== undefined) node.className = className;
  return node;
}

function table(doc: Document, header: string[], rows: string[][]): HTMLTableElement {
  const t = doc.createElement("table");
  const thead = doc.createElement("thead");
  const headRow = doc.createElement("tr");
  for (const h of header) headRow.appendChild(el(doc, "th", h));
  thead.appendChild(headRow);
  t.appendChild(thead);
  const tbody = doc.createElement("tbody");
  for (const row of rows) {
    const tr = doc.createElement("tr");
    for (const cell of row) tr.appendChild(el(doc, "td", cell));
    tbody.appendChild(tr);
  }
  t.appendChild(tbody);
  return t;
}

export function opcharRows(oc: OpCharDict): [string, string][] {
  const rows: [string, string][] = [
    ["P_con", formatSig(oc.p_con)],
    ["P_dis", formatSig(oc.p_dis)],
  ];
  oc.p_marginal.forEach((v, j) => rows.push([`P_${j + 1}`, formatSig(v)]));
  rows.push(["PHER", formatSig(oc.pher)]);
  oc.fwer_i.forEach((v, a) => rows.push([`FWER_I${a + 1}`, formatSig(v)]));
  oc.fwer_ii.forEach((v, a) => rows.push([`FWER_II${a + 1}`, formatSig(v)]));
  rows.push(["FDR", formatSig(oc.fdr)]);
  rows.push(["FNDR", formatSig(oc.fndr)]);
  rows.push(["pFDR", formatSig(oc.pfdr)]);
  rows.push(["Sensitivity", formatSig(oc.sensitivity)]);
  rows.push(["Specificity", formatSig(oc.specificity)]);
  return rows;
}

/** H_G first, then H_A, then the single-arm configurations in arm order. */
export function scenarioOrder(labels: string[]): string[] {
  const rank = (label: string): number => {
    if (label === "H_G") return 0;
    if (label === "H_A") return 1;
    return 2 + Number(label.split("_")[1] ?? 0);
  };
  return [...labels].sort((a, b) => rank(a) - rank(b));
}

export function renderWarnings(host: HTMLElement, warnings: string[]): void {
  const doc = host.ownerDocument;
  host.textContent = "";
  host.hidden = warnings.length === 0;
  for (const w of warnings) {
    host.appendChild(el(doc, "div", w, "warning"));
  }
}

export function renderResult(host: HTMLElement, payload: DesignPayload): void {
  const doc = host.ownerDocument;
  host.textContent = "";

  const summary = el(doc, "section");
  summary.appendChild(el(doc, "h2", "Design summary"));
  const sizes = payload.design.sizes;
  const armRows: string[][] = [["control", formatSig(sizes.n0), "1.000"]];
  sizes.n.forEach((n, i) =>
    armRows.push([`arm ${i + 1}`, formatSig(n), formatSig(payload.design.ratios[i])]),
  );
  summary.appendChild(table(doc, ["Arm", "Sample size", "Ratio"], armRows));
  summary.appendChild(
    table(
      doc,
      ["Quantity", "Value"],
      [
        ["Total sample size", formatSig(payload.design.total_n)],
        ["Achieved power", formatSig(payload.design.achieved_power)],
        ["Power target", formatSig(payload.design.power_target)],
        ["Thresholds (gamma)", payload.design.gammas.map((g) => formatSig(g)).join(", ")],
      ],
    ),
  );
  host.appendChild(summary);

  const oc = el(doc, "section");
  oc.appendChild(el(doc, "h2", "Operating characteristics"));
  for (const label of scenarioOrder(Object.keys(payload.opchars))) {
    const block = payload.opchars[label];
    if (block === undefined) continue;
    oc.appendChild(el(doc, "h3", `Scenario ${label}`));
    oc.appendChild(table(doc, ["Quantity", "Value"], opcharRows(block)));
    if (block.flags && block.flags.length > 0) {
      oc.appendChild(el(doc, "p", `Notes: ${block.flags.join(", ")}`, "flags"));
    }
  }
  host.appendChild(oc);
}
