"""Report rendering: design summary and operating-characteristic tables.

Reports are generated from a design payload dictionary, never by
recomputation, so report numbers always equal the design-file numbers.
Every number is printed with four significant figures.
"""

from __future__ import annotations

import html

import numpy as np

from armdesign.errors import InputError

SIG_FIGURES = 4


def format_sig(x, digits: int = SIG_FIGURES) -> str:
    """Fixed significant-figure formatting; None renders as n/a."""
    if x is None:
        return "n/a"
    v = float(x)
    if np.isnan(v):
        return "n/a"
    if v == 0.0:
        return "0." + "0" * (digits - 1)
    s = f"{v:.{digits}g}"
    mantissa, sep, exponent = s.partition("e")
    neg = mantissa.startswith("-")
    core = mantissa[1:] if neg else mantissa
    significant = len(core.replace(".", "").lstrip("0"))
    if significant < digits:
        if "." not in core:
            core += "."
        core += "0" * (digits - significant)
    return ("-" if neg else "") + core + sep + exponent


def _opchar_rows(oc: dict) -> list[tuple[str, str]]:
    rows = [("P_con", format_sig(oc["p_con"])), ("P_dis", format_sig(oc["p_dis"]))]
    for j, v in enumerate(oc["p_marginal"], start=1):
        rows.append((f"P_{j}", format_sig(v)))
    rows.append(("PHER", format_sig(oc["pher"])))
    for a, v in enumerate(oc["fwer_i"], start=1):
        rows.append((f"FWER_I{a}", format_sig(v)))
    for a, v in enumerate(oc["fwer_ii"], start=1):
        rows.append((f"FWER_II{a}", format_sig(v)))
    rows.append(("FDR", format_sig(oc["fdr"])))
    rows.append(("FNDR", format_sig(oc["fndr"])))
    rows.append(("pFDR", format_sig(oc["pfdr"])))
    rows.append(("Sensitivity", format_sig(oc["sensitivity"])))
    rows.append(("Specificity", format_sig(oc["specificity"])))
    return rows


def _input_rows(scenario: dict) -> list[tuple[str, str]]:
    model = scenario["model"]
    rows = [
        ("Experimental arms (K)", str(model["k"])),
        ("Outcome model", model["kind"]),
    ]
    if model["kind"] == "normal":
        rows.append(("Standard deviations (control first)", ", ".join(format_sig(s) for s in model["sigmas"])))
    else:
        rows.append(("Control response rate (pi0)", format_sig(model["pi0"])))
    rows += [
        ("Significance level (alpha)", format_sig(scenario["alpha"])),
        ("Type-II rate (beta)", format_sig(scenario["beta"])),
        ("Interesting effect (delta1)", format_sig(scenario["delta1"])),
        ("Uninteresting effect (delta0)", format_sig(scenario["delta0"])),
        ("Multiple-comparison correction", scenario["mcc"]),
        ("Power goal", scenario["power_goal"]),
    ]
    alloc = scenario["allocation"]
    if alloc["kind"] == "fixed":
        rows.append(("Allocation", "fixed: " + ", ".join(format_sig(r) for r in alloc["ratios"])))
    else:
        rows.append(("Allocation", alloc["kind"]))
    if scenario.get("assumed_pis"):
        rows.append(("Assumed rates for allocation", ", ".join(format_sig(p) for p in scenario["assumed_pis"])))
    rows.append(("Integer sample sizes", "yes" if scenario["integer_n"] else "no"))
    plot = scenario["plot"]
    rows.append(("Plots", f"enabled (quality {plot['quality']})" if plot["enabled"] else "disabled"))
    return rows


def _design_rows(payload: dict) -> tuple[list[tuple[str, str, str]], list[tuple[str, str]]]:
    block = payload["design"]
    sizes = block["sizes"]
    arm_rows = [("control", format_sig(sizes["n0"]), format_sig(1.0))]
    for j, (n, r) in enumerate(zip(sizes["n"], block["ratios"]), start=1):
        arm_rows.append((f"arm {j}", format_sig(n), format_sig(r)))
    summary = [
        ("Total sample size", format_sig(block["total_n"])),
        ("Achieved power", format_sig(block["achieved_power"])),
        ("Power target", format_sig(block["power_target"])),
        ("Thresholds (gamma)", ", ".join(format_sig(g) for g in block["gammas"])),
    ]
    return arm_rows, summary


def _scenario_order(labels) -> list[str]:
    named = [x for x in ("H_G", "H_A") if x in labels]
    lfcs = sorted((x for x in labels if x.startswith("LFC_")), key=lambda s: int(s.split("_")[1]))
    rest = [x for x in labels if x not in named and x not in lfcs]
    return named + lfcs + rest


def render_report(payload: dict, fmt: str, curves_filename: str | None = None) -> str:
    if fmt == "md":
        return _render_markdown(payload, curves_filename)
    if fmt == "html":
        return _render_html(payload, curves_filename)
    raise InputError(f"unknown report format {fmt!r}; expected 'md' or 'html'")


def _md_table(header: tuple[str, ...], rows) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(" --- " for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return lines


def _render_markdown(payload: dict, curves_filename: str | None) -> str:
    lines = ["# Multi-arm trial design report", ""]
    if payload.get("warnings"):
        lines.append("## Warnings")
        lines.append("")
        for w in payload["warnings"]:
            lines.append(f"- {w}")
        lines.append("")
    lines.append("## Inputs")
    lines.append("")
    lines += _md_table(("Input", "Value"), _input_rows(payload["scenario"]))
    lines.append("")
    lines.append("## Design summary")
    lines.append("")
    arm_rows, summary = _design_rows(payload)
    lines += _md_table(("Arm", "Sample size", "Ratio"), arm_rows)
    lines.append("")
    lines += _md_table(("Quantity", "Value"), summary)
    lines.append("")
    lines.append("## Operating characteristics")
    lines.append("")
    for label in _scenario_order(payload["opchars"].keys()):
        lines.append(f"### Scenario {label}")
        lines.append("")
        lines += _md_table(("Quantity", "Value"), _opchar_rows(payload["opchars"][label]))
        flags = payload["opchars"][label].get("flags") or []
        if flags:
            lines.append("")
            lines.append("Notes: " + ", ".join(flags))
        lines.append("")
    lines.append("## Curves")
    lines.append("")
    if payload.get("curves") is not None:
        if curves_filename:
            lines.append(f"Curve data written to `{curves_filename}`.")
        npts = len(payload["curves"]["theta"])
        lines.append(f"Grid of {npts} effect values; series (a) equal effects, series (b) shifted per arm.")
        ref = payload["curves"]["reference"]
        lines.append(
            "Reference lines: alpha=" + format_sig(ref["alpha"])
            + ", power=" + format_sig(ref["power_target"])
            + ", delta1=" + format_sig(ref["delta1"])
            + ", delta0=" + format_sig(ref["delta0"]) + "."
        )
    else:
        lines.append("Plotting disabled for this scenario.")
    lines.append("")
    return "\n".join(lines)


def _html_table(header: tuple[str, ...], rows) -> list[str]:
    out = ["<table>", "<thead><tr>" + "".join(f"<th>{html.escape(h)}</th>" for h in header) + "</tr></thead>", "<tbody>"]
    for row in rows:
        out.append("<tr>" + "".join(f"<td>{html.escape(c)}</td>" for c in row) + "</tr>")
    out += ["</tbody>", "</table>"]
    return out


def _render_html(payload: dict, curves_filename: str | None) -> str:
    parts = [
        "<!DOCTYPE html>",
        "<html lang=\"en\">",
        "<head>",
        "<meta charset=\"utf-8\">",
        "<title>Multi-arm trial design report</title>",
        "<style>",
        "body { font-family: sans-serif; margin: 2em; max-width: 60em; }",
        "table { border-collapse: collapse; margin: 0.5em 0 1.5em; }",
        "th, td { border: 1px solid #999; padding: 0.25em 0.75em; text-align: left; }",
        "th { background: #eee; }",
        ".warning { background: #fff3cd; border: 1px solid #b8860b; padding: 0.5em 1em; }",
        "</style>",
        "</head>",
        "<body>",
        "<h1>Multi-arm trial design report</h1>",
    ]
    if payload.get("warnings"):
        parts.append("<div class=\"warning\"><strong>Warnings</strong><ul>")
        for w in payload["warnings"]:
            parts.append(f"<li>{html.escape(w)}</li>")
        parts.append("</ul></div>")
    parts.append("<h2>Inputs</h2>")
    parts += _html_table(("Input", "Value"), _input_rows(payload["scenario"]))
    parts.append("<h2>Design summary</h2>")
    arm_rows, summary = _design_rows(payload)
    parts += _html_table(("Arm", "Sample size", "Ratio"), arm_rows)
    parts += _html_table(("Quantity", "Value"), summary)
    parts.append("<h2>Operating characteristics</h2>")
    for label in _scenario_order(payload["opchars"].keys()):
        parts.append(f"<h3>Scenario {html.escape(label)}</h3>")
        parts += _html_table(("Quantity", "Value"), _opchar_rows(payload["opchars"][label]))
        flags = payload["opchars"][label].get("flags") or []
        if flags:
            parts.append("<p>Notes: " + html.escape(", ".join(flags)) + "</p>")
    parts.append("<h2>Curves</h2>")
    if payload.get("curves") is not None:
        if curves_filename:
            parts.append(f"<p>Curve data written to <code>{html.escape(curves_filename)}</code>.</p>")
        npts = len(payload["curves"]["theta"])
        ref = payload["curves"]["reference"]
        parts.append(
            f"<p>Grid of {npts} effect values; reference lines at alpha="
            + format_sig(ref["alpha"]) + ", power=" + format_sig(ref["power_target"])
            + ", delta1=" + format_sig(ref["delta1"]) + ", delta0=" + format_sig(ref["delta0"]) + ".</p>"
        )
    else:
        parts.append("<p>Plotting disabled for this scenario.</p>")
    parts += ["</body>", "</html>"]
    return "\n".join(parts)
