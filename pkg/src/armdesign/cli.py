"""Command-line front end: design, simulate, curves, defaults.

Scenario files are JSON documents following the wire schema.  Exit
codes: 0 success, 2 validation error, 3 numeric or I/O error.  All
output files are written atomically.
"""

from __future__ import annotations

import contextlib
import functools
import json
import sys
from pathlib import Path

import click
from pydantic import ValidationError

from armdesign.corrections import Mcc
from armdesign.errors import InputError, NumericError
from armdesign.fileio import write_atomic
from armdesign.models import named_scenarios, truth_vector, z_law
from armdesign.opchar import (
    curves as compute_curves,
    opchars_from_pmf,
    outcome_pmf,
    simulate_trials,
)
from armdesign.schema import (
    ScenarioDoc,
    build_scenario,
    canonical_json,
    default_doc,
    design_payload,
    scenario_payload,
    simulation_file_payload,
    simulation_payload,
    sizes_from_design,
    thresholds_from_design,
)
from armdesign.search import resolve_design, runtime_warnings


def _format_validation(exc: ValidationError) -> str:
    lines = ["scenario validation failed:"]
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "(document)"
        lines.append(f"  {loc}: {err['msg']}")
    return "\n".join(lines)


def _handle_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ValidationError as exc:
            click.echo(_format_validation(exc), err=True)
            sys.exit(2)
        except json.JSONDecodeError as exc:
            click.echo(f"scenario parse error: {exc}", err=True)
            sys.exit(2)
        except InputError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NumericError as exc:
            click.echo(f"numeric error: {exc}", err=True)
            sys.exit(3)
        except OSError as exc:
            click.echo(f"i/o error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _limit_threads(threads: int | None):
    if threads is None:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        click.echo("threadpoolctl is not installed; --threads has no effect", err=True)
        return contextlib.nullcontext()
    return threadpool_limits(limits=threads)


def _load_doc(path: Path) -> ScenarioDoc:
    text = Path(path).read_text(encoding="utf-8")
    return ScenarioDoc.model_validate(json.loads(text))


def _load_design_file(path: Path) -> dict:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("scenario", "design"):
        if key not in payload:
            raise InputError(f"design file {path} is missing the '{key}' section")
    return payload


def _apply_overrides(doc: ScenarioDoc, seed: int | None, quality: int | None, integer_n: bool) -> ScenarioDoc:
    update = {}
    if integer_n:
        update["integer_n"] = True
    if quality is not None:
        update["plot"] = doc.plot.model_copy(update={"quality": quality})
    if seed is not None:
        engine = doc.engine.model_copy(update={"seed": seed}) if doc.engine else None
        if engine is None:
            from armdesign.schema import EngineSpec

            engine = EngineSpec(seed=seed)
        update["engine"] = engine
    return doc.model_copy(update=update) if update else doc


@click.group()
@click.version_option(package_name="armdesign")
def main() -> None:
    """Multi-arm trial design: sample size, error rates, and power."""


@main.command("design")
@click.argument("scenario_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.option("--format", "fmt", type=click.Choice(["md", "html"]), default="md", show_default=True, help="Report format.")
@click.option("--seed", type=int, default=None, help="Numerical-engine seed.")
@click.option("--quality", type=int, default=None, help="Override plot grid size (10-500).")
@click.option("--integer-n", is_flag=True, help="Round sample sizes up to integers.")
@click.option("--threads", type=int, default=None, help="Cap BLAS thread count.")
@_handle_errors
def cmd_design(scenario_path: Path, out: Path, fmt: str, seed: int | None, quality: int | None, integer_n: bool, threads: int | None) -> None:
    """Resolve a design: sizes, thresholds, tables, and curves."""
    doc = _apply_overrides(_load_doc(scenario_path), seed, quality, integer_n)
    scenario = build_scenario(doc)
    for warning in runtime_warnings(scenario):
        click.echo(f"warning: {warning}", err=True)
    with _limit_threads(threads):
        result = resolve_design(scenario, settings=doc.engine_settings())
    payload = design_payload(result, doc)

    out.mkdir(parents=True, exist_ok=True)
    design_path = out / "design.json"
    write_atomic(design_path, canonical_json(payload) + "\n")
    curves_name = None
    if result.curve_data is not None:
        curves_name = "curves.csv"
        write_atomic(out / curves_name, result.curve_data.to_csv())
    from armdesign.report import render_report

    report_path = out / f"report.{fmt}"
    write_atomic(report_path, render_report(payload, fmt, curves_filename=curves_name))
    click.echo(f"design written to {design_path}")
    click.echo(f"report written to {report_path}")
    if curves_name:
        click.echo(f"curves written to {out / curves_name}")


@main.command("simulate")
@click.argument("scenario_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("design_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.option("--replicates", type=int, default=100_000, show_default=True, help="Simulation replicates (>= 1000).")
@click.option("--seed", type=int, default=1, show_default=True, help="Simulation seed.")
@click.option("--threads", type=int, default=None, help="Cap BLAS thread count.")
@_handle_errors
def cmd_simulate(scenario_path: Path, design_path: Path, out: Path, replicates: int, seed: int, threads: int | None) -> None:
    """Check a resolved design by patient-level trial simulation.

    Simulates every named truth scenario (global null, global
    alternative, each least-favourable configuration) and reports the
    maximum absolute difference against the analytic engine.
    """
    doc = _load_doc(scenario_path)
    scenario = build_scenario(doc)
    design_file = _load_design_file(design_path)
    sizes = sizes_from_design(design_file)
    thr = thresholds_from_design(design_file)
    settings = doc.engine_settings()
    sizes_int = sizes if sizes.is_integer else sizes.rounded_up()

    per: dict[str, dict] = {}
    with _limit_threads(threads):
        for sc in named_scenarios(scenario.model, scenario.delta1, scenario.delta0):
            sim = simulate_trials(
                scenario.model, sizes_int, sc, scenario.mcc, scenario.alpha,
                replicates, seed, thr=thr, settings=settings,
            )
            # analytic reference at the same integer sizes the simulator used
            law = z_law(scenario.model, sizes_int, sc)
            pmf = outcome_pmf(law, scenario.mcc, scenario.alpha, settings=settings, thr=thr)
            analytic = opchars_from_pmf(pmf, truth_vector(scenario.model, sc))
            per[sc.name()] = simulation_payload(sim, analytic)

    payload = simulation_file_payload(per, replicates, seed, sizes_int)
    out.mkdir(parents=True, exist_ok=True)
    sim_path = out / "simulation.json"
    write_atomic(sim_path, canonical_json(payload) + "\n")
    click.echo(f"simulation written to {sim_path}")
    click.echo(f"max abs difference vs analytic: {payload['max_abs_difference']:.6f}")


@main.command("curves")
@click.argument("scenario_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("design_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.option("--quality", type=int, default=None, help="Override plot grid size (10-500).")
@click.option("--threads", type=int, default=None, help="Cap BLAS thread count.")
@_handle_errors
def cmd_curves(scenario_path: Path, design_path: Path, out: Path, quality: int | None, threads: int | None) -> None:
    """Emit the operating-characteristic curve CSV for a design."""
    doc = _load_doc(scenario_path)
    scenario = build_scenario(doc)
    design_file = _load_design_file(design_path)
    sizes = sizes_from_design(design_file)
    thr = thresholds_from_design(design_file)
    with _limit_threads(threads):
        data = compute_curves(
            scenario.model, sizes, scenario.mcc, scenario.alpha,
            scenario.delta1, scenario.delta0,
            quality if quality is not None else scenario.plot_quality,
            power_target=1.0 - scenario.beta,
            settings=doc.engine_settings(), thr=thr,
        )
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "curves.csv"
    write_atomic(csv_path, data.to_csv())
    click.echo(f"curves written to {csv_path}")


@main.command("defaults")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Write to a file instead of stdout.")
@_handle_errors
def cmd_defaults(out: Path | None) -> None:
    """Emit the default scenario file (the worked-example inputs)."""
    text = json.dumps(scenario_payload(default_doc()), indent=2) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        write_atomic(out, text)
        click.echo(f"defaults written to {out}")


# referenced from help text; keeps the exact wire ids discoverable
MCC_CHOICES = tuple(m.value for m in Mcc)

if __name__ == "__main__":
    main()
