"""HTTP service exposing design resolution, simulation, and curves.

Requests and results use the same wire schema as the CLI files, so the
two transports produce byte-identical canonical payloads.  Cheap
scenarios (single-step correction, small K) resolve synchronously;
everything else runs as a job on a worker pool keyed by the scenario
content, which makes repeated submissions idempotent.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import click
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, ConfigDict, Field

from armdesign.errors import InputError, NumericError
from armdesign.fileio import write_atomic
from armdesign.models import SampleSizes, named_scenarios, truth_vector, z_law
from armdesign.opchar import curves as compute_curves, opchars_from_pmf, outcome_pmf, simulate_trials
from armdesign.report import render_report
from armdesign.schema import (
    ScenarioDoc,
    build_scenario,
    canonical_json,
    default_doc,
    design_payload,
    health_payload,
    scenario_payload,
    simulation_file_payload,
    simulation_payload,
    sizes_payload,
    thresholds_from_design,
)
from armdesign.search import resolve_design, runtime_warnings


@dataclass(frozen=True)
class ServiceConfig:
    """Deployment knobs: sync/async policy, workers, persistence."""

    fast_path_max_k: int = 3
    workers: int = 4
    persistence_path: Path | None = None


@dataclass
class JobRecord:
    id: str
    state: str  # queued | running | done | failed
    scenario: dict
    warnings: list[str]
    created: float
    finished: float | None = None
    result: dict | None = None
    error: dict | None = None

    def view(self) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "created": self.created,
            "finished": self.finished,
            "warnings": self.warnings,
            "result": self.result,
            "error": self.error,
        }


@dataclass
class JobStore:
    """The only shared mutable state; all access goes through the lock."""

    persistence_path: Path | None = None
    jobs: dict[str, JobRecord] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def load(self) -> None:
        if self.persistence_path is None or not Path(self.persistence_path).exists():
            return
        raw = json.loads(Path(self.persistence_path).read_text(encoding="utf-8"))
        with self.lock:
            for item in raw.get("jobs", []):
                rec = JobRecord(**item)
                if rec.state in ("done", "failed"):
                    self.jobs[rec.id] = rec

    def persist(self) -> None:
        if self.persistence_path is None:
            return
        with self.lock:
            finished = [
                rec.view() | {"scenario": rec.scenario}
                for rec in self.jobs.values()
                if rec.state in ("done", "failed")
            ]
        write_atomic(Path(self.persistence_path), canonical_json({"jobs": finished}) + "\n")


class SizesSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n0: float = Field(gt=0)
    n: list[float]


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioDoc
    sizes: SizesSpec | None = None
    gammas: list[float] | None = None
    replicates: int = Field(default=100_000, ge=1000)
    seed: int = 1


class CurvesRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioDoc
    sizes: SizesSpec | None = None
    gammas: list[float] | None = None
    quality: int | None = Field(default=None, ge=10, le=500)


class ReportRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    result: dict
    format: str = Field(default="md", pattern="^(md|html)$")
    filename: str = "report"


def _scenario_job_id(doc: ScenarioDoc) -> str:
    digest = hashlib.sha256(canonical_json(scenario_payload(doc)).encode()).hexdigest()
    return digest[:32]


def _resolve_payload(doc: ScenarioDoc) -> dict:
    scenario = build_scenario(doc)
    result = resolve_design(scenario, settings=doc.engine_settings())
    return design_payload(result, doc)


def _design_for_request(doc: ScenarioDoc, sizes: SizesSpec | None, gammas: list[float] | None):
    """Sizes and thresholds for simulate/curves: from the request when
    given, otherwise by resolving the design here."""
    scenario = build_scenario(doc)
    settings = doc.engine_settings()
    if sizes is not None and gammas is not None:
        from armdesign.corrections import ThresholdSet

        return scenario, settings, SampleSizes(n0=sizes.n0, n=tuple(sizes.n)), ThresholdSet(
            gammas=tuple(gammas), alpha=doc.alpha
        )
    if sizes is not None or gammas is not None:
        raise InputError("sizes and gammas must be provided together (or both omitted)")
    design = resolve_design(scenario, settings=settings).design
    return scenario, settings, design.sizes, design.thresholds


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="armdesign", docs_url=None, redoc_url=None)
    store = JobStore(persistence_path=config.persistence_path)
    store.load()
    executor = ThreadPoolExecutor(max_workers=config.workers, thread_name_prefix="armdesign-job")
    app.state.store = store
    app.state.config = config

    def run_job(job_id: str, doc: ScenarioDoc) -> None:
        with store.lock:
            rec = store.jobs.get(job_id)
            if rec is None or rec.state != "queued":
                return
            rec.state = "running"
        try:
            payload = _resolve_payload(doc)
            with store.lock:
                rec.result = payload
                rec.state = "done"
                rec.finished = time.time()
        except Exception as exc:  # recorded on the job, not raised to any client
            with store.lock:
                rec.error = {"type": type(exc).__name__, "message": str(exc)}
                rec.state = "failed"
                rec.finished = time.time()
        store.persist()

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(_req: Request, exc: RequestValidationError):
        errors = [
            {"loc": [str(p) for p in err["loc"]], "msg": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"errors": errors})

    @app.exception_handler(InputError)
    async def on_input_error(_req: Request, exc: InputError):
        return JSONResponse(status_code=400, content={"errors": [{"loc": [], "msg": str(exc)}]})

    @app.exception_handler(NumericError)
    async def on_numeric_error(_req: Request, exc: NumericError):
        return JSONResponse(status_code=422, content={"errors": [{"loc": [], "msg": str(exc)}]})

    @app.get("/v1/health")
    def health() -> dict:
        return health_payload()

    @app.get("/v1/defaults")
    def defaults() -> dict:
        return scenario_payload(default_doc())

    @app.post("/v1/designs")
    def post_design(doc: ScenarioDoc):
        scenario = build_scenario(doc)  # raises InputError -> 400
        warnings = list(runtime_warnings(scenario))
        job_id = _scenario_job_id(doc)

        with store.lock:
            existing = store.jobs.get(job_id)
            if existing is not None:
                view = existing.view()
                status = 200 if existing.state == "done" else 202
                return JSONResponse(status_code=status, content=view)
            fast = (not scenario.mcc.is_stepwise) and scenario.model.k <= config.fast_path_max_k
            rec = JobRecord(
                id=job_id,
                state="queued",
                scenario=scenario_payload(doc),
                warnings=warnings,
                created=time.time(),
            )
            store.jobs[job_id] = rec

        if fast:
            with store.lock:
                rec.state = "running"
            try:
                payload = _resolve_payload(doc)
            except Exception as exc:
                with store.lock:
                    rec.state = "failed"
                    rec.error = {"type": type(exc).__name__, "message": str(exc)}
                    rec.finished = time.time()
                store.persist()
                raise  # InputError -> 400, NumericError -> 422 via handlers
            with store.lock:
                rec.state = "done"
                rec.result = payload
                rec.finished = time.time()
                view = rec.view()
            store.persist()
            return JSONResponse(status_code=200, content=view)
        executor.submit(run_job, job_id, doc)
        with store.lock:
            view = store.jobs[job_id].view()
        return JSONResponse(status_code=202, content={k: view[k] for k in ("id", "state", "created", "warnings")})

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str):
        with store.lock:
            rec = store.jobs.get(job_id)
            if rec is None:
                return JSONResponse(status_code=404, content={"errors": [{"loc": ["job_id"], "msg": f"unknown job {job_id}"}]})
            return rec.view()

    @app.post("/v1/simulate")
    def post_simulate(req: SimulateRequest):
        scenario, settings, sizes, thr = _design_for_request(req.scenario, req.sizes, req.gammas)
        sizes_int = sizes if sizes.is_integer else sizes.rounded_up()
        per: dict[str, dict] = {}
        for sc in named_scenarios(scenario.model, scenario.delta1, scenario.delta0):
            sim = simulate_trials(
                scenario.model, sizes_int, sc, scenario.mcc, scenario.alpha,
                req.replicates, req.seed, thr=thr, settings=settings,
            )
            law = z_law(scenario.model, sizes_int, sc)
            pmf = outcome_pmf(law, scenario.mcc, scenario.alpha, settings=settings, thr=thr)
            per[sc.name()] = simulation_payload(sim, opchars_from_pmf(pmf, truth_vector(scenario.model, sc)))
        return simulation_file_payload(per, req.replicates, req.seed, sizes_int)

    @app.post("/v1/curves")
    def post_curves(req: CurvesRequest):
        scenario, settings, sizes, thr = _design_for_request(req.scenario, req.sizes, req.gammas)
        data = compute_curves(
            scenario.model, sizes, scenario.mcc, scenario.alpha,
            scenario.delta1, scenario.delta0,
            req.quality if req.quality is not None else scenario.plot_quality,
            power_target=1.0 - scenario.beta,
            settings=settings, thr=thr,
        )
        from armdesign.schema import curves_payload

        return {"curves": curves_payload(data), "csv": data.to_csv()}

    @app.post("/v1/report")
    def post_report(req: ReportRequest):
        for key in ("scenario", "design", "opchars"):
            if key not in req.result:
                raise InputError(f"report payload is missing the '{key}' section")
        text = render_report(req.result, req.format)
        stem = Path(req.filename).name or "report"
        media = "text/markdown" if req.format == "md" else "text/html"
        return Response(
            content=text,
            media_type=f"{media}; charset=utf-8",
            headers={"Content-Disposition": f'attachment; filename="{stem}.{req.format}"'},
        )

    return app


@click.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--workers", type=int, default=4, show_default=True, help="Job worker threads.")
@click.option("--fast-path-k", type=int, default=3, show_default=True, help="Max K for synchronous responses.")
@click.option("--persist", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Job-store persistence file.")
def main(host: str, port: int, workers: int, fast_path_k: int, persist: Path | None) -> None:
    """Run the design service under uvicorn."""
    import uvicorn

    app = create_app(ServiceConfig(fast_path_max_k=fast_path_k, workers=workers, persistence_path=persist))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
