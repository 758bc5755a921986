"""Wire schema shared by the CLI scenario/design files and the HTTP API.

One schema, two transports: scenario documents are JSON with keys
mirroring the design-scenario domain type plus a version field.
Unknown keys are rejected and all validation problems are reported
together with their key paths.
"""

from __future__ import annotations

import json
import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from armdesign import __version__
from armdesign.corrections import Mcc, ThresholdSet
from armdesign.errors import InputError
from armdesign.models import SampleSizes, bernoulli_model, normal_model
from armdesign.mvn import QmcSettings
from armdesign.opchar import CurveData, OpChars, SimulationResult
from armdesign.search import (
    Allocation,
    AllocationKind,
    DesignResult,
    DesignScenario,
    PowerGoal,
)

SCHEMA_VERSION = 1

_MCC_IDS = tuple(m.value for m in Mcc)
_GOAL_IDS = tuple(g.value for g in PowerGoal)
_ALLOC_IDS = tuple(a.value for a in AllocationKind)


class ModelSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["normal", "bernoulli"]
    k: int = Field(ge=1, le=5)
    sigmas: list[float] | None = None
    pi0: float | None = None

    @model_validator(mode="after")
    def _check_kind_fields(self) -> "ModelSpec":
        problems = []
        if self.kind == "normal":
            if self.sigmas is None:
                problems.append("model.sigmas is required for normal outcomes")
            elif len(self.sigmas) != self.k + 1:
                problems.append(f"model.sigmas needs {self.k + 1} entries (control first)")
            if self.pi0 is not None:
                problems.append("model.pi0 is only valid for bernoulli outcomes")
        else:
            if self.pi0 is None:
                problems.append("model.pi0 is required for bernoulli outcomes")
            if self.sigmas is not None:
                problems.append("model.sigmas is only valid for normal outcomes")
        if problems:
            raise ValueError("; ".join(problems))
        return self


class AllocationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["fixed", "a_optimal", "d_optimal", "e_optimal"]
    ratios: list[float] | None = None

    @model_validator(mode="after")
    def _check_ratios(self) -> "AllocationSpec":
        if self.kind == "fixed" and self.ratios is None:
            raise ValueError("allocation.ratios is required when allocation.kind is fixed")
        if self.kind != "fixed" and self.ratios is not None:
            raise ValueError("allocation.ratios is only valid when allocation.kind is fixed")
        return self


class PlotSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    quality: int = Field(default=100, ge=10, le=500)


class EngineSpec(BaseModel):
    """Optional numerical-engine knobs (documented extension keys)."""

    model_config = ConfigDict(extra="forbid")

    points_log2: int = Field(default=16, ge=10, le=24)
    randomizations: int = Field(default=8, ge=1, le=64)
    seed: int = 0

    def to_settings(self) -> QmcSettings:
        return QmcSettings(
            points_log2=self.points_log2,
            randomizations=self.randomizations,
            seed=self.seed,
        )


class ScenarioDoc(BaseModel):
    """The scenario document: one schema for files and request bodies."""

    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = SCHEMA_VERSION
    model: ModelSpec
    alpha: float = Field(gt=0.0, lt=1.0)
    beta: float = Field(gt=0.0, lt=1.0)
    delta1: float
    delta0: float
    mcc: Literal[
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
    ]
    power_goal: Literal["conjunctive_ha", "disjunctive_ha", "min_marginal_lfc"]
    allocation: AllocationSpec
    assumed_pis: list[float] | None = None
    integer_n: bool = False
    plot: PlotSpec = Field(default_factory=PlotSpec)
    engine: EngineSpec | None = None

    @model_validator(mode="after")
    def _check_cross_fields(self) -> "ScenarioDoc":
        problems = []
        if not self.delta0 < self.delta1:
            problems.append(
                f"delta0 must be strictly below delta1, got delta0={self.delta0}, delta1={self.delta1}"
            )
        if self.delta1 <= 0:
            problems.append(f"delta1 must be positive, got delta1={self.delta1}")
        if self.allocation.kind == "fixed" and self.allocation.ratios is not None:
            if len(self.allocation.ratios) != self.model.k:
                problems.append(
                    f"allocation.ratios needs {self.model.k} entries, got {len(self.allocation.ratios)}"
                )
        if self.assumed_pis is not None and len(self.assumed_pis) != self.model.k:
            problems.append(
                f"assumed_pis needs {self.model.k} entries, got {len(self.assumed_pis)}"
            )
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def engine_settings(self) -> QmcSettings:
        return (self.engine or EngineSpec()).to_settings()


def build_scenario(doc: ScenarioDoc) -> DesignScenario:
    """Construct the validated domain scenario from a wire document."""
    if doc.model.kind == "normal":
        model = normal_model(doc.model.sigmas)
        if model.k != doc.model.k:
            raise InputError(f"model.k={doc.model.k} but sigmas imply k={model.k}")
    else:
        model = bernoulli_model(doc.model.k, doc.model.pi0)
    if doc.allocation.kind == "fixed":
        allocation = Allocation.fixed(doc.allocation.ratios)
    else:
        allocation = Allocation(AllocationKind(doc.allocation.kind))
    return DesignScenario(
        model=model,
        alpha=doc.alpha,
        beta=doc.beta,
        delta1=doc.delta1,
        delta0=doc.delta0,
        mcc=Mcc(doc.mcc),
        power_goal=PowerGoal(doc.power_goal),
        allocation=allocation,
        assumed_pis=tuple(doc.assumed_pis) if doc.assumed_pis is not None else None,
        integer_n=doc.integer_n,
        plot_enabled=doc.plot.enabled,
        plot_quality=doc.plot.quality,
    )


def default_doc() -> ScenarioDoc:
    """The default worked-example scenario used by reset affordances."""
    return ScenarioDoc(
        version=SCHEMA_VERSION,
        model=ModelSpec(kind="bernoulli", k=2, pi0=0.3),
        alpha=0.15,
        beta=0.2,
        delta1=0.15,
        delta0=0.0,
        mcc="dunnett",
        power_goal="min_marginal_lfc",
        allocation=AllocationSpec(kind="fixed", ratios=[1.0, 1.0]),
        assumed_pis=None,
        integer_n=False,
        plot=PlotSpec(enabled=True, quality=100),
    )


def _jsonable(obj):
    """Recursively convert payloads to plain JSON types; NaN becomes null."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) or math.isinf(f) else f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json(payload: dict) -> str:
    """Stable serialization: sorted keys, compact separators, no NaN."""
    return json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"), allow_nan=False)


def scenario_payload(doc: ScenarioDoc) -> dict:
    return _jsonable(doc.model_dump(mode="json"))


def sizes_payload(sizes: SampleSizes) -> dict:
    return {"n0": float(sizes.n0), "n": [float(x) for x in sizes.n], "total": float(sizes.total)}


def curves_payload(curve: CurveData) -> dict:
    series = []
    for name, vals in curve.series_a.items():
        base, arm = _series_name(name)
        series.append({"quantity": base, "arm": arm, "series": "a", "values": _jsonable(vals)})
    for name, vals in curve.series_b.items():
        base, arm = _series_name(name)
        series.append({"quantity": base, "arm": arm, "series": "b", "values": _jsonable(vals)})
    return {
        "theta": _jsonable(curve.theta_grid),
        "series": series,
        "reference": _jsonable(curve.reference),
    }


def _series_name(name: str) -> tuple[str, int | None]:
    if name.startswith("marginal_power_"):
        return "marginal_power", int(name.rsplit("_", 1)[1])
    return name, None


def design_payload(result: DesignResult, doc: ScenarioDoc) -> dict:
    """The design-file / API-result payload for a resolved design."""
    d = result.design
    payload = {
        "version": SCHEMA_VERSION,
        "scenario": scenario_payload(doc),
        "design": {
            "sizes": sizes_payload(d.sizes),
            "ratios": [float(r) for r in d.ratios],
            "total_n": float(d.total_n),
            "achieved_power": float(d.achieved_power),
            "power_target": float(1.0 - d.scenario.beta),
            "gammas": [float(g) for g in d.thresholds.gammas],
            "alpha": float(d.thresholds.alpha),
        },
        "opchars": {label: oc.as_dict() for label, oc in result.opchars.items()},
        "curves": curves_payload(result.curve_data) if result.curve_data is not None else None,
        "warnings": list(result.warnings),
    }
    return _jsonable(payload)


def simulation_payload(sim: SimulationResult, analytic: OpChars) -> dict:
    """One scenario's empirical results beside the analytic values."""
    diffs = opchar_differences(sim.opchars, analytic)
    payload = {
        "opchars": sim.opchars.as_dict(),
        "std_errors": sim.std_errors.as_dict(),
        "analytic": analytic.as_dict(),
        "differences": diffs,
        "max_abs_difference": max(v for v in diffs.values() if v is not None),
    }
    return _jsonable(payload)


def simulation_file_payload(
    per_scenario: dict[str, dict], replicates: int, seed: int, sizes: SampleSizes
) -> dict:
    """The simulation output file: per-scenario blocks plus the overall
    maximum absolute difference against the analytic engine."""
    overall = max(block["max_abs_difference"] for block in per_scenario.values())
    return _jsonable(
        {
            "version": SCHEMA_VERSION,
            "replicates": replicates,
            "seed": seed,
            "sizes": sizes_payload(sizes),
            "scenarios": per_scenario,
            "max_abs_difference": overall,
        }
    )


def opchar_differences(a: OpChars, b: OpChars) -> dict[str, float | None]:
    """Per-quantity absolute differences; None where either side is undefined."""
    out: dict[str, float | None] = {
        "p_con": abs(a.p_con - b.p_con),
        "p_dis": abs(a.p_dis - b.p_dis),
        "pher": abs(a.pher - b.pher),
        "fdr": abs(a.fdr - b.fdr),
        "fndr": abs(a.fndr - b.fndr),
        "sensitivity": abs(a.sensitivity - b.sensitivity),
        "specificity": abs(a.specificity - b.specificity),
    }
    if math.isnan(a.pfdr) or math.isnan(b.pfdr):
        out["pfdr"] = None
    else:
        out["pfdr"] = abs(a.pfdr - b.pfdr)
    for j, (x, y) in enumerate(zip(a.p_marginal, b.p_marginal), start=1):
        out[f"p_{j}"] = abs(x - y)
    for j, (x, y) in enumerate(zip(a.fwer_i, b.fwer_i), start=1):
        out[f"fwer_i_{j}"] = abs(x - y)
    for j, (x, y) in enumerate(zip(a.fwer_ii, b.fwer_ii), start=1):
        out[f"fwer_ii_{j}"] = abs(x - y)
    return out


def thresholds_from_design(payload: dict) -> ThresholdSet:
    block = payload["design"]
    return ThresholdSet(gammas=tuple(block["gammas"]), alpha=float(block["alpha"]))


def sizes_from_design(payload: dict) -> SampleSizes:
    block = payload["design"]["sizes"]
    return SampleSizes(n0=float(block["n0"]), n=tuple(float(x) for x in block["n"]))


def health_payload() -> dict:
    return {"status": "ok", "version": __version__, "schema_version": SCHEMA_VERSION}
