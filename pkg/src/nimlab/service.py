"""FastAPI service wrapping the experiment runners.

Endpoints:

* ``GET  /healthz``           -- liveness and version
* ``GET  /subcommands``       -- available experiments with default configs
* ``GET  /schema/summary``    -- versioned JSON schema of the run summary
* ``POST /run/{subcommand}``  -- run an experiment; body carries config
                                 overrides, response is the summary

Runs execute synchronously (desk-scale experiments, minutes at most); clients
should disable their read timeout.  Artifacts are written server-side under
the configured output directory.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .experiments import ConfigError, SolverFailure, SUBCOMMANDS, default_config, run
from .experiments.config import load_config
from .experiments.runner import SCHEMA_VERSION

app = FastAPI(title="nimlab", version=__version__)


class CriterionModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    criterion: str
    measured: float
    threshold: str
    pass_: bool = Field(alias="pass")


class SummaryModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="allow")

    schema_version: int
    subcommand: str
    pass_: bool = Field(alias="pass")
    runtime_seconds: float
    criteria: list[CriterionModel]
    artifacts: list[str]
    config: dict


class RunRequest(BaseModel):
    """Partial config; unset fields fall back to the acceptance defaults."""

    overrides: dict = Field(default_factory=dict)


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok", "version": __version__, "schema_version": SCHEMA_VERSION}


@app.get("/subcommands")
def subcommands() -> dict:
    return {
        name: default_config(name).model_dump(mode="json") for name in SUBCOMMANDS
    }


@app.get("/schema/summary")
def summary_schema() -> dict:
    schema = SummaryModel.model_json_schema(by_alias=True)
    schema["x-schema-version"] = SCHEMA_VERSION
    return schema


@app.post("/run/{subcommand}", response_model=SummaryModel)
def run_experiment(subcommand: str, request: Optional[RunRequest] = None):
    if subcommand not in SUBCOMMANDS:
        raise HTTPException(status_code=404, detail=f"unknown subcommand '{subcommand}'")
    try:
        cfg = load_config(subcommand, request.overrides if request else None)
        summary = run(subcommand, cfg)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except SolverFailure as exc:
        raise HTTPException(
            status_code=500, detail={"error_kind": "solver", "message": str(exc)}
        )
    return summary
