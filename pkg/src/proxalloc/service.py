"""HTTP surface for the simulator: scenario validation/diagnostics,
flow runs, and cross-variant/oracle comparison.

The service is stateless; every request carries a full scenario document
(same schema as the CLI config files).  Run `uvicorn proxalloc.service:app`
or `proxalloc serve`; the CLI talks to this app in-process by default.
"""

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import parse_scenario
from .errors import ProxAllocError
from .runner import (check_scenario, compare_scenario, run_scenario,
                     summary_document)


class ScenarioRequest(BaseModel):
    scenario: dict = Field(description="Scenario document (schema 1)")
    mode: Optional[str] = Field(default=None, description="Override the run mode")
    force: bool = Field(default=False, description="Run despite invalid parameters")


class RunArtifactModel(BaseModel):
    mode: str
    status: str
    summary: dict
    trajectory_csv: str


class RunResponse(BaseModel):
    name: str
    exit_code: int
    warnings: list[str]
    error: Optional[str] = None
    runs: list[RunArtifactModel]
    summary_document: dict


class CheckResponse(BaseModel):
    name: str
    assumptions: dict
    spectral: dict
    params: dict
    warnings: list[str]
    normalized: dict


class CompareResponse(BaseModel):
    name: str
    exit_code: int
    warnings: list[str]
    error: Optional[str] = None
    runs: list[RunArtifactModel]
    compare: Optional[dict] = None
    summary_document: dict


class HealthResponse(BaseModel):
    status: str
    version: str


def _parse(doc):
    try:
        return parse_scenario(doc)
    except ProxAllocError as e:
        raise HTTPException(status_code=400, detail=str(e)) from e


def _artifacts(outcome):
    return [RunArtifactModel(mode=r.mode, status=r.status, summary=r.summary,
                             trajectory_csv=r.csv) for r in outcome.runs]


def create_app() -> FastAPI:
    app = FastAPI(title="proxalloc", version=__version__,
                  description="Distributed nonsmooth resource allocation flows")

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/check", response_model=CheckResponse)
    def check(req: ScenarioRequest):
        scn = _parse(req.scenario)
        report = check_scenario(scn)
        return CheckResponse(**report)

    @app.post("/run", response_model=RunResponse)
    def run(req: ScenarioRequest):
        scn = _parse(req.scenario)
        if req.mode is not None and req.mode not in ("known_h", "estimator", "both"):
            raise HTTPException(status_code=400, detail=f"unknown mode {req.mode!r}")
        try:
            outcome = run_scenario(scn, mode=req.mode, force=req.force)
        except ProxAllocError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        return RunResponse(name=outcome.name, exit_code=outcome.exit_code,
                           warnings=outcome.warnings, error=outcome.error,
                           runs=_artifacts(outcome),
                           summary_document=summary_document(scn, outcome))

    @app.post("/compare", response_model=CompareResponse)
    def compare(req: ScenarioRequest):
        scn = _parse(req.scenario)
        try:
            outcome = compare_scenario(scn, force=req.force)
        except ProxAllocError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        return CompareResponse(name=outcome.name, exit_code=outcome.exit_code,
                               warnings=outcome.warnings, error=outcome.error,
                               runs=_artifacts(outcome), compare=outcome.compare,
                               summary_document=summary_document(scn, outcome))

    return app


app = create_app()
