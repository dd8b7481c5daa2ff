"""HTTP front end over the simulation core."""

from __future__ import annotations

import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .backends import BackendUnavailable, make_backend
from .config import InvalidConfig
from .harness import ExperimentMatrix, InvalidParams, parse_task, run_experiment
from .org_graph import AgentGraph, OrgError, parse_org, validate
from .scheduler import InvalidOrganization, TaskUndefined, collect_metrics, run
from .schemas import (
    ExperimentRequest, ExperimentResponse, OrgRequest, OrgResponse, ReplayRequest, ReplayResponse, RunRequest,
    RunResponse,
)

app = FastAPI(title="sagents", version="0.1.0")

_CLIENT_ERRORS = (InvalidParams, InvalidConfig, OrgError, InvalidOrganization, TaskUndefined)


@app.exception_handler(ValueError)
async def _bad_input(request: Request, exc: ValueError):
    status = 422 if isinstance(exc, _CLIENT_ERRORS) else 400
    return JSONResponse(status_code=status, content={"error": type(exc).__name__, "detail": str(exc)})


@app.exception_handler(BackendUnavailable)
async def _no_backend(request: Request, exc: BackendUnavailable):
    return JSONResponse(status_code=422, content={"error": type(exc).__name__, "detail": str(exc)})


def load_org(spec) -> AgentGraph:
    if isinstance(spec, dict):
        try:
            return AgentGraph.from_dict(spec)
        except (KeyError, IndexError, ValueError) as exc:
            raise OrgError(f"bad organization document: {exc}") from None
    return parse_org(spec)


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/runs", response_model=RunResponse)
def create_run(req: RunRequest) -> RunResponse:
    report = run(load_org(req.org), req.mode, parse_task(req.task), req.seed,
                 backend=make_backend(req.backend), overrides=req.overrides or None)
    if not req.include_artifacts:
        return RunResponse(report=report.to_dict())
    return RunResponse(report=report.to_dict(), events=report.event_log, pool=report.pool,
                       world_final=report.world_final)


@app.post("/experiments", response_model=ExperimentResponse)
def create_experiment(req: ExperimentRequest) -> ExperimentResponse:
    matrix = ExperimentMatrix.from_dict(req.matrix)
    out = run_experiment(matrix, req.output_dir, backend=make_backend(req.backend))
    rows = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()} for r in out["rows"]]
    return ExperimentResponse(dir=out["dir"], markdown=out["markdown"], csv=out["csv"], rows=rows)


@app.post("/orgs/validate", response_model=OrgResponse)
def validate_org(req: OrgRequest) -> OrgResponse:
    graph = load_org(req.org)
    return OrgResponse(org=graph.to_dict(), report=validate(graph).to_dict())


@app.post("/replay", response_model=ReplayResponse)
def replay_events(req: ReplayRequest) -> ReplayResponse:
    m = collect_metrics(req.events)
    return ReplayResponse(
        agents=m.agents, end_tick=m.end_tick, success=m.success, nan=m.nan,
        time_cost_min=None if math.isnan(m.time_cost_min) else m.time_cost_min,
        mean_prompt_times=float(m.mpt), mpt_exact=str(m.mpt),
        per_agent_prompts=m.prompts, per_agent_busy_ticks=m.busy,
    )
