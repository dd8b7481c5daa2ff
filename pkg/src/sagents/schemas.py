"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field


class RunRequest(BaseModel):
    task: str = Field(examples=["collection:stone:50", "shelter"])
    org: str | dict[str, Any] = "toa:4"
    mode: str = "nonobstructive"
    backend: str = "oracle"
    seed: int = Field(42, ge=0)
    overrides: dict[str, Any] = Field(default_factory=dict)
    include_artifacts: bool = False


class RunResponse(BaseModel):
    report: dict[str, Any]
    events: list[dict[str, Any]] | None = None
    pool: list[dict[str, Any]] | None = None
    world_final: dict[str, Any] | None = None


class ExperimentRequest(BaseModel):
    matrix: dict[str, Any]
    output_dir: str = "runs"
    backend: str = "oracle"


class ExperimentResponse(BaseModel):
    dir: str
    markdown: str
    csv: str
    rows: list[dict[str, Any]]


class OrgRequest(BaseModel):
    org: str | dict[str, Any]


class OrgResponse(BaseModel):
    org: dict[str, Any]
    report: dict[str, Any]


class ReplayRequest(BaseModel):
    events: list[dict[str, Any]]


class ReplayResponse(BaseModel):
    agents: list[str]
    end_tick: int
    success: bool
    nan: bool
    time_cost_min: float | None
    mean_prompt_times: float
    mpt_exact: str
    per_agent_prompts: dict[str, int]
    per_agent_busy_ticks: dict[str, int]


class ErrorResponse(BaseModel):
    error: str
    detail: str
