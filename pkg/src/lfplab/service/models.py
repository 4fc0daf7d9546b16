"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict

from ..experiments.config import ParametrixCaseConfig, RunConfig, SweepConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(_Strict):
    status: str
    version: str


class ValidateRequest(_Strict):
    config: RunConfig


class ValidateResponse(_Strict):
    valid: bool
    errors: list[str] = []
    warnings: list[str] = []


class JobRequest(_Strict):
    kind: Literal["run", "sweep", "correct", "parametrix", "figure1"]
    run_config: RunConfig | None = None
    sweep_config: SweepConfig | None = None
    parametrix_config: ParametrixCaseConfig | None = None
    run_dir: str | None = None  # for "correct": an existing run's artifacts
    correction_order: int = 2


class JobCreated(_Strict):
    job_id: str


class JobStatus(_Strict):
    job_id: str
    kind: str
    status: Literal["queued", "running", "done", "failed"]
    error: str | None = None
    summary: dict | None = None


class ArtifactList(_Strict):
    job_id: str
    files: list[str]
