"""FastAPI service wrapping the experiment layer.

Numerical runs take seconds to minutes, so everything but validation is a
background job: POST /jobs returns an id, GET /jobs/{id} polls, and the
artifacts (snapshots, metrics CSV, reports) are downloadable once done.
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, PlainTextResponse

from .. import __version__
from ..errors import ConfigError, NumericalGateError
from ..experiments import (
    figure1,
    higher_order_correction,
    parametrix_report,
    run,
    scaling_sweep,
    validate_run_config,
)
from .models import (
    ArtifactList,
    HealthResponse,
    JobCreated,
    JobRequest,
    JobStatus,
    ValidateRequest,
    ValidateResponse,
)


class JobStore:
    def __init__(self, workdir: Path, max_workers: int = 1):
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.pool = ThreadPoolExecutor(max_workers=max_workers)
        self.lock = threading.Lock()
        self.jobs: dict[str, dict] = {}

    def submit(self, req: JobRequest) -> str:
        job_id = uuid.uuid4().hex[:12]
        out = self.workdir / job_id
        with self.lock:
            self.jobs[job_id] = {"kind": req.kind, "status": "queued",
                                 "error": None, "summary": None, "dir": out}
        self.pool.submit(self._execute, job_id, req, out)
        return job_id

    def _execute(self, job_id: str, req: JobRequest, out: Path) -> None:
        with self.lock:
            self.jobs[job_id]["status"] = "running"
        try:
            summary = _dispatch(req, out)
            with self.lock:
                self.jobs[job_id].update(status="done", summary=summary)
        except NumericalGateError as exc:
            with self.lock:
                self.jobs[job_id].update(status="failed", error=f"numerical gate: {exc}")
        except Exception as exc:  # config errors, IO, ...
            with self.lock:
                self.jobs[job_id].update(status="failed", error=str(exc))

    def get(self, job_id: str) -> dict:
        with self.lock:
            if job_id not in self.jobs:
                raise KeyError(job_id)
            return dict(self.jobs[job_id])


def _dispatch(req: JobRequest, out: Path) -> dict:
    if req.kind == "run":
        if req.run_config is None:
            raise ConfigError("run job needs run_config")
        art = run(req.run_config, out)
        return {"times": art.times, "trace_dists": art.trace_dists}
    if req.kind == "figure1":
        if req.run_config is None:
            raise ConfigError("figure1 job needs run_config")
        return figure1(req.run_config, out)
    if req.kind == "sweep":
        if req.sweep_config is None:
            raise ConfigError("sweep job needs sweep_config")
        return scaling_sweep(req.sweep_config, out)
    if req.kind == "parametrix":
        if req.parametrix_config is None:
            raise ConfigError("parametrix job needs parametrix_config")
        return parametrix_report(req.parametrix_config, out)
    if req.kind == "correct":
        if req.run_dir is None:
            raise ConfigError("correct job needs run_dir")
        return higher_order_correction(req.run_dir, order=req.correction_order)
    raise ConfigError(f"unknown job kind {req.kind!r}")


def create_app(workdir="./lfplab-jobs", max_workers: int = 1) -> FastAPI:
    app = FastAPI(title="lfplab", version=__version__)
    store = JobStore(Path(workdir), max_workers=max_workers)
    app.state.store = store

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest):
        try:
            warnings = validate_run_config(req.config)
        except (ConfigError, ValueError) as exc:
            return ValidateResponse(valid=False, errors=[str(exc)])
        return ValidateResponse(valid=True, warnings=warnings)

    @app.post("/jobs", response_model=JobCreated)
    def submit(req: JobRequest):
        try:
            return JobCreated(job_id=store.submit(req))
        except (ConfigError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def status(job_id: str):
        try:
            j = store.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown job")
        return JobStatus(job_id=job_id, kind=j["kind"], status=j["status"],
                         error=j["error"], summary=j["summary"])

    @app.get("/jobs/{job_id}/artifacts", response_model=ArtifactList)
    def artifacts(job_id: str):
        try:
            j = store.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown job")
        base: Path = j["dir"]
        files = sorted(str(p.relative_to(base)) for p in base.rglob("*") if p.is_file()) \
            if base.exists() else []
        return ArtifactList(job_id=job_id, files=files)

    @app.get("/jobs/{job_id}/artifacts/{name:path}")
    def artifact(job_id: str, name: str):
        try:
            j = store.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown job")
        path = (j["dir"] / name).resolve()
        if not str(path).startswith(str(j["dir"].resolve())) or not path.is_file():
            raise HTTPException(status_code=404, detail="unknown artifact")
        return FileResponse(path)

    @app.get("/jobs/{job_id}/metrics", response_class=PlainTextResponse)
    def metrics(job_id: str):
        try:
            j = store.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown job")
        path = j["dir"] / "metrics.csv"
        if not path.is_file():
            raise HTTPException(status_code=404, detail="no metrics for this job (yet)")
        return path.read_text(encoding="utf-8")

    return app


app = create_app()
