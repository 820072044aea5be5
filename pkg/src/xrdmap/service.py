"""HTTP session for interactive phase merging.

One server holds one dataset and one result.  Reads are concurrent; every
mutation (merge, undo, recompute) is serialized under a single lock, and
the visible state is always the lineage replay from the initial result.
Recompute runs on a worker thread and is polled by job id; mutations
arriving while a job runs are rejected with 409 so the lineage stays
linear.
"""
from __future__ import annotations

import dataclasses
import threading
from datetime import datetime, timezone
from typing import Sequence

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .core import ParameterError, PhaseId, PhaseMapResult, QGrid, XrdMapError, XrdSample
from .io import plot_data, result_to_jsonable
from .merge import manual_merge, replay_lineage
from .phasemap import PhaseMapParams, run_incremental_phase_mapping
from .signal import BinarizationParams, detect_peaks, preprocess

__all__ = ["SessionState", "create_app"]


class SessionState:
    """Initial result plus the lineage-replayable current view, and job slots."""

    def __init__(
        self,
        result: PhaseMapResult,
        grid: QGrid | None = None,
        samples: Sequence[XrdSample] | None = None,
    ):
        self.initial = result.clone()
        self.current = result.clone()
        self.grid = grid
        self.samples = list(samples) if samples is not None else None
        self.lock = threading.Lock()
        self.jobs: dict[str, dict] = {}
        self.active_job: str | None = None
        self._job_counter = 0

    def new_job(self, params: dict) -> dict:
        self._job_counter += 1
        job = {"id": f"job-{self._job_counter}", "status": "queued", "error": None, "params": params}
        self.jobs[job["id"]] = job
        self.active_job = job["id"]
        return job

    def job_running(self) -> bool:
        if self.active_job is None:
            return False
        return self.jobs[self.active_job]["status"] in ("queued", "running")


class MergeRequest(BaseModel):
    ids: list[str]


class RecomputeRequest(BaseModel):
    th: int
    ot: int
    intensity_threshold: float
    windows: int


def session_payload(state: SessionState) -> dict:
    result = state.current
    return {
        "params": result.params,
        "width": result.catalog.width,
        "lineage_length": len(result.lineage),
        "n_samples": len(result.memberships),
        "n_outliers": len(result.memberships.outlier_ids()),
        "n_mixed": len(result.memberships.mixed_ids()),
        "phases": [
            {
                "id": str(p.id),
                "peak_count": p.representative.peak_count,
                "member_count": len(p.member_ids),
                "representative": list(p.representative.peaks),
            }
            for p in result.catalog.phases
        ],
    }


def _recompute_worker(state: SessionState, job: dict, req: RecomputeRequest) -> None:
    try:
        with state.lock:
            job["status"] = "running"
            samples = state.samples
            binar = dict(state.current.params.get("binarization", {}))
        bp = BinarizationParams(
            window_count=req.windows,
            intensity_threshold=req.intensity_threshold,
            smooth_degree=int(binar.get("smooth_degree", 5)),
            smooth_window=int(binar.get("smooth_window", 21)),
            baseline_degree=int(binar.get("baseline_degree", 1)),
        )
        patterns = [(s.id, detect_peaks(preprocess(s.intensities, bp), bp)) for s in samples]
        binar.update(
            {
                "window_count": bp.window_count,
                "intensity_threshold": bp.intensity_threshold,
                "threshold_mode": "fixed",
                "smooth_degree": bp.smooth_degree,
                "smooth_window": bp.smooth_window,
                "baseline_degree": bp.baseline_degree,
            }
        )
        result = run_incremental_phase_mapping(
            patterns,
            PhaseMapParams(th=req.th, ot=req.ot),
            extra_params={"binarization": binar},
        )
        with state.lock:
            state.initial = result.clone()
            state.current = result.clone()
            job["status"] = "done"
    except Exception as exc:
        with state.lock:
            job["status"] = "error"
            job["error"] = str(exc)


def create_app(state: SessionState, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="xrdmap session")

    def reject_if_busy() -> None:
        if state.job_running():
            raise HTTPException(status_code=409, detail="recompute job in progress")

    @app.get("/api/session")
    def get_session() -> dict:
        with state.lock:
            return session_payload(state)

    @app.get("/api/plot-data")
    def get_plot_data() -> dict:
        with state.lock:
            if state.samples is None:
                raise HTTPException(status_code=400, detail="no dataset loaded")
            return plot_data(state.current, state.samples)

    @app.get("/api/export")
    def get_export() -> dict:
        with state.lock:
            return result_to_jsonable(state.current)

    @app.post("/api/merge")
    def post_merge(req: MergeRequest) -> dict:
        with state.lock:
            reject_if_busy()
            try:
                ids = [PhaseId.parse(t) for t in req.ids]
                stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
                state.current = manual_merge(state.current, ids, actor="ui", timestamp=stamp)
            except XrdMapError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from None
            return session_payload(state)

    @app.post("/api/undo")
    def post_undo() -> dict:
        with state.lock:
            reject_if_busy()
            if not state.current.lineage:
                raise HTTPException(status_code=400, detail="nothing to undo")
            state.current = replay_lineage(state.initial, state.current.lineage[:-1])
            return session_payload(state)

    @app.post("/api/recompute")
    def post_recompute(req: RecomputeRequest) -> dict:
        with state.lock:
            reject_if_busy()
            if state.samples is None:
                raise HTTPException(status_code=400, detail="no dataset loaded")
            try:
                PhaseMapParams(th=req.th, ot=req.ot)
                BinarizationParams(window_count=req.windows, intensity_threshold=req.intensity_threshold)
            except ParameterError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from None
            job = state.new_job(dataclasses.asdict(PhaseMapParams(th=req.th, ot=req.ot)))
        thread = threading.Thread(target=_recompute_worker, args=(state, job, req), daemon=True)
        thread.start()
        return {"job": job["id"], "status": job["status"]}

    @app.get("/api/job/{job_id}")
    def get_job(job_id: str) -> dict:
        with state.lock:
            job = state.jobs.get(job_id)
            if job is None:
                raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
            return dict(job)

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app
