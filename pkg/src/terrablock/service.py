"""HTTP facade over the pipeline, versioned under /v1.

Datasets are immutable uploads stored content-addressed-ish (digest kept,
ids opaque); analyses run as FIFO jobs on a bounded thread pool and persist
their artifacts as plain files under the data directory, so every result is
also an inspectable fixture.  All errors use a {code, message, detail}
envelope.

The service does no math of its own: jobs call the same build_field_table /
run_analysis / emit_report_json chain as the CLI, and the report endpoint
returns the stored bytes untouched, which is what makes CLI and service
output byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import HTTPException, RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import __version__
from .analysis import ConfigError, config_from_dict, config_to_dict, emit_block_geojson, emit_report_json, run_analysis
from .fusion import SoilLayerError, parse_boundary, parse_soil_layer, table_to_csv
from .interpolation import YieldFormatError, parse_yield_csv
from .pipeline import build_field_artifacts
from .raster import Grid, GridFormatError, parse_ascii_grid, write_ascii_grid

DATASET_KINDS = ("dem", "soil", "boundary", "yield")
DEFAULT_MAX_UPLOAD = 64 * 1024 * 1024


def _now() -> float:
    return time.time()


def _new_id() -> str:
    return uuid.uuid4().hex[:16]


def _safe_token(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", s) or "x"


def _error(status: int, code: str, message: str, detail=None):
    return HTTPException(status_code=status, detail={"code": code, "message": message, "detail": detail})


@dataclass
class Dataset:
    id: str
    kind: str
    name: str
    sha256: str
    size: int
    summary: dict
    created_at: float

    def handle(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "name": self.name,
            "sha256": self.sha256,
            "size": self.size,
            "summary": self.summary,
            "created_at": self.created_at,
        }


@dataclass
class Job:
    id: str
    config: dict  # resolved config echo
    datasets: dict  # {"dem": id, "soil": id, "boundary": id, "yield": [ids]}
    state: str = "pending"  # pending -> running -> done | failed
    error: str | None = None
    submitted_at: float = field(default_factory=_now)
    finished_at: float | None = None
    grids: dict = field(default_factory=dict)  # name -> grid id

    def envelope(self, report: dict | None) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "config": self.config,
            "datasets": self.datasets,
            "error": self.error,
            "submitted_at": self.submitted_at,
            "finished_at": self.finished_at,
            "grids": self.grids,
            "report": report,
        }


def _summarize(kind: str, raw: bytes, name: str) -> dict:
    """Parse-validate an upload; raises the layer parser's error untouched."""
    text = raw.decode("utf-8")
    if kind == "dem":
        grid = parse_ascii_grid(text)
        return {
            "ncols": grid.ncols,
            "nrows": grid.nrows,
            "cell_size": grid.cell_size,
            "xllcorner": grid.xllcorner,
            "yllcorner": grid.yllcorner,
            "nodata_cells": int(np.isnan(grid.values).sum()),
        }
    if kind == "soil":
        layer = parse_soil_layer(text)
        return {"map_units": len(layer.map_units), "warnings": list(layer.warnings)}
    if kind == "boundary":
        rings = parse_boundary(text)
        return {"rings": len(rings)}
    if kind == "yield":
        sets = parse_yield_csv(text, default_season=Path(name).stem)
        return {
            "seasons": [ps.season for ps in sets],
            "points": int(sum(len(ps.values) for ps in sets)),
        }
    raise ValueError(f"unknown dataset kind {kind!r}")


class Store:
    """Directory-backed registry of datasets, jobs, and derived grids."""

    def __init__(self, root: Path):
        self.root = root
        self.datasets_dir = root / "datasets"
        self.jobs_dir = root / "jobs"
        self.datasets_dir.mkdir(parents=True, exist_ok=True)
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()
        self.datasets: dict[str, Dataset] = {}
        self.jobs: dict[str, Job] = {}
        self.grid_paths: dict[str, Path] = {}  # grid id -> .asc file
        self._load()

    # -- persistence ------------------------------------------------------

    def _write_json(self, path: Path, payload: dict) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def _load(self) -> None:
        for meta_path in sorted(self.datasets_dir.glob("*.json")):
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            ds = Dataset(**meta)
            self.datasets[ds.id] = ds
        for job_path in sorted(self.jobs_dir.glob("*/job.json")):
            meta = json.loads(job_path.read_text(encoding="utf-8"))
            job = Job(**meta)
            if job.state in ("pending", "running"):
                # a restart lost the worker; the inputs are still there
                job.state = "failed"
                job.error = "interrupted by server restart"
                job.finished_at = _now()
                self._write_json(job_path, self._job_meta(job))
            self.jobs[job.id] = job
            if job.state == "done":
                self._register_job_grids(job)

    def _job_meta(self, job: Job) -> dict:
        return {
            "id": job.id,
            "config": job.config,
            "datasets": job.datasets,
            "state": job.state,
            "error": job.error,
            "submitted_at": job.submitted_at,
            "finished_at": job.finished_at,
            "grids": job.grids,
        }

    def job_dir(self, job_id: str) -> Path:
        return self.jobs_dir / job_id

    def _register_job_grids(self, job: Job) -> None:
        grids_dir = self.job_dir(job.id) / "grids"
        for grid_id in job.grids.values():
            name = grid_id[len(job.id) + 1 :]
            self.grid_paths[grid_id] = grids_dir / f"{name}.asc"

    # -- datasets ---------------------------------------------------------

    def add_dataset(self, kind: str, name: str, raw: bytes) -> Dataset:
        summary = _summarize(kind, raw, name)
        ds = Dataset(
            id=_new_id(),
            kind=kind,
            name=name,
            sha256=hashlib.sha256(raw).hexdigest(),
            size=len(raw),
            summary=summary,
            created_at=_now(),
        )
        (self.datasets_dir / f"{ds.id}.bin").write_bytes(raw)
        self._write_json(self.datasets_dir / f"{ds.id}.json", ds.handle())
        with self.lock:
            self.datasets[ds.id] = ds
        return ds

    def dataset_bytes(self, ds_id: str) -> bytes:
        return (self.datasets_dir / f"{ds_id}.bin").read_bytes()

    # -- jobs -------------------------------------------------------------

    def add_job(self, config: dict, datasets: dict) -> Job:
        job = Job(id=_new_id(), config=config, datasets=datasets)
        self.job_dir(job.id).mkdir(parents=True)
        self._write_json(self.job_dir(job.id) / "job.json", self._job_meta(job))
        with self.lock:
            self.jobs[job.id] = job
        return job

    def update_job(self, job: Job) -> None:
        with self.lock:
            self._write_json(self.job_dir(job.id) / "job.json", self._job_meta(job))

    def finish_job(self, job: Job, grids: dict[str, Grid]) -> None:
        grids_dir = self.job_dir(job.id) / "grids"
        grids_dir.mkdir(exist_ok=True)
        grid_ids = {}
        for name, grid in grids.items():
            (grids_dir / f"{name}.asc").write_text(write_ascii_grid(grid), encoding="utf-8")
            grid_ids[name] = f"{job.id}-{name}"
        with self.lock:
            job.grids = grid_ids
            job.state = "done"
            job.finished_at = _now()
            self._write_json(self.job_dir(job.id) / "job.json", self._job_meta(job))
            self._register_job_grids(job)


def create_app(
    data_dir: str | os.PathLike,
    *,
    max_upload: int = DEFAULT_MAX_UPLOAD,
    workers: int | None = None,
    cors_origins: list[str] | None = None,
) -> FastAPI:
    store = Store(Path(data_dir))
    pool = ThreadPoolExecutor(max_workers=workers or os.cpu_count() or 2)

    app = FastAPI(title="terrablock", version=__version__, docs_url="/v1/docs", openapi_url="/v1/openapi.json")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins if cors_origins is not None else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    @app.exception_handler(StarletteHTTPException)
    async def http_error(request: Request, exc: StarletteHTTPException):
        if isinstance(exc.detail, dict) and "code" in exc.detail:
            body = exc.detail
        else:
            body = {"code": f"http_{exc.status_code}", "message": str(exc.detail), "detail": None}
        return JSONResponse(status_code=exc.status_code, content=body)

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"code": "invalid_request", "message": "request failed validation", "detail": exc.errors()},
        )

    def _dataset_or_404(ds_id: str) -> Dataset:
        ds = store.datasets.get(ds_id)
        if ds is None:
            raise _error(404, "not_found", f"no dataset with id {ds_id!r}")
        return ds

    def _job_or_404(job_id: str) -> Job:
        job = store.jobs.get(job_id)
        if job is None:
            raise _error(404, "not_found", f"no analysis with id {job_id!r}")
        return job

    # -- datasets ---------------------------------------------------------

    @app.post("/v1/datasets", status_code=201)
    async def upload_dataset(file: UploadFile = File(...), kind: str = Form(...)):
        if kind not in DATASET_KINDS:
            raise _error(422, "bad_kind", f"kind must be one of {DATASET_KINDS}, got {kind!r}")
        raw = await file.read()
        if len(raw) > max_upload:
            raise _error(413, "too_large", f"upload exceeds {max_upload} bytes")
        try:
            ds = store.add_dataset(kind, file.filename or kind, raw)
        except UnicodeDecodeError:  # before ValueError: it is a ValueError subclass
            raise _error(400, "bad_dataset", "file is not valid UTF-8 text")
        except (GridFormatError, SoilLayerError, YieldFormatError, ValueError) as exc:
            raise _error(400, "bad_dataset", str(exc), detail=getattr(exc, "line", None))
        return ds.handle()

    @app.get("/v1/datasets")
    def list_datasets():
        with store.lock:
            items = sorted(store.datasets.values(), key=lambda d: d.created_at)
        return {"datasets": [d.handle() for d in items]}

    @app.get("/v1/datasets/{ds_id}")
    def get_dataset(ds_id: str):
        return _dataset_or_404(ds_id).handle()

    # -- analyses ---------------------------------------------------------

    def _run_job(job: Job) -> None:
        with store.lock:
            job.state = "running"
        store.update_job(job)
        try:
            dem = parse_ascii_grid(store.dataset_bytes(job.datasets["dem"]).decode("utf-8"))
            soil = parse_soil_layer(store.dataset_bytes(job.datasets["soil"]).decode("utf-8"))
            boundary = parse_boundary(store.dataset_bytes(job.datasets["boundary"]).decode("utf-8"))
            yield_sets = []
            for ds_id in job.datasets["yield"]:
                ds = store.datasets[ds_id]
                text = store.dataset_bytes(ds_id).decode("utf-8")
                yield_sets.extend(parse_yield_csv(text, default_season=Path(ds.name).stem))
            config = config_from_dict(job.config)
            art = build_field_artifacts(dem, soil, boundary, yield_sets, config.resolution_factor)
            report, blocks = run_analysis(art.table, config)

            job_dir = store.job_dir(job.id)
            (job_dir / "fused.csv").write_text(table_to_csv(art.table), encoding="utf-8")
            (job_dir / "report.json").write_text(emit_report_json(report), encoding="utf-8")
            (job_dir / "blocks.geojson").write_text(emit_block_geojson(blocks), encoding="utf-8")

            grids = {
                "dem": art.dem,
                "slope": art.derivatives.slope,
                "aspect": art.derivatives.aspect,
            }
            for season, grid in art.yields:
                name = f"yield-{_safe_token(season)}"
                while name in grids:  # sanitized labels can collide
                    name += "_"
                grids[name] = grid
            store.finish_job(job, grids)
        except Exception as exc:  # job failure is a result, not a crash
            with store.lock:
                job.state = "failed"
                job.error = f"{type(exc).__name__}: {exc}"
                job.finished_at = _now()
            store.update_job(job)

    @app.post("/v1/analyses", status_code=202)
    def submit_analysis(body: dict):
        if not isinstance(body, dict) or "config" not in body or "datasets" not in body:
            raise _error(422, "invalid_request", "body must have 'config' and 'datasets'")
        refs = body["datasets"]
        if not isinstance(refs, dict):
            raise _error(422, "invalid_request", "'datasets' must be an object")
        wanted = {"dem": "dem", "soil": "soil", "boundary": "boundary"}
        resolved: dict = {}
        for role, kind in wanted.items():
            ds_id = refs.get(role)
            if not isinstance(ds_id, str):
                raise _error(422, "invalid_request", f"datasets.{role} must be a dataset id")
            ds = _dataset_or_404(ds_id)
            if ds.kind != kind:
                raise _error(422, "kind_mismatch", f"dataset {ds_id} is kind {ds.kind!r}, need {kind!r}")
            resolved[role] = ds_id
        yield_ids = refs.get("yield", [])
        if not isinstance(yield_ids, list) or not all(isinstance(i, str) for i in yield_ids):
            raise _error(422, "invalid_request", "datasets.yield must be a list of dataset ids")
        for ds_id in yield_ids:
            ds = _dataset_or_404(ds_id)
            if ds.kind != "yield":
                raise _error(422, "kind_mismatch", f"dataset {ds_id} is kind {ds.kind!r}, need 'yield'")
        resolved["yield"] = yield_ids
        try:
            config = config_from_dict(body["config"])
        except ConfigError as exc:
            raise _error(422, "config_invalid", str(exc))
        job = store.add_job(config_to_dict(config), resolved)
        pool.submit(_run_job, job)
        return {"id": job.id, "state": job.state}

    @app.get("/v1/analyses")
    def list_analyses():
        with store.lock:
            items = sorted(store.jobs.values(), key=lambda j: j.submitted_at)
        return {"analyses": [{"id": j.id, "state": j.state, "submitted_at": j.submitted_at} for j in items]}

    @app.get("/v1/analyses/{job_id}")
    def get_analysis(job_id: str):
        job = _job_or_404(job_id)
        report = None
        if job.state == "done":
            report = json.loads((store.job_dir(job.id) / "report.json").read_text(encoding="utf-8"))
        return job.envelope(report)

    def _artifact(job_id: str, filename: str, media_type: str) -> Response:
        job = _job_or_404(job_id)
        if job.state != "done":
            message = job.error if job.state == "failed" else f"analysis is {job.state}"
            raise _error(409, "not_ready", message or "analysis did not finish")
        data = (store.job_dir(job.id) / filename).read_bytes()
        return Response(content=data, media_type=media_type)

    @app.get("/v1/analyses/{job_id}/report")
    def get_report(job_id: str):
        # stored bytes verbatim: byte-identical to the CLI's emit_report_json
        return _artifact(job_id, "report.json", "application/json")

    @app.get("/v1/analyses/{job_id}/blocks")
    def get_blocks(job_id: str):
        return _artifact(job_id, "blocks.geojson", "application/geo+json")

    @app.get("/v1/analyses/{job_id}/fused")
    def get_fused(job_id: str):
        return _artifact(job_id, "fused.csv", "text/csv")

    # -- grids ------------------------------------------------------------

    def _grid_payload(grid: Grid, grid_id: str) -> dict:
        vals = grid.values
        values = [
            [None if np.isnan(v) else float(v) for v in vals[r]]
            for r in range(grid.nrows)
        ]
        return {
            "id": grid_id,
            "meta": {
                "ncols": grid.ncols,
                "nrows": grid.nrows,
                "xllcorner": grid.xllcorner,
                "yllcorner": grid.yllcorner,
                "cell_size": grid.cell_size,
                "row_order": "south-to-north",
            },
            "values": values,
        }

    @app.get("/v1/grids/{grid_id}")
    def get_grid(grid_id: str):
        ds = store.datasets.get(grid_id)
        if ds is not None and ds.kind == "dem":
            grid = parse_ascii_grid(store.dataset_bytes(grid_id).decode("utf-8"))
            return _grid_payload(grid, grid_id)
        path = store.grid_paths.get(grid_id)
        if path is None:
            raise _error(404, "not_found", f"no grid with id {grid_id!r}")
        grid = parse_ascii_grid(path.read_text(encoding="utf-8"))
        return _grid_payload(grid, grid_id)

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__}

    return app
