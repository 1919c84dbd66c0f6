"""Session-oriented HTTP/WebSocket facade over the engine.

Each session owns an immutable chain of dataset versions (v0 = loaded,
v1.. = post-adapter or post-augmentation), an optional projection per
version, and a single-worker job queue, so alignment and projection jobs
never interleave within a session. Job progress fans out to any number of
event subscribers; events for one job arrive in order:
queued -> running -> progress* -> completed | failed.
"""
from __future__ import annotations

import asyncio
import itertools
import json
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .alignment import (
    AdapterConfig, AdapterModel, AlignmentDirective, apply_adapter,
    build_triplets, train_adapter, verify_alignment,
)
from .axis import ConceptAxisSpec, axis_layout
from .density import set_contours
from .errors import MfwbError, NormalizerNonpositive, KTooLarge as KTooLargeError
from .layout import ProjectionLayout
from .mfm import MfmConfig, ProjectionModel, forward, train_mfm
from .projectors import PROJECTOR_IDS, run_projector
from .quality import dataset_distance_matrices, modal_quality
from .store import EmbeddingDataset, Modality, knn_query, load_dataset, \
    parse_manifest

QUALITY_K = 30


@dataclass
class ProjectionRecord:
    projector_id: str
    layout: ProjectionLayout
    quality: Optional[dict] = None
    loss_trace: Optional[list] = None


@dataclass
class Session:
    id: str
    dataset_versions: list[EmbeddingDataset]
    projections: dict[int, ProjectionRecord] = field(default_factory=dict)
    mfm_model: Optional[ProjectionModel] = None
    adapters: list[AdapterModel] = field(default_factory=list)
    config_snapshots: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    event_cond: threading.Condition = field(default_factory=threading.Condition)
    jobs: "queue.Queue[Optional[dict]]" = field(default_factory=queue.Queue)
    job_counter: "itertools.count" = field(default_factory=itertools.count)
    job_states: dict[str, str] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def latest_version(self) -> int:
        return len(self.dataset_versions) - 1

    def dataset(self, version: Optional[int] = None) -> EmbeddingDataset:
        v = self.latest_version if version is None else version
        if not 0 <= v < len(self.dataset_versions):
            raise HTTPException(404, f"no dataset version {v}")
        return self.dataset_versions[v]

    def emit(self, event: dict) -> None:
        with self.event_cond:
            self.events.append(event)
            if "phase" in event and "jobId" in event:
                self.job_states[event["jobId"]] = event["phase"]
            self.event_cond.notify_all()

    def wait_events(self, since: int, timeout: float) -> list[dict]:
        with self.event_cond:
            if len(self.events) <= since:
                self.event_cond.wait(timeout)
            return self.events[since:]


def _set_members(dataset: EmbeddingDataset) -> dict[str, list[str]]:
    members: dict[str, list[str]] = {}
    for p in dataset.points:
        if p.set_id is not None:
            members.setdefault(p.set_id, []).append(p.id)
    return members


def _quality_or_none(dataset: EmbeddingDataset, layout: ProjectionLayout) -> Optional[dict]:
    try:
        d_high, d_low, is_image, tiebreak = dataset_distance_matrices(dataset, layout)
        metrics = modal_quality(d_high, d_low, is_image, QUALITY_K, tiebreak)
        return {k: v for k, v in metrics.items()}
    except (NormalizerNonpositive, KTooLargeError):
        return None  # too few points for k=30; metrics undefined


class SessionManager:
    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self.sessions: dict[str, Session] = {}
        self._counter = itertools.count()
        self._lock = threading.Lock()

    def create(self, dataset: EmbeddingDataset) -> Session:
        with self._lock:
            sid = f"s{next(self._counter)}"
        session = Session(id=sid, dataset_versions=[dataset])
        self.sessions[sid] = session
        worker = threading.Thread(target=self._work, args=(session,), daemon=True)
        worker.start()
        return session

    def get(self, sid: str) -> Session:
        try:
            return self.sessions[sid]
        except KeyError:
            raise HTTPException(404, f"no session {sid}") from None

    # -- single worker per session: jobs never interleave ------------------

    def _work(self, session: Session) -> None:
        while True:
            job = session.jobs.get()
            if job is None:
                return
            job_id = job["jobId"]
            session.emit({"jobId": job_id, "phase": "running"})
            try:
                result = job["run"](job_id)
                session.emit({"jobId": job_id, "phase": "completed", **result})
            except MfwbError as exc:
                session.emit({"jobId": job_id, "phase": "failed",
                              "error": type(exc).__name__, "message": str(exc)})
            except Exception as exc:  # keep the worker alive
                session.emit({"jobId": job_id, "phase": "failed",
                              "error": "InternalError", "message": str(exc)})

    def submit(self, session: Session, kind: str, run) -> str:
        job_id = f"job-{next(session.job_counter)}"
        session.emit({"jobId": job_id, "phase": "queued", "kind": kind})
        session.jobs.put({"jobId": job_id, "run": run})
        return job_id


# -- request / response models --------------------------------------------------


class CreateSessionRequest(BaseModel):
    manifest: Optional[dict] = None
    manifestPath: Optional[str] = None


class ProjectionRequest(BaseModel):
    projectorId: str
    seed: int = 0
    epochs: Optional[int] = None
    version: Optional[int] = None


class AxisRequest(BaseModel):
    specs: list[dict]
    bins: int = 20
    version: Optional[int] = None


class DirectiveRequest(BaseModel):
    directive: dict
    trainConfig: dict = {}


class AugmentRequest(BaseModel):
    points: list[dict]
    setId: str


def create_app(data_dir: Path | str = ".") -> FastAPI:
    data_dir = Path(data_dir)
    app = FastAPI(title="mfwb", version="0.1.0")
    manager = SessionManager(data_dir)
    app.state.manager = manager

    def session_info(session: Session) -> dict:
        ds = session.dataset()
        return {
            "sessionId": session.id,
            "versions": len(session.dataset_versions),
            "latestVersion": session.latest_version,
            "points": len(ds),
            "dimension": ds.dimension,
            "concepts": [c.name for c in ds.concepts],
            "sets": sorted(_set_members(ds)),
            "projections": {str(v): r.projector_id
                            for v, r in session.projections.items()},
            "jobs": dict(session.job_states),
        }

    @app.post("/sessions")
    def create_session(body: CreateSessionRequest):
        try:
            if body.manifest is not None:
                dataset = parse_manifest(body.manifest, base_dir=data_dir)
            elif body.manifestPath:
                path = (data_dir / body.manifestPath).resolve()
                if not str(path).startswith(str(data_dir.resolve())):
                    raise HTTPException(400, "manifestPath escapes the data dir")
                dataset = load_dataset(path)
            else:
                raise HTTPException(400, "need manifest or manifestPath")
        except MfwbError as exc:
            raise HTTPException(422, exc.to_json()["message"]) from None
        session = manager.create(dataset)
        return session_info(session)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return session_info(manager.get(sid))

    @app.post("/sessions/{sid}/projections")
    def request_projection(sid: str, body: ProjectionRequest):
        session = manager.get(sid)
        pid = body.projectorId.upper()
        if pid not in PROJECTOR_IDS:
            raise HTTPException(422, f"unknown projector {body.projectorId!r}")
        version = session.latest_version if body.version is None else body.version
        dataset = session.dataset(version)

        def run(job_id: str) -> dict:
            def progress(epoch: int, entry: dict) -> None:
                if epoch % 25 == 0:
                    session.emit({"jobId": job_id, "phase": "progress",
                                  "epoch": epoch, "loss": entry["L"]})
            if pid == "MFM":
                config = MfmConfig(seed=body.seed,
                                   **({"epochs": body.epochs} if body.epochs else {}))
                model, layout, trace = train_mfm(dataset, config, progress=progress)
                with session.lock:
                    session.mfm_model = model
                record = ProjectionRecord(pid, layout, loss_trace=trace)
            else:
                layout = run_projector(pid, dataset, body.seed)
                record = ProjectionRecord(pid, layout)
            record.quality = _quality_or_none(dataset, layout)
            with session.lock:
                session.projections[version] = record
            return {"version": version, "projector": pid,
                    "quality": record.quality,
                    "layout": layout.to_json()}

        job_id = manager.submit(session, "projection", run)
        return {"jobId": job_id}

    @app.get("/sessions/{sid}/projections/{version}")
    def get_projection(sid: str, version: int):
        session = manager.get(sid)
        record = session.projections.get(version)
        if record is None:
            raise HTTPException(404, f"version {version} has no projection")
        return {
            "version": version,
            "projector": record.projector_id,
            "layout": record.layout.to_json(),
            "quality": record.quality,
            "lossTrace": record.loss_trace,
        }

    @app.get("/sessions/{sid}/contours/{version}")
    def get_contours(sid: str, version: int):
        session = manager.get(sid)
        record = session.projections.get(version)
        if record is None:
            raise HTTPException(404, f"version {version} has no projection")
        dataset = session.dataset(version)
        contours = set_contours(record.layout, _set_members(dataset))
        return {"version": version,
                "contours": [c.to_json() for c in contours]}

    @app.post("/sessions/{sid}/axes")
    def request_axis(sid: str, body: AxisRequest):
        session = manager.get(sid)
        dataset = session.dataset(body.version)
        specs = []
        try:
            for raw in body.specs:
                concepts = raw.get("concepts", [])
                length = float(raw.get("length", 100.0))
                if len(concepts) == 1:
                    specs.append(ConceptAxisSpec(concepts[0], length=length))
                elif len(concepts) == 2:
                    specs.append(ConceptAxisSpec(concepts[0], concepts[1],
                                                 length=length))
                else:
                    raise HTTPException(422, "axis spec needs 1 or 2 concepts")
            layouts = axis_layout(dataset, specs, bins=body.bins)
        except MfwbError as exc:
            raise HTTPException(422, str(exc)) from None
        return {"axes": [l.to_json() for l in layouts]}

    @app.post("/sessions/{sid}/directives")
    def submit_directive(sid: str, body: DirectiveRequest):
        session = manager.get(sid)
        try:
            directive = AlignmentDirective.from_json(body.directive)
        except (MfwbError, KeyError) as exc:
            raise HTTPException(422, f"bad directive: {exc}") from None
        cfg = body.trainConfig
        config = AdapterConfig(
            epochs=int(cfg.get("epochs", 200)),
            learning_rate=float(cfg.get("learningRate", 1e-3)),
            margin=float(cfg.get("margin", 0.2)),
            max_triplets=int(cfg.get("maxTriplets", 256)),
            seed=int(cfg.get("seed", 0)),
        )

        def run(job_id: str) -> dict:
            base_version = session.latest_version
            dataset = session.dataset(base_version)
            batch = build_triplets(directive, dataset, config.max_triplets,
                                   config.seed, config.margin)

            def progress(epoch: int, loss: float) -> None:
                if epoch % 25 == 0:
                    session.emit({"jobId": job_id, "phase": "progress",
                                  "epoch": epoch, "loss": loss})
            adapter = train_adapter(dataset, batch, config, progress=progress)
            verification = verify_alignment(directive, dataset, adapter)
            adapted = apply_adapter(dataset, adapter)
            layout = None
            with session.lock:
                model = session.mfm_model
            if model is not None:
                layout = forward(model, adapted)
            # mutate session state only after everything survived
            with session.lock:
                session.dataset_versions.append(adapted)
                session.adapters.append(adapter)
                session.config_snapshots.append(
                    {"jobId": job_id, "directive": directive.to_json(),
                     "trainConfig": cfg})
                new_version = session.latest_version
                if layout is not None:
                    record = ProjectionRecord("MFM", layout)
                    record.quality = _quality_or_none(adapted, layout)
                    session.projections[new_version] = record
            result = {"version": new_version, "verify": verification,
                      "triplets": len(batch.triplets)}
            if layout is not None:
                result["layout"] = layout.to_json()
            return result

        job_id = manager.submit(session, "alignment", run)
        return {"jobId": job_id}

    @app.post("/sessions/{sid}/augment")
    def upload_augmentation(sid: str, body: AugmentRequest):
        session = manager.get(sid)
        dataset = session.dataset()
        fragment = {"dimension": dataset.dimension, "points": body.points}
        try:
            addition = parse_manifest(fragment, base_dir=data_dir)
        except MfwbError as exc:
            raise HTTPException(422, exc.to_json()["message"]) from None
        new_points = []
        for p in addition.points:
            if p.id in dataset:
                raise HTTPException(422, f"point id {p.id!r} already exists")
            p.set_id = body.setId
            new_points.append(p)
        with session.lock:
            session.dataset_versions.append(dataset.extended(new_points))
            version = session.latest_version
        return {"added": len(new_points), "version": version}

    @app.get("/sessions/{sid}/neighbors/{point_id}")
    def get_neighbors(sid: str, point_id: str, k: int = 8,
                      modality: Optional[str] = None):
        session = manager.get(sid)
        dataset = session.dataset()
        mod = Modality(modality) if modality else None
        try:
            hits = knn_query(dataset, point_id, k, mod)
        except MfwbError as exc:
            raise HTTPException(422, str(exc)) from None
        return {"query": point_id, "neighbors": [
            {"id": pid, "distance": d,
             "assetUri": dataset.get(pid).asset_uri,
             "label": dataset.get(pid).label,
             "setId": dataset.get(pid).set_id}
            for pid, d in hits]}

    @app.websocket("/sessions/{sid}/events")
    async def events(ws: WebSocket, sid: str):
        await ws.accept()
        try:
            session = manager.get(sid)
        except HTTPException:
            await ws.close(code=4404)
            return
        cursor = 0
        try:
            while True:
                fresh = await asyncio.to_thread(session.wait_events, cursor, 0.25)
                cursor += len(fresh)
                for event in fresh:
                    await ws.send_text(json.dumps(event, sort_keys=True))
        except (WebSocketDisconnect, RuntimeError):
            return

    return app
