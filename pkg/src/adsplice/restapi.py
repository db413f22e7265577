"""REST control plane for processing jobs.

POST /jobs                      create a job (vod or live_sim)
GET  /jobs/{id}                 status and stats
GET  /jobs/{id}/metadata        detected ad metadata (ready jobs)
POST /jobs/{id}/start-stream    mark streaming, return the WebSocket URL
GET  /server/info               host specs

Jobs persist as JSON under <data_root>/jobs/<job_id>/ so a restarted
server still serves completed jobs; jobs caught mid-flight by a restart
are marked failed. VoD jobs process the whole source stream off the
request path and become ready when the output stream is written. Live-sim
jobs replay the source at wall-clock pace through the per-segment
splicer; they are ready as soon as the feed starts, so clients can join
the stream while segments are still arriving.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .admeta import AdPolicy, interval_metadata
from .corpus import ADS_DIR, LOGO_NAME, STREAM_DIR
from .delivery import JobBinding, LiveFeed, paced_segments
from .media import MANIFEST_NAME, read_pgm, read_stream, write_segment
from .mmtp import Packetizer, default_config, mux, pack_packet
from .pipeline import (
    ENGINES,
    ENGINE_FEATURES,
    ENGINE_XCORR,
    LiveSplicer,
    MODEL_NAME,
    METADATA_NAME,
    OUTPUT_STREAM_DIR,
    PipelineConfig,
    load_model,
    process_stream,
)
from .placer import AdRepository
from .sysinfo import server_specs

MODES = ("vod", "live_sim")
STATES = ("queued", "processing", "ready", "streaming", "failed")

ENV_DATA_ROOT = "ADSPLICE_DATA_ROOT"
ENV_PORT = "ADSPLICE_PORT"
ENV_WS_PORT = "ADSPLICE_WS_PORT"
DEFAULT_PORT = 8080
DEFAULT_WS_PORT = 8765


@dataclass
class JobRecord:
    job_id: str
    mode: str
    source_uri: str
    engine: str
    target_policy: dict
    status: str = "queued"
    stats: dict = field(default_factory=dict)
    idempotency_key: str | None = None
    error: str | None = None
    speed: float = 1.0  # live_sim feed pacing multiplier

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "mode": self.mode,
            "source_uri": self.source_uri,
            "engine": self.engine,
            "target_policy": self.target_policy,
            "status": self.status,
            "stats": self.stats,
            "idempotency_key": self.idempotency_key,
            "error": self.error,
            "speed": self.speed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "JobRecord":
        return cls(**{k: raw[k] for k in cls.__dataclass_fields__ if k in raw})


class JobStore:
    """File-backed job records, one directory per job."""

    def __init__(self, data_root: Path | str):
        self.root = Path(data_root) / "jobs"
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def job_dir(self, job_id: str) -> Path:
        return self.root / job_id

    def output_dir(self, job_id: str) -> Path:
        return self.job_dir(job_id) / "output"

    def save(self, record: JobRecord) -> None:
        with self._lock:
            d = self.job_dir(record.job_id)
            d.mkdir(parents=True, exist_ok=True)
            (d / "job.json").write_text(json.dumps(record.to_dict(), indent=2))

    def load(self, job_id: str) -> JobRecord | None:
        path = self.job_dir(job_id) / "job.json"
        if not path.is_file():
            return None
        return JobRecord.from_dict(json.loads(path.read_text()))

    def all(self) -> list[JobRecord]:
        records = []
        for path in sorted(self.root.glob("*/job.json")):
            records.append(JobRecord.from_dict(json.loads(path.read_text())))
        return records

    def find_idempotency_key(self, key: str) -> JobRecord | None:
        for record in self.all():
            if record.idempotency_key == key:
                return record
        return None

    def recover(self) -> None:
        """A restart orphans in-flight jobs: mark them failed."""
        for record in self.all():
            if record.status in ("queued", "processing"):
                record.status = "failed"
                record.error = "interrupted by server restart"
                self.save(record)


def resolve_source(uri: str) -> Path | None:
    """A source URI names a corpus directory (file:// or bare path) whose
    stream/ subdirectory holds the input."""
    path = Path(uri[7:] if uri.startswith("file://") else uri)
    if (path / STREAM_DIR / MANIFEST_NAME).is_file():
        return path
    return None


def _bad_request(field_name: str, reason: str) -> JSONResponse:
    return JSONResponse(
        {"detail": f"SchemaViolation: {field_name}: {reason}"}, status_code=400
    )


def _validate_request(body) -> str | None:
    """Field name of the first schema violation, or None."""
    if not isinstance(body, dict):
        return "body"
    for name in ("mode", "source_uri", "engine", "target_policy"):
        if name not in body:
            return name
    if body["mode"] not in MODES:
        return "mode"
    if not isinstance(body["source_uri"], str) or not body["source_uri"]:
        return "source_uri"
    if body["engine"] not in ENGINES:
        return "engine"
    tp = body["target_policy"]
    if not isinstance(tp, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in tp.items()
    ):
        return "target_policy"
    if "idempotency_key" in body and not isinstance(body["idempotency_key"], str):
        return "idempotency_key"
    if "speed" in body:
        if not isinstance(body["speed"], (int, float)) or body["speed"] <= 0:
            return "speed"
    return None


# ---------------------------------------------------------------------------
# job runners


def _engine_artifacts(record: JobRecord, source: Path):
    config = PipelineConfig(engine=record.engine)
    logo = model = None
    if record.engine == ENGINE_XCORR:
        logo = read_pgm(source / LOGO_NAME)
    elif record.engine == ENGINE_FEATURES:
        model_path = source / MODEL_NAME
        if not model_path.is_file():
            raise FileNotFoundError(f"features engine needs a model at {model_path}")
        model = load_model(model_path)
    repo = AdRepository(source / ADS_DIR)
    policy = AdPolicy(record.target_policy)
    return config, logo, model, repo, policy


class Api:
    """Application state: store, live feeds, delivery bindings."""

    def __init__(self, data_root: Path | str, ws_url: str | Callable[[], str],
                 bindings: dict | None = None):
        self.store = JobStore(data_root)
        self.store.recover()
        self._ws_url = ws_url
        self.bindings: dict[str, JobBinding] = (
            bindings if bindings is not None else {}
        )
        self.live_metadata: dict[str, list[dict]] = {}
        for record in self.store.all():
            if record.status in ("ready", "streaming") and record.mode == "vod":
                self._bind_vod(record)

    @property
    def ws_url(self) -> str:
        return self._ws_url() if callable(self._ws_url) else self._ws_url

    def resolve_binding(self, job_id: str) -> JobBinding | None:
        return self.bindings.get(job_id)

    def _stats_snapshot(self, job_id: str) -> Callable[[], dict]:
        def snapshot() -> dict:
            record = self.store.load(job_id)
            return record.stats if record else {}

        return snapshot

    def _bind_vod(self, record: JobRecord) -> None:
        self.bindings[record.job_id] = JobBinding(
            job_id=record.job_id,
            mode="vod",
            vod_stream_dir=self.store.output_dir(record.job_id) / OUTPUT_STREAM_DIR,
            stats=self._stats_snapshot(record.job_id),
        )

    def _fail(self, record: JobRecord, err: BaseException) -> None:
        record.status = "failed"
        record.error = f"{type(err).__name__}: {err}"
        self.store.save(record)

    # -- VoD ----------------------------------------------------------

    async def run_vod_job(self, record: JobRecord) -> None:
        record.status = "processing"
        self.store.save(record)
        try:
            result = await asyncio.to_thread(self._process_vod, record)
        except Exception as err:
            self._fail(record, err)
            return
        record.stats.update(
            processing_ms=result.processing_ms,
            segments_processed=len(result.decisions),
            intervals_found=len(result.intervals),
        )
        record.status = "ready"
        self.store.save(record)
        self._bind_vod(record)

    def _process_vod(self, record: JobRecord):
        source = resolve_source(record.source_uri)
        if source is None:
            raise FileNotFoundError(record.source_uri)
        config, logo, model, repo, policy = _engine_artifacts(record, source)
        segments = read_stream(source / STREAM_DIR)
        return process_stream(
            segments,
            self.store.output_dir(record.job_id),
            repo,
            policy,
            config,
            logo=logo,
            model=model,
        )

    # -- live ---------------------------------------------------------

    async def run_live_job(self, record: JobRecord) -> None:
        record.status = "processing"
        self.store.save(record)
        try:
            source = resolve_source(record.source_uri)
            if source is None:
                raise FileNotFoundError(record.source_uri)
            config, logo, model, repo, policy = _engine_artifacts(record, source)
            splicer = LiveSplicer(repo, policy, config, logo=logo, model=model)
        except Exception as err:
            self._fail(record, err)
            return

        feed = LiveFeed()
        self.bindings[record.job_id] = JobBinding(
            job_id=record.job_id,
            mode="live_sim",
            live_feed=feed,
            stats=self._stats_snapshot(record.job_id),
        )
        self.live_metadata[record.job_id] = []
        record.status = "ready"
        record.stats.update(processing_ms=0, segments_processed=0, intervals_found=0)
        self.store.save(record)

        fps = None
        offset = 0
        run_start = None
        run_frames: dict[str, int] = {}
        processing_ms = 0
        segments_done = 0

        def close_run(end_frame: int) -> None:
            nonlocal run_start, run_frames
            if run_start is None:
                return
            top = max(run_frames.values())
            category = min(c for c, n in run_frames.items() if n == top)
            meta = interval_metadata(run_start, end_frame, category, fps)
            self.live_metadata[record.job_id].append(meta.to_dict())
            run_start, run_frames = None, {}

        try:
            cfg = default_config()
            vp = Packetizer(cfg.assets[0].packet_id, cfg.max_payload)
            ap = Packetizer(cfg.assets[1].packet_id, cfg.max_payload)
            async for segment in paced_segments(source / STREAM_DIR, record.speed):
                fps = segment.fps
                t0 = time.perf_counter()
                replaced, decision = await asyncio.to_thread(splicer.feed, segment)
                processing_ms += max(1, round((time.perf_counter() - t0) * 1000))
                if decision.is_ad:
                    if run_start is None:
                        run_start = offset
                    cat = decision.category or "unknown"
                    run_frames[cat] = run_frames.get(cat, 0) + segment.frame_count
                else:
                    close_run(offset - 1)
                offset += segment.frame_count
                segments_done += 1

                ts = replaced.start_time_ms
                vpk = vp.packetize_mpu(write_segment(replaced), ts)
                apk = ap.packetize_mpu(
                    replaced.audio.samples.astype("<i2").tobytes(), ts
                )
                for p in mux(vpk, apk):
                    feed.publish(ts, pack_packet(p))

                record.stats.update(
                    processing_ms=processing_ms,
                    segments_processed=segments_done,
                    intervals_found=len(self.live_metadata[record.job_id])
                    + (1 if run_start is not None else 0),
                )
                self.store.save(record)
            close_run(offset - 1)
        except Exception as err:
            self._fail(record, err)
            feed.finish()
            return

        meta = self.live_metadata[record.job_id]
        out_dir = self.store.output_dir(record.job_id)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / METADATA_NAME).write_text(json.dumps(meta, indent=2))
        record.stats.update(
            processing_ms=processing_ms,
            segments_processed=segments_done,
            intervals_found=len(meta),
        )
        self.store.save(record)
        feed.finish()

    # -- metadata -----------------------------------------------------

    def metadata_for(self, record: JobRecord) -> list[dict]:
        path = self.store.output_dir(record.job_id) / METADATA_NAME
        if path.is_file():
            return json.loads(path.read_text())
        return self.live_metadata.get(record.job_id, [])


def create_app(
    data_root: Path | str,
    ws_url: str | Callable[[], str] = "",
    bindings: dict | None = None,
) -> FastAPI:
    api = Api(data_root, ws_url, bindings)
    app = FastAPI(title="adsplice", docs_url=None, redoc_url=None)
    app.state.api = api

    @app.post("/jobs")
    async def create_job(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body", "not valid JSON")
        bad = _validate_request(body)
        if bad is not None:
            return _bad_request(bad, "missing or malformed")
        if resolve_source(body["source_uri"]) is None:
            return JSONResponse(
                {"detail": f"SourceNotFound: {body['source_uri']}"}, status_code=404
            )
        key = body.get("idempotency_key")
        if key is not None:
            existing = api.store.find_idempotency_key(key)
            if existing is not None:
                return JSONResponse(
                    {"detail": "duplicate idempotency_key",
                     "job_id": existing.job_id},
                    status_code=409,
                )
        record = JobRecord(
            job_id=uuid.uuid4().hex[:12],
            mode=body["mode"],
            source_uri=body["source_uri"],
            engine=body["engine"],
            target_policy=body["target_policy"],
            idempotency_key=key,
            speed=float(body.get("speed", 1.0)),
        )
        record.stats["server_specs"] = server_specs().to_dict()
        if "client_geo" in body:
            record.stats["client_geo"] = body["client_geo"]
        api.store.save(record)
        runner = api.run_vod_job if record.mode == "vod" else api.run_live_job
        asyncio.create_task(runner(record))
        return JSONResponse({"job_id": record.job_id}, status_code=201)

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        record = api.store.load(job_id)
        if record is None:
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        view = record.to_dict()
        del view["idempotency_key"]
        if view["error"] is None:
            del view["error"]
        return view

    @app.get("/jobs/{job_id}/metadata")
    async def get_metadata(job_id: str):
        record = api.store.load(job_id)
        if record is None:
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        if record.status not in ("ready", "streaming"):
            return JSONResponse(
                {"detail": f"NotReady: job is {record.status}"}, status_code=409
            )
        return api.metadata_for(record)

    @app.post("/jobs/{job_id}/start-stream")
    async def start_stream(job_id: str):
        record = api.store.load(job_id)
        if record is None:
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        if record.status == "streaming":
            return {"ws_url": api.ws_url}
        if record.status != "ready":
            return JSONResponse(
                {"detail": f"NotReady: job is {record.status}"}, status_code=409
            )
        record.status = "streaming"
        api.store.save(record)
        return {"ws_url": api.ws_url}

    @app.get("/server/info")
    async def server_info():
        return server_specs().to_dict()

    return app
