"""HTTP backend for the paint / propagate / re-encode annotation loop.

State lives in a directory tree (no database): one directory per video
with its source, metadata and precomputed flow, and one per session
with a JSON manifest, the raw and normalized importance volumes, the
stroke log and per-encode snapshots.  Every completed operation is
persisted atomically, so a restarted service reloads sessions exactly
as they were.
"""

from __future__ import annotations

import json
import math
import shutil
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from pydantic import BaseModel

from . import codec as mock_codec
from .codec import EncodeResult, EncoderConfig, stats_dict
from .errors import (
    CapabilityError,
    NotFoundError,
    PolicyError,
    PreconditionError,
    SessionConflictError,
)
from .external import EncoderAdapter, external_encode
from .flow import FlowStore
from .map_engine import (
    ImportanceVolume,
    Stroke,
    new_volume,
    normalize,
    read_vimp,
    stroke_kernel,
    vimp_bytes,
)
from .propagation import DecayPolicy, propagate_stroke
from .qp_mapping import volume_to_delta_qp
from .video_io import FrameSequence, load_y4m, sobel_edges, y4m_bytes


@dataclass
class ServiceConfig:
    data_dir: Path
    codec: str = "mock"                        # "mock" | "external"
    min_annotation_seconds: float = 180.0
    adapter: EncoderAdapter | None = None
    clock: Callable[[], float] = time.time
    edge_threshold: int = 64
    decay: DecayPolicy = field(default_factory=DecayPolicy)

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        if self.codec not in ("mock", "external"):
            raise ValueError(f"unknown codec mode {self.codec!r}")


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    tmp.replace(path)


def _write_json(path: Path, obj) -> None:
    _write_atomic(path, json.dumps(obj, indent=2, sort_keys=True).encode() + b"\n")


class VideoAsset:
    def __init__(self, root: Path):
        self.root = root
        self.video_id = root.name
        with open(root / "meta.json") as fh:
            self.meta = json.load(fh)
        self._seq: FrameSequence | None = None
        self._flow: FlowStore | None = None
        self._lock = threading.Lock()

    @property
    def source_path(self) -> Path:
        return self.root / "source.y4m"

    @property
    def flow_path(self) -> Path:
        return self.root / "flow.vflo"

    def sequence(self) -> FrameSequence:
        with self._lock:
            if self._seq is None:
                with open(self.source_path, "rb") as fh:
                    self._seq = load_y4m(fh)
            return self._seq

    def flow_store(self) -> FlowStore:
        if not self.flow_path.exists():
            raise PreconditionError(
                f"flow for video {self.video_id!r} is not precomputed; "
                f"run: vimp flow --id {self.video_id}")
        with self._lock:
            if self._flow is None:
                self._flow = FlowStore(self.flow_path)
            return self._flow

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(target_bitrate=float(self.meta["bitrate"]))


class VideoLibrary:
    def __init__(self, data_dir: Path):
        self.videos_dir = Path(data_dir) / "videos"
        self.videos_dir.mkdir(parents=True, exist_ok=True)
        self._assets: dict[str, VideoAsset] = {}
        self._lock = threading.Lock()

    def ingest(self, y4m_path: str | Path, video_id: str, bitrate: float) -> VideoAsset:
        if bitrate <= 0:
            raise ValueError("bitrate must be positive")
        y4m_path = Path(y4m_path)
        with open(y4m_path, "rb") as fh:
            seq = load_y4m(fh)
        root = self.videos_dir / video_id
        root.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(y4m_path, root / "source.y4m")
        meta = {
            "id": video_id,
            "width": seq.orig_width,
            "height": seq.orig_height,
            "padded_width": seq.width,
            "padded_height": seq.height,
            "frames": seq.frame_count,
            "fps_num": seq.fps_num,
            "fps_den": seq.fps_den,
            "chroma": seq.chroma_mode,
            "bitrate": float(bitrate),
        }
        _write_json(root / "meta.json", meta)
        with self._lock:
            self._assets.pop(video_id, None)
        return self.get(video_id)

    def list(self) -> list[dict]:
        out = []
        for root in sorted(self.videos_dir.iterdir()):
            if (root / "meta.json").exists():
                out.append(self.get(root.name).meta)
        return out

    def get(self, video_id: str) -> VideoAsset:
        with self._lock:
            asset = self._assets.get(video_id)
            if asset is not None:
                return asset
        root = self.videos_dir / video_id
        if not (root / "meta.json").exists():
            raise NotFoundError(f"unknown video {video_id!r}")
        asset = VideoAsset(root)
        with self._lock:
            self._assets[video_id] = asset
        return asset


JOB_STATES = ("queued", "running", "done", "failed")


@dataclass
class EncodeJob:
    job_id: str
    session_id: str
    iteration: int
    state: str = "queued"
    error: str | None = None
    stats: dict | None = None

    def snapshot(self) -> dict:
        out = {"job_id": self.job_id, "state": self.state, "iteration": self.iteration}
        if self.error is not None:
            out["error"] = self.error
        if self.stats is not None:
            out["stats"] = self.stats
        return out


class Session:
    def __init__(self, root: Path, manifest: dict,
                 volume_raw: ImportanceVolume, volume_norm: ImportanceVolume):
        self.root = root
        self.manifest = manifest
        self.volume_raw = volume_raw
        self.volume_norm = volume_norm
        self.lock = threading.RLock()
        self.jobs: dict[str, EncodeJob] = {}
        self.active_job: EncodeJob | None = None

    @property
    def session_id(self) -> str:
        return self.manifest["session_id"]

    @property
    def video_id(self) -> str:
        return self.manifest["video_id"]

    @property
    def finalized(self) -> bool:
        return self.manifest.get("finalized_at") is not None

    @property
    def iterations(self) -> int:
        return self.manifest["iterations"]

    def persist_volumes(self) -> None:
        _write_atomic(self.root / "volume_raw.vimp", vimp_bytes(self.volume_raw))
        _write_atomic(self.root / "volume_norm.vimp", vimp_bytes(self.volume_norm))

    def persist_manifest(self) -> None:
        _write_json(self.root / "manifest.json", self.manifest)

    def append_strokes(self, records: list[dict]) -> None:
        with open(self.root / "strokes.jsonl", "a") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def stroke_count(self) -> int:
        path = self.root / "strokes.jsonl"
        if not path.exists():
            return 0
        with open(path) as fh:
            return sum(1 for line in fh if line.strip())


class AnnotationService:
    """Domain operations behind the HTTP API; also used directly by the CLI."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.config.data_dir.mkdir(parents=True, exist_ok=True)
        self.videos = VideoLibrary(config.data_dir)
        self.sessions_dir = config.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._load_sessions()

    # -- loading / lookup ------------------------------------------------

    def _load_sessions(self) -> None:
        for root in sorted(self.sessions_dir.iterdir()):
            manifest_path = root / "manifest.json"
            if not manifest_path.exists():
                continue
            with open(manifest_path) as fh:
                manifest = json.load(fh)
            with open(root / "volume_raw.vimp", "rb") as fh:
                raw = read_vimp(fh)
            with open(root / "volume_norm.vimp", "rb") as fh:
                norm = read_vimp(fh)
            session = Session(root, manifest, raw, norm)
            self._sessions[manifest["session_id"]] = session

    def session(self, session_id: str) -> Session:
        with self._lock:
            s = self._sessions.get(session_id)
        if s is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        return s

    # -- operations ------------------------------------------------------

    def create_session(self, video_id: str, user_id: str) -> Session:
        asset = self.videos.get(video_id)
        flow = asset.flow_store()
        if len(flow) < asset.meta["frames"] - 1:
            raise PreconditionError(
                f"flow for video {video_id!r} is incomplete "
                f"({len(flow)} of {asset.meta['frames'] - 1} fields); "
                f"run: vimp flow --id {video_id}")
        self._ensure_baseline(asset)
        session_id = uuid.uuid4().hex[:12]
        root = self.sessions_dir / session_id
        root.mkdir(parents=True)
        volume = new_volume(asset.meta["width"], asset.meta["height"],
                            asset.meta["frames"])
        norm = normalize(volume).volume
        manifest = {
            "session_id": session_id,
            "user_id": user_id,
            "video_id": video_id,
            "created_at": self.config.clock(),
            "finalized_at": None,
            "min_annotation_seconds": self.config.min_annotation_seconds,
            "iterations": 0,
            "codec": self.config.codec,
        }
        session = Session(root, manifest, volume, norm)
        session.persist_volumes()
        session.persist_manifest()
        with self._lock:
            self._sessions[session_id] = session
        return session

    def _ensure_baseline(self, asset: VideoAsset) -> None:
        """Baseline (zero offset map) encode, cached once per video."""
        if self.config.codec != "mock":
            return  # external baseline is produced on demand by encode jobs
        recon_path = asset.root / "baseline.y4m"
        if recon_path.exists():
            return
        result = mock_codec.mock_encode_two_pass(
            asset.sequence(), None, asset.encoder_config())
        _write_atomic(asset.root / "baseline.vmck", mock_codec.bitstream_bytes(result))
        _write_json(asset.root / "baseline.stats.json", stats_dict(result))
        _write_atomic(recon_path, y4m_bytes(result.reconstruction))

    def submit_strokes(self, session_id: str, strokes: list[Stroke]) -> ImportanceVolume:
        session = self.session(session_id)
        asset = self.videos.get(session.video_id)
        with session.lock:
            if session.finalized:
                raise SessionConflictError(f"session {session_id} is finalized")
            width, height = asset.meta["width"], asset.meta["height"]
            frames = asset.meta["frames"]
            for s in strokes:
                s.validate(width, height, frames)
            flow = asset.flow_store()
            now = self.config.clock()
            volume = session.volume_raw
            for s in strokes:
                delta = stroke_kernel(s)
                volume = propagate_stroke(volume, delta, flow, self.config.decay)
            session.volume_raw = volume
            session.volume_norm = normalize(volume).volume
            session.persist_volumes()
            session.append_strokes([
                {"ts": now, "frame": s.frame, "cx": s.cx, "cy": s.cy,
                 "radius": s.radius, "strength": s.strength, "polarity": s.polarity}
                for s in strokes])
            return session.volume_norm

    def request_encode(self, session_id: str) -> EncodeJob:
        session = self.session(session_id)
        with session.lock:
            if session.finalized:
                raise SessionConflictError(f"session {session_id} is finalized")
            active = session.active_job
            if active is not None and active.state in ("queued", "running"):
                raise SessionConflictError(
                    f"encode job {active.job_id} is already {active.state}")
            job = EncodeJob(
                job_id=uuid.uuid4().hex[:12],
                session_id=session_id,
                iteration=session.iterations + 1,
            )
            session.jobs[job.job_id] = job
            session.active_job = job
            volume = session.volume_norm.copy()
        thread = threading.Thread(
            target=self._run_encode, args=(session, job, volume), daemon=True)
        thread.start()
        return job

    def _run_encode(self, session: Session, job: EncodeJob,
                    volume: ImportanceVolume) -> None:
        job.state = "running"
        try:
            asset = self.videos.get(session.video_id)
            dqp = volume_to_delta_qp(volume)
            cfg = asset.encoder_config()
            if self.config.codec == "external":
                if self.config.adapter is None:
                    raise CapabilityError(
                        "service configured for external codec without an adapter")
                result = external_encode(asset.source_path, dqp, cfg,
                                         self.config.adapter,
                                         workdir=session.root / f"ext-{job.job_id}")
            else:
                result = mock_codec.mock_encode_two_pass(asset.sequence(), dqp, cfg)
            self._complete_encode(session, job, volume, result)
        except Exception as exc:  # job must never take the service down
            job.error = f"{type(exc).__name__}: {exc}"
            job.state = "failed"

    def _complete_encode(self, session: Session, job: EncodeJob,
                         volume: ImportanceVolume, result: EncodeResult) -> None:
        with session.lock:
            snap_dir = session.root / "snapshots"
            snap_dir.mkdir(exist_ok=True)
            tag = f"{job.iteration:03d}"
            _write_atomic(snap_dir / f"{tag}.map.vimp", vimp_bytes(volume))
            stats = stats_dict(result)
            stats["iteration"] = job.iteration
            _write_json(snap_dir / f"{tag}.stats.json", stats)
            if isinstance(result.bitstream, (bytes, bytearray)):
                _write_atomic(snap_dir / f"{tag}.recon.y4m",
                              y4m_bytes(result.reconstruction))
            else:
                shutil.copyfile(result.bitstream, snap_dir / f"{tag}.bitstream")
            session.manifest["iterations"] = job.iteration
            session.persist_manifest()
            job.stats = stats
            job.state = "done"

    def job(self, session_id: str, job_id: str) -> EncodeJob:
        session = self.session(session_id)
        job = session.jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"unknown job {job_id!r}")
        return job

    def wait_for_job(self, session_id: str, job_id: str, timeout: float = 120.0) -> EncodeJob:
        deadline = time.monotonic() + timeout
        job = self.job(session_id, job_id)
        while job.state in ("queued", "running"):
            if time.monotonic() > deadline:
                raise TimeoutError(f"job {job_id} still {job.state} after {timeout}s")
            time.sleep(0.01)
        return job

    def finalize(self, session_id: str) -> Path:
        session = self.session(session_id)
        with session.lock:
            if session.finalized:
                raise SessionConflictError(f"session {session_id} is already finalized")
            now = self.config.clock()
            elapsed = now - session.manifest["created_at"]
            minimum = session.manifest["min_annotation_seconds"]
            if elapsed < minimum:
                remaining = math.ceil(minimum - elapsed)
                raise PolicyError(
                    f"annotation time below minimum: {remaining} s remaining",
                    remaining_seconds=remaining)
            final_path = session.root / "final.vimp"
            _write_atomic(final_path, vimp_bytes(session.volume_norm))
            _write_atomic(session.root / "final_raw.vimp", vimp_bytes(session.volume_raw))
            session.manifest["finalized_at"] = now
            session.persist_manifest()
            return final_path

    def remaining_seconds(self, session: Session) -> int:
        if session.finalized:
            return 0
        elapsed = self.config.clock() - session.manifest["created_at"]
        return max(0, math.ceil(session.manifest["min_annotation_seconds"] - elapsed))

    def session_info(self, session_id: str) -> dict:
        session = self.session(session_id)
        with session.lock:
            return {
                "session_id": session.session_id,
                "video_id": session.video_id,
                "user_id": session.manifest["user_id"],
                "created_at": session.manifest["created_at"],
                "finalized": session.finalized,
                "remaining_seconds": self.remaining_seconds(session),
                "iterations": session.iterations,
                "stroke_count": session.stroke_count(),
            }

    def map_bytes(self, session_id: str) -> bytes:
        session = self.session(session_id)
        with session.lock:
            return vimp_bytes(session.volume_norm)

    def edge_bytes(self, session_id: str, frame: int,
                   threshold: int | None = None) -> tuple[bytes, int, int, int]:
        session = self.session(session_id)
        asset = self.videos.get(session.video_id)
        seq = asset.sequence()
        if not 0 <= frame < seq.frame_count:
            raise NotFoundError(f"frame {frame} out of range 0..{seq.frame_count - 1}")
        thr = self.config.edge_threshold if threshold is None else threshold
        mask = sobel_edges(seq.frames[frame], thr)
        oh, ow = seq.orig_height, seq.orig_width
        grid = np.ascontiguousarray(mask.magnitude[:oh, :ow])
        return grid.tobytes(), ow, oh, thr

    def video_bytes(self, session_id: str) -> tuple[bytes, str]:
        """Latest reconstruction for the session (baseline before any encode)."""
        session = self.session(session_id)
        asset = self.videos.get(session.video_id)
        with session.lock:
            iteration = session.iterations
            if iteration > 0:
                tag = f"{iteration:03d}"
                recon = session.root / "snapshots" / f"{tag}.recon.y4m"
                if recon.exists():
                    return recon.read_bytes(), "video/x-yuv4mpeg"
                bitstream = session.root / "snapshots" / f"{tag}.bitstream"
                if bitstream.exists():
                    return bitstream.read_bytes(), "application/octet-stream"
        baseline = asset.root / "baseline.y4m"
        if baseline.exists():
            return baseline.read_bytes(), "video/x-yuv4mpeg"
        raise NotFoundError("no encode available for this session yet")


class SessionIn(BaseModel):
    video_id: str
    user_id: str


class StrokeIn(BaseModel):
    frame: int
    cx: float
    cy: float
    radius: float
    strength: int = 64
    polarity: str = "paint"


def create_app(config: ServiceConfig):
    """FastAPI application wrapping an AnnotationService."""
    from fastapi import FastAPI, Request, Response
    from fastapi.responses import JSONResponse

    service = AnnotationService(config)
    app = FastAPI(title="vimp annotation service")
    app.state.service = service

    error_status = {
        NotFoundError: 404,
        SessionConflictError: 409,
        PreconditionError: 409,
        PolicyError: 403,
        CapabilityError: 501,
        ValueError: 400,
    }

    def _error_response(status: int):
        async def handler(request: Request, exc: Exception):
            body = {"detail": str(exc)}
            if isinstance(exc, PolicyError):
                body["remaining_seconds"] = exc.remaining_seconds
            return JSONResponse(status_code=status, content=body)
        return handler

    # per-class handlers: a handled domain error is a normal response, not
    # an ASGI failure (a bare Exception handler would re-raise and make
    # uvicorn drop the keep-alive connection)
    for etype, status in error_status.items():
        app.add_exception_handler(etype, _error_response(status))

    @app.get("/videos")
    def list_videos():
        out = []
        for meta in service.videos.list():
            out.append({
                "id": meta["id"],
                "width": meta["width"],
                "height": meta["height"],
                "frames": meta["frames"],
                "fps": meta["fps_num"] / meta["fps_den"],
                "fps_num": meta["fps_num"],
                "fps_den": meta["fps_den"],
                "bitrate": meta["bitrate"],
            })
        return out

    @app.post("/sessions")
    def create_session(body: SessionIn):
        session = service.create_session(body.video_id, body.user_id)
        return {"session_id": session.session_id}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        return service.session_info(session_id)

    @app.get("/sessions/{session_id}/map")
    def get_map(session_id: str):
        return Response(content=service.map_bytes(session_id),
                        media_type="application/octet-stream")

    @app.get("/sessions/{session_id}/edges/{frame}")
    def get_edges(session_id: str, frame: int, threshold: int | None = None):
        data, w, h, thr = service.edge_bytes(session_id, frame, threshold)
        return Response(content=data, media_type="application/octet-stream",
                        headers={"X-Width": str(w), "X-Height": str(h),
                                 "X-Threshold": str(thr)})

    @app.post("/sessions/{session_id}/strokes")
    def post_strokes(session_id: str, strokes: list[StrokeIn]):
        parsed = [Stroke(frame=s.frame, cx=s.cx, cy=s.cy, radius=s.radius,
                         strength=s.strength, polarity=s.polarity)
                  for s in strokes]
        norm = service.submit_strokes(session_id, parsed)
        return Response(content=vimp_bytes(norm),
                        media_type="application/octet-stream")

    @app.post("/sessions/{session_id}/encode")
    def post_encode(session_id: str):
        job = service.request_encode(session_id)
        return {"job_id": job.job_id}

    @app.get("/sessions/{session_id}/encode/{job_id}")
    def get_job(session_id: str, job_id: str):
        return service.job(session_id, job_id).snapshot()

    @app.get("/sessions/{session_id}/video")
    def get_video(session_id: str):
        data, media_type = service.video_bytes(session_id)
        return Response(content=data, media_type=media_type)

    @app.post("/sessions/{session_id}/finalize")
    def post_finalize(session_id: str):
        return {"path": str(service.finalize(session_id))}

    return app
