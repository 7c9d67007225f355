"""The live monitoring service.

Two listeners share one process:

  * a TCP ingest listener taking back-to-back WireFrame records, one
    session per connection; frames are classified, written ahead to the
    session log, then acknowledged with a single 0x06 byte, so every
    acknowledged frame is on disk;
  * a FastAPI HTTP/WebSocket app for clients: health, session listings,
    windowed statistics, live labeling, and an NDJSON event stream.

Each connection's pipeline is strictly ordered (decode -> classify ->
persist -> ack), which gives per-session event ordering and loss-free
backpressure for free: a sender outrunning the pipeline simply sees TCP
slow down, never silent drops.
"""

from __future__ import annotations

import asyncio
import json
import os
import socket
import socketserver
import threading
import time
import uuid

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, PlainTextResponse
from starlette.websockets import WebSocket, WebSocketDisconnect

from .. import ppg
from ..errors import SmartSeatError, StartupError, WireError
from ..export import load_artifact, load_model
from .config import MonitorConfig
from .session import ClassifiedFrame, SessionRecord, SessionStore, posture_stats
from .stream import StreamClassifier
from .wire import ACK_BYTE as ACK
from .wire import FrameStreamDecoder


class _LiveState:
    """Mutable service-wide state shared between ingest threads and HTTP."""

    def __init__(self):
        self.lock = threading.Lock()
        self.sessions: dict[str, SessionRecord] = {}  # live (open) sessions
        self.latest: dict[str, dict] = {}
        self.latency_ms: dict[str, float] = {}  # worst per-frame latency
        self.subscribers: set[asyncio.Queue] = set()
        self.loop: asyncio.AbstractEventLoop | None = None

    def broadcast(self, line: str) -> None:
        loop = self.loop
        if loop is None:
            return
        with self.lock:
            queues = list(self.subscribers)
        for q in queues:
            loop.call_soon_threadsafe(q.put_nowait, line)


class _SessionPipeline:
    """Ordered per-connection pipeline: classify, log, publish."""

    def __init__(self, service: "MonitorService"):
        self.service = service
        self.session_id = uuid.uuid4().hex[:12]
        self.classifier = StreamClassifier(service.model, service.config.debounce_k)
        self.record = SessionRecord(
            session_id=self.session_id,
            started_ms=0,
            ended_ms=None,
            frame_period_ms=service.config.frame_period_ms,
        )
        self.first = True
        self._ppg_chain = ppg.StreamingChain(service.config.ppg_fs_hz)
        self._ppg_buffer: list[float] = []
        self._ppg_samples = 0
        self._bpm: float | None = None
        path = os.path.join(service.store.root, f"{self.session_id}.ndjson.live")
        self._log = open(path, "w")
        self._log_path = path
        with service.state.lock:
            service.state.sessions[self.session_id] = self.record
        service.register_pipeline(self)

    def _log_line(self, obj: dict) -> None:
        self._log.write(json.dumps(obj) + "\n")
        self._log.flush()

    def handle_frame(self, timestamp_ms: int, counts: tuple[int, ...],
                     ppg_block: tuple[int, ...] | None) -> None:
        t0 = time.perf_counter()
        if self.first:
            self.record.started_ms = timestamp_ms
            self._log_line(
                {
                    "kind": "header",
                    "session_id": self.session_id,
                    "started_ms": timestamp_ms,
                    "ended_ms": None,
                    "frame_period_ms": self.record.frame_period_ms,
                }
            )
            self.first = False
        event = self.classifier.push(timestamp_ms, counts)
        label = self.classifier.current_label
        conf = float(event.confidence) if event else self._last_conf(counts)
        frame = ClassifiedFrame(
            timestamp_ms=timestamp_ms, counts=counts, label=label, confidence=conf
        )
        self.record.frames.append(frame)
        self._log_line(
            {"kind": "frame", "t": timestamp_ms, "counts": list(counts),
             "label": label, "conf": conf}
        )
        if event is not None:
            self.record.events.append(event)
            self._log_line(
                {"kind": "event", "t": event.timestamp_ms, "posture": event.label,
                 "conf": event.confidence}
            )
        if ppg_block:
            self._ingest_ppg(timestamp_ms, ppg_block)
        latency_ms = (time.perf_counter() - t0) * 1000.0
        state = self.service.state
        with state.lock:
            state.latency_ms[self.session_id] = max(
                state.latency_ms.get(self.session_id, 0.0), latency_ms
            )
            state.latest[self.session_id] = {
                "t": timestamp_ms,
                "posture": label,
                "conf": round(conf, 4),
                "bpm": self._bpm,
                "counts": list(counts),
                "event": event is not None,
            }
            line = json.dumps(state.latest[self.session_id] | {"session": self.session_id})
        state.broadcast(line)

    def _last_conf(self, counts) -> float:
        _, conf = self.service.model.predict_one_with_confidence(counts)
        return float(conf)

    def _ingest_ppg(self, timestamp_ms: int, block: tuple[int, ...]) -> None:
        # i16 wire samples carry millivolt-scaled chain input.
        samples = np.asarray(block, dtype=float) / 1000.0
        out = self._ppg_chain.push(samples)
        self._ppg_buffer.extend(out["d"].tolist())
        self._ppg_samples += len(block)
        fs = self.service.config.ppg_fs_hz
        window = int(self.service.config.hr_window_s * fs)
        if len(self._ppg_buffer) > window:
            del self._ppg_buffer[: len(self._ppg_buffer) - window]
        if len(self._ppg_buffer) >= 2 * fs:
            trace = ppg.PpgTrace(fs_hz=fs, samples=np.asarray(self._ppg_buffer))
            try:
                peaks = ppg.detect_peaks(trace)
                series = ppg.heart_rate(peaks, fs, window_s=self.service.config.hr_window_s)
                self._bpm = round(float(series.bpm[-1]), 1)
                self.record.bpm.append((timestamp_ms, self._bpm))
                self._log_line({"kind": "bpm", "t": timestamp_ms, "bpm": self._bpm})
            except SmartSeatError:
                pass  # not enough beats yet

    def add_label_mark(self, mark) -> None:
        self.record.label_marks.append(mark)
        self._log_line(
            {"kind": "label", "t": mark.timestamp_ms, "posture": mark.posture,
             "action": mark.action}
        )

    def close(self) -> None:
        if not self.first:
            self.record.ended_ms = self.record.frames[-1].timestamp_ms
            self.service.store.persist(self.record)
        self._log.close()
        os.unlink(self._log_path)
        with self.service.state.lock:
            self.service.state.sessions.pop(self.session_id, None)
        # Unregister last: the drain loop in stop() waits on this.
        self.service.unregister_pipeline(self)


class _IngestHandler(socketserver.BaseRequestHandler):
    def handle(self):
        service: MonitorService = self.server.service
        pipeline = _SessionPipeline(service)
        decoder = FrameStreamDecoder()
        service.track_connection(self.request)
        try:
            while True:
                try:
                    data = self.request.recv(65536)
                except OSError:
                    break  # socket shut down during drain
                if not data:
                    break
                try:
                    frames = decoder.feed(data)
                except WireError:
                    break  # reject the connection at the bad frame boundary
                for frame in frames:
                    pipeline.handle_frame(frame.timestamp_ms, frame.counts, frame.ppg)
                    try:
                        self.request.sendall(ACK)
                    except OSError:
                        break
        finally:
            service.untrack_connection(self.request)
            pipeline.close()


class _IngestServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def _build_app(service: "MonitorService") -> FastAPI:
    from contextlib import asynccontextmanager

    state = service.state

    @asynccontextmanager
    async def lifespan(_app):
        state.loop = asyncio.get_running_loop()
        yield

    app = FastAPI(title="smartseat monitor", version="1.0", lifespan=lifespan)

    @app.get("/health")
    def health():
        with state.lock:
            active = list(state.sessions)
        return {
            "status": "ok",
            "model_kind": service.model.kind,
            "model_checksum": f"{service.model_checksum:08x}",
            "active_sessions": active,
        }

    @app.get("/sessions")
    def sessions():
        stored = service.store.list_sessions()
        with state.lock:
            live = [
                {
                    "session_id": sid,
                    "started_ms": rec.started_ms,
                    "ended_ms": None,
                    "n_frames": len(rec.frames),
                }
                for sid, rec in state.sessions.items()
            ]
        return {"stored": stored, "live": live}

    def _find_session(session_id: str) -> SessionRecord:
        with state.lock:
            if session_id in state.sessions:
                return state.sessions[session_id]
        try:
            return service.store.load(session_id)
        except SmartSeatError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.get("/sessions/{session_id}/stats")
    def session_stats(
        session_id: str,
        window_from: int | None = Query(None, alias="from"),
        window_to: int | None = Query(None, alias="to"),
    ):
        record = _find_session(session_id)
        stats = posture_stats(record, window_from_ms=window_from, window_to_ms=window_to)
        return {
            "session_id": session_id,
            "window_from_ms": stats.window_from_ms,
            "window_to_ms": stats.window_to_ms,
            "n_frames": stats.n_frames,
            "durations_s": stats.durations_s,
            "repetitions": stats.repetitions,
        }

    @app.post("/sessions/{session_id}/label")
    def add_label(session_id: str, mark: dict):
        from .session import LabelMark

        posture = mark.get("posture")
        action = mark.get("action")
        t = mark.get("t")
        if action not in ("start", "stop") or not isinstance(t, int) or not posture:
            raise HTTPException(status_code=422, detail="need posture, action, t")
        with state.lock:
            pipeline_record = state.sessions.get(session_id)
        if pipeline_record is None:
            raise HTTPException(status_code=404, detail=f"no live session {session_id}")
        with service.ingest_lock:
            lm = LabelMark(timestamp_ms=t, posture=posture, action=action)
            pipeline = service.pipelines.get(session_id)
            if pipeline is not None:
                pipeline.add_label_mark(lm)
            else:
                pipeline_record.label_marks.append(lm)
        return {"confirmed": True, "t": t, "posture": posture, "action": action}

    @app.get("/layout.csv", response_class=PlainTextResponse)
    def layout_csv():
        if service.config.layout_path and os.path.exists(service.config.layout_path):
            with open(service.config.layout_path) as fh:
                return fh.read()
        from ..sensing import LAYOUT_HEADER, CushionLayout

        layout = CushionLayout()
        lines = [LAYOUT_HEADER]
        for i, (x, y) in enumerate(layout.sensor_positions):
            lines.append(f"S{i + 1},{x},{y}")
        return "\n".join(lines) + "\n"

    @app.websocket("/live")
    async def live(ws: WebSocket):
        await ws.accept()
        q: asyncio.Queue = asyncio.Queue()
        with state.lock:
            state.subscribers.add(q)
        try:
            while True:
                line = await q.get()
                await ws.send_text(line)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            with state.lock:
                state.subscribers.discard(q)

    if service.config.static_dir and os.path.isdir(service.config.static_dir):
        static_root = service.config.static_dir

        @app.get("/")
        def index():
            return FileResponse(os.path.join(static_root, "index.html"))

        @app.get("/static/{path:path}")
        def static_file(path: str):
            full = os.path.normpath(os.path.join(static_root, path))
            if not full.startswith(os.path.abspath(static_root)) and not os.path.abspath(
                full
            ).startswith(os.path.abspath(static_root)):
                raise HTTPException(status_code=404)
            if not os.path.isfile(full):
                raise HTTPException(status_code=404)
            return FileResponse(full)

    return app


class MonitorService:
    """Running service handle: owns the ingest server and the HTTP app."""

    def __init__(self, config: MonitorConfig):
        self.config = config
        try:
            artifact = load_artifact(config.model_path)
            self.model = load_model(artifact)
            self.model_checksum = artifact.checksum
        except (OSError, SmartSeatError) as exc:
            raise StartupError(f"cannot load model artifact: {exc}") from exc
        self.store = SessionStore(config.storage_dir)
        self.state = _LiveState()
        self.pipelines: dict[str, _SessionPipeline] = {}
        self.ingest_lock = threading.Lock()
        self._connections: set[socket.socket] = set()
        self._threads: list[threading.Thread] = []
        self._ingest_server: _IngestServer | None = None
        self._uvicorn: uvicorn.Server | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        try:
            self._ingest_server = _IngestServer(
                (self.config.host, self.config.ingest_port), _IngestHandler
            )
        except OSError as exc:
            raise StartupError(f"ingest port unavailable: {exc}") from exc
        self._ingest_server.service = self

        app = _build_app(self)
        uv_config = uvicorn.Config(
            app, host=self.config.host, port=self.config.http_port, log_level="warning"
        )
        self._uvicorn = uvicorn.Server(uv_config)

        t_ingest = threading.Thread(
            target=self._ingest_server.serve_forever, name="ingest", daemon=True
        )
        t_http = threading.Thread(target=self._uvicorn.run, name="http", daemon=True)
        self._threads = [t_ingest, t_http]
        t_ingest.start()
        t_http.start()
        deadline = time.time() + 10.0
        while time.time() < deadline:
            if self._uvicorn.started:
                return
            if not t_http.is_alive():
                self._ingest_server.shutdown()
                raise StartupError("http server failed to start (port in use?)")
            time.sleep(0.02)
        self.stop()
        raise StartupError("http server did not come up in time")

    def stop(self) -> None:
        """Stop listening, drain in-flight sessions, and shut down.

        Draining shuts each live ingest socket down read-side; its handler
        then closes and persists the pipeline, so every acknowledged frame
        is in the stored session.
        """
        if self._ingest_server is not None:
            self._ingest_server.shutdown()
        with self.ingest_lock:
            conns = list(self._connections)
        for sock in conns:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        deadline = time.time() + 10.0
        while time.time() < deadline:
            with self.ingest_lock:
                if not self.pipelines:
                    break
            time.sleep(0.02)
        if self._ingest_server is not None:
            self._ingest_server.server_close()
        if self._uvicorn is not None:
            self._uvicorn.should_exit = True
        for t in self._threads:
            t.join(timeout=10.0)

    def track_connection(self, sock: socket.socket) -> None:
        with self.ingest_lock:
            self._connections.add(sock)

    def untrack_connection(self, sock: socket.socket) -> None:
        with self.ingest_lock:
            self._connections.discard(sock)

    @property
    def ingest_port(self) -> int:
        return self._ingest_server.server_address[1]

    @property
    def http_port(self) -> int:
        if self._uvicorn is not None and self._uvicorn.servers:
            socks = self._uvicorn.servers[0].sockets
            if socks:
                return socks[0].getsockname()[1]
        return self.config.http_port

    # Pipelines register themselves so label marks reach the write-ahead log.

    def register_pipeline(self, pipeline: _SessionPipeline) -> None:
        with self.ingest_lock:
            self.pipelines[pipeline.session_id] = pipeline

    def unregister_pipeline(self, pipeline: _SessionPipeline) -> None:
        with self.ingest_lock:
            self.pipelines.pop(pipeline.session_id, None)


def serve(config: MonitorConfig) -> MonitorService:
    """Start the service; returns a handle with .stop()."""
    service = MonitorService(config)
    service.start()
    return service
