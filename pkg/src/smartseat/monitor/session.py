"""Session records, posture statistics, and the on-disk session store.

A session is one ingest connection's worth of classified frames plus the
heart-rate series and any operator label marks. Storage is one NDJSON file
per session plus a JSON index, both written atomically (temp file then
rename) so a crash never leaves a half-written record in place.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass, field

from ..errors import InvalidInputError, NotFoundError
from .stream import PostureEvent


@dataclass(frozen=True)
class ClassifiedFrame:
    timestamp_ms: int
    counts: tuple[int, ...]
    label: str
    confidence: float


@dataclass(frozen=True)
class LabelMark:
    timestamp_ms: int
    posture: str
    action: str  # "start" | "stop"


@dataclass
class SessionRecord:
    session_id: str
    started_ms: int
    ended_ms: int | None
    frame_period_ms: int
    frames: list[ClassifiedFrame] = field(default_factory=list)
    events: list[PostureEvent] = field(default_factory=list)
    bpm: list[tuple[int, float]] = field(default_factory=list)  # (t_ms, bpm)
    label_marks: list[LabelMark] = field(default_factory=list)

    def equals(self, other: "SessionRecord") -> bool:
        return (
            self.session_id == other.session_id
            and self.started_ms == other.started_ms
            and self.ended_ms == other.ended_ms
            and self.frame_period_ms == other.frame_period_ms
            and self.frames == other.frames
            and self.events == other.events
            and self.bpm == other.bpm
            and self.label_marks == other.label_marks
        )


@dataclass
class PostureStats:
    """Per-posture totals over a time window.

    durations_s: seconds spent in each posture (frame count x frame period).
    repetitions: number of maximal same-label runs.
    """

    durations_s: dict[str, float]
    repetitions: dict[str, int]
    window_from_ms: int
    window_to_ms: int
    n_frames: int

    @property
    def total_s(self) -> float:
        return sum(self.durations_s.values())


def posture_stats(
    session: SessionRecord,
    window_from_ms: int | None = None,
    window_to_ms: int | None = None,
) -> PostureStats:
    """Durations and repetition counts over [window_from_ms, window_to_ms].

    An empty window produces empty stats rather than an error. Durations
    sum to the covered span within one frame period.
    """
    lo = session.started_ms if window_from_ms is None else window_from_ms
    hi_default = session.ended_ms if session.ended_ms is not None else (
        session.frames[-1].timestamp_ms if session.frames else session.started_ms
    )
    hi = hi_default if window_to_ms is None else window_to_ms
    frames = [f for f in session.frames if lo <= f.timestamp_ms <= hi]
    period_s = session.frame_period_ms / 1000.0
    durations: dict[str, float] = {}
    repetitions: dict[str, int] = {}
    prev_label: str | None = None
    for f in frames:
        durations[f.label] = durations.get(f.label, 0.0) + period_s
        if f.label != prev_label:
            repetitions[f.label] = repetitions.get(f.label, 0) + 1
            prev_label = f.label
    return PostureStats(
        durations_s=durations,
        repetitions=repetitions,
        window_from_ms=lo,
        window_to_ms=hi,
        n_frames=len(frames),
    )


def stats_csv(stats: PostureStats) -> str:
    lines = ["posture,duration_s,repetitions"]
    for label in sorted(stats.durations_s):
        lines.append(
            f"{label},{stats.durations_s[label]!r},{stats.repetitions.get(label, 0)}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Store.


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class SessionStore:
    """NDJSON session files plus an index.json, all atomically replaced."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._index_path = os.path.join(root, "index.json")
        # persist() read-modify-writes the index; concurrent sessions
        # closing together must serialize on it.
        self._lock = threading.Lock()

    def _session_path(self, session_id: str) -> str:
        safe = "".join(c for c in session_id if c.isalnum() or c in "-_")
        if safe != session_id or not safe:
            raise InvalidInputError(f"bad session id {session_id!r}")
        return os.path.join(self.root, f"{safe}.ndjson")

    def list_sessions(self) -> list[dict]:
        if not os.path.exists(self._index_path):
            return []
        with open(self._index_path) as fh:
            return json.load(fh)

    def persist(self, session: SessionRecord) -> str:
        """Write a closed session; returns its id."""
        if session.ended_ms is None:
            raise InvalidInputError("session must be closed before persisting")
        lines = [
            json.dumps(
                {
                    "kind": "header",
                    "session_id": session.session_id,
                    "started_ms": session.started_ms,
                    "ended_ms": session.ended_ms,
                    "frame_period_ms": session.frame_period_ms,
                }
            )
        ]
        for f in session.frames:
            lines.append(
                json.dumps(
                    {
                        "kind": "frame",
                        "t": f.timestamp_ms,
                        "counts": list(f.counts),
                        "label": f.label,
                        "conf": f.confidence,
                    }
                )
            )
        for e in session.events:
            lines.append(
                json.dumps(
                    {"kind": "event", "t": e.timestamp_ms, "posture": e.label,
                     "conf": e.confidence}
                )
            )
        for t, bpm in session.bpm:
            lines.append(json.dumps({"kind": "bpm", "t": t, "bpm": bpm}))
        for m in session.label_marks:
            lines.append(
                json.dumps(
                    {"kind": "label", "t": m.timestamp_ms, "posture": m.posture,
                     "action": m.action}
                )
            )
        with self._lock:
            _atomic_write(self._session_path(session.session_id), "\n".join(lines) + "\n")
            index = [
                s for s in self.list_sessions() if s["session_id"] != session.session_id
            ]
            index.append(
                {
                    "session_id": session.session_id,
                    "started_ms": session.started_ms,
                    "ended_ms": session.ended_ms,
                    "n_frames": len(session.frames),
                }
            )
            index.sort(key=lambda s: (s["started_ms"], s["session_id"]))
            _atomic_write(self._index_path, json.dumps(index, indent=2))
        return session.session_id

    def load(self, session_id: str) -> SessionRecord:
        path = self._session_path(session_id)
        if not os.path.exists(path):
            raise NotFoundError(f"no stored session {session_id!r}")
        record: SessionRecord | None = None
        frames: list[ClassifiedFrame] = []
        events: list[PostureEvent] = []
        bpm: list[tuple[int, float]] = []
        marks: list[LabelMark] = []
        with open(path) as fh:
            for ln in fh:
                obj = json.loads(ln)
                kind = obj["kind"]
                if kind == "header":
                    record = SessionRecord(
                        session_id=obj["session_id"],
                        started_ms=obj["started_ms"],
                        ended_ms=obj["ended_ms"],
                        frame_period_ms=obj["frame_period_ms"],
                    )
                elif kind == "frame":
                    frames.append(
                        ClassifiedFrame(
                            timestamp_ms=obj["t"],
                            counts=tuple(obj["counts"]),
                            label=obj["label"],
                            confidence=obj["conf"],
                        )
                    )
                elif kind == "event":
                    events.append(
                        PostureEvent(
                            timestamp_ms=obj["t"], label=obj["posture"],
                            confidence=obj["conf"],
                        )
                    )
                elif kind == "bpm":
                    bpm.append((obj["t"], obj["bpm"]))
                elif kind == "label":
                    marks.append(
                        LabelMark(timestamp_ms=obj["t"], posture=obj["posture"],
                                  action=obj["action"])
                    )
        if record is None:
            raise NotFoundError(f"session file for {session_id!r} has no header")
        record.frames = frames
        record.events = events
        record.bpm = bpm
        record.label_marks = marks
        return record
