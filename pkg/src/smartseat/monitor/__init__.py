"""Real-time monitoring: wire codec, debounced stream classification,
session persistence/statistics, and the TCP + HTTP/WebSocket service."""

from .session import PostureStats, SessionRecord, SessionStore, posture_stats
from .stream import PostureEvent, StreamClassifier
from .wire import WireFrame, decode_frame, encode_frame

__all__ = [
    "PostureEvent",
    "PostureStats",
    "SessionRecord",
    "SessionStore",
    "StreamClassifier",
    "WireFrame",
    "decode_frame",
    "encode_frame",
    "posture_stats",
]
