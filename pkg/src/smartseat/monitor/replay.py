"""Replay a recorded frame stream into a running service over TCP."""

from __future__ import annotations

import socket
import time
from dataclasses import dataclass
from typing import Sequence

from ..errors import InvalidInputError
from ..sensing import SensorFrame
from .wire import ACK_BYTE, WireFrame, encode_frame


@dataclass
class ReplayResult:
    frames_sent: int
    acks_received: int
    wall_time_s: float
    max_roundtrip_ms: float


def frames_to_wire(frames: Sequence[SensorFrame]) -> list[WireFrame]:
    return [
        WireFrame(timestamp_ms=f.timestamp_ms, counts=tuple(int(c) for c in f.counts))
        for f in frames
    ]


def replay(
    host: str,
    port: int,
    frames: Sequence[WireFrame],
    speed: float = 1.0,
    wait_each: bool = True,
) -> ReplayResult:
    """Send frames paced by their timestamps divided by ``speed``.

    With ``wait_each`` the sender blocks for the per-frame ACK, measuring a
    true end-to-end (send -> classify -> persist -> ack) round trip.
    """
    if not frames:
        raise InvalidInputError("nothing to replay")
    if speed <= 0:
        raise InvalidInputError("speed must be positive")
    t_start = time.perf_counter()
    base_ms = frames[0].timestamp_ms
    acks = 0
    max_rt = 0.0
    with socket.create_connection((host, port)) as sock:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        for frame in frames:
            due = (frame.timestamp_ms - base_ms) / 1000.0 / speed
            now = time.perf_counter() - t_start
            if due > now:
                time.sleep(due - now)
            t0 = time.perf_counter()
            sock.sendall(encode_frame(frame))
            if wait_each:
                if _recv_exact(sock, 1) != ACK_BYTE:
                    break
                acks += 1
                max_rt = max(max_rt, (time.perf_counter() - t0) * 1000.0)
        if not wait_each:
            sock.shutdown(socket.SHUT_WR)
            while True:
                data = sock.recv(4096)
                if not data:
                    break
                acks += data.count(ACK_BYTE[0])
    return ReplayResult(
        frames_sent=len(frames),
        acks_received=acks,
        wall_time_s=time.perf_counter() - t_start,
        max_roundtrip_ms=max_rt,
    )


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return buf
        buf += chunk
    return buf
