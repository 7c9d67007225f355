"""Binary ingest frame format.

Layout (little-endian, self-delimiting):

    offset 0   u8   magic 0x5C
    offset 1   u8   version (1)
    offset 2   u64  timestamp_ms
    offset 10  u16  x10 ADC counts (each <= 4095)
    offset 30  u16  n  (PPG sample count; 0 = no block)
    offset 32  i16  x n PPG samples

The total record length is derivable once the 32-byte header is in hand,
so records can be streamed back-to-back with no extra length prefix.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from ..errors import FramingError, IncompleteFrameError, ValueRangeError

FRAME_MAGIC = 0x5C
WIRE_VERSION = 1
HEADER_LEN = 32
MAX_COUNT = 4095
ACK_BYTE = b"\x06"  # sent by the service once a frame is classified and logged

_HEADER = struct.Struct("<BBQ10HH")


@dataclass(frozen=True)
class WireFrame:
    timestamp_ms: int
    counts: tuple[int, ...]
    ppg: tuple[int, ...] | None = None  # i16 samples

    def __post_init__(self):
        if len(self.counts) != 10:
            raise ValueRangeError("frame needs exactly 10 counts")
        for c in self.counts:
            if not 0 <= c <= MAX_COUNT:
                raise ValueRangeError(f"count {c} outside 0..{MAX_COUNT}")
        if self.ppg is not None:
            for v in self.ppg:
                if not -32768 <= v <= 32767:
                    raise ValueRangeError(f"ppg sample {v} outside i16 range")


def encode_frame(frame: WireFrame) -> bytes:
    n = 0 if frame.ppg is None else len(frame.ppg)
    head = _HEADER.pack(FRAME_MAGIC, WIRE_VERSION, frame.timestamp_ms, *frame.counts, n)
    if n == 0:
        return head
    return head + struct.pack(f"<{n}h", *frame.ppg)


def decode_frame(buf: bytes | memoryview) -> tuple[WireFrame, int]:
    """Decode one frame from the head of ``buf``.

    Returns (frame, bytes_consumed). Raises without consuming anything, so
    stream parsers stay positioned at the offending frame boundary.
    """
    buf = memoryview(buf)
    if len(buf) < 1:
        raise IncompleteFrameError("empty buffer")
    if buf[0] != FRAME_MAGIC:
        raise FramingError(f"bad magic {buf[0]:#04x}; expected {FRAME_MAGIC:#04x}")
    if len(buf) < HEADER_LEN:
        raise IncompleteFrameError(f"need {HEADER_LEN} header bytes, have {len(buf)}")
    fields = _HEADER.unpack_from(buf, 0)
    version = fields[1]
    if version != WIRE_VERSION:
        raise FramingError(f"unsupported wire version {version}")
    timestamp_ms = fields[2]
    counts = fields[3:13]
    n = fields[13]
    for c in counts:
        if c > MAX_COUNT:
            raise ValueRangeError(f"count {c} outside 0..{MAX_COUNT}")
    total = HEADER_LEN + 2 * n
    if len(buf) < total:
        raise IncompleteFrameError(
            f"frame declares {n} ppg samples ({total} bytes); have {len(buf)}"
        )
    ppg = struct.unpack_from(f"<{n}h", buf, HEADER_LEN) if n else None
    return WireFrame(timestamp_ms=timestamp_ms, counts=counts, ppg=ppg), total


class FrameStreamDecoder:
    """Incremental decoder for a TCP byte stream of back-to-back frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[WireFrame]:
        self._buf.extend(data)
        frames = []
        while self._buf:
            try:
                frame, used = decode_frame(self._buf)
            except IncompleteFrameError:
                break
            frames.append(frame)
            del self._buf[:used]
        return frames

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)
