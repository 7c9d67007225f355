"""Model serialization: a compact binary container with CRC trailer, plus
C source generation for microcontroller deployment.

Binary container (little-endian):

    magic   4s   "SCM1"
    version u16  1
    kind    u8   0=dt 1=rf 2=svm 3=mlp
    classes u8   count, then per class u8 length + utf-8 name
    payload      kind-specific (below)
    crc     u32  zlib.crc32 over everything before it

Tree payloads store nodes in builder (preorder) order. Thresholds use a
per-tree mode byte: trees whose thresholds are all half-integral (the case
for integer count features, where splits land on x.5 midpoints) pack each
threshold as u16 = 2*threshold; everything else stores f64. Both modes
reconstruct the training-time float64 exactly.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArtifactCorruptionError,
    ArtifactVersionError,
    UnsupportedFormatError,
)
from .models.base import ModelSpec, TrainedModel
from .models.forest import RfParams
from .models.mlp import MlpParams
from .models.svm import SvmParams
from .models.tree import DtParams

MAGIC = b"SCM1"
VERSION = 1
_KIND_CODE = {"dt": 0, "rf": 1, "svm": 2, "mlp": 3}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}

FORMAT_BINARY = "binary"
FORMAT_FIRMWARE = "firmware_source"


@dataclass(frozen=True)
class ModelArtifact:
    format: str
    payload: bytes
    checksum: int  # crc32 of payload
    model_kind: str
    class_names: tuple[str, ...]


# ---------------------------------------------------------------------------
# Binary encoding.


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def pack(self, fmt: str, *values) -> None:
        self.parts.append(struct.pack("<" + fmt, *values))

    def raw(self, data: bytes) -> None:
        self.parts.append(data)

    def bytes(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ArtifactCorruptionError("artifact truncated inside a field")
        values = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return values if len(values) > 1 else values[0]

    def raw(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise ArtifactCorruptionError("artifact truncated inside a field")
        out = self.data[self.pos : self.pos + size]
        self.pos += size
        return out


def _write_tree(w: _Writer, t: DtParams) -> None:
    n = t.n_nodes
    if n > 0xFFFF:
        raise UnsupportedFormatError(f"tree too large to serialize ({n} nodes)")
    internal = np.flatnonzero(t.feature >= 0)
    half = 2.0 * t.threshold[internal]
    u16_mode = internal.size == 0 or (
        np.all(half == np.floor(half)) and np.all(half >= 0) and np.all(half <= 0xFFFF)
    )
    w.pack("BI", 1 if u16_mode else 0, n)
    for i in range(n):
        if t.feature[i] >= 0:
            w.pack("BB", 1, int(t.feature[i]))
            if u16_mode:
                w.pack("H", int(2.0 * t.threshold[i]))
            else:
                w.pack("d", float(t.threshold[i]))
            w.pack("HH", int(t.left[i]), int(t.right[i]))
        else:
            maj, total = int(t.leaf_maj[i]), int(t.leaf_n[i])
            if total > 0xFFFF:
                raise UnsupportedFormatError(
                    f"leaf sample count {total} exceeds the u16 container limit"
                )
            w.pack("BBHH", 0, int(t.leaf_class[i]), maj, total)


def _read_tree(r: _Reader) -> DtParams:
    u16_mode, n = r.unpack("BI")
    feature = np.full(n, -1, dtype=np.int16)
    threshold = np.zeros(n, dtype=np.float64)
    left = np.full(n, -1, dtype=np.int32)
    right = np.full(n, -1, dtype=np.int32)
    leaf_class = np.full(n, -1, dtype=np.int16)
    leaf_maj = np.zeros(n, dtype=np.int32)
    leaf_n = np.zeros(n, dtype=np.int32)
    for i in range(n):
        tag = r.unpack("B")
        if tag == 1:
            feature[i] = r.unpack("B")
            threshold[i] = r.unpack("H") / 2.0 if u16_mode else r.unpack("d")
            left[i], right[i] = r.unpack("HH")
        elif tag == 0:
            leaf_class[i], leaf_maj[i], leaf_n[i] = r.unpack("BHH")
        else:
            raise ArtifactCorruptionError(f"unknown tree node tag {tag}")
    return DtParams(
        feature=feature, threshold=threshold, left=left, right=right,
        leaf_class=leaf_class, leaf_maj=leaf_maj, leaf_n=leaf_n,
    )


def _write_f64_array(w: _Writer, arr: np.ndarray) -> None:
    data = np.ascontiguousarray(arr, dtype="<f8")
    w.pack("I", data.size)
    w.raw(data.tobytes())


def _read_f64_array(r: _Reader, shape=None) -> np.ndarray:
    size = r.unpack("I")
    arr = np.frombuffer(r.raw(8 * size), dtype="<f8").astype(np.float64)
    return arr if shape is None else arr.reshape(shape)


def _encode_payload(model: TrainedModel, w: _Writer) -> None:
    p = model.params
    if isinstance(p, DtParams):
        _write_tree(w, p)
    elif isinstance(p, RfParams):
        w.pack("H", len(p.trees))
        for t in p.trees:
            _write_tree(w, t)
    elif isinstance(p, SvmParams):
        k, nf = p.weights.shape
        w.pack("BB", k, nf)
        _write_f64_array(w, p.mu)
        _write_f64_array(w, p.sd)
        _write_f64_array(w, p.weights.ravel())
        _write_f64_array(w, p.bias)
    elif isinstance(p, MlpParams):
        dims = p.layer_dims
        w.pack("B", len(dims))
        for d in dims:
            w.pack("H", d)
        _write_f64_array(w, p.mu)
        _write_f64_array(w, p.sd)
        for wt, b in zip(p.weights, p.biases):
            _write_f64_array(w, wt.ravel())
            _write_f64_array(w, b)
    else:
        raise UnsupportedFormatError(f"cannot serialize params of type {type(p).__name__}")


def _decode_payload(kind: str, r: _Reader):
    if kind == "dt":
        return _read_tree(r)
    if kind == "rf":
        n_trees = r.unpack("H")
        return RfParams(trees=[_read_tree(r) for _ in range(n_trees)])
    if kind == "svm":
        k, nf = r.unpack("BB")
        mu = _read_f64_array(r)
        sd = _read_f64_array(r)
        weights = _read_f64_array(r, (k, nf))
        bias = _read_f64_array(r)
        return SvmParams(mu=mu, sd=sd, weights=weights, bias=bias)
    if kind == "mlp":
        n_dims = r.unpack("B")
        dims = [r.unpack("H") for _ in range(n_dims)]
        mu = _read_f64_array(r)
        sd = _read_f64_array(r)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(_read_f64_array(r, (fan_in, fan_out)))
            biases.append(_read_f64_array(r))
        return MlpParams(mu=mu, sd=sd, weights=weights, biases=biases)
    raise ArtifactCorruptionError(f"unknown model kind {kind!r}")


def export_model(model: TrainedModel, format: str = FORMAT_BINARY) -> ModelArtifact:
    """Serialize a trained model. Deterministic: equal models give
    byte-identical artifacts."""
    if model.kind not in _KIND_CODE:
        raise UnsupportedFormatError(f"unknown model kind {model.kind!r}")
    if format == FORMAT_BINARY:
        w = _Writer()
        w.raw(MAGIC)
        w.pack("H", VERSION)
        w.pack("B", _KIND_CODE[model.kind])
        w.pack("B", len(model.class_names))
        for name in model.class_names:
            encoded = name.encode("utf-8")
            w.pack("B", len(encoded))
            w.raw(encoded)
        _encode_payload(model, w)
        body = w.bytes()
        payload = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    elif format == FORMAT_FIRMWARE:
        payload = generate_firmware_source(model).encode("utf-8")
    else:
        raise UnsupportedFormatError(f"unknown export format {format!r}")
    return ModelArtifact(
        format=format,
        payload=payload,
        checksum=zlib.crc32(payload) & 0xFFFFFFFF,
        model_kind=model.kind,
        class_names=model.class_names,
    )


def load_model(artifact: ModelArtifact | bytes) -> TrainedModel:
    """Rebuild a TrainedModel from a binary artifact.

    The CRC is verified before anything else, so any single corrupted byte
    surfaces as ArtifactCorruptionError rather than a silently wrong model.
    """
    data = artifact.payload if isinstance(artifact, ModelArtifact) else artifact
    if isinstance(artifact, ModelArtifact) and artifact.format != FORMAT_BINARY:
        raise UnsupportedFormatError("only binary artifacts can be loaded")
    if len(data) < len(MAGIC) + 2 + 1 + 1 + 4:
        raise ArtifactCorruptionError("artifact too short")
    body, trailer = data[:-4], data[-4:]
    expected = struct.unpack("<I", trailer)[0]
    actual = zlib.crc32(body) & 0xFFFFFFFF
    if expected != actual:
        raise ArtifactCorruptionError(
            f"checksum mismatch: stored {expected:#010x}, computed {actual:#010x}"
        )
    r = _Reader(body)
    if r.raw(4) != MAGIC:
        raise ArtifactCorruptionError("bad magic")
    version = r.unpack("H")
    if version != VERSION:
        raise ArtifactVersionError(
            f"artifact version {version} not supported (this build reads version {VERSION})"
        )
    kind = _CODE_KIND.get(r.unpack("B"))
    if kind is None:
        raise ArtifactCorruptionError("unknown model kind code")
    n_classes = r.unpack("B")
    class_names = []
    for _ in range(n_classes):
        ln = r.unpack("B")
        class_names.append(r.raw(ln).decode("utf-8"))
    params = _decode_payload(kind, r)
    if r.pos != len(body):
        raise ArtifactCorruptionError("trailing bytes after payload")
    return TrainedModel(
        spec=ModelSpec(kind=kind),
        class_names=tuple(class_names),
        params=params,
        training_digest={"restored_from_artifact": True},
    )


def save_artifact(artifact: ModelArtifact, path) -> None:
    with open(path, "wb") as fh:
        fh.write(artifact.payload)


def load_artifact(path) -> ModelArtifact:
    with open(path, "rb") as fh:
        payload = fh.read()
    model = load_model(payload)  # validates structure + checksum
    return ModelArtifact(
        format=FORMAT_BINARY,
        payload=payload,
        checksum=zlib.crc32(payload) & 0xFFFFFFFF,
        model_kind=model.kind,
        class_names=model.class_names,
    )


# ---------------------------------------------------------------------------
# Firmware source generation.

_Q = 16  # Q16.16 fixed point


def _q16(x: float) -> int:
    return int(round(x * (1 << _Q)))


def _emit_tree_body(t: DtParams, node: int, indent: str, lines: list[str]) -> None:
    if t.feature[node] < 0:
        lines.append(f"{indent}return {int(t.leaf_class[node])};")
        return
    thr = int(math.floor(t.threshold[node]))
    lines.append(f"{indent}if (x[{int(t.feature[node])}] <= {thr}) {{")
    _emit_tree_body(t, int(t.left[node]), indent + "    ", lines)
    lines.append(f"{indent}}} else {{")
    _emit_tree_body(t, int(t.right[node]), indent + "    ", lines)
    lines.append(f"{indent}}}")


def _tree_function(t: DtParams, name: str) -> str:
    lines = [f"static uint8_t {name}(const uint16_t x[10]) {{"]
    _emit_tree_body(t, 0, "    ", lines)
    lines.append("}")
    return "\n".join(lines)


def _folded_affine(mu: np.ndarray, sd: np.ndarray, weights: np.ndarray,
                   bias: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fold input standardization into the affine map: scores over raw counts."""
    w = weights / sd[None, :]
    b = bias - (weights * (mu / sd)[None, :]).sum(axis=1)
    return w, b


def _int_table(name: str, values, per_line: int = 8) -> str:
    vals = [str(int(v)) for v in values]
    rows = [", ".join(vals[i : i + per_line]) for i in range(0, len(vals), per_line)]
    body = ",\n    ".join(rows)
    return f"static const int32_t {name}[{len(vals)}] = {{\n    {body}\n}};"


def generate_firmware_source(model: TrainedModel) -> str:
    """Emit a self-contained C translation unit with static tables and one
    pure entry point ``classify(const uint16_t x[10]) -> uint8_t``.

    Trees compare raw integer counts against floored thresholds (exact for
    integer inputs); SVM and MLP use Q16.16 fixed-point tables with the
    input standardization folded into the first affine layer.
    """
    head = [
        f"/* posture classifier ({model.kind}), {len(model.class_names)} classes */",
        "/* classes: " + ", ".join(model.class_names) + " */",
        "#include <stdint.h>",
        "",
    ]
    p = model.params
    if isinstance(p, DtParams):
        return "\n".join(
            head
            + [
                _tree_function(p, "tree_0"),
                "",
                "uint8_t classify(const uint16_t x[10]) {",
                "    return tree_0(x);",
                "}",
                "",
            ]
        )
    if isinstance(p, RfParams):
        n_classes = len(model.class_names)
        parts = list(head)
        for i, t in enumerate(p.trees):
            parts.append(_tree_function(t, f"tree_{i}"))
            parts.append("")
        parts.append(
            "typedef uint8_t (*tree_fn)(const uint16_t x[10]);\n"
            f"static const tree_fn TREES[{len(p.trees)}] = {{\n    "
            + ",\n    ".join(f"tree_{i}" for i in range(len(p.trees)))
            + "\n};"
        )
        parts.append(
            "\n".join(
                [
                    "",
                    "uint8_t classify(const uint16_t x[10]) {",
                    f"    uint16_t votes[{n_classes}] = {{0}};",
                    f"    for (int t = 0; t < {len(p.trees)}; t++) votes[TREES[t](x)]++;",
                    "    uint8_t best = 0;",
                    f"    for (uint8_t k = 1; k < {n_classes}; k++)",
                    "        if (votes[k] > votes[best]) best = k;",
                    "    return best;",
                    "}",
                    "",
                ]
            )
        )
        return "\n".join(parts)
    if isinstance(p, SvmParams):
        w, b = _folded_affine(p.mu, p.sd, p.weights, p.bias)
        k, nf = w.shape
        parts = list(head)
        parts.append(_int_table("W_Q16", [_q16(v) for v in w.ravel()]))
        parts.append(_int_table("B_Q16", [_q16(v) for v in b]))
        parts.append(
            "\n".join(
                [
                    "",
                    "uint8_t classify(const uint16_t x[10]) {",
                    "    int64_t best_score = INT64_MIN;",
                    "    uint8_t best = 0;",
                    f"    for (uint8_t k = 0; k < {k}; k++) {{",
                    f"        int64_t score = (int64_t)B_Q16[k];",
                    f"        for (int j = 0; j < {nf}; j++)",
                    f"            score += (int64_t)W_Q16[k * {nf} + j] * x[j];",
                    "        if (score > best_score) { best_score = score; best = k; }",
                    "    }",
                    "    return best;",
                    "}",
                    "",
                ]
            )
        )
        return "\n".join(parts)
    if isinstance(p, MlpParams):
        w1, b1 = _folded_affine(p.mu, p.sd, p.weights[0].T, p.biases[0])
        parts = list(head)
        parts.append(_int_table("W1_Q16", [_q16(v) for v in w1.ravel()]))
        parts.append(_int_table("B1_Q16", [_q16(v) for v in b1]))
        dims = p.layer_dims
        for li in range(1, len(p.weights)):
            parts.append(
                _int_table(f"W{li + 1}_Q16", [_q16(v) for v in p.weights[li].T.ravel()])
            )
            parts.append(_int_table(f"B{li + 1}_Q16", [_q16(v) for v in p.biases[li]]))
        lines = [
            "",
            "uint8_t classify(const uint16_t x[10]) {",
            f"    int64_t h0[{max(dims)}];",
            f"    int64_t h1[{max(dims)}];",
            f"    for (int j = 0; j < {dims[1]}; j++) {{",
            f"        int64_t acc = (int64_t)B1_Q16[j];",
            f"        for (int i = 0; i < {dims[0]}; i++)",
            f"            acc += (int64_t)W1_Q16[j * {dims[0]} + i] * x[i];",
            "        h0[j] = acc > 0 ? acc : 0;",
            "    }",
        ]
        src, dst = "h0", "h1"
        for li in range(1, len(p.weights)):
            fan_in, fan_out = dims[li], dims[li + 1]
            relu = li < len(p.weights) - 1
            lines += [
                f"    for (int j = 0; j < {fan_out}; j++) {{",
                f"        int64_t acc = ((int64_t)B{li + 1}_Q16[j]) << {_Q};",
                f"        for (int i = 0; i < {fan_in}; i++)",
                f"            acc += (int64_t)W{li + 1}_Q16[j * {fan_in} + i] * {src}[i];",
                f"        acc >>= {_Q};",
                f"        {dst}[j] = " + ("acc > 0 ? acc : 0;" if relu else "acc;"),
                "    }",
            ]
            src, dst = dst, src
        lines += [
            "    uint8_t best = 0;",
            f"    for (uint8_t k = 1; k < {dims[-1]}; k++)",
            f"        if ({src}[k] > {src}[best]) best = k;",
            "    return best;",
            "}",
            "",
        ]
        parts.append("\n".join(lines))
        return "\n".join(parts)
    raise UnsupportedFormatError(f"cannot emit firmware for {type(p).__name__}")
