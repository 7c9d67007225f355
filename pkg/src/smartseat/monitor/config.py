"""Plain-text ``key = value`` config files with flag overrides.

Lines starting with # are comments; keys are dotted lowercase
(e.g. serve.http_port). Values stay strings until a consumer coerces them.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InvalidConfigError, ParseError


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {line!r}", line=lineno)
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    with open(path) as fh:
        return parse_config_text(fh.read())


def get_int(cfg: dict[str, str], key: str, default: int) -> int:
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError:
        raise InvalidConfigError(f"config key {key} must be an integer, got {cfg[key]!r}")


def get_float(cfg: dict[str, str], key: str, default: float) -> float:
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise InvalidConfigError(f"config key {key} must be a number, got {cfg[key]!r}")


def get_str(cfg: dict[str, str], key: str, default: str) -> str:
    return cfg.get(key, default)


@dataclass
class MonitorConfig:
    """Everything the serve command needs."""

    model_path: str
    storage_dir: str
    ingest_port: int = 7460
    http_port: int = 7461
    host: str = "127.0.0.1"
    debounce_k: int = 5
    frame_period_ms: int = 333
    ppg_fs_hz: float = 100.0
    hr_window_s: float = 10.0
    static_dir: str | None = None
    layout_path: str | None = None

    @classmethod
    def from_mapping(cls, cfg: dict[str, str], **overrides) -> "MonitorConfig":
        kw = dict(
            model_path=get_str(cfg, "serve.model_path", ""),
            storage_dir=get_str(cfg, "serve.storage_dir", "sessions"),
            ingest_port=get_int(cfg, "serve.ingest_port", 7460),
            http_port=get_int(cfg, "serve.http_port", 7461),
            host=get_str(cfg, "serve.host", "127.0.0.1"),
            debounce_k=get_int(cfg, "serve.debounce_k", 5),
            frame_period_ms=get_int(cfg, "serve.frame_period_ms", 333),
            ppg_fs_hz=get_float(cfg, "serve.ppg_fs_hz", 100.0),
            hr_window_s=get_float(cfg, "serve.hr_window_s", 10.0),
            static_dir=cfg.get("serve.static_dir"),
            layout_path=cfg.get("serve.layout_path"),
        )
        kw.update({k: v for k, v in overrides.items() if v is not None})
        obj = cls(**kw)
        if not obj.model_path:
            raise InvalidConfigError("serve.model_path is required")
        if obj.debounce_k < 1:
            raise InvalidConfigError("debounce_k must be at least 1")
        return obj
