"""Flat ``key = value`` run configuration."""
from __future__ import annotations

from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    pass


# key -> default; the default's type drives coercion (None means "float, optional")
DEFAULTS: dict = {
    "grid.n": 4096,
    "grid.L": None,
    "sigma": 0.35,
    "c0": 0.23,
    "branch": "focusing",
    "frame": "mkdv",
    "dt": 1e-3,
    "t_end": 10.0,
    "dealias": True,
    "log_every": 100,
    "snapshot_times": "",
    "seed": 0,
    "perturbation.shape": "bump",
    "perturbation.delta": 0.0,
    "track.sample_dt": 0.25,
    "stability.K": 50.0,
    "eigen.n": 1024,
    "eigen.count": 8,
    "convexity.c0_min": 0.01,
    "convexity.c0_max": 100.0,
    "convexity.count": 25,
    "convexity.n": 1024,
    "scaling.lambda": 2.0,
    "scaling.alpha": 3.0,
    "scaling.t": 1.0,
    "local.v0_norm": 1.0,
    "local.s": 1.0,
    "local.c0_const": 1.0,
    "local.alpha": 3.0,
    "xsb.count": 64,
    "xsb.kind": "airy-concentrated",
    "xsb.s": 0.5,
    "xsb.b": 0.51,
    "xsb.n": 256,
    "xsb.L": 16.0,
    "xsb.nt": 256,
    "xsb.t_half": 2.0,
    "xsb.band": 2.5,
    "xsb.s_values": "0.25,0.26,0.3,0.5,1.0",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key, raw: str):
    default = DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float) or default is None:
            if default is None and raw.lower() in ("", "none", "auto"):
                return None
            val = float(raw)
            if not np.isfinite(val):
                raise ValueError(raw)
            return val
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str) -> dict:
    cfg = dict(DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        cfg[key] = _coerce(key, value)
    return cfg


def load_config(path) -> dict:
    if path is None:
        return dict(DEFAULTS)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def float_list(value: str) -> list[float]:
    if not value.strip():
        return []
    try:
        return [float(v) for v in value.split(",")]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {value!r}") from None


def format_config(cfg: dict) -> str:
    return "".join(f"{k} = {'' if v is None else v}\n" for k, v in cfg.items())
