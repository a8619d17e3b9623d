"""Configuration loading: packaged defaults, optional user file, env overrides.

Tunables (retrieval threshold, repeat allowance, backend wiring) live in the
packaged config.json rather than in code. A user-supplied config file is
merged over the defaults key by key; SOP_BACKEND_ENDPOINT and
SOP_BACKEND_API_KEY environment variables override the backend section last.
Credentials are kept out of logs and out of serialized config dumps.
"""

from __future__ import annotations

import json
import os
from copy import deepcopy


def _merge(base: dict, override: dict) -> dict:
    out = deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None = None) -> dict:
    from . import assets

    cfg = assets.load_default_config()
    if path:
        with open(path, encoding="utf-8") as fh:
            cfg = _merge(cfg, json.load(fh))
    endpoint = os.environ.get("SOP_BACKEND_ENDPOINT")
    if endpoint:
        cfg["backend"]["endpoint"] = endpoint
    api_key = os.environ.get("SOP_BACKEND_API_KEY")
    if api_key:
        cfg["backend"]["api_key"] = api_key
    return cfg


def default_threshold() -> float:
    from . import assets

    return float(assets.load_default_config()["retrieval"]["threshold"])


def redacted(cfg: dict) -> dict:
    """Copy safe to print or log: credential values masked."""
    out = deepcopy(cfg)
    backend = out.get("backend", {})
    if backend.get("api_key"):
        backend["api_key"] = "***"
    return out
