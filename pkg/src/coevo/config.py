"""JSON run configurations: loading, validation and defaults.

A config file is a single JSON object.  Fields are checked against a
per-command schema so a typo fails loudly, with the line it sits on.
"""
from __future__ import annotations

import json
import math
import re
from pathlib import Path

from . import distributions, policies
from .errors import ConfigurationError

MODELS = ("hilt-exact", "hilt-scaled", "hilt-fluid", "coevolve-ctmc", "coevolve-fluid")

COEVOL_DEFAULTS = {"lambda": 3.0, "beta": 1.0, "Gamma": 0.5, "alpha": 0.8, "psi": 1.0,
                   "d0": 0.1, "xd0_ratio": 0.5}
HILT_DEFAULTS = {"Gamma": 0.9, "d0": 0.2, "dist": "uniform"}

# field -> kind; kinds are checked by _coerce
_COEVOL = {k: "real" for k in COEVOL_DEFAULTS}
_HILT = {"Gamma": "real", "d0": "real", "dist": "dist"}
SCHEMA = {
    "simulate": {"model": "str", "N": "int", "seeds": "seeds", "horizon": "real?",
                 "policy": "policy", **_HILT, **_COEVOL},
    "fluid": {"model": "str", "horizon": "real?", "h": "real", "policy": "policy",
              **_HILT, **_COEVOL},
    "optimize": {"horizon": "real?", "h": "real", "policy": "policy?", "n_grid": "int",
                 "tol": "real", **_COEVOL},
    "sweep": {"horizon": "real?", "h": "real", "param": "str", "grid": "reals", **_COEVOL},
    "seed-size": {"beta_target": "real", "Gamma": "real", "T": "real?"},
    "converge": {"model": "str", "N": "ints", "seeds": "seeds", "horizon": "real", "h": "real",
                 "policy": "policy", **_HILT, **_COEVOL},
}


def _line_of(text, key):
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(source, text, key):
    line = _line_of(text, key)
    return f"{source}:{line}: field {key!r}" if line else f"{source}: field {key!r}"


def load(path) -> tuple[dict, str]:
    """Parse a config file; returns ``(mapping, raw_text)``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}:1: config must be a JSON object")
    return data, text


def _real(v):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise TypeError("expected a number")
    if isinstance(v, str):
        if v.lower() not in ("inf", "infinity"):
            raise TypeError("expected a number")
        return math.inf
    return float(v)


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return v


def _coerce(kind, v, base_dir):
    if kind.endswith("?"):
        return None if v is None else _coerce(kind[:-1], v, base_dir)
    if kind == "real":
        return _real(v)
    if kind == "int":
        return _int(v)
    if kind == "str":
        if not isinstance(v, str):
            raise TypeError("expected a string")
        return v
    if kind in ("ints", "seeds", "reals"):
        if not isinstance(v, list) or not v:
            raise TypeError("expected a nonempty list")
        conv = _real if kind == "reals" else _int
        out = [conv(x) for x in v]
        if kind == "seeds" and any(not 0 <= s < 2**64 for s in out):
            raise TypeError("seeds must be 64-bit unsigned integers")
        return out
    if kind == "dist":
        if isinstance(v, dict) and "path" in v and base_dir is not None:
            v = {**v, "path": str((base_dir / v["path"]).resolve())}
        return distributions.describe(distributions.from_spec(v))
    if kind == "policy":
        return policies.from_spec(v).describe()
    raise AssertionError(kind)


def parse_seeds(text: str) -> list[int]:
    """``"0,1,2"`` or ranges like ``"0-19"``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigurationError(f"--seeds: cannot parse {part!r}") from None
    if not seeds:
        raise ConfigurationError("--seeds: empty list")
    return seeds


def _defaults(command, model):
    if command == "optimize":
        return {**COEVOL_DEFAULTS, "horizon": None, "h": 1e-3, "n_grid": 64, "tol": 1e-4}
    if command == "sweep":
        return {**COEVOL_DEFAULTS, "horizon": None, "h": 1e-3}
    if command == "seed-size":
        return {"Gamma": 0.9, "T": None}
    hilt = model.startswith("hilt")
    base = dict(HILT_DEFAULTS) if hilt else {**COEVOL_DEFAULTS, "policy": 1.0}
    if command == "simulate":
        base.update(N=1000, seeds=[0], horizon=None)
    elif command == "fluid":
        base.update(horizon=None, h=1e-3)
    elif command == "converge":
        base.update(N=[50, 100, 500, 1000], seeds=list(range(20)), horizon=10.0, h=1e-2)
    return base


_MODELS_FOR = {
    "simulate": ("hilt-exact", "hilt-scaled", "coevolve-ctmc"),
    "fluid": ("hilt-fluid", "coevolve-fluid"),
    "converge": ("hilt-scaled", "coevolve-ctmc"),
}
_REQUIRED = {"sweep": ("param", "grid"), "seed-size": ("beta_target",)}


def resolve(command: str, raw: dict | None = None, overrides: dict | None = None, *,
            source="<config>", text=None, base_dir=None) -> dict:
    """Fill defaults, apply flag overrides and type-check every field."""
    raw = dict(raw or {})
    schema = SCHEMA[command]
    for key in raw:
        if key not in schema:
            raise ConfigurationError(f"{_where(source, text, key)}: not used by '{command}'")
    model = raw.get("model")
    if command in _MODELS_FOR:
        allowed = _MODELS_FOR[command]
        model = model if model is not None else allowed[0]
        if model not in allowed:
            raise ConfigurationError(
                f"{_where(source, text, 'model')}: expected one of {', '.join(allowed)}")
    for key in _REQUIRED.get(command, ()):
        if key not in raw:
            raise ConfigurationError(f"{source}: missing required field {key!r}")
    cfg = _defaults(command, model or "")
    cfg.update(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in schema:
                flag = "step" if key == "h" else key
                raise ConfigurationError(f"--{flag}: not used by '{command}'")
            cfg[key] = value
    out = {}
    for key, value in cfg.items():
        if key == "model":
            out[key] = model
            continue
        try:
            out[key] = _coerce(schema[key], value, base_dir)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{_where(source, text, key)}: {exc}") from None
    if model is not None:
        out["model"] = model
    return dict(sorted(out.items()))
