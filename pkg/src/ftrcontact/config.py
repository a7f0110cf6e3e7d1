"""Line-oriented ``key = value`` run configuration (grammar in ``docs/config_format.md``)."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .benchmark import BLOCK, PIPE, PRESS, SWEEP, ZONES
from .filter import FtrConfig
from .hyperelastic import MaterialParams
from .mesh import MARKERS


class ConfigError(ValueError):
    """Bad configuration; ``key`` names the offending entry (or ``None``)."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


_FTR_FIELDS = {f.name: f.type for f in dataclasses.fields(FtrConfig)}


@dataclass
class RunConfig:
    benchmark: str = "ironing"
    mesh_file: Path | None = None
    bindings: dict = field(default_factory=dict)
    refine: int = 1
    phases: tuple = (1, 2)
    out: Path = Path("results")
    basis: str = "dual"
    zones: dict = field(default_factory=lambda: dict(ZONES))
    block: MaterialParams = BLOCK
    pipe: MaterialParams = PIPE
    press: float = PRESS
    sweep: float = SWEEP
    ftr: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.refine < 1:
            raise ConfigError("refine", "refinement level must be at least 1")
        for key in ("press", "sweep"):
            if not math.isfinite(getattr(self, key)):
                raise ConfigError(key, "must be finite")
        if self.benchmark == "mesh" and self.mesh_file is None:
            raise ConfigError("mesh_file", "required when benchmark = mesh")

    def ftr_config(self, exact_hessian: bool = False) -> FtrConfig:
        opts = dict(self.ftr)
        if exact_hessian:
            opts["lumped"] = False
        return FtrConfig(**opts)


def _float(key, text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(key, "must be finite")
    return v


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {text!r}") from None


def _bool(key, text):
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(key, f"expected true or false, got {text!r}")


def _zone(key, text):
    if text.lower() == "none":
        return None
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ConfigError(key, "expected two numbers or 'none'")
    lo, hi = (_float(key, p) for p in parts)
    if not lo < hi:
        raise ConfigError(key, "lower bound must be below upper bound")
    return (lo, hi)


def parse_config(text: str, base_dir=".") -> RunConfig:
    """Parse configuration text; relative paths resolve against ``base_dir``."""
    base_dir = Path(base_dir)
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or any(c.isspace() for c in key):
            raise ConfigError(key or None, f"line {lineno}: malformed key")
        if key in seen:
            raise ConfigError(key, f"line {lineno}: duplicate key")
        seen[key] = value

    kw = {}
    block = dict(lam=BLOCK.lam, mu=BLOCK.mu)
    pipe = dict(lam=PIPE.lam, mu=PIPE.mu)
    given_zones = {}
    ftr = {}
    for key, value in seen.items():
        if key == "benchmark":
            if value not in ("ironing", "mesh"):
                raise ConfigError(key, f"expected 'ironing' or 'mesh', got {value!r}")
            kw["benchmark"] = value
        elif key == "mesh_file":
            kw["mesh_file"] = base_dir / value
        elif key.startswith("bind."):
            tag = key[5:]
            if not tag:
                raise ConfigError(key, "missing physical tag")
            if value in MARKERS:
                target = value
            elif value in ("body1", "body2"):
                target = int(value[-1])
            else:
                raise ConfigError(key, f"unknown binding target {value!r}")
            kw.setdefault("bindings", {})[int(tag) if tag.isdigit() else tag] = target
        elif key == "refine":
            kw["refine"] = _int(key, value)
        elif key == "phases":
            text_ph = value.replace(",", " ").split()
            if value.strip() == "all":
                text_ph = ["1", "2"]
            ph = tuple(_int(key, p) for p in text_ph)
            if not ph or any(p not in (1, 2) for p in ph) or list(ph) != sorted(set(ph)):
                raise ConfigError(key, "expected an increasing list drawn from 1, 2 or 'all'")
            kw["phases"] = ph
        elif key == "out":
            kw["out"] = base_dir / value
        elif key == "basis":
            if value not in ("lagrange", "dual"):
                raise ConfigError(key, f"expected 'lagrange' or 'dual', got {value!r}")
            kw["basis"] = value
        elif key in ("zone.1", "zone.2"):
            given_zones[int(key[-1])] = _zone(key, value)
        elif key in ("lambda_block", "mu_block", "lambda_pipe", "mu_pipe"):
            target = block if key.endswith("block") else pipe
            target["lam" if key.startswith("lambda") else "mu"] = _float(key, value)
        elif key in ("press", "sweep"):
            kw[key] = _float(key, value)
        elif key.startswith("ftr."):
            name = key[4:]
            if name not in _FTR_FIELDS:
                raise ConfigError(key, "unknown solver option")
            kind = _FTR_FIELDS[name]
            if kind in (bool, "bool"):
                ftr[name] = _bool(key, value)
            elif kind in (int, "int"):
                ftr[name] = _int(key, value)
            else:
                ftr[name] = _float(key, value)
        else:
            raise ConfigError(key, "unknown key")

    # user meshes have no default zones; the builtin geometry does
    zones = {} if kw.get("benchmark") == "mesh" else dict(ZONES)
    zones.update(given_zones)
    try:
        kw["block"] = MaterialParams(**block)
        kw["pipe"] = MaterialParams(**pipe)
    except ValueError as exc:
        raise ConfigError("material", str(exc)) from None
    try:
        FtrConfig(**ftr)
    except (TypeError, ValueError) as exc:
        raise ConfigError("ftr", str(exc)) from None
    return RunConfig(zones=zones, ftr=ftr, **kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.parent)
