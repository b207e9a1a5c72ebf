"""Run configuration: JSON schema 1, canonical serialization, IFS assembly.

Angles are degrees in the file and radians internally.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .ifs import IFS, OpenSet, Similarity

_ENGINES = ("exact-1d", "grid")
_DEFAULTS = {
    "engine": None,  # derived from ambient_dim when absent
    "grid": 1024,
    "eps_max": None,
    "eps_min": None,
    "samples_per_decade": 64,
    "R": None,
    "name": "",
}


@dataclass
class RunConfig:
    schema: int
    ambient_dim: int
    maps: list[dict]
    open_set: dict | None
    engine: str
    grid: int
    eps_max: float | None
    eps_min: float | None
    samples_per_decade: int
    R: float | None
    name: str = ""
    source: str = ""

    def canonical(self) -> dict:
        """Canonical dict form: defaults filled, keys sorted on serialization."""
        return {
            "schema": self.schema,
            "name": self.name,
            "ambient_dim": self.ambient_dim,
            "maps": [
                {
                    "ratio": float(m["ratio"]),
                    "translation": [float(t) for t in m["translation"]],
                    "rotation_deg": float(m.get("rotation_deg", 0.0)),
                    "reflect": bool(m.get("reflect", False)),
                }
                for m in self.maps
            ],
            "open_set": self.open_set,
            "engine": self.engine,
            "grid": self.grid,
            "eps_max": self.eps_max,
            "eps_min": self.eps_min,
            "samples_per_decade": self.samples_per_decade,
            "R": self.R,
        }

    def serialize(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, indent=2) + "\n"

    def to_ifs(self, R: float | None = None, validate_open_set: bool = True) -> IFS:
        sims = [
            Similarity(
                ratio=float(m["ratio"]),
                translation=tuple(float(t) for t in m["translation"]),
                rotation=math.radians(float(m.get("rotation_deg", 0.0))),
                reflect=bool(m.get("reflect", False)),
            )
            for m in self.maps
        ]
        open_set = None
        if self.open_set is not None:
            if "interval" in self.open_set:
                open_set = OpenSet(interval=tuple(self.open_set["interval"]))
            else:
                open_set = OpenSet(polygon=tuple(tuple(v) for v in self.open_set["polygon"]))
        return IFS(
            sims,
            open_set=open_set,
            R=R if R is not None else self.R,
            validate_open_set=validate_open_set,
        )


def parse_config(path: str | Path) -> RunConfig:
    """Load and validate a config file, reporting every violation at once."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", [f"{path}: missing file"])
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}", [f"{path}: invalid JSON"]) from exc
    violations = []
    cfg = validate_config(raw, violations)
    if violations:
        raise ConfigError(
            "config validation failed:\n  " + "\n  ".join(violations), violations
        )
    cfg.source = str(path)
    return cfg


def validate_config(raw: dict, violations: list[str]) -> RunConfig | None:
    if not isinstance(raw, dict):
        violations.append("$: config must be a JSON object")
        return None
    if raw.get("schema") != 1:
        violations.append("schema: must be 1")
    dim = raw.get("ambient_dim")
    if dim not in (1, 2):
        violations.append("ambient_dim: must be 1 or 2")
        dim = 1
    maps = raw.get("maps")
    if not isinstance(maps, list) or len(maps) < 2:
        violations.append("maps: need a list of at least 2 maps")
        maps = []
    for i, m in enumerate(maps):
        if not isinstance(m, dict):
            violations.append(f"maps[{i}]: must be an object")
            continue
        ratio = m.get("ratio")
        if not isinstance(ratio, (int, float)) or not (0.0 < float(ratio) < 1.0):
            violations.append(f"maps[{i}].ratio: must be a number in (0,1)")
        tr = m.get("translation")
        if not isinstance(tr, list) or len(tr) != dim or not all(
            isinstance(t, (int, float)) for t in tr
        ):
            violations.append(f"maps[{i}].translation: must be a list of {dim} numbers")
        rot = m.get("rotation_deg", 0.0)
        if not isinstance(rot, (int, float)):
            violations.append(f"maps[{i}].rotation_deg: must be a number")
        elif dim == 1 and float(rot) != 0.0:
            violations.append(f"maps[{i}].rotation_deg: must be 0 on the line (use reflect)")
        if not isinstance(m.get("reflect", False), bool):
            violations.append(f"maps[{i}].reflect: must be a boolean")
    open_set = raw.get("open_set")
    if open_set is not None:
        if not isinstance(open_set, dict):
            violations.append("open_set: must be an object")
            open_set = None
        elif "interval" in open_set:
            iv = open_set["interval"]
            if dim != 1:
                violations.append("open_set.interval: only valid for ambient_dim 1")
            if not (isinstance(iv, list) and len(iv) == 2 and iv[0] < iv[1]):
                violations.append("open_set.interval: must be [a, b] with a < b")
        elif "polygon" in open_set:
            poly = open_set["polygon"]
            if dim != 2:
                violations.append("open_set.polygon: only valid for ambient_dim 2")
            if not (isinstance(poly, list) and len(poly) >= 3):
                violations.append("open_set.polygon: need at least 3 vertices")
        else:
            violations.append("open_set: must contain interval or polygon")
    engine = raw.get("engine")
    if engine is None:
        engine = "exact-1d" if dim == 1 else "grid"
    if engine not in _ENGINES:
        violations.append(f"engine: must be one of {_ENGINES}")
    elif engine == "exact-1d" and dim != 1:
        violations.append("engine: exact-1d requires ambient_dim 1")
    elif engine == "grid" and dim != 2:
        violations.append("engine: grid requires ambient_dim 2")
    grid = raw.get("grid", _DEFAULTS["grid"])
    if not isinstance(grid, int) or grid < 64:
        violations.append("grid: must be an integer >= 64")
        grid = 1024
    spd = raw.get("samples_per_decade", _DEFAULTS["samples_per_decade"])
    if not isinstance(spd, int) or spd < 1:
        violations.append("samples_per_decade: must be a positive integer")
        spd = 64
    numeric = {}
    for key in ("eps_max", "eps_min", "R"):
        val = raw.get(key)
        if val is not None and (not isinstance(val, (int, float)) or val <= 0.0):
            violations.append(f"{key}: must be a positive number or null")
            val = None
        numeric[key] = float(val) if val is not None else None
    name = raw.get("name", "")
    if not isinstance(name, str):
        violations.append("name: must be a string")
        name = ""
    if violations:
        return None
    return RunConfig(
        schema=1,
        ambient_dim=dim,
        maps=maps,
        open_set=open_set,
        engine=engine,
        grid=grid,
        eps_max=numeric["eps_max"],
        eps_min=numeric["eps_min"],
        samples_per_decade=spd,
        R=numeric["R"],
        name=name,
    )


def geometry_key_subset(cfg: RunConfig) -> dict:
    """The canonical subset that determines curve geometry (cache identity)."""
    c = cfg.canonical()
    return {k: c[k] for k in ("ambient_dim", "maps", "open_set", "engine", "grid",
                              "eps_max", "eps_min", "samples_per_decade", "R")}
