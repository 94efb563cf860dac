"""Experiment configuration: JSON schema, loading and line-level diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .cross_entropy import CEParams
from .errors import ConfigError
from .model import SystemParams, Topology

# sweep names accepted in configs, mapped to their canonical form
SWEEP_ALIASES = {
    "pb_dbm": "pb_dbm",
    "n_antennas": "n_antennas", "N": "n_antennas",
    "n_devices": "n_devices", "L": "n_devices",
    "gamma": "gamma",
    "bandwidth_hz": "bandwidth_hz", "B": "bandwidth_hz",
    "intensity": "intensity_cycles_per_bit", "intensity_cycles_per_bit": "intensity_cycles_per_bit",
    "height_m": "height_m",
}

BASELINE_SCHEMES = ("full-pa", "conventional-array", "fixed-tdma", "full-offload", "full-local")
CONFIG_SCHEMES = ("tdma-static", "tdma-partial", "tdma-full",
                  "noma-static", "noma-partial", "noma-full")
SCHEMES = ("discrete",) + CONFIG_SCHEMES + BASELINE_SCHEMES

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "pams-opt experiment",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pb_dbm": _num, "pb_watts": _pos,
                "noise_dbm": _num, "noise_watts": _pos,
                "bandwidth_hz": _pos, "frame_s": _pos,
                "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "kappa": _pos, "intensity_cycles_per_bit": _pos,
                "carrier_hz": _pos, "refractive_index": _pos, "height_m": _pos,
                "region_m": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
            },
        },
        "topology": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["mode"],
                    "properties": {
                        "mode": {"const": "sampled"},
                        "n_antennas": {"type": "integer", "minimum": 1},
                        "n_devices": {"type": "integer", "minimum": 1},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["mode", "pa_x_m", "devices"],
                    "properties": {
                        "mode": {"const": "explicit"},
                        "pa_x_m": {"type": "array", "items": _num, "minItems": 1},
                        "devices": {
                            "type": "array", "minItems": 1,
                            "items": {"type": "array", "items": _num,
                                      "minItems": 2, "maxItems": 3},
                        },
                        "feed": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
                    },
                },
            ],
        },
        "schemes": {
            "type": "array", "minItems": 1, "uniqueItems": True,
            "items": {"enum": list(SCHEMES)},
        },
        "ce": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "elites": {"type": "integer", "minimum": 1},
                "smoothing": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "max_iters": {"type": "integer", "minimum": 1},
                "stall_iters": {"type": "integer", "minimum": 1},
            },
        },
        "sweep": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["variable", "values"],
            "properties": {
                "variable": {"enum": sorted(SWEEP_ALIASES)},
                "values": {"type": "array", "items": _num},
            },
        },
        "replications": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
    },
}


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple

    def __post_init__(self):
        if self.variable not in SWEEP_ALIASES:
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        object.__setattr__(self, "variable", SWEEP_ALIASES[self.variable])
        vals = tuple(float(v) for v in self.values)
        if self.variable in ("n_antennas", "n_devices"):
            if any(v != int(v) or v < 1 for v in vals):
                raise ValueError(f"{self.variable} sweep needs positive integers")
            vals = tuple(int(v) for v in vals)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams = field(default_factory=SystemParams.default)
    n_antennas: int = 40
    n_devices: int = 3
    topology: Topology | None = None  # explicit layout; sampled per seed when None
    schemes: tuple = ("discrete",)
    ce: CEParams = CEParams()
    sweep: SweepSpec | None = None
    replications: int = 1
    seed: int = 0
    output: str = "out"

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ValueError(f"unknown scheme(s): {bad}")
        if self.topology is not None and self.sweep is not None \
                and self.sweep.variable in ("n_antennas", "n_devices"):
            raise ValueError("cannot sweep N or L with an explicit topology")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "seed" in kw:
            kw["ce"] = replace(self.ce, seed=kw["seed"])
        return replace(self, **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        params = SystemParams.from_dict(data.get("params", {}))
        topo = data.get("topology", {"mode": "sampled"})
        kw = {}
        if topo["mode"] == "explicit":
            devs = [list(d) + [0.0] * (3 - len(d)) for d in topo["devices"]]
            feed = topo.get("feed", [0.0, 0.0, params.height_m])
            kw["topology"] = Topology(pa_x_m=topo["pa_x_m"], devices=devs, feed=tuple(feed))
        else:
            kw["n_antennas"] = topo.get("n_antennas", 40)
            kw["n_devices"] = topo.get("n_devices", 3)
        seed = data.get("seed", 0)
        sweep = data.get("sweep")
        return cls(
            params=params,
            schemes=tuple(data.get("schemes", ("discrete",))),
            ce=CEParams(**data.get("ce", {}), seed=seed),
            sweep=None if sweep is None else SweepSpec(sweep["variable"], tuple(sweep["values"])),
            replications=data.get("replications", 1),
            seed=seed,
            output=data.get("output", "out"),
            **kw,
        )


def locate(text: str, path) -> int:
    """1-based line of the JSON value at ``path`` (keys / indices) in ``text``.

    Falls back to the deepest enclosing value that exists.
    """
    dec = json.JSONDecoder()
    ws = " \t\r\n"

    def skip(i):
        while i < len(text) and text[i] in ws:
            i += 1
        return i

    i = skip(0)
    for key in path:
        if i >= len(text):
            break
        if text[i] == "{":
            j = skip(i + 1)
            found = None
            while j < len(text) and text[j] != "}":
                k, j = dec.raw_decode(text, j)
                j = skip(skip(j) + 1)  # past ':'
                if k == key:
                    found = j
                    break
                _, j = dec.raw_decode(text, j)
                j = skip(j)
                if j < len(text) and text[j] == ",":
                    j = skip(j + 1)
            if found is None:
                break
            i = found
        elif text[i] == "[" and isinstance(key, int):
            j = skip(i + 1)
            for _ in range(key):
                _, j = dec.raw_decode(text, j)
                j = skip(skip(j) + 1)
            i = j
        else:
            break
    return text.count("\n", 0, i) + 1


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = [(locate(text, list(e.absolute_path)), e) for e in validator.iter_errors(data)]
    if errors:
        line, err = min(errors, key=lambda le: (le[0], list(map(str, le[1].absolute_path))))
        where = "/".join(map(str, err.absolute_path)) or "<root>"
        more = f" (and {len(errors) - 1} more)" if len(errors) > 1 else ""
        raise ConfigError(f"{where}: {err.message}{more}", line)
    try:
        return ExperimentConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        section = _section_for(str(exc), data)
        raise ConfigError(str(exc), locate(text, section)) from None


def _section_for(message: str, data: dict) -> list:
    for key in ("params", "ce", "sweep", "topology", "schemes", "replications"):
        if key in data and (key in message or _mentions(message, data[key])):
            return [key]
    return []


def _mentions(message: str, block) -> bool:
    return isinstance(block, dict) and any(k in message for k in block)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
