"""Scenario files: versioned TOML with sections [model], [time_grid], [ensemble], [output].

Example::

    schema_version = 1
    mode = "master"            # master | trajectory | ensemble | timescales | bloch
    basis = "eigen"            # eigen | decoherence | pm
    initial_state = "ground"   # or {real = [[...]], imag = [[...]]}

    [model]
    kind = "two_level"         # two_level | v_model
    delta = 0.001
    temperature = 1.0
    coupling = 0.02
    # nu = 1.0                 # v_model only

    [time_grid]
    t_max = 240000.0
    points = 400
    spacing = "log"            # linear | log
    t_min = 0.01               # first nonzero point of a log grid

    [ensemble]
    count = 500
    base_seed = 12345
    workers = 1

    [output]
    directory = "fig2"
    formats = ["csv", "json", "svg"]
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
MODES = ("master", "trajectory", "ensemble", "timescales", "bloch")
BASES = ("eigen", "decoherence", "pm")
KINDS = ("two_level", "v_model")
SPACINGS = ("linear", "log")
FORMATS = ("csv", "json", "svg")
STOCHASTIC_MODES = ("trajectory", "ensemble", "bloch")


class ConfigError(ValueError):
    """Invalid scenario; ``field`` is the dotted name of the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    points: int
    spacing: str = "linear"
    t_min: float | None = None

    def values(self) -> np.ndarray:
        if self.spacing == "linear":
            return np.linspace(0.0, self.t_max, self.points)
        t_min = self.t_min if self.t_min is not None else self.t_max * 1e-6
        return np.concatenate([[0.0], np.geomspace(t_min, self.t_max, self.points - 1)])


@dataclass(frozen=True)
class EnsembleSettings:
    count: int = 1
    base_seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    basis: str
    model: dict
    time_grid: TimeGrid | None
    initial_state: object = "ground"
    ensemble: EnsembleSettings = field(default_factory=EnsembleSettings)
    directory: str = "out"
    formats: tuple[str, ...] = FORMATS
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "mode": self.mode,
            "basis": self.basis,
            "initial_state": self.initial_state,
            "model": dict(self.model),
        }
        if self.time_grid is not None:
            tg = {"t_max": self.time_grid.t_max, "points": self.time_grid.points, "spacing": self.time_grid.spacing}
            if self.time_grid.t_min is not None:
                tg["t_min"] = self.time_grid.t_min
            out["time_grid"] = tg
        if self.mode in STOCHASTIC_MODES:
            e = self.ensemble
            out["ensemble"] = {"count": e.count, "base_seed": e.base_seed, "workers": e.workers}
        out["output"] = {"directory": self.directory, "formats": list(self.formats)}
        return out


def _number(table: dict, key: str, prefix: str, positive: bool = True, required: bool = True, default=None) -> float | None:
    name = f"{prefix}.{key}" if prefix else key
    if key not in table:
        if required:
            raise ConfigError(name, "missing required field")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(name, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(name, f"must be positive, got {v!r}")
    return float(v)


def _integer(table: dict, key: str, prefix: str, minimum: int, default: int) -> int:
    name = f"{prefix}.{key}"
    v = table.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(name, f"expected an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(name, f"must be at least {minimum}, got {v}")
    return v


def _choice(table: dict, key: str, choices, default=None, prefix: str = "") -> str:
    name = f"{prefix}.{key}" if prefix else key
    if key not in table:
        if default is None:
            raise ConfigError(name, "missing required field")
        return default
    v = table[key]
    if v not in choices:
        raise ConfigError(name, f"must be one of {', '.join(choices)}; got {v!r}")
    return v


def _table(raw: dict, key: str, required: bool) -> dict:
    if key not in raw:
        if required:
            raise ConfigError(key, "missing required section")
        return {}
    if not isinstance(raw[key], dict):
        raise ConfigError(key, "must be a table")
    return raw[key]


def _model(raw: dict) -> dict:
    m = _table(raw, "model", required=True)
    kind = _choice(m, "kind", KINDS, prefix="model")
    out = {"kind": kind}
    for key in ("delta", "temperature", "coupling"):
        out[key] = _number(m, key, "model")
    if kind == "v_model":
        out["nu"] = _number(m, "nu", "model")
        if not out["delta"] < out["nu"]:
            raise ConfigError("model.delta", "must be smaller than model.nu")
    elif "nu" in m:
        raise ConfigError("model.nu", "only valid for kind = 'v_model'")
    unknown = set(m) - set(out) - {"kind"}
    if unknown:
        raise ConfigError(f"model.{sorted(unknown)[0]}", "unknown field")
    return out


def _initial_state(raw: dict, dim: int):
    v = raw.get("initial_state", "ground")
    if v == "ground":
        return "ground"
    if isinstance(v, str):
        raise ConfigError("initial_state", f"unknown named state {v!r}; use 'ground' or a matrix table")
    if not isinstance(v, dict) or "real" not in v:
        raise ConfigError("initial_state", "expected 'ground' or a table with 'real' (and optional 'imag')")
    try:
        re = np.asarray(v["real"], dtype=float)
        im = np.asarray(v.get("imag", np.zeros_like(re)), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError("initial_state", f"matrix entries must be numbers ({exc})") from None
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise ConfigError("initial_state", f"matrix must be {dim}x{dim}")
    rho = re + 1j * im
    if np.abs(rho - rho.conj().T).max() > 1e-10:
        raise ConfigError("initial_state", "matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise ConfigError("initial_state", "matrix trace must be 1")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ConfigError("initial_state", "matrix is not positive semidefinite")
    return {"real": re.tolist(), "imag": im.tolist()}


def initial_matrix(spec) -> np.ndarray | None:
    """The explicit initial matrix, or None for the ground state."""
    if spec == "ground":
        return None
    return np.asarray(spec["real"], dtype=float) + 1j * np.asarray(spec["imag"], dtype=float)


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a parsed TOML document and build a ScenarioConfig."""
    version = raw.get("schema_version")
    if version is None:
        raise ConfigError("schema_version", "missing required field")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}; expected {SCHEMA_VERSION}")
    known = {"schema_version", "mode", "basis", "initial_state", "model", "time_grid", "ensemble", "output"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")

    mode = _choice(raw, "mode", MODES)
    model = _model(raw)
    basis = _choice(raw, "basis", BASES, default="eigen")
    if basis == "pm" and model["kind"] != "v_model":
        raise ConfigError("basis", "'pm' is defined for the V model only")
    if mode == "bloch":
        if model["kind"] != "two_level":
            raise ConfigError("mode", "'bloch' requires model.kind = 'two_level'")
        if basis != "decoherence":
            raise ConfigError("basis", "'bloch' mode runs in the decoherence basis")
    dim = 2 if model["kind"] == "two_level" else 3
    init = _initial_state(raw, dim)

    grid = None
    if mode != "timescales":
        tg = _table(raw, "time_grid", required=True)
        t_max = _number(tg, "t_max", "time_grid")
        points = _integer(tg, "points", "time_grid", 2, default=None) if "points" in tg else None
        if points is None:
            raise ConfigError("time_grid.points", "missing required field")
        default_spacing = "log" if mode == "master" else "linear"
        spacing = _choice(tg, "spacing", SPACINGS, default=default_spacing, prefix="time_grid")
        t_min = _number(tg, "t_min", "time_grid", required=False)
        if t_min is not None and not t_min < t_max:
            raise ConfigError("time_grid.t_min", "must be smaller than time_grid.t_max")
        if t_min is not None and spacing == "linear":
            raise ConfigError("time_grid.t_min", "only used with spacing = 'log'")
        if spacing == "log" and points < 3:
            raise ConfigError("time_grid.points", "a log grid needs at least 3 points")
        grid = TimeGrid(t_max, points, spacing, t_min)

    ens = _table(raw, "ensemble", required=mode == "ensemble")
    count = _integer(ens, "count", "ensemble", 1, default=1)
    seed = _integer(ens, "base_seed", "ensemble", 0, default=0)
    workers = _integer(ens, "workers", "ensemble", 1, default=1)

    out = _table(raw, "output", required=False)
    directory = out.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory", "must be a non-empty string")
    formats = out.get("formats", list(FORMATS))
    if not isinstance(formats, list) or not all(f in FORMATS for f in formats):
        raise ConfigError("output.formats", f"must be a list drawn from {', '.join(FORMATS)}")

    return ScenarioConfig(
        mode=mode,
        basis=basis,
        model=model,
        time_grid=grid,
        initial_state=init,
        ensemble=EnsembleSettings(count, seed, workers),
        directory=directory,
        formats=tuple(formats),
        schema_version=version,
    )


def load_config(path: str | Path) -> tuple[ScenarioConfig, str]:
    """Read and validate a scenario file; returns the config and the raw text."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"not valid TOML: {exc}") from None
    return parse_config(raw), text
