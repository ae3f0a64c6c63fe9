"""Run configuration: JSON file plus command-line overrides.

The file format is described by ``config_schema.json`` next to this module.
Flags always win over file values; fields nobody set fall back to defaults
and are listed in :attr:`RunConfig.provenance` as ``"default"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

import jsonschema
import numpy as np

from .collapse import (
    Anchoring,
    Coherent,
    CollapseSemantics,
    Delta,
    Histogram,
    PositionalFiniteDuration,
    PositionalInstant,
    Uniform,
)
from .errors import ConfigError
from .experiment import DEFAULT_JUMP_THRESHOLD, DEFAULT_PREDICATE
from .interferometer import InterferometerSpec, build_standard_interferometer

DEFAULTS: dict[str, Any] = {
    "geometry.L": 1.0,
    "geometry.l": 1.0,
    "geometry.c": 1.0,
    "semantics": "positional_instant",
    "dist": "uniform",
    "anchoring": "pre_reading",
    "trials": 10_000,
    "seed": 0,
    "predicate": DEFAULT_PREDICATE,
    "threshold": DEFAULT_JUMP_THRESHOLD,
    "format": "csv",
    "out": None,
}


def load_schema() -> dict:
    text = resources.files(__package__).joinpath("config_schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class TauGrid:
    start: float
    stop: float
    points: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class RunConfig:
    L: float
    l: float
    c: float
    tau: Optional[float]
    tau_grid: Optional[TauGrid]
    semantics: str
    delta: Optional[float]
    dist: str
    anchoring: str
    trials: int
    seed: int
    predicate: str
    threshold: float
    format: str
    out: Optional[str]
    provenance: Mapping[str, str] = field(default_factory=dict, compare=False)

    def spec(self, tau: float | None = None) -> InterferometerSpec:
        t = self.tau if tau is None else tau
        return build_standard_interferometer(self.L, self.l, self.c, 0.0 if t is None else t)

    def model(self) -> CollapseSemantics:
        return build_semantics(self.semantics, self.delta, self.dist, self.anchoring)

    def as_dict(self) -> dict:
        return {
            "geometry": {"L": self.L, "l": self.l, "c": self.c},
            **({"tau": self.tau} if self.tau is not None else {}),
            **(
                {"tau_grid": {"start": self.tau_grid.start, "stop": self.tau_grid.stop, "points": self.tau_grid.points}}
                if self.tau_grid is not None
                else {}
            ),
            "semantics": self.semantics,
            **({"delta": self.delta} if self.delta is not None else {}),
            "dist": self.dist,
            "anchoring": self.anchoring,
            "trials": self.trials,
            "seed": self.seed,
            "predicate": self.predicate,
            "threshold": self.threshold,
            "format": self.format,
            "out": self.out,
        }


def parse_distribution(text: str):
    kind, _, arg = text.partition(":")
    if kind == "uniform" and not arg:
        return Uniform()
    if kind == "delta":
        return Delta(float(arg) if arg else 0.0)
    if kind == "histogram" and arg:
        return Histogram(tuple(float(w) for w in arg.split(",")))
    raise ConfigError("dist", f"cannot parse distribution {text!r}")


def build_semantics(name: str, delta: float | None, dist: str, anchoring: str) -> CollapseSemantics:
    if name == "coherent":
        return Coherent()
    if name == "positional_instant":
        return PositionalInstant()
    if name == "finite_duration":
        if delta is None:
            raise ConfigError("delta", "required for finite_duration semantics")
        try:
            return PositionalFiniteDuration(delta, parse_distribution(dist), Anchoring(anchoring))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("dist", str(exc)) from None
    raise ConfigError("semantics", f"unknown semantics {name!r}")


def _flatten(raw: Mapping[str, Any]) -> dict[str, Any]:
    flat = {}
    for key, value in raw.items():
        if key == "geometry":
            for gk, gv in value.items():
                flat[f"geometry.{gk}"] = gv
        else:
            flat[key] = value
    return flat


def _unflatten(flat: Mapping[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in flat.items():
        if key.startswith("geometry."):
            out.setdefault("geometry", {})[key.split(".", 1)[1]] = value
        else:
            out[key] = value
    return out


def _validate(doc: Mapping[str, Any], source: str) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        if err.validator == "additionalProperties":
            extra = set(err.instance) - set(err.schema.get("properties", {}))
            parent = ".".join(str(p) for p in err.path)
            key = ".".join(filter(None, [parent, sorted(extra)[0]]))
            raise ConfigError(key, f"unknown key in {source}")
        key = ".".join(str(p) for p in err.path) or "<root>"
        raise ConfigError(key, f"{err.message} (in {source})")


def parse_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    command: str | None = None,
) -> RunConfig:
    """Merge ``path`` (JSON) with ``overrides`` (flag values, ``None`` = unset).

    Override keys use the flattened form, e.g. ``"geometry.L"`` or
    ``"tau_grid.points"``.  ``command`` enforces the delay form it needs:
    ``sweep`` requires a grid, ``exact`` and ``simulate`` a single delay.
    """
    file_doc: dict[str, Any] = {}
    if path is not None:
        try:
            file_doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"malformed JSON: {exc}") from None
        if not isinstance(file_doc, dict):
            raise ConfigError("config", "top level must be a JSON object")
        _validate(file_doc, str(path))

    flat = _flatten(file_doc)
    grid_from_file = flat.pop("tau_grid", None)
    provenance = {k: "file" for k in flat}
    grid_parts = dict(grid_from_file or {})
    grid_source = "file" if grid_from_file is not None else None

    flags = {k: v for k, v in (overrides or {}).items() if v is not None}
    flag_grid = {k.split(".", 1)[1]: v for k, v in flags.items() if k.startswith("tau_grid.")}
    for k, v in flags.items():
        if not k.startswith("tau_grid."):
            flat[k] = v
            provenance[k] = "flag"
    if flag_grid:
        grid_parts.update(flag_grid)
        grid_source = "flag"
        if provenance.get("tau") == "file":  # a flag-given grid replaces a file delay
            del flat["tau"], provenance["tau"]
    if provenance.get("tau") == "flag" and grid_source == "file":
        grid_parts, grid_source = {}, None

    merged = dict(flat)
    if grid_source is not None:
        merged["tau_grid"] = grid_parts
    _validate(_unflatten(merged), "flags")

    if "tau" in merged and "tau_grid" in merged:
        raise ConfigError("tau_grid", "give either tau or tau_grid, not both")
    if command == "sweep" and "tau_grid" not in merged:
        raise ConfigError("tau_grid", "sweep needs tau_grid (or --tau-start/--tau-stop/--tau-points)")
    if command in ("exact", "simulate") and "tau_grid" in merged:
        raise ConfigError("tau", f"{command} needs a single tau, not a grid")
    if command in ("exact", "simulate") and "tau" not in merged:
        merged["tau"] = 0.0
        provenance["tau"] = "default"

    for key, value in DEFAULTS.items():
        if key not in merged:
            merged[key] = value
            provenance[key] = "default"
    if grid_source is not None:
        provenance["tau_grid"] = grid_source

    tau_grid = None
    if "tau_grid" in merged:
        g = merged["tau_grid"]
        tau_grid = TauGrid(float(g["start"]), float(g["stop"]), int(g["points"]))
        if tau_grid.stop <= tau_grid.start:
            raise ConfigError("tau_grid.stop", "must exceed tau_grid.start")

    cfg = RunConfig(
        L=float(merged["geometry.L"]),
        l=float(merged["geometry.l"]),
        c=float(merged["geometry.c"]),
        tau=float(merged["tau"]) if "tau" in merged else None,
        tau_grid=tau_grid,
        semantics=merged["semantics"],
        delta=float(merged["delta"]) if merged.get("delta") is not None else None,
        dist=merged["dist"],
        anchoring=merged["anchoring"],
        trials=int(merged["trials"]),
        seed=int(merged["seed"]),
        predicate=merged["predicate"],
        threshold=float(merged["threshold"]),
        format=merged["format"],
        out=merged["out"],
        provenance=dict(sorted(provenance.items())),
    )
    cfg.model()  # surfaces semantic errors (missing delta, bad dist) as ConfigError
    return cfg
