"""Experiment configuration: JSON file validated against a published schema."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

import jsonschema

from ..environment import DistributionError, WeightDistribution
from ..estimators.ensemble import EnsembleSpec

ESTIMATORS = ("chi", "xi", "shape", "kappa", "relation", "mean_excess", "concentration", "delta_f")


class ConfigError(ValueError):
    """Invalid configuration; ``diagnostics`` lists every problem found."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.diagnostics))


def load_schema() -> dict:
    text = resources.files(__package__).joinpath("config_schema.json").read_text()
    return json.loads(text)


def _defaults(schema: dict) -> dict:
    return {k: v["default"] for k, v in schema["properties"].items() if "default" in v}


def _set_path(data: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def canonical_json(data: Mapping) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict  # fully resolved (defaults filled)
    provenance: dict = field(default_factory=dict)

    def __getattr__(self, name):
        raw = object.__getattribute__(self, "raw")
        if name in raw:
            return raw[name]
        raise AttributeError(name)

    @property
    def dist(self) -> WeightDistribution:
        return WeightDistribution.from_dict(self.raw["distribution"])

    @property
    def dimension(self) -> int:
        return int(self.raw["dimension"])

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    @property
    def estimators(self) -> dict:
        return self.raw["estimators"]

    def ensemble(self) -> EnsembleSpec:
        r = self.raw
        return EnsembleSpec(self.dist, tuple(r["sizes"]), r["replicates"], r["master_seed"],
                            r["beta"], r["model"], r["dimension"], r["shift"], r["truncate"])

    def hash(self) -> str:
        """Hash of the settings that determine CSV contents (not output dir or workers)."""
        keep = {k: v for k, v in self.raw.items() if k not in ("output_dir", "workers")}
        return hashlib.sha256(canonical_json(keep).encode()).hexdigest()


def _semantic_checks(raw: dict) -> list[str]:
    errs = []
    sizes = raw["sizes"]
    if any(a >= b for a, b in zip(sizes, sizes[1:])):
        errs.append("sizes: must be strictly increasing")
    try:
        WeightDistribution.from_dict(raw["distribution"])
    except DistributionError as exc:
        errs.append(f"distribution: {exc}")
    d = raw["dimension"]
    est = raw["estimators"]
    if "relation" in est:
        missing = [k for k in ("chi", "xi", "kappa") if k not in est]
        if missing:
            errs.append(f"estimators.relation: requires estimators {missing}")
    if "kappa" in est and d != 2:
        errs.append("estimators.kappa: the antidiagonal fan is defined for dimension 2")
    if "delta_f" in est and d < 2:
        errs.append("estimators.delta_f: needs dimension >= 2")
    for key in ("xi",):
        vec = est.get(key, {}).get("direction")
        if vec is not None and len(vec) != d:
            errs.append(f"estimators.{key}.direction: length {len(vec)} != dimension {d}")
    for i, vec in enumerate(est.get("shape", {}).get("directions", [])):
        if len(vec) != d:
            errs.append(f"estimators.shape.directions[{i}]: length {len(vec)} != dimension {d}")
    z = est.get("concentration", {}).get("z")
    if z is not None and len(z) != d:
        errs.append(f"estimators.concentration.z: length {len(z)} != dimension {d}")
    for key in ("chi", "xi", "mean_excess"):
        w = est.get(key, {}).get("window")
        if w is not None and not (w[0] < w[1] <= len(sizes) and w[1] - w[0] >= 2):
            errs.append(f"estimators.{key}.window: {w} invalid for {len(sizes)} sizes")
    needs_spread = {"chi", "kappa", "relation", "concentration", "delta_f", "xi"}
    if raw["replicates"] < 2 and needs_spread & set(est):
        errs.append(f"replicates: estimators {sorted(needs_spread & set(est))} need >= 2")
    return errs


def load_config(source: str | Path | Mapping, overrides: Optional[Mapping[str, Any]] = None
                ) -> ExperimentConfig:
    """Parse, validate and resolve a configuration.

    ``overrides`` maps dotted keys (``"estimators.xi.q"``) to values and wins
    over the file; the provenance of every top-level parameter is recorded.
    """
    if isinstance(source, Mapping):
        data = copy.deepcopy(dict(source))
    else:
        try:
            data = json.loads(Path(source).read_text())
        except FileNotFoundError:
            raise ConfigError([f"config file {source} not found"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config is not valid JSON: {exc}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"])
    provenance = {k: "config" for k in data}
    for key, value in (overrides or {}).items():
        _set_path(data, key, value)
        provenance[key] = "flag"
    schema = load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError([f"{'.'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
                           for e in errors])
    resolved = _defaults(schema)
    resolved.update(data)
    for k in resolved:
        provenance.setdefault(k, "default")
    errs = _semantic_checks(resolved)
    if errs:
        raise ConfigError(errs)
    return ExperimentConfig(resolved, provenance)
