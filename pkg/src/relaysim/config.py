"""Experiment files: a versioned YAML document listing named experiments.

```yaml
schema_version: 1
experiments:
  - name: mesh_id
    kind: mesh
    hops: 9
    nodes_per_group: 10
    snr_db: 3
    detector: id
    quant_bits: 4
    sweep: {axis: hops, values: [1, 2, 3]}
```

Every experiment accepts the fields of :class:`~relaysim.engine.SimConfig`
plus ``name`` and an optional ``sweep``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError

from .engine import SWEEP_AXES, SimConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unreadable experiment file."""


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    axis: Literal["hops", "snr_db", "quant_bits", "group_size"]
    values: List[Any]


@dataclass(frozen=True)
class Experiment:
    name: str
    config: SimConfig
    sweep: Optional[SweepSpec] = None


def _line_of(node, key: Optional[str] = None) -> int:
    if key is not None and isinstance(node, yaml.MappingNode):
        for k, _ in node.value:
            if k.value == key:
                return k.start_mark.line + 1
    return node.start_mark.line + 1


def _format_errors(exc: ValidationError, node, where: str) -> str:
    lines = []
    for err in exc.errors():
        loc = [str(p) for p in err["loc"]]
        key = loc[0] if loc else None
        if err["type"] == "missing":
            line = _line_of(node)
            lines.append(f"{where} (line {line}): missing required key {key!r}")
            continue
        line = _line_of(node, key)
        label = f"key {'.'.join(loc)!r}: " if loc else ""
        msg = err["msg"].removeprefix("Value error, ")
        lines.append(f"{where} (line {line}): {label}{msg}")
    return "\n".join(lines)


def _sweep_values_ok(sweep: SweepSpec, config: SimConfig, where: str, line: int):
    field = {"group_size": "nodes_per_group"}.get(sweep.axis, sweep.axis)
    for v in sweep.values:
        try:
            config.with_(**{field: v})
        except ValidationError as exc:
            msg = "; ".join(e["msg"].removeprefix("Value error, ") for e in exc.errors())
            raise ConfigError(f"{where} (line {line}): sweep value {v!r} for {sweep.axis!r} is invalid: {msg}") from None


def parse_text(text: str, source: str = "<string>") -> list:
    """Validate an experiment document; returns a list of :class:`Experiment`."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a mapping with 'schema_version' and 'experiments'")
    unknown = set(data) - {"schema_version", "experiments"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{source} (line {_line_of(root, key)}): unknown top-level key {key!r}")
    if "schema_version" not in data:
        raise ConfigError(f"{source}: missing required key 'schema_version'")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"{source} (line {_line_of(root, 'schema_version')}): unsupported schema_version "
            f"{data['schema_version']!r}; expected {SCHEMA_VERSION}"
        )
    experiments = data.get("experiments")
    if not isinstance(experiments, list) or not experiments:
        raise ConfigError(f"{source}: 'experiments' must be a non-empty list")
    exp_nodes = next(v for k, v in root.value if k.value == "experiments").value

    out, seen = [], {}
    for idx, (entry, node) in enumerate(zip(experiments, exp_nodes)):
        where = f"{source}: experiments[{idx}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where} (line {_line_of(node)}): expected a mapping")
        entry = dict(entry)
        name = entry.pop("name", None)
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{where} (line {_line_of(node)}): missing required key 'name'")
        if not all(c.isalnum() or c in "-_." for c in name):
            raise ConfigError(f"{where} (line {_line_of(node, 'name')}): name {name!r} may only use letters, digits, '-', '_', '.'")
        if name in seen:
            raise ConfigError(
                f"{where} (line {_line_of(node, 'name')}): duplicate experiment name {name!r} "
                f"(first defined on line {seen[name]})"
            )
        seen[name] = _line_of(node, "name")
        where = f"{source}: experiment {name!r}"
        sweep_raw = entry.pop("sweep", None)
        try:
            config = SimConfig.model_validate(entry)
        except ValidationError as exc:
            raise ConfigError(_format_errors(exc, node, where)) from None
        sweep = None
        if sweep_raw is not None:
            try:
                sweep = SweepSpec.model_validate(sweep_raw)
            except ValidationError as exc:
                sub = next((v for k, v in node.value if k.value == "sweep"), node)
                raise ConfigError(_format_errors(exc, sub, f"{where} sweep")) from None
            _sweep_values_ok(sweep, config, where, _line_of(node, "sweep"))
        out.append(Experiment(name, config, sweep))
    return out


def parse_config(path) -> list:
    """Read and validate an experiment file."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from None
    return parse_text(text, str(path))


def experiment_dict(exp: Experiment) -> dict:
    body = exp.config.model_dump(mode="json", exclude_none=True)
    out = {"name": exp.name, **body}
    if exp.sweep is not None:
        out["sweep"] = exp.sweep.model_dump(mode="json")
    return out


def dump_config(experiments) -> str:
    """Serialize experiments back to a document that parses to the same values."""
    doc = {"schema_version": SCHEMA_VERSION, "experiments": [experiment_dict(e) for e in experiments]}
    return yaml.safe_dump(doc, sort_keys=False)


def config_hash(experiments) -> str:
    return hashlib.sha256(dump_config(experiments).encode()).hexdigest()


__all__ = [
    "ConfigError",
    "Experiment",
    "SCHEMA_VERSION",
    "SWEEP_AXES",
    "SweepSpec",
    "config_hash",
    "dump_config",
    "parse_config",
    "parse_text",
]
