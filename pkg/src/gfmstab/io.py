"""JSON configuration, CSV/JSON writers and run manifests."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import __version__
from .hybrid_sim import ConvergenceCriteria, SimConfig
from .params import ConverterParams, GridParams, ParameterError, validate
from .scenario import PhaseJump, Scenario, VoltageStep

TOP_LEVEL = ("grid", "converter", "sim", "events", "current_limit", "convergence")
SIM_FIELDS = {f.name: f.type for f in fields(SimConfig)}
CONVERGENCE_FIELDS = {f.name for f in fields(ConvergenceCriteria)}
EVENT_TYPES = {"voltage_step": ("v_g", VoltageStep), "phase_jump": ("degrees", PhaseJump)}
INF_STRINGS = ("inf", "infinity", "+inf")
MANIFEST_NAME = "manifest.json"


class ConfigError(ValueError):
    """Invalid configuration document; ``problems`` holds ``(json_pointer, message)`` pairs."""

    def __init__(self, problems: Sequence[tuple[str, str]]):
        self.problems = list(problems)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.problems))

    @property
    def pointer(self) -> str:
        return self.problems[0][0] if self.problems else ""


def _pointer(*parts) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


@dataclass(frozen=True)
class RunConfig:
    grid: GridParams
    conv: ConverterParams
    sim: SimConfig = field(default_factory=SimConfig)
    events: tuple = ()
    current_limit: bool = True
    criteria: ConvergenceCriteria = field(default_factory=ConvergenceCriteria)
    digest: str = ""

    def __iter__(self):
        # unpacks as (grid, conv, sim)
        return iter((self.grid, self.conv, self.sim))

    def with_beta(self, beta: float | None) -> "RunConfig":
        if beta is None:
            return self
        try:
            conv = self.conv.with_beta(float(beta))
        except ParameterError as err:
            raise ConfigError([("/converter/beta", m) for _, m in err.violations]) from None
        return RunConfig(self.grid, conv, self.sim, self.events, self.current_limit,
                         self.criteria, self.digest)

    def scenario(self, case_id: str | None = None) -> Scenario:
        try:
            return Scenario(self.conv, self.grid, self.events, self.sim,
                            self.current_limit, self.criteria, case_id)
        except (TypeError, ValueError) as err:
            raise ConfigError([("/events", str(err))]) from None


def digest_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _number(value, ptr, problems, allow_inf=False):
    if isinstance(value, str) and allow_inf and value.strip().lower() in INF_STRINGS:
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append((ptr, f"expected a number, got {value!r}"))
        return None
    return value


def parse_document(doc: Any, digest: str = "") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError([("", "top level must be a JSON object")])
    problems: list[tuple[str, str]] = []
    for key in doc:
        if key not in TOP_LEVEL:
            problems.append((_pointer(key), "unknown field"))
    for key in ("grid", "converter"):
        if key not in doc:
            problems.append((_pointer(key), "missing"))
        elif not isinstance(doc[key], dict):
            problems.append((_pointer(key), "must be an object"))
    if problems:
        raise ConfigError(problems)

    grid_raw = dict(doc["grid"])
    if "x_over_r" in grid_raw:
        grid_raw["x_over_r"] = _number(grid_raw["x_over_r"], "/grid/x_over_r", problems, True)
    for name in ("v_g", "z"):
        if name in grid_raw:
            grid_raw[name] = _number(grid_raw[name], _pointer("grid", name), problems)
    if problems:
        raise ConfigError(problems)
    try:
        grid, conv = validate({"grid": grid_raw, "converter": doc["converter"]})
    except ParameterError as err:
        raise ConfigError([("/" + name.replace(".", "/"), msg)
                           for name, msg in err.violations]) from None

    sim = _parse_sim(doc.get("sim", {}), problems)
    criteria = _parse_convergence(doc.get("convergence", {}), problems)
    events = _parse_events(doc.get("events", []), problems)
    limit = doc.get("current_limit", True)
    if not isinstance(limit, bool):
        problems.append(("/current_limit", "must be true or false"))
    if problems:
        raise ConfigError(problems)
    return RunConfig(grid, conv, sim, tuple(events), limit, criteria, digest)


def _parse_sim(raw, problems) -> SimConfig | None:
    if not isinstance(raw, dict):
        problems.append(("/sim", "must be an object"))
        return None
    kwargs = {}
    for key, value in raw.items():
        ptr = _pointer("sim", key)
        if key not in SIM_FIELDS:
            problems.append((ptr, "unknown field"))
        elif key in ("overlap_policy", "returning_method"):
            if not isinstance(value, str):
                problems.append((ptr, "must be a string"))
            kwargs[key] = value
        elif key in ("damping", "freq_limit"):
            if not isinstance(value, bool):
                problems.append((ptr, "must be true or false"))
            kwargs[key] = value
        else:
            kwargs[key] = _number(value, ptr, problems)
    if problems:
        return None
    try:
        return SimConfig(**kwargs)
    except ValueError as err:
        key = str(err).split()[0]
        problems.append((_pointer("sim", key) if key in SIM_FIELDS else "/sim", str(err)))
        return None


def _parse_convergence(raw, problems) -> ConvergenceCriteria | None:
    if not isinstance(raw, dict):
        problems.append(("/convergence", "must be an object"))
        return None
    kwargs = {}
    for key, value in raw.items():
        ptr = _pointer("convergence", key)
        if key not in CONVERGENCE_FIELDS:
            problems.append((ptr, "unknown field"))
            continue
        v = _number(value, ptr, problems)
        if v is not None and not v > 0:
            problems.append((ptr, f"must be > 0, got {v}"))
        kwargs[key] = v
    if problems:
        return None
    return ConvergenceCriteria(**kwargs)


def _parse_events(raw, problems) -> list:
    if not isinstance(raw, list):
        problems.append(("/events", "must be an array"))
        return []
    out = []
    for i, item in enumerate(raw):
        ptr = _pointer("events", i)
        if not isinstance(item, dict):
            problems.append((ptr, "must be an object"))
            continue
        kind = item.get("type")
        if kind not in EVENT_TYPES:
            problems.append((ptr + "/type", f"must be one of {sorted(EVENT_TYPES)}"))
            continue
        value_key, cls = EVENT_TYPES[kind]
        for key in item:
            if key not in ("type", "t", value_key):
                problems.append((ptr + _pointer(key), "unknown field"))
        missing = [k for k in ("t", value_key) if k not in item]
        for key in missing:
            problems.append((ptr + _pointer(key), "missing"))
        if missing:
            continue
        t = _number(item["t"], ptr + "/t", problems)
        v = _number(item[value_key], ptr + _pointer(value_key), problems)
        if t is None or v is None:
            continue
        try:
            out.append((float(t), cls(float(v))))
        except ValueError as err:
            problems.append((ptr + _pointer(value_key), str(err)))
    return out


def parse_config(path) -> RunConfig:
    """Read and validate a JSON configuration file.

    The result unpacks as ``grid, conv, sim``; events, the current-limit
    switch and convergence criteria ride along as attributes.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as err:
        raise ConfigError([("", f"cannot read {path}: {err.strerror}")]) from None
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise ConfigError([("", f"malformed JSON: {err}")]) from None
    return parse_document(doc, digest_bytes(data))


def config_document(grid: GridParams, conv: ConverterParams, sim: SimConfig | None = None,
                    events: Iterable = (), current_limit: bool = True) -> dict:
    """Inverse of :func:`parse_document` for the fields it reads."""
    conv_doc = {f.name: getattr(conv, f.name) for f in fields(conv)
                if getattr(conv, f.name) is not None}
    doc = {
        "grid": {"v_g": grid.v_g, "z": grid.z,
                 "x_over_r": "inf" if math.isinf(grid.x_over_r) else grid.x_over_r},
        "converter": conv_doc,
        "sim": {f.name: getattr(sim or SimConfig(), f.name) for f in fields(SimConfig)},
        "current_limit": current_limit,
    }
    ev = []
    for t, e in events:
        if isinstance(e, VoltageStep):
            ev.append({"t": t, "type": "voltage_step", "v_g": e.v_g})
        else:
            ev.append({"t": t, "type": "phase_jump", "degrees": e.degrees})
    doc["events"] = ev
    return doc


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def utc_timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        when = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        when = _dt.datetime.now(tz=_dt.timezone.utc).replace(microsecond=0)
    return when.isoformat().replace("+00:00", "Z")


def write_manifest(out_dir, command: str, config_digest: str, outputs: Sequence[str]) -> dict:
    manifest = {
        "command": command,
        "config_digest": config_digest,
        "tool_version": __version__,
        "timestamp": utc_timestamp(),
        "outputs": sorted(outputs),
    }
    write_json(Path(out_dir) / MANIFEST_NAME, manifest)
    return manifest
