"""Domain model: applications, architecture, scenarios, mappings, config I/O.

The configuration document is JSON with top-level keys ``applications``,
``architecture`` and ``scenarios``; see :func:`parse_config` for the shape.
All model types are immutable after construction and safe to share read-only
between threads.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

CHANNEL_KEY_SEP = "->"


class ConfigError(Exception):
    """Invalid configuration document."""


class ConfigSyntaxError(ConfigError):
    """Document is not well-formed JSON; the message carries line/column."""


class ConfigSemanticError(ConfigError):
    """Well-formed document that violates a model invariant; the message
    names the offending key."""


@dataclass(frozen=True)
class Application:
    """A process network: named processes and directed point-to-point channels."""

    name: str
    processes: tuple[str, ...]
    channels: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Processor:
    name: str
    speed: float  # ops per time unit, > 0
    power: float  # energy per busy time unit, >= 0


@dataclass(frozen=True)
class Interconnect:
    """The single shared interconnect crossed by off-processor channels."""

    bandwidth: float  # data units per time unit, > 0
    energy_per_unit: float  # energy per data unit, >= 0


@dataclass(frozen=True)
class Architecture:
    processors: tuple[Processor, ...]
    interconnect: Interconnect


@dataclass(frozen=True, eq=True)
class Scenario:
    """One workload case: which applications are active plus their demands.

    ``comp`` maps process name to compute demand (ops); ``data`` maps a
    channel (from, to) to its data demand. Absent keys mean zero demand, which
    is how inactive applications are expressed.
    """

    name: str
    active_apps: frozenset[str]
    comp: dict[str, float] = field(default_factory=dict)
    data: dict[tuple[str, str], float] = field(default_factory=dict)


@dataclass(frozen=True)
class Mapping:
    """Assignment of every process (in global process order) to a processor
    index. Equality and hashing are plain gene-vector equality."""

    genes: tuple[int, ...]


@dataclass(frozen=True)
class SystemSpec:
    """Parsed system configuration: applications, architecture, scenarios."""

    applications: tuple[Application, ...]
    architecture: Architecture
    scenarios: tuple[Scenario, ...]

    @cached_property
    def processes(self) -> tuple[str, ...]:
        """Global process order: document order of applications, then of their
        processes. Gene index i of a Mapping refers to processes[i]."""
        return tuple(p for app in self.applications for p in app.processes)

    @cached_property
    def process_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.processes)}

    @cached_property
    def channels(self) -> tuple[tuple[str, str], ...]:
        return tuple(ch for app in self.applications for ch in app.channels)

    @property
    def n_processors(self) -> int:
        return len(self.architecture.processors)

    def check_mapping(self, mapping: Mapping) -> None:
        """Raise ValueError unless the mapping fits this spec."""
        if len(mapping.genes) != len(self.processes):
            raise ValueError(
                f"mapping has {len(mapping.genes)} genes, expected {len(self.processes)}"
            )
        for i, g in enumerate(mapping.genes):
            if not 0 <= g < self.n_processors:
                raise ValueError(f"gene {i} = {g} out of range (processors: {self.n_processors})")

    def validate(self) -> None:
        """Check every model invariant; raise ConfigSemanticError naming the
        offending key on the first violation."""
        _validate_spec(self)


def _err(msg: str) -> ConfigSemanticError:
    return ConfigSemanticError(msg)


def _validate_spec(spec: SystemSpec) -> None:
    seen_apps: set[str] = set()
    seen_procs: set[str] = set()
    for app in spec.applications:
        if app.name in seen_apps:
            raise _err(f"duplicate application name '{app.name}'")
        seen_apps.add(app.name)
        if not app.processes:
            raise _err(f"application '{app.name}': process list is empty")
        for p in app.processes:
            if p in seen_procs:
                raise _err(f"duplicate process name '{p}'")
            seen_procs.add(p)
        local = set(app.processes)
        for frm, to in app.channels:
            if frm == to:
                raise _err(f"application '{app.name}': self-channel on '{frm}'")
            for endpoint in (frm, to):
                if endpoint not in local:
                    raise _err(
                        f"application '{app.name}': channel endpoint '{endpoint}' "
                        f"is not a process of this application"
                    )

    arch = spec.architecture
    if not arch.processors:
        raise _err("architecture has no processors")
    seen_cpu: set[str] = set()
    for proc in arch.processors:
        if proc.name in seen_cpu:
            raise _err(f"duplicate processor name '{proc.name}'")
        seen_cpu.add(proc.name)
        if not (proc.speed > 0 and math.isfinite(proc.speed)):
            raise _err(f"processor '{proc.name}': non-positive speed {proc.speed}")
        if not (proc.power >= 0 and math.isfinite(proc.power)):
            raise _err(f"processor '{proc.name}': negative power {proc.power}")
    ic = arch.interconnect
    if not (ic.bandwidth > 0 and math.isfinite(ic.bandwidth)):
        raise _err(f"interconnect: non-positive bandwidth {ic.bandwidth}")
    if not (ic.energy_per_unit >= 0 and math.isfinite(ic.energy_per_unit)):
        raise _err(f"interconnect: negative energy_per_unit {ic.energy_per_unit}")

    if not spec.scenarios:
        raise _err("no scenarios defined")
    app_of_proc = {p: app.name for app in spec.applications for p in app.processes}
    app_of_chan = {ch: app.name for app in spec.applications for ch in app.channels}
    seen_scen: set[str] = set()
    for scen in spec.scenarios:
        if scen.name in seen_scen:
            raise _err(f"duplicate scenario name '{scen.name}'")
        seen_scen.add(scen.name)
        for a in scen.active_apps:
            if a not in seen_apps:
                raise _err(f"scenario '{scen.name}': unknown application '{a}'")
        for p, demand in scen.comp.items():
            if p not in app_of_proc:
                raise _err(f"scenario '{scen.name}': comp references unknown process '{p}'")
            if not (demand >= 0 and math.isfinite(demand)):
                raise _err(f"scenario '{scen.name}': negative comp demand for '{p}'")
            if demand > 0 and app_of_proc[p] not in scen.active_apps:
                raise _err(
                    f"scenario '{scen.name}': process '{p}' of inactive application "
                    f"'{app_of_proc[p]}' has non-zero comp demand"
                )
        for ch, demand in scen.data.items():
            if ch not in app_of_chan:
                raise _err(
                    f"scenario '{scen.name}': data references unknown channel "
                    f"'{ch[0]}{CHANNEL_KEY_SEP}{ch[1]}'"
                )
            if not (demand >= 0 and math.isfinite(demand)):
                raise _err(
                    f"scenario '{scen.name}': negative data demand for "
                    f"'{ch[0]}{CHANNEL_KEY_SEP}{ch[1]}'"
                )
            if demand > 0 and app_of_chan[ch] not in scen.active_apps:
                raise _err(
                    f"scenario '{scen.name}': channel '{ch[0]}{CHANNEL_KEY_SEP}{ch[1]}' of "
                    f"inactive application '{app_of_chan[ch]}' has non-zero data demand"
                )


def _expect(obj: Any, typ: type, what: str) -> Any:
    if not isinstance(obj, typ):
        raise _err(f"{what}: expected {typ.__name__}, got {type(obj).__name__}")
    return obj


def _expect_number(obj: Any, what: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise _err(f"{what}: expected a number, got {type(obj).__name__}")
    return float(obj)


def _parse_application(raw: Any, pos: int) -> Application:
    obj = _expect(raw, dict, f"applications[{pos}]")
    name = _expect(obj.get("name"), str, f"applications[{pos}].name")
    procs = _expect(obj.get("processes"), list, f"application '{name}': processes")
    processes = tuple(_expect(p, str, f"application '{name}': process entry") for p in procs)
    channels = []
    for ch in _expect(obj.get("channels", []), list, f"application '{name}': channels"):
        pair = _expect(ch, list, f"application '{name}': channel entry")
        if len(pair) != 2:
            raise _err(f"application '{name}': channel must be a [from, to] pair")
        channels.append((_expect(pair[0], str, "channel endpoint"), _expect(pair[1], str, "channel endpoint")))
    unknown = set(obj) - {"name", "processes", "channels"}
    if unknown:
        raise _err(f"application '{name}': unknown key '{sorted(unknown)[0]}'")
    return Application(name=name, processes=processes, channels=tuple(channels))


def _parse_architecture(raw: Any) -> Architecture:
    obj = _expect(raw, dict, "architecture")
    procs = []
    for i, p in enumerate(_expect(obj.get("processors"), list, "architecture.processors")):
        entry = _expect(p, dict, f"architecture.processors[{i}]")
        procs.append(
            Processor(
                name=_expect(entry.get("name"), str, f"processors[{i}].name"),
                speed=_expect_number(entry.get("speed"), f"processors[{i}].speed"),
                power=_expect_number(entry.get("power"), f"processors[{i}].power"),
            )
        )
    ic = _expect(obj.get("interconnect"), dict, "architecture.interconnect")
    interconnect = Interconnect(
        bandwidth=_expect_number(ic.get("bandwidth"), "interconnect.bandwidth"),
        energy_per_unit=_expect_number(ic.get("energy_per_unit"), "interconnect.energy_per_unit"),
    )
    return Architecture(processors=tuple(procs), interconnect=interconnect)


def _parse_channel_key(key: str, where: str) -> tuple[str, str]:
    parts = key.split(CHANNEL_KEY_SEP)
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise _err(f"{where}: malformed channel key '{key}' (expected 'from{CHANNEL_KEY_SEP}to')")
    return parts[0], parts[1]


def _parse_scenario(raw: Any, pos: int) -> Scenario:
    obj = _expect(raw, dict, f"scenarios[{pos}]")
    name = _expect(obj.get("name"), str, f"scenarios[{pos}].name")
    active = _expect(obj.get("active_apps"), list, f"scenario '{name}': active_apps")
    comp_raw = _expect(obj.get("comp", {}), dict, f"scenario '{name}': comp")
    data_raw = _expect(obj.get("data", {}), dict, f"scenario '{name}': data")
    comp = {
        _expect(k, str, "comp key"): _expect_number(v, f"scenario '{name}': comp['{k}']")
        for k, v in comp_raw.items()
    }
    data = {
        _parse_channel_key(k, f"scenario '{name}'"): _expect_number(v, f"scenario '{name}': data['{k}']")
        for k, v in data_raw.items()
    }
    unknown = set(obj) - {"name", "active_apps", "comp", "data"}
    if unknown:
        raise _err(f"scenario '{name}': unknown key '{sorted(unknown)[0]}'")
    return Scenario(
        name=name,
        active_apps=frozenset(_expect(a, str, "active_apps entry") for a in active),
        comp=comp,
        data=data,
    )


def parse_config(text: str) -> SystemSpec:
    """Parse and validate a configuration document.

    Raises ConfigSyntaxError for malformed JSON (with line/column) and
    ConfigSemanticError for schema or invariant violations.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    obj = _expect(doc, dict, "configuration document")
    for key in ("applications", "architecture", "scenarios"):
        if key not in obj:
            raise _err(f"missing top-level key '{key}'")
    unknown = set(obj) - {"applications", "architecture", "scenarios"}
    if unknown:
        raise _err(f"unknown top-level key '{sorted(unknown)[0]}'")
    apps = _expect(obj["applications"], list, "applications")
    scens = _expect(obj["scenarios"], list, "scenarios")
    spec = SystemSpec(
        applications=tuple(_parse_application(a, i) for i, a in enumerate(apps)),
        architecture=_parse_architecture(obj["architecture"]),
        scenarios=tuple(_parse_scenario(s, i) for i, s in enumerate(scens)),
    )
    spec.validate()
    return spec


def parse_config_file(path: str) -> SystemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def render_config(spec: SystemSpec) -> str:
    """Render a spec back into a configuration document.

    Preserves document order (it defines the global process order), so
    ``parse_config(render_config(spec)) == spec`` for any valid spec.
    """
    doc = {
        "applications": [
            {
                "name": app.name,
                "processes": list(app.processes),
                "channels": [[frm, to] for frm, to in app.channels],
            }
            for app in spec.applications
        ],
        "architecture": {
            "processors": [
                {"name": p.name, "speed": p.speed, "power": p.power}
                for p in spec.architecture.processors
            ],
            "interconnect": {
                "bandwidth": spec.architecture.interconnect.bandwidth,
                "energy_per_unit": spec.architecture.interconnect.energy_per_unit,
            },
        },
        "scenarios": [
            {
                "name": s.name,
                "active_apps": sorted(s.active_apps),
                "comp": dict(s.comp),
                "data": {f"{frm}{CHANNEL_KEY_SEP}{to}": v for (frm, to), v in s.data.items()},
            }
            for s in spec.scenarios
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def random_mapping(spec: SystemSpec, rng: random.Random) -> Mapping:
    """Uniformly random mapping; deterministic for a seeded rng."""
    n = spec.n_processors
    return Mapping(genes=tuple(rng.randrange(n) for _ in spec.processes))
