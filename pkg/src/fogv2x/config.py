"""Scenario configuration: strict JSON parsing, validation and serialization."""

from __future__ import annotations

import json
import math
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from .dataplane import BSM_MIN_PERIOD_S, DEFAULT_CATALOG, DEFAULT_PAYLOAD_BYTES, DEFAULT_SERVICES, LayerId, MessageType
from .rat import RAT_NAMES, DsrcContention, MmwaveChannelConfig, PdrCurve, profile_of
from .topology import FogArea, Position, assign_fog_area


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


@dataclass
class AreaSpec:
    id: str
    center: list
    cloud_latency_ms: float = 50.0


@dataclass
class RsuSpec:
    id: str
    rat: str
    position: list
    area: Optional[str] = None


@dataclass
class VehicleSpec:
    id: str
    start: Optional[list] = None
    route: list = field(default_factory=list)
    speed_mps: float = 0.0
    heading_rad: float = 0.0
    trace: Optional[str] = None
    services: list = field(default_factory=list)


@dataclass
class PolicySpec:
    layer_rat_map: dict = field(default_factory=lambda: {"base": "dsrc", "enh1": "cv2x", "enh2": "mmwave"})
    px_enabled: bool = False
    escalation_enabled: bool = True
    load_caps_bps: dict = field(default_factory=dict)  # RAT -> bps; missing RATs use the profile net cap
    max_deferrals: int = 10
    assist: bool = True
    beam_sectors: int = 16
    track_staleness_s: float = 1.0
    bsm_period_s: float = 0.1
    mobility_step_s: float = 0.1
    handover_period_s: float = 0.1
    cloud_sync_period_s: float = 1.0
    link_idle_timeout_s: float = 10.0
    queue_limit_s: float = 0.5
    capacity_window_s: float = 1.0


@dataclass
class Scenario:
    duration_s: float
    seed: int = 0
    fog_areas: list = field(default_factory=list)
    rsus: list = field(default_factory=list)
    vehicles: list = field(default_factory=list)
    rat_overrides: dict = field(default_factory=dict)
    mmwave: dict = field(default_factory=lambda: asdict(MmwaveChannelConfig()))
    dsrc_contention: dict = field(default_factory=lambda: asdict(DsrcContention()))
    pdr_curve: dict = field(default_factory=lambda: asdict(PdrCurve()))
    payload_bytes: dict = field(default_factory=lambda: {k.value: v for k, v in DEFAULT_PAYLOAD_BYTES.items()})
    catalog: dict = field(default_factory=dict)
    services: dict = field(default_factory=dict)
    policy: PolicySpec = field(default_factory=PolicySpec)
    base_dir: Optional[str] = field(default=None, compare=False, repr=False)

    # built views -------------------------------------------------------
    def areas(self) -> list:
        return [FogArea(a.id, Position(*a.center), cloud_latency_ms=a.cloud_latency_ms) for a in self.fog_areas]

    def message_catalog(self) -> dict:
        cat = dict(DEFAULT_CATALOG)
        for name, spec in self.catalog.items():
            cat[name] = MessageType(
                name=name,
                layer=LayerId(spec["layer"]),
                rate_bps=tuple(spec["rate_bps"]),
                relevance=spec["relevance"],
                reliable=spec.get("reliable", LayerId(spec["layer"]) is not LayerId.ENH2),
                payload_bytes=spec.get("payload_bytes"),
            )
        return cat

    def service_map(self) -> dict:
        return {**DEFAULT_SERVICES, **{k: tuple(v) for k, v in self.services.items()}}

    def payloads(self) -> dict:
        return {LayerId(k): int(v) for k, v in self.payload_bytes.items()}

    def profiles(self) -> dict:
        return {name: profile_of(name, self.rat_overrides.get(name)) for name in RAT_NAMES}

    def load_caps(self) -> dict:
        profiles = self.profiles()
        return {name: float(self.policy.load_caps_bps.get(name, profiles[name].net_cap_bps)) for name in RAT_NAMES}

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        if not p.is_absolute() and self.base_dir:
            p = Path(self.base_dir) / p
        return p


# parsing ----------------------------------------------------------------

def _check_keys(obj: Any, cls, path: str, strict: bool) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    allowed = {f.name for f in fields(cls)} - {"base_dir"}
    unknown = set(obj) - allowed
    if unknown and strict:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}" if path else sorted(unknown)[0], "unknown key")
    return {k: v for k, v in obj.items() if k in allowed}


def _num(v: Any, path: str, *, positive=False, nonneg=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, "expected a finite number")
    if positive and v <= 0:
        raise ConfigError(path, "must be > 0")
    if nonneg and v < 0:
        raise ConfigError(path, "must be >= 0")
    return v


def _point(v: Any, path: str) -> list:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(path, "expected [x, y]")
    return [_num(v[0], f"{path}[0]"), _num(v[1], f"{path}[1]")]


def _build(cls, obj, path, strict):
    data = _check_keys(obj, cls, path, strict)
    required = [f.name for f in fields(cls) if f.default is MISSING and f.default_factory is MISSING]
    for name in required:
        if name not in data:
            raise ConfigError(f"{path}.{name}" if path else name, "missing required key")
    return cls(**data)


def parse_config(source, strict: bool = True, base_dir=None) -> Scenario:
    """Parse and validate a scenario from a path, JSON text or an already-loaded dict.

    Relative trace paths resolve against ``base_dir``, which defaults to the
    directory of the config file when ``source`` is a path.
    """
    base_dir = str(base_dir) if base_dir is not None else None
    if isinstance(source, dict):
        raw = source
    elif isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        base_dir = base_dir or str(path.parent)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from None
    else:
        raw = json.loads(source)

    sc = _build(Scenario, raw, "", strict)
    sc.base_dir = base_dir
    sc.duration_s = _num(sc.duration_s, "duration_s", positive=True)
    if isinstance(sc.seed, bool) or not isinstance(sc.seed, int) or not 0 <= sc.seed < 2**64:
        raise ConfigError("seed", "expected an unsigned 64-bit integer")

    pol = sc.policy if isinstance(sc.policy, PolicySpec) else _build(PolicySpec, sc.policy, "policy", strict)
    sc.policy = pol
    _validate_policy(pol, strict)

    sc.fog_areas = [_build(AreaSpec, a, f"fog_areas[{i}]", strict) for i, a in enumerate(_list(sc.fog_areas, "fog_areas"))]
    if not sc.fog_areas:
        raise ConfigError("fog_areas", "at least one fog area is required")
    seen = set()
    for i, a in enumerate(sc.fog_areas):
        a.center = _point(a.center, f"fog_areas[{i}].center")
        _num(a.cloud_latency_ms, f"fog_areas[{i}].cloud_latency_ms", nonneg=True)
        if a.id in seen:
            raise ConfigError(f"fog_areas[{i}].id", f"duplicate area id {a.id!r}")
        seen.add(a.id)
    areas = sc.areas()

    sc.rsus = [_build(RsuSpec, r, f"rsus[{i}]", strict) for i, r in enumerate(_list(sc.rsus, "rsus"))]
    seen = set()
    for i, r in enumerate(sc.rsus):
        if r.id in seen:
            raise ConfigError(f"rsus[{i}].id", f"duplicate RSU id {r.id!r}")
        seen.add(r.id)
        if r.rat not in RAT_NAMES:
            raise ConfigError(f"rsus[{i}].rat", f"unknown RAT {r.rat!r}")
        r.position = _point(r.position, f"rsus[{i}].position")
        expected = assign_fog_area(Position(*r.position), areas)
        if r.area is None:
            r.area = expected
        elif r.area not in {a.id for a in sc.fog_areas}:
            raise ConfigError(f"rsus[{i}].area", f"undefined fog area {r.area!r}")
        elif r.area != expected:
            raise ConfigError(f"rsus[{i}].area", f"position lies in area {expected!r}, not {r.area!r}")

    _validate_catalog(sc, strict)
    services = sc.service_map()

    sc.vehicles = [_build(VehicleSpec, v, f"vehicles[{i}]", strict) for i, v in enumerate(_list(sc.vehicles, "vehicles"))]
    seen = set()
    for i, v in enumerate(sc.vehicles):
        p = f"vehicles[{i}]"
        if v.id in seen:
            raise ConfigError(f"{p}.id", f"duplicate vehicle id {v.id!r}")
        if "/" in str(v.id):
            raise ConfigError(f"{p}.id", "vehicle ids may not contain '/'")
        seen.add(v.id)
        _num(v.speed_mps, f"{p}.speed_mps", nonneg=True)
        _num(v.heading_rad, f"{p}.heading_rad")
        if v.trace is None:
            if v.start is None:
                raise ConfigError(f"{p}.start", "a start position or a trace is required")
            v.start = _point(v.start, f"{p}.start")
        elif v.start is not None or v.route:
            raise ConfigError(f"{p}.trace", "trace vehicles take no start/route")
        elif not sc.resolve(v.trace).is_file():
            raise ConfigError(f"{p}.trace", f"trace file {v.trace!r} not found")
        v.route = [_point(w, f"{p}.route[{j}]") for j, w in enumerate(_list(v.route, f"{p}.route"))]
        for j, s in enumerate(_list(v.services, f"{p}.services")):
            if s not in services:
                raise ConfigError(f"{p}.services[{j}]", f"unknown service {s!r}")

    for name, patch in sc.rat_overrides.items():
        if name not in RAT_NAMES:
            raise ConfigError(f"rat_overrides.{name}", "unknown RAT")
        try:
            profile_of(name, patch)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"rat_overrides.{name}", str(exc)) from None
    for key, cls in (("mmwave", MmwaveChannelConfig), ("dsrc_contention", DsrcContention), ("pdr_curve", PdrCurve)):
        merged = {**asdict(cls()), **_check_keys(getattr(sc, key), cls, key, strict)}
        try:
            cls(**merged)
        except (ValueError, TypeError) as exc:
            raise ConfigError(key, str(exc)) from None
        setattr(sc, key, merged)

    pb = {k.value: v for k, v in DEFAULT_PAYLOAD_BYTES.items()}
    for k, v in sc.payload_bytes.items():
        if k not in pb:
            raise ConfigError(f"payload_bytes.{k}", "unknown layer")
        if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
            raise ConfigError(f"payload_bytes.{k}", "expected a positive integer")
        pb[k] = v
    sc.payload_bytes = pb

    for name, cap in pol.load_caps_bps.items():
        if name not in RAT_NAMES:
            raise ConfigError(f"policy.load_caps_bps.{name}", "unknown RAT")
        _num(cap, f"policy.load_caps_bps.{name}", nonneg=True)
    pol.load_caps_bps = sc.load_caps()
    return sc


def _list(v, path):
    if not isinstance(v, list):
        raise ConfigError(path, "expected a list")
    return v


def _validate_policy(pol: PolicySpec, strict: bool) -> None:
    if not isinstance(pol.layer_rat_map, dict):
        raise ConfigError("policy.layer_rat_map", "expected an object")
    merged = {"base": "dsrc", "enh1": "cv2x", "enh2": "mmwave", **pol.layer_rat_map}
    for layer, rat in merged.items():
        if layer not in ("base", "enh1", "enh2"):
            raise ConfigError(f"policy.layer_rat_map.{layer}", "unknown layer")
        if rat not in RAT_NAMES:
            raise ConfigError(f"policy.layer_rat_map.{layer}", f"unknown RAT {rat!r}")
    pol.layer_rat_map = merged
    for key in ("px_enabled", "escalation_enabled", "assist"):
        if not isinstance(getattr(pol, key), bool):
            raise ConfigError(f"policy.{key}", "expected true/false")
    if pol.bsm_period_s < BSM_MIN_PERIOD_S:
        raise ConfigError("policy.bsm_period_s", f"BSM period below the {BSM_MIN_PERIOD_S} s floor")
    for key in ("bsm_period_s", "mobility_step_s", "handover_period_s", "cloud_sync_period_s",
                "track_staleness_s", "link_idle_timeout_s", "capacity_window_s"):
        _num(getattr(pol, key), f"policy.{key}", positive=True)
    _num(pol.queue_limit_s, "policy.queue_limit_s", nonneg=True)
    if isinstance(pol.max_deferrals, bool) or not isinstance(pol.max_deferrals, int) or pol.max_deferrals < 1:
        raise ConfigError("policy.max_deferrals", "expected an integer >= 1")
    if isinstance(pol.beam_sectors, bool) or not isinstance(pol.beam_sectors, int) or pol.beam_sectors < 2:
        raise ConfigError("policy.beam_sectors", "expected an integer >= 2")


_CATALOG_KEYS = {"layer", "rate_bps", "relevance", "reliable", "payload_bytes"}


def _validate_catalog(sc: Scenario, strict: bool) -> None:
    if not isinstance(sc.catalog, dict):
        raise ConfigError("catalog", "expected an object")
    for name, spec in sc.catalog.items():
        p = f"catalog.{name}"
        if not isinstance(spec, dict):
            raise ConfigError(p, "expected an object")
        unknown = set(spec) - _CATALOG_KEYS
        if unknown and strict:
            raise ConfigError(f"{p}.{sorted(unknown)[0]}", "unknown key")
        base = DEFAULT_CATALOG.get(name)
        merged = {}
        if base is not None:
            merged = {"layer": base.layer.value, "rate_bps": list(base.rate_bps), "relevance": base.relevance,
                      "reliable": base.reliable}
            if base.payload_bytes is not None:
                merged["payload_bytes"] = base.payload_bytes
        merged.update(spec)
        for key in ("layer", "rate_bps", "relevance"):
            if key not in merged:
                raise ConfigError(f"{p}.{key}", "missing required key")
        try:
            MessageType(
                name=name,
                layer=LayerId(merged["layer"]),
                rate_bps=tuple(merged["rate_bps"]),
                relevance=merged["relevance"],
                reliable=merged.get("reliable", merged["layer"] != "enh2"),
                payload_bytes=merged.get("payload_bytes"),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(p, str(exc)) from None
        sc.catalog[name] = merged
    if not isinstance(sc.services, dict):
        raise ConfigError("services", "expected an object")
    cat = sc.message_catalog()
    for svc, types in sc.services.items():
        for j, t in enumerate(_list(types, f"services.{svc}")):
            if t not in cat:
                raise ConfigError(f"services.{svc}[{j}]", f"unknown message type {t!r}")


def serialize(sc: Scenario) -> dict:
    d = asdict(sc)
    d.pop("base_dir", None)
    return d


def load_raw(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
