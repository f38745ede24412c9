"""City geometry: positions, Fog Areas, RSUs, vehicle kinematics and traces."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

TWO_PI = 2.0 * math.pi
TRACE_HEADER = ["t_s", "vehicle", "x_m", "y_m", "speed_mps", "heading_rad"]


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")

    def distance_to(self, other: "Position") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


@dataclass(frozen=True)
class FogArea:
    id: str
    center: Position
    rsu_ids: frozenset = frozenset()
    cloud_latency_ms: float = 50.0


@dataclass(frozen=True)
class Rsu:
    id: str
    rat: str
    position: Position
    fog_area: str


@dataclass
class Vehicle:
    id: str
    position: Position
    speed: float
    heading: float
    fog_area: str = ""
    route: tuple = ()  # remaining waypoints, consumed as they are reached
    trace: Optional["Trace"] = None

    def __post_init__(self) -> None:
        if self.speed < 0:
            raise ValueError(f"vehicle {self.id}: negative speed")
        self.heading = normalize_angle(self.heading)

    @property
    def speed_kmh(self) -> float:
        return self.speed * 3.6


def normalize_angle(a: float) -> float:
    a = math.fmod(a, TWO_PI)
    if a < 0:
        a += TWO_PI
    # fmod of a tiny negative can round up to exactly 2*pi
    return 0.0 if a >= TWO_PI else a


def heading_between(a: Position, b: Position) -> float:
    return normalize_angle(math.atan2(b.y - a.y, b.x - a.x))


def advance_vehicle(vehicle: Vehicle, dt: float) -> Vehicle:
    """Move ``vehicle`` forward by ``dt`` seconds at constant speed.

    With a route, the vehicle follows the waypoint polyline and turns at
    each waypoint; past the last waypoint (or without a route) it keeps its
    current heading.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    remaining = vehicle.speed * dt
    pos = vehicle.position
    heading = vehicle.heading
    route = list(vehicle.route)
    while remaining > 0 and route:
        target = route[0]
        gap = pos.distance_to(target)
        if gap <= remaining:
            remaining -= gap
            pos = target
            route.pop(0)
            if route:
                heading = heading_between(pos, route[0])
        else:
            heading = heading_between(pos, target)
            frac = remaining / gap
            pos = Position(pos.x + (target.x - pos.x) * frac, pos.y + (target.y - pos.y) * frac)
            remaining = 0.0
    if remaining > 0:
        pos = Position(pos.x + remaining * math.cos(heading), pos.y + remaining * math.sin(heading))
    return replace(vehicle, position=pos, heading=heading, route=tuple(route))


def assign_fog_area(position: Position, areas: Sequence[FogArea]) -> str:
    """Nearest area center wins; equal distances go to the smallest id."""
    if not areas:
        raise ValueError("at least one fog area is required")
    best = min(areas, key=lambda a: (math.hypot(position.x - a.center.x, position.y - a.center.y), a.id))
    return best.id


def in_range(tx: Position, rx: Position, profile) -> bool:
    return tx.distance_to(rx) <= profile.range_m


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRow:
    t: float
    vehicle: str
    x: float
    y: float
    speed: float
    heading: float


@dataclass
class Trace:
    """Per-vehicle timed samples with linear interpolation between rows."""

    rows: list
    _by_vehicle: dict = field(default_factory=dict, repr=False)
    _times: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        for r in self.rows:
            self._by_vehicle.setdefault(r.vehicle, []).append(r)
        for vid, rows in self._by_vehicle.items():
            self._times[vid] = [r.t for r in rows]

    @property
    def vehicles(self) -> list:
        return sorted(self._by_vehicle)

    def samples(self, vehicle: str) -> list:
        return self._by_vehicle[vehicle]

    def state_at(self, vehicle: str, t: float) -> TraceRow:
        rows = self._by_vehicle[vehicle]
        times = self._times[vehicle]
        if t <= times[0]:
            return rows[0]
        if t >= times[-1]:
            return rows[-1]
        i = bisect.bisect_right(times, t)
        a, b = rows[i - 1], rows[i]
        w = (t - a.t) / (b.t - a.t)
        x = a.x + (b.x - a.x) * w
        y = a.y + (b.y - a.y) * w
        speed = a.speed + (b.speed - a.speed) * w
        return TraceRow(t, vehicle, x, y, speed, a.heading)

    def position_at(self, vehicle: str, t: float) -> Position:
        s = self.state_at(vehicle, t)
        return Position(s.x, s.y)


def load_trace(source: str | Path | Iterable[str]) -> Trace:
    """Parse a trace CSV (``t_s,vehicle,x_m,y_m,speed_mps,heading_rad``)."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return _parse_trace(fh)
    return _parse_trace(source)


def _parse_trace(lines: Iterable[str]) -> Trace:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        return Trace([])
    if [h.strip() for h in header] != TRACE_HEADER:
        raise TraceError(f"line 1: expected header {','.join(TRACE_HEADER)}")
    rows = []
    for lineno, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(TRACE_HEADER):
            raise TraceError(f"line {lineno}: expected {len(TRACE_HEADER)} fields, got {len(raw)}")
        try:
            t = float(raw[0])
            x, y, speed, heading = (float(v) for v in raw[2:])
        except ValueError as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
        vid = raw[1].strip()
        if not vid:
            raise TraceError(f"line {lineno}: empty vehicle id")
        if not all(math.isfinite(v) for v in (t, x, y, speed, heading)):
            raise TraceError(f"line {lineno}: non-finite value")
        if t < 0:
            raise TraceError(f"line {lineno}: negative time")
        if speed < 0:
            raise TraceError(f"line {lineno}: negative speed")
        rows.append((lineno, TraceRow(t, vid, x, y, speed, normalize_angle(heading))))

    last_t: dict[str, float] = {}
    for lineno, r in rows:
        prev = last_t.get(r.vehicle)
        if prev is not None and r.t <= prev:
            raise TraceError(f"line {lineno}: timestamps for {r.vehicle} not increasing")
        last_t[r.vehicle] = r.t
    return Trace(sorted((r for _, r in rows), key=lambda r: (r.t, r.vehicle)))
