"""Per-Fog-Area orchestrator state: vehicle registry, BSM tracking, beam assist, handover, cloud sync."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .control import FogLoadState
from .dataplane import LayerId, Message
from .rat import MmwaveChannelConfig
from .topology import TWO_PI, Position, Vehicle

DEFAULT_STALENESS_S = 1.0
_LAYER_NAMES = {l: l.value for l in LayerId}


class StaleTrackError(LookupError):
    pass


@dataclass(frozen=True)
class TrackEntry:
    vehicle: str
    last_bsm_time: float
    position: Position
    speed: float
    heading: float


@dataclass(frozen=True)
class CloudRecord:
    """One aggregate count destined for the city cloud; never a payload."""

    kind: str  # "admitted" | "dropped" | "escalated"
    layer: Optional[str] = None
    count: int = 1


@dataclass
class CloudBatch:
    t_s: float
    area: str
    vehicles: int
    records: list

    def to_json(self) -> dict:
        admitted = Counter()
        dropped = Counter()
        escalated = 0
        for r in self.records:
            if r.kind == "admitted":
                admitted[r.layer] += r.count
            elif r.kind == "dropped":
                dropped[r.layer] += r.count
            elif r.kind == "escalated":
                escalated += r.count
        layers = [l.value for l in LayerId]
        return {
            "t_s": self.t_s,
            "area": self.area,
            "vehicles": self.vehicles,
            "admitted": {l: admitted.get(l, 0) for l in layers},
            "dropped": {l: dropped.get(l, 0) for l in layers},
            "escalated": escalated,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


@dataclass
class FogOrchestratorState:
    area: str
    registered: set = field(default_factory=set)
    tracks: dict = field(default_factory=dict)
    load: FogLoadState = field(default_factory=FogLoadState)
    cloud_buffer: list = field(default_factory=list)
    cloud_latency_ms: float = 50.0
    staleness_s: float = DEFAULT_STALENESS_S

    def register(self, vehicle_id: str) -> None:
        self.registered.add(vehicle_id)

    def deregister(self, vehicle_id: str) -> Optional[TrackEntry]:
        self.registered.discard(vehicle_id)
        self.load.release_vehicle(vehicle_id)
        return self.tracks.pop(vehicle_id, None)

    def fresh_track(self, vehicle_id: str, t: float) -> Optional[TrackEntry]:
        entry = self.tracks.get(vehicle_id)
        if entry is None or t - entry.last_bsm_time > self.staleness_s:
            return None
        return entry

    def note(self, kind: str, layer: Optional[LayerId] = None, count: int = 1) -> None:
        self.cloud_buffer.append(CloudRecord(kind, _LAYER_NAMES.get(layer), count))


def register_bsm(fo: FogOrchestratorState, bsm: Message, delivered_at: Optional[float]) -> dict:
    """Upsert the sender's track entry; undelivered BSMs change nothing."""
    if delivered_at is None or bsm.snapshot is None:
        return fo.tracks
    prev = fo.tracks.get(bsm.src)
    if prev is not None and prev.last_bsm_time > delivered_at:
        return fo.tracks  # reordered arrival; keep the newer entry
    x, y, speed, heading = bsm.snapshot
    fo.tracks[bsm.src] = TrackEntry(bsm.src, delivered_at, Position(x, y), speed, heading)
    return fo.tracks


def predict_position(entry: TrackEntry, t_query: float, staleness_s: float = DEFAULT_STALENESS_S) -> Position:
    age = t_query - entry.last_bsm_time
    if age < 0:
        raise ValueError("query precedes the last BSM")
    if age > staleness_s:
        raise StaleTrackError(f"track for {entry.vehicle} is {age:.3f} s old")
    step = entry.speed * age
    return Position(
        entry.position.x + step * math.cos(entry.heading),
        entry.position.y + step * math.sin(entry.heading),
    )


def beam_sector(rsu: Position, target: Position, n_sectors: int) -> int:
    if n_sectors < 2:
        raise ValueError("need at least two sectors")
    dx, dy = target.x - rsu.x, target.y - rsu.y
    if dx == 0 and dy == 0:
        raise ValueError("coincident points have no azimuth")
    az = math.atan2(dy, dx)
    if az < 0:
        az += TWO_PI
    idx = int(az // (TWO_PI / n_sectors))
    return min(idx, n_sectors - 1)


def assist_overhead(
    fo: FogOrchestratorState,
    vehicle: Vehicle,
    t: float,
    rsu: Position,
    n_sectors: int = 16,
    config: MmwaveChannelConfig = MmwaveChannelConfig(),
) -> float:
    """Beamforming overhead for the next mmWave transmission of ``vehicle``.

    The reduced overhead applies only when a fresh BSM track predicts the
    same sector as the vehicle's true position; anything else falls back to
    full beam training.
    """
    entry = fo.fresh_track(vehicle.id, t)
    if entry is None or t < entry.last_bsm_time:
        return config.overhead_no_assist
    predicted = predict_position(entry, t, fo.staleness_s)
    try:
        hit = beam_sector(rsu, predicted, n_sectors) == beam_sector(rsu, vehicle.position, n_sectors)
    except ValueError:
        return config.overhead_no_assist
    return config.overhead_with_assist if hit else config.overhead_no_assist


def handover(vehicle_id: str, old: FogOrchestratorState, new: FogOrchestratorState) -> Optional[TrackEntry]:
    """Move ``vehicle_id`` from ``old`` to ``new``; its track entry travels with it.

    Reservations held at the old orchestrator are released. Cancelling
    pending deferrals is the caller's job since the messages live in the
    simulation, not in orchestrator state.
    """
    if old is new:
        raise ValueError("handover needs two distinct orchestrators")
    entry = old.deregister(vehicle_id)
    new.register(vehicle_id)
    if entry is not None:
        new.tracks[vehicle_id] = entry
    return entry


def cloud_sync(fo: FogOrchestratorState, t: float) -> CloudBatch:
    batch = CloudBatch(
        t_s=round(t + fo.cloud_latency_ms / 1e3, 6),
        area=fo.area,
        vehicles=len(fo.registered),
        records=list(fo.cloud_buffer),
    )
    fo.cloud_buffer.clear()
    return batch


def sync_all(fos: dict, t: float) -> list:
    return [cloud_sync(fos[a], t) for a in sorted(fos)]
