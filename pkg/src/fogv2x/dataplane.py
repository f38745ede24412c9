"""Scalable data plane: message catalog, layer classification and stream generation."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .engine import RngStream
from .rat import Status
from .topology import Vehicle

BSM_MIN_PERIOD_S = 0.1
BROADCAST = "*"


class LayerId(str, Enum):
    BASE = "base"
    ENH1 = "enh1"
    ENH2 = "enh2"

    @property
    def priority(self) -> int:
        return _PRIORITY[self]


_PRIORITY = {LayerId.BASE: 0, LayerId.ENH1: 1, LayerId.ENH2: 2}

DEFAULT_PAYLOAD_BYTES = {LayerId.BASE: 300, LayerId.ENH1: 1500, LayerId.ENH2: 64 * 1024}

RELEVANCE = ("local", "fog_area", "city")


@dataclass(frozen=True)
class MessageType:
    name: str
    layer: LayerId
    rate_bps: tuple  # (lo, hi)
    relevance: str
    reliable: bool = True
    payload_bytes: Optional[int] = None

    def __post_init__(self) -> None:
        lo, hi = self.rate_bps
        if not 0 < lo <= hi:
            raise ValueError(f"{self.name}: bad rate interval {self.rate_bps}")
        if self.relevance not in RELEVANCE:
            raise ValueError(f"{self.name}: bad relevance {self.relevance!r}")
        if self.layer is LayerId.ENH2 and self.reliable:
            raise ValueError(f"{self.name}: second enhancement layer cannot be reliable")
        if self.layer is LayerId.BASE and self.relevance != "local":
            raise ValueError(f"{self.name}: base layer streams are local")


def _kbps(lo, hi):
    return (lo * 1e3, hi * 1e3)


def _mbps(lo, hi):
    return (lo * 1e6, hi * 1e6)


# Per-vehicle stream rates by message type; camera/radar sources are opt-in.
DEFAULT_CATALOG = {
    "bsm": MessageType("bsm", LayerId.BASE, (24e3, 24e3), "local"),
    "map_grid": MessageType("map_grid", LayerId.ENH1, (10e3, 10e6), "city"),
    "cav_positions": MessageType("cav_positions", LayerId.ENH1, _kbps(10, 800), "city"),
    "routes": MessageType("routes", LayerId.ENH1, _kbps(80, 800), "city"),
    "bounding_boxes": MessageType("bounding_boxes", LayerId.ENH1, _kbps(80, 800), "fog_area"),
    "trajectory": MessageType("trajectory", LayerId.ENH1, _kbps(80, 800), "fog_area"),
    "parking": MessageType("parking", LayerId.ENH1, (10e3, 10e6), "city"),
    "disruption": MessageType("disruption", LayerId.ENH1, _kbps(30, 100), "city"),
    "lidar_raw": MessageType("lidar_raw", LayerId.ENH2, _mbps(50, 250), "fog_area", reliable=False),
    "camera_raw": MessageType("camera_raw", LayerId.ENH2, _mbps(400, 400), "fog_area", reliable=False),
    "radar_raw": MessageType("radar_raw", LayerId.ENH2, _mbps(2800, 2800), "fog_area", reliable=False),
}

DEFAULT_SERVICES = {
    "traffic_planning": ("map_grid", "cav_positions", "routes"),
    "emergency_routing": ("lidar_raw", "bounding_boxes", "trajectory"),
    "multimodal_commuting": ("parking", "cav_positions", "disruption"),
    "safety_core": ("bsm",),
}


@dataclass(frozen=True)
class StreamDescriptor:
    id: str
    vehicle: str
    service: str
    msg_type: str
    layer: LayerId
    rate_bps: float
    geo_relevance: str
    reliable: bool
    period_s: float
    payload_bytes: int

    def __post_init__(self) -> None:
        if self.layer is LayerId.ENH2 and self.reliable:
            raise ValueError(f"{self.id}: enh2 stream marked reliable")
        if self.layer is LayerId.BASE:
            if self.geo_relevance != "local":
                raise ValueError(f"{self.id}: base stream must be local")
            if self.period_s < BSM_MIN_PERIOD_S:
                raise ValueError(f"{self.id}: base period below {BSM_MIN_PERIOD_S} s")


@dataclass
class Message:
    id: int
    stream_id: str
    src: str
    dst: str
    bytes: int
    created_at: float
    layer: LayerId
    service: str
    msg_type: str
    relevance: str
    rat_assigned: Optional[str] = None
    status: Status = Status.CREATED
    deferrals: int = 0
    snapshot: Optional[tuple] = field(default=None, repr=False)  # (x, y, speed, heading) for BSMs

    def __post_init__(self) -> None:
        if self.bytes <= 0:
            raise ValueError("message size must be positive")

    def finish(self, status: Status) -> None:
        if self.status not in (Status.CREATED, Status.DEFERRED):
            raise ValueError(f"message {self.id}: {self.status.value} is terminal")
        self.status = status


def classify_layer(descriptor, catalog: Optional[dict] = None) -> LayerId:
    """Layer of a message type: SAE J2735 safety -> base, processed features -> enh1, raw sensor -> enh2."""
    catalog = DEFAULT_CATALOG if catalog is None else catalog
    name = descriptor if isinstance(descriptor, str) else descriptor.msg_type
    try:
        return catalog[name].layer
    except KeyError:
        raise ValueError(f"unknown message type {name!r}") from None


def sample_stream_rate(interval: tuple, rng: RngStream) -> float:
    lo, hi = interval
    if lo > hi:
        raise ValueError(f"inverted rate interval {interval}")
    return rng.uniform(lo, hi)


def make_descriptor(
    vehicle_id: str,
    service: str,
    mtype: MessageType,
    rate_bps: float,
    payload_bytes: dict,
    bsm_period_s: float = BSM_MIN_PERIOD_S,
) -> StreamDescriptor:
    nbytes = mtype.payload_bytes or payload_bytes[mtype.layer]
    if mtype.name == "bsm":
        period = bsm_period_s
        rate_bps = nbytes * 8 / period
    else:
        period = nbytes * 8 / rate_bps
    return StreamDescriptor(
        id=f"{vehicle_id}/{service}/{mtype.name}",
        vehicle=vehicle_id,
        service=service,
        msg_type=mtype.name,
        layer=mtype.layer,
        rate_bps=rate_bps,
        geo_relevance=mtype.relevance,
        reliable=mtype.reliable,
        period_s=period,
        payload_bytes=nbytes,
    )


def service_streams(
    service: str,
    vehicle: Vehicle | str,
    rng: RngStream,
    catalog: Optional[dict] = None,
    services: Optional[dict] = None,
    payload_bytes: Optional[dict] = None,
    bsm_period_s: float = BSM_MIN_PERIOD_S,
) -> list:
    catalog = DEFAULT_CATALOG if catalog is None else catalog
    services = DEFAULT_SERVICES if services is None else services
    payload_bytes = DEFAULT_PAYLOAD_BYTES if payload_bytes is None else payload_bytes
    vid = vehicle if isinstance(vehicle, str) else vehicle.id
    try:
        types = services[service]
    except KeyError:
        raise ValueError(f"unknown service {service!r}") from None
    out = []
    for name in types:
        mtype = catalog[name]
        rate = sample_stream_rate(mtype.rate_bps, rng)
        out.append(make_descriptor(vid, service, mtype, rate, payload_bytes, bsm_period_s))
    return out


def bsm_tick(vehicle: Vehicle, t: float, msg_id: int, period_s: float = BSM_MIN_PERIOD_S,
             payload_bytes: int = 300) -> Message:
    if period_s < BSM_MIN_PERIOD_S:
        raise ValueError(f"BSM period {period_s} s below {BSM_MIN_PERIOD_S} s")
    k = round(t / period_s)
    if abs(k * period_s - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t={t} is not a multiple of the BSM period")
    p = vehicle.position
    return Message(
        id=msg_id,
        stream_id=f"{vehicle.id}/safety_core/bsm",
        src=vehicle.id,
        dst=BROADCAST,
        bytes=payload_bytes,
        created_at=t,
        layer=LayerId.BASE,
        service="safety_core",
        msg_type="bsm",
        relevance="local",
        snapshot=(p.x, p.y, vehicle.speed, vehicle.heading),
    )
