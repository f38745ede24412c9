"""Fog Orchestrator control plane: Service Engine admission and Access Controller RAT selection."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .dataplane import BROADCAST, LayerId, Message, StreamDescriptor
from .rat import DEFAULT_PROFILES, LOCAL_RATS, RAT_NAMES, Mode, Status

PRIORITY = (LayerId.BASE, LayerId.ENH1, LayerId.ENH2)


def default_caps() -> dict:
    return {name: p.net_cap_bps for name, p in DEFAULT_PROFILES.items()}


@dataclass
class PolicyConfig:
    layer_rat_map: dict = field(
        default_factory=lambda: {LayerId.BASE: "dsrc", LayerId.ENH1: "cv2x", LayerId.ENH2: "mmwave"}
    )
    px_enabled: bool = False
    escalation_enabled: bool = True
    load_caps_bps: dict = field(default_factory=default_caps)
    max_deferrals: int = 10

    def __post_init__(self) -> None:
        self.layer_rat_map = {LayerId(k): v for k, v in self.layer_rat_map.items()}
        if set(self.layer_rat_map) != set(LayerId):
            raise ValueError("layer_rat_map must cover base, enh1 and enh2 exactly")
        for rat in (*self.layer_rat_map.values(), *self.load_caps_bps):
            if rat not in RAT_NAMES:
                raise ValueError(f"unknown RAT {rat!r} in policy")
        if any(c < 0 for c in self.load_caps_bps.values()):
            raise ValueError("load caps must be non-negative")
        if self.max_deferrals < 1:
            raise ValueError("max_deferrals must be >= 1")


class Admission(str, Enum):
    ADMIT = "admit"
    DEFER = "defer"
    REJECT = "reject"


@dataclass
class FogLoadState:
    """Capacity reservations held by admitted streams inside one Fog Area."""

    caps_bps: dict = field(default_factory=default_caps)
    committed_bps: dict = field(default_factory=lambda: {r: 0.0 for r in RAT_NAMES})
    reservations: dict = field(default_factory=dict)  # stream id -> (rat, bps)
    dsrc_density: float = 0.0

    def residual(self, rat: str) -> float:
        return self.caps_bps.get(rat, 0.0) - self.committed_bps.get(rat, 0.0)

    def commit(self, stream_id: str, rat: str, bps: float) -> None:
        if stream_id in self.reservations:
            raise ValueError(f"stream {stream_id} already holds a reservation")
        self.reservations[stream_id] = (rat, bps)
        self.committed_bps[rat] = self.committed_bps.get(rat, 0.0) + bps

    def release(self, stream_id: str) -> None:
        held = self.reservations.pop(stream_id, None)
        if held is not None:
            rat, bps = held
            # clamp float residue so committed never goes negative
            self.committed_bps[rat] = max(0.0, self.committed_bps[rat] - bps)

    def release_vehicle(self, vehicle_id: str) -> None:
        prefix = f"{vehicle_id}/"
        for sid in [s for s in self.reservations if s.startswith(prefix)]:
            self.release(sid)

    @property
    def cv2x_cell_load_bps(self) -> float:
        return self.committed_bps.get("cv2x", 0.0)


def service_engine_admit(
    descriptor: StreamDescriptor,
    load: FogLoadState,
    policy: Optional[PolicyConfig] = None,
) -> Admission:
    """Strict-priority admission with capacity reservation.

    Base streams are always admitted and reserve nothing. An enhancement
    stream reserves its rate on its layer's RAT when the residual covers
    it; otherwise enh1 is deferred and enh2 rejected.
    """
    policy = policy or PolicyConfig()
    if descriptor.layer is LayerId.BASE:
        return Admission.ADMIT
    if descriptor.id in load.reservations:
        return Admission.ADMIT
    rat = policy.layer_rat_map[descriptor.layer]
    if descriptor.rate_bps <= load.residual(rat):
        load.commit(descriptor.id, rat, descriptor.rate_bps)
        return Admission.ADMIT
    return Admission.DEFER if descriptor.layer is LayerId.ENH1 else Admission.REJECT


def admit_batch(descriptors, load: FogLoadState, policy: Optional[PolicyConfig] = None) -> dict:
    """Admit several contending streams, highest-priority layer first."""
    ordered = sorted(descriptors, key=lambda d: (d.layer.priority, d.id))
    return {d.id: service_engine_admit(d, load, policy) for d in ordered}


@dataclass(frozen=True)
class Selection:
    action: str  # "send" | "drop" | "defer"
    rat: Optional[str] = None
    mode: Optional[Mode] = None


DROP = Selection("drop")
DEFER = Selection("defer")


def access_controller_select(
    message: Message,
    layer: LayerId,
    availability: dict,
    policy: Optional[PolicyConfig] = None,
    load: Optional[FogLoadState] = None,
    rate_bps: float = 0.0,
) -> Selection:
    """Pick the RAT for an admitted message, applying the per-layer fallback chain.

    ``availability`` maps RAT name to whether a usable link exists right now.
    """
    policy = policy or PolicyConfig()
    primary = policy.layer_rat_map[layer]
    broadcast = message.dst == BROADCAST
    if availability.get(primary, False):
        if broadcast:
            mode = Mode.BROADCAST
        else:
            mode = Mode.V2I
        return Selection("send", primary, mode)

    if layer is LayerId.BASE:
        # PC5 sidelink; its configuration needs cellular coverage
        if primary != "cv2x" and availability.get("cv2x", False):
            return Selection("send", "cv2x", Mode.V2V)
        return DROP
    if layer is LayerId.ENH1:
        if (
            policy.px_enabled
            and primary != "dsrc_px"
            and availability.get("dsrc_px", False)
            and (load is None or rate_bps <= load.residual("dsrc_px"))
        ):
            return Selection("send", "dsrc_px", Mode.V2I)
        return DEFER
    # enh2 carries no reliability guarantee: no fallback, no retry
    return DROP


def escalate_geo(
    message: Message,
    relevance: str,
    new_id: int,
    policy: Optional[PolicyConfig] = None,
) -> Optional[Message]:
    """Copy a city-relevant message sent on a local RAT onto C-V2X broadcast."""
    policy = policy or PolicyConfig()
    if not policy.escalation_enabled:
        return None
    if relevance != "city" or message.rat_assigned not in LOCAL_RATS:
        return None
    return replace(
        message,
        id=new_id,
        dst=BROADCAST,
        rat_assigned="cv2x",
        status=Status.CREATED,
        deferrals=0,
    )
