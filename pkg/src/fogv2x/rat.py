"""Abstract link models for DSRC, 802.11px, C-V2X and mmWave.

Every model works at the level of rates, latency intervals and erasure
probabilities; no PHY or MAC procedure is simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Optional

from .engine import RngStream
from .topology import Position

RAT_NAMES = ("dsrc", "dsrc_px", "cv2x", "mmwave")
LOCAL_RATS = frozenset({"dsrc", "dsrc_px", "mmwave"})


class Mode(str, Enum):
    V2I = "V2I"
    V2V = "V2V"
    BROADCAST = "broadcast"


class Status(str, Enum):
    CREATED = "created"
    DELIVERED = "delivered"
    ERASED = "erased"
    DROPPED_NO_COVERAGE = "dropped_no_coverage"
    DROPPED_POLICY = "dropped_policy"
    DEFERRED = "deferred"


TERMINAL_STATUSES = (
    Status.DELIVERED,
    Status.ERASED,
    Status.DROPPED_NO_COVERAGE,
    Status.DROPPED_POLICY,
    Status.DEFERRED,
)


@dataclass(frozen=True)
class RatProfile:
    name: str
    freq_band_ghz: tuple  # one or more (lo, hi) intervals
    channel_bw_mhz: float
    range_m: float
    phy_rate_bps: tuple  # (min, max)
    net_cap_bps: float
    e2e_latency_ms: dict  # mode value -> (lo, hi)
    establishment_ms: tuple
    coverage: str  # "ubiquitous" | "intermittent"
    mobility_limit_kmh: float
    broadcast: bool
    v2v_mode: str  # "direct" | "pc5" | "none"

    def __post_init__(self) -> None:
        intervals = [self.phy_rate_bps, self.establishment_ms, *self.e2e_latency_ms.values(), *self.freq_band_ghz]
        for lo, hi in intervals:
            if lo > hi:
                raise ValueError(f"{self.name}: inverted interval ({lo}, {hi})")
        if self.net_cap_bps > self.phy_rate_bps[1]:
            raise ValueError(f"{self.name}: net_cap_bps exceeds max PHY rate")
        if self.coverage not in ("ubiquitous", "intermittent"):
            raise ValueError(f"{self.name}: bad coverage {self.coverage!r}")
        if self.range_m < 0 or self.net_cap_bps <= 0:
            raise ValueError(f"{self.name}: range and capacity must be positive")

    @property
    def max_phy_rate_bps(self) -> float:
        return self.phy_rate_bps[1]


_SHORT_LATENCY = (1.0, 10.0)  # "<= 10 ms" with a 1 ms floor

DEFAULT_PROFILES = {
    "dsrc": RatProfile(
        name="dsrc",
        freq_band_ghz=((5.85, 5.925),),
        channel_bw_mhz=10.0,
        range_m=1000.0,
        phy_rate_bps=(3e6, 27e6),
        net_cap_bps=15e6,
        e2e_latency_ms={"V2I": _SHORT_LATENCY, "V2V": _SHORT_LATENCY, "broadcast": _SHORT_LATENCY},
        establishment_ms=(0.0, 0.0),
        coverage="intermittent",
        mobility_limit_kmh=130.0,
        broadcast=True,
        v2v_mode="direct",
    ),
    "dsrc_px": RatProfile(
        name="dsrc_px",
        freq_band_ghz=((5.85, 5.925),),
        channel_bw_mhz=10.0,
        range_m=1000.0,
        phy_rate_bps=(3e6, 60e6),
        # same protocol efficiency as legacy DSRC (15/27)
        net_cap_bps=60e6 * 15.0 / 27.0,
        e2e_latency_ms={"V2I": _SHORT_LATENCY, "V2V": _SHORT_LATENCY, "broadcast": _SHORT_LATENCY},
        establishment_ms=(0.0, 0.0),
        coverage="intermittent",
        mobility_limit_kmh=130.0,
        broadcast=True,
        v2v_mode="direct",
    ),
    "cv2x": RatProfile(
        name="cv2x",
        freq_band_ghz=((0.45, 4.99), (5.725, 5.765)),
        channel_bw_mhz=640.0,
        range_m=30_000.0,
        phy_rate_bps=(0.0, 3e9),
        net_cap_bps=100e6,
        e2e_latency_ms={"V2I": (30.0, 50.0), "V2V": (20.0, 80.0), "broadcast": (30.0, 50.0)},
        establishment_ms=(40.0, 110.0),
        coverage="ubiquitous",
        mobility_limit_kmh=350.0,
        broadcast=True,
        v2v_mode="pc5",
    ),
    "mmwave": RatProfile(
        name="mmwave",
        freq_band_ghz=((57.05, 64.0),),
        channel_bw_mhz=2160.0,
        range_m=50.0,
        phy_rate_bps=(0.0, 7e9),
        net_cap_bps=7e9,
        e2e_latency_ms={"V2I": _SHORT_LATENCY, "V2V": _SHORT_LATENCY},
        establishment_ms=(10.0, 20.0),
        coverage="intermittent",
        mobility_limit_kmh=100.0,
        broadcast=False,
        v2v_mode="direct",
    ),
}

_PROFILE_FIELDS = {f.name for f in fields(RatProfile)}


def profile_of(name: str, overrides: Optional[dict] = None) -> RatProfile:
    try:
        base = DEFAULT_PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown RAT {name!r}") from None
    if not overrides:
        return base
    patch = {}
    for key, value in overrides.items():
        if key not in _PROFILE_FIELDS or key == "name":
            raise ValueError(f"{name}: unknown profile field {key!r}")
        if key == "e2e_latency_ms":
            value = {**base.e2e_latency_ms, **{m: tuple(v) for m, v in value.items()}}
        elif key == "freq_band_ghz":
            value = tuple(tuple(b) for b in value)
        elif isinstance(value, list):
            value = tuple(value)
        patch[key] = value
    return replace(base, **patch)


@dataclass
class LinkState:
    vehicle: str
    peer: str
    rat: str
    established: bool = False
    establish_done_at: Optional[float] = None  # seconds
    last_used: float = 0.0


@dataclass(frozen=True)
class MmwaveChannelConfig:
    pl0_db: float = 68.0  # free space at 60 GHz, 1 m
    n_los: float = 2.4
    n_nlos: float = 4.0
    blockage_slope_per_m: float = 0.01
    blockage_max: float = 0.5
    bi_length_ms: float = 100.0
    overhead_no_assist: float = 1.0 / 3.0
    overhead_with_assist: float = 0.05

    def __post_init__(self) -> None:
        if not self.n_los < 2.8:
            raise ValueError("LOS path loss exponent must be below 2.8")
        if not 3.8 <= self.n_nlos <= 5.6:
            raise ValueError("NLOS path loss exponent must lie in [3.8, 5.6]")
        if not 0.0 <= self.overhead_with_assist <= self.overhead_no_assist < 1.0:
            raise ValueError("need 0 <= overhead_with_assist <= overhead_no_assist < 1")
        if not (0.0 <= self.blockage_max <= 1.0 and self.blockage_slope_per_m >= 0):
            raise ValueError("blockage parameters out of range")

    def p_blockage(self, d: float) -> float:
        return min(self.blockage_max, max(0.0, d * self.blockage_slope_per_m))


@dataclass(frozen=True)
class DsrcContention:
    p0: float = 0.01
    n0: float = 10.0
    gamma: float = 1.5
    cap: float = 0.9


@dataclass(frozen=True)
class PdrCurve:
    scale_m: float = 350.0
    px_gain: float = 1.4


def link_available(
    profile: RatProfile,
    tx: Position,
    rx: Position,
    speed_kmh: float,
    rng: Optional[RngStream] = None,
    mmwave: Optional[MmwaveChannelConfig] = None,
) -> bool:
    """Range and mobility gate, plus a blockage draw for mmWave when ``rng`` is given."""
    d = tx.distance_to(rx)
    if d > profile.range_m or speed_kmh > profile.mobility_limit_kmh:
        return False
    if profile.coverage == "ubiquitous" or rng is None:
        return True
    if profile.name == "mmwave":
        cfg = mmwave or MmwaveChannelConfig()
        return not rng.bernoulli(cfg.p_blockage(d))
    return True


def establishment_delay(profile: RatProfile, link: Optional[LinkState], rng: RngStream, now: float = 0.0) -> float:
    """Milliseconds until the link can carry data.

    A link already up costs nothing; a link mid-establishment costs the
    remaining time; an idle link draws a fresh delay from the profile
    interval and is marked as establishing.
    """
    lo, hi = profile.establishment_ms
    if link is None:
        return rng.uniform(lo, hi) if hi > 0 else 0.0
    if link.established:
        return 0.0
    if link.establish_done_at is not None:
        if link.establish_done_at <= now:
            link.established = True
            return 0.0
        return (link.establish_done_at - now) * 1e3
    delay = rng.uniform(lo, hi) if hi > 0 else 0.0
    link.establish_done_at = now + delay / 1e3
    if delay == 0.0:
        link.established = True
    return delay


def latency_sample(profile: RatProfile, mode: Mode | str, rng: RngStream) -> float:
    key = Mode(mode).value
    if key == Mode.BROADCAST.value and not profile.broadcast:
        raise ValueError(f"{profile.name} does not support broadcast")
    if key == Mode.V2V.value and profile.v2v_mode == "none":
        raise ValueError(f"{profile.name} does not support V2V")
    try:
        lo, hi = profile.e2e_latency_ms[key]
    except KeyError:
        raise ValueError(f"{profile.name} has no latency interval for {key}") from None
    return rng.uniform(lo, hi)


def dsrc_erasure_prob(density: float, params: DsrcContention = DsrcContention()) -> float:
    if density < 0:
        raise ValueError("density must be non-negative")
    if density == 0:
        return 0.0
    return min(params.cap, params.p0 * (density / params.n0) ** params.gamma)


def pdr_at_distance(profile: RatProfile | str, d: float, curve: PdrCurve = PdrCurve()) -> float:
    if d < 0:
        raise ValueError("distance must be non-negative")
    name = profile if isinstance(profile, str) else profile.name
    legacy = math.exp(-((d / curve.scale_m) ** 2))
    if name == "dsrc":
        return legacy
    if name == "dsrc_px":
        return min(1.0, curve.px_gain * legacy)
    return 1.0


def mmwave_path_loss(config: MmwaveChannelConfig, d: float, los: bool) -> float:
    if d < 1.0:
        raise ValueError("distance below the 1 m reference")
    n = config.n_los if los else config.n_nlos
    return config.pl0_db + 10.0 * n * math.log10(d)


def mmwave_effective_rate(config: MmwaveChannelConfig, peak_bps: float, assist: bool) -> float:
    if peak_bps <= 0:
        raise ValueError("peak rate must be positive")
    overhead = config.overhead_with_assist if assist else config.overhead_no_assist
    return peak_bps * (1.0 - overhead)


def quantize_ms(t_s: float) -> float:
    """Seconds to milliseconds at the 1 us resolution used in outputs."""
    return round(t_s * 1e3, 3)


@dataclass
class Channel:
    """FIFO server for one radio resource.

    Transmissions serialize back to back. An optional per-window bit budget
    (aligned to multiples of ``window_s``) is enforced against the quantized
    completion time, and ``queue_limit_s`` bounds how long a message may
    wait for the server.
    """

    name: str
    window_cap_bps: Optional[float] = None
    window_s: float = 1.0
    queue_limit_s: Optional[float] = None
    busy_until: float = 0.0
    window_bits: dict = field(default_factory=dict)

    def _window(self, end: float) -> int:
        return math.floor(quantize_ms(end) / (self.window_s * 1e3))

    def reserve(self, ready: float, duration: float, bits: float) -> Optional[tuple]:
        start = max(ready, self.busy_until)
        if self.window_cap_bps is None:
            if self.queue_limit_s is not None and start - ready > self.queue_limit_s:
                return None
            self.busy_until = start + duration
            return start, self.busy_until
        budget = self.window_cap_bps * self.window_s
        if bits > budget:
            return None
        while True:
            if self.queue_limit_s is not None and start - ready > self.queue_limit_s:
                return None
            end = start + duration
            w = self._window(end)
            if self.window_bits.get(w, 0.0) + bits <= budget:
                self.window_bits[w] = self.window_bits.get(w, 0.0) + bits
                self.busy_until = end
                return start, end
            start = max(start, (w + 1) * self.window_s)


@dataclass
class TxContext:
    """Everything ``transmit`` needs to know about the world at send time."""

    now: float
    tx_pos: Position
    rx_pos: Optional[Position]  # None only for broadcast without a receiver anchor
    speed_kmh: float
    mode: Mode
    density: float = 0.0
    link: Optional[LinkState] = None
    channel: Optional[Channel] = None
    overhead: float = 0.0
    horizon: float = math.inf
    contention: DsrcContention = DsrcContention()
    pdr: PdrCurve = PdrCurve()
    mmwave: MmwaveChannelConfig = MmwaveChannelConfig()


@dataclass
class Delivery:
    status: Status
    t_rx: Optional[float] = None
    establishment_ms: float = 0.0
    latency_ms: float = 0.0
    airtime_s: float = 0.0
    overhead_s: float = 0.0


def transmit(nbytes: int, profile: RatProfile, ctx: TxContext, rng: RngStream) -> Delivery:
    """Push one message through availability, setup, erasure, serialization and latency."""
    rx = ctx.rx_pos if ctx.rx_pos is not None else ctx.tx_pos
    if not link_available(profile, ctx.tx_pos, rx, ctx.speed_kmh):
        return Delivery(Status.DROPPED_NO_COVERAGE)
    if ctx.mode is Mode.BROADCAST and not profile.broadcast:
        return Delivery(Status.DROPPED_NO_COVERAGE)

    est_ms = establishment_delay(profile, ctx.link, rng, ctx.now)
    if ctx.link is not None:
        ctx.link.last_used = ctx.now

    d = ctx.tx_pos.distance_to(rx)
    if profile.name in ("dsrc", "dsrc_px"):
        p_ok = pdr_at_distance(profile, d, ctx.pdr) * (1.0 - dsrc_erasure_prob(ctx.density, ctx.contention))
        if not rng.random() < p_ok:
            return Delivery(Status.ERASED, establishment_ms=est_ms)
    elif profile.name == "mmwave":
        if rng.bernoulli(ctx.mmwave.p_blockage(d)):
            return Delivery(Status.ERASED, establishment_ms=est_ms)

    overhead = ctx.overhead if profile.name == "mmwave" else 0.0
    rate = profile.net_cap_bps * (1.0 - overhead)
    bits = nbytes * 8.0
    busy = bits / rate
    lat_ms = latency_sample(profile, ctx.mode, rng)

    ready = ctx.now + est_ms / 1e3 + lat_ms / 1e3
    if ctx.channel is None:
        t_rx = ready + busy
    else:
        slot = ctx.channel.reserve(ready, busy, bits)
        if slot is None:
            return Delivery(Status.DROPPED_POLICY, establishment_ms=est_ms, latency_ms=lat_ms)
        t_rx = slot[1]
    if t_rx > ctx.horizon:
        # still in flight when the run ends
        return Delivery(Status.DEFERRED, establishment_ms=est_ms, latency_ms=lat_ms,
                        airtime_s=busy, overhead_s=busy * overhead)
    return Delivery(Status.DELIVERED, t_rx=t_rx, establishment_ms=est_ms, latency_ms=lat_ms,
                    airtime_s=busy, overhead_s=busy * overhead)
