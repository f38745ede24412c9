"""The simulated city: event handlers tying mobility, data plane, control plane and RATs together."""

from __future__ import annotations

import logging
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import fog
from .config import Scenario, serialize
from .control import Admission, FogLoadState, PolicyConfig, access_controller_select, escalate_geo, service_engine_admit
from .dataplane import BROADCAST, LayerId, Message, StreamDescriptor, bsm_tick, service_streams
from .engine import Event, EventKind, EventQueue, RngStream, run_until
from .kpi import NO_RAT, KpiRecord, KpiSink, summarize
from .rat import (
    Channel,
    DsrcContention,
    LinkState,
    MmwaveChannelConfig,
    Mode,
    PdrCurve,
    Status,
    TxContext,
    quantize_ms,
    transmit,
)
from .topology import Position, Rsu, Trace, Vehicle, advance_vehicle, assign_fog_area, heading_between, load_trace

log = logging.getLogger(__name__)

_LAYER_NAMES = {l: l.value for l in LayerId}
_STATUS_NAMES = {s: s.value for s in Status}


@dataclass
class StreamState:
    desc: StreamDescriptor
    pending: deque = field(default_factory=deque)  # (message, tick of first deferral)
    last_deferral_tick: int = -1


@dataclass
class RunResult:
    records: list
    summary: dict
    cloud_lines: list
    effective_config: dict
    events: Counter


class Simulation:
    """One scenario replication.

    All state lives here and is mutated only by :meth:`handle`, which the
    engine calls in ``(time, seq)`` order.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = sc = scenario
        self.t_end = float(sc.duration_s)
        self.queue = EventQueue()
        pol = sc.policy
        self.pol = pol
        self.policy = PolicyConfig(
            layer_rat_map=dict(pol.layer_rat_map),
            px_enabled=pol.px_enabled,
            escalation_enabled=pol.escalation_enabled,
            load_caps_bps=sc.load_caps(),
            max_deferrals=pol.max_deferrals,
        )
        self.profiles = sc.profiles()
        self.mmwave = MmwaveChannelConfig(**sc.mmwave)
        self.contention = DsrcContention(**sc.dsrc_contention)
        self.pdr = PdrCurve(**sc.pdr_curve)
        self.areas = sc.areas()
        self.area_ids = sorted(a.id for a in self.areas)

        self.fos = {
            a.id: fog.FogOrchestratorState(
                area=a.id,
                load=FogLoadState(caps_bps=dict(self.policy.load_caps_bps)),
                cloud_latency_ms=a.cloud_latency_ms,
                staleness_s=pol.track_staleness_s,
            )
            for a in self.areas
        }
        self.rsus = {r.id: Rsu(r.id, r.rat, Position(*r.position), r.area) for r in sc.rsus}
        self._rsus_by = {}
        for r in sorted(self.rsus.values(), key=lambda r: r.id):
            self._rsus_by.setdefault((r.fog_area, r.rat), []).append(r)

        self.rat_rng = {name: RngStream(sc.seed, f"rat:{name}") for name in self.profiles}
        self.sink = KpiSink()
        self.cloud_lines: list[str] = []
        self.channels: dict = {}
        self.links: dict = {}
        self.events = Counter()
        self.deferral_count = 0
        self.escalated = 0
        self.handovers = 0
        self.mmwave_airtime_s = 0.0
        self.mmwave_overhead_s = 0.0
        self._next_id = 0
        self._finished = False

        self.vehicles: dict[str, Vehicle] = {}
        self.streams: dict[str, list] = {}
        self.registered_at: dict[str, str] = {}
        traces: dict[str, Trace] = {}
        catalog = sc.message_catalog()
        service_map = sc.service_map()
        payloads = sc.payloads()
        for vs in sorted(sc.vehicles, key=lambda v: v.id):
            if vs.trace is not None:
                key = str(sc.resolve(vs.trace))
                if key not in traces:
                    traces[key] = load_trace(key)
                tr = traces[key]
                if vs.id not in tr.vehicles:
                    raise ValueError(f"vehicle {vs.id} missing from trace {vs.trace}")
                s = tr.state_at(vs.id, 0.0)
                v = Vehicle(vs.id, Position(s.x, s.y), s.speed, s.heading, trace=tr)
            else:
                route = tuple(Position(*w) for w in vs.route)
                v = Vehicle(vs.id, Position(*vs.start), vs.speed_mps, vs.heading_rad, route=route)
                if route and route[0] != v.position:
                    v.heading = heading_between(v.position, route[0])
            v.fog_area = assign_fog_area(v.position, self.areas)
            self.vehicles[v.id] = v
            self.registered_at[v.id] = v.fog_area
            self.fos[v.fog_area].register(v.id)
            rng = RngStream(sc.seed, f"vehicle:{v.id}:streams")
            streams = []
            for svc in vs.services:
                for d in service_streams(svc, v.id, rng, catalog, service_map, payloads, pol.bsm_period_s):
                    if d.msg_type == "bsm":
                        continue  # the safety core BSM is always on via bsm-tick
                    streams.append(StreamState(d))
            self.streams[v.id] = streams
        self.vehicle_ids = sorted(self.vehicles)
        self.bsm_bytes = payloads[LayerId.BASE]
        self._update_density()
        self._schedule_initial()

    # scheduling ------------------------------------------------------------
    def _schedule_initial(self) -> None:
        q, pol = self.queue, self.pol
        if pol.mobility_step_s < self.t_end:
            q.schedule(pol.mobility_step_s, EventKind.MOBILITY_STEP, 1)
        if pol.handover_period_s < self.t_end:
            q.schedule(pol.handover_period_s, EventKind.HANDOVER_CHECK, 1)
        for vid in self.vehicle_ids:
            q.schedule(0.0, EventKind.BSM_TICK, (vid, 0))
        for vid in self.vehicle_ids:
            for i in range(len(self.streams[vid])):
                q.schedule(0.0, EventKind.STREAM_TICK, (vid, i, 0))
        if pol.cloud_sync_period_s <= self.t_end:
            q.schedule(pol.cloud_sync_period_s, EventKind.CLOUD_SYNC, 1)
        q.schedule(self.t_end, EventKind.SIM_END)

    def new_id(self) -> int:
        self._next_id += 1
        return self._next_id

    # dispatch ------------------------------------------------------------------
    def handle(self, ev: Event) -> None:
        kind = ev.kind
        self.events[kind] += 1
        if kind is EventKind.STREAM_TICK:
            self._on_stream_tick(ev)
        elif kind is EventKind.BSM_TICK:
            self._on_bsm_tick(ev)
        elif kind is EventKind.TX_COMPLETE:
            self._on_tx_complete(ev)
        elif kind is EventKind.MOBILITY_STEP:
            self._on_mobility(ev)
        elif kind is EventKind.HANDOVER_CHECK:
            self._on_handover_check(ev)
        elif kind is EventKind.LINK_ESTABLISHED:
            link = ev.payload
            if link.establish_done_at is not None and link.establish_done_at <= ev.time:
                link.established = True
        elif kind is EventKind.CLOUD_SYNC:
            self._on_cloud_sync(ev)
        elif kind is EventKind.SIM_END:
            self._on_sim_end(ev)
        else:  # pragma: no cover
            raise ValueError(f"unhandled event kind {kind}")

    def _on_mobility(self, ev: Event) -> None:
        k = ev.payload
        step = self.pol.mobility_step_s
        dt = k * step - (k - 1) * step
        for vid in self.vehicle_ids:
            v = self.vehicles[vid]
            if v.trace is not None:
                s = v.trace.state_at(vid, ev.time)
                v.position = Position(s.x, s.y)
                v.speed = s.speed
                v.heading = s.heading
            elif v.speed > 0:
                nv = advance_vehicle(v, dt)
                v.position, v.heading, v.route = nv.position, nv.heading, nv.route
            v.fog_area = assign_fog_area(v.position, self.areas)
        self._update_density()
        nxt = (k + 1) * step
        if nxt < self.t_end:
            self.queue.schedule(nxt, EventKind.MOBILITY_STEP, k + 1)

    def _update_density(self) -> None:
        ids = self.vehicle_ids
        if not ids:
            self.density = {}
            return
        xy = np.array([[self.vehicles[v].position.x, self.vehicles[v].position.y] for v in ids])
        d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=-1)
        r = self.profiles["dsrc"].range_m
        counts = (d2 <= r * r).sum(axis=1) - 1
        self.density = {vid: int(c) for vid, c in zip(ids, counts)}

    def _on_handover_check(self, ev: Event) -> None:
        k = ev.payload
        for vid in self.vehicle_ids:
            v = self.vehicles[vid]
            new_area = assign_fog_area(v.position, self.areas)
            old_area = self.registered_at[vid]
            if new_area != old_area:
                fog.handover(vid, self.fos[old_area], self.fos[new_area])
                self.registered_at[vid] = new_area
                self.handovers += 1
                for st in self.streams[vid]:
                    while st.pending:
                        msg, _ = st.pending.popleft()
                        self._finish(msg, Status.DEFERRED, None, self.fos[old_area])
        nxt = (k + 1) * self.pol.handover_period_s
        if nxt < self.t_end:
            self.queue.schedule(nxt, EventKind.HANDOVER_CHECK, k + 1)

    def _on_cloud_sync(self, ev: Event) -> None:
        k = ev.payload
        for batch in fog.sync_all(self.fos, ev.time):
            self.cloud_lines.append(batch.to_line())
        nxt = (k + 1) * self.pol.cloud_sync_period_s
        if nxt <= self.t_end:
            self.queue.schedule(nxt, EventKind.CLOUD_SYNC, k + 1)

    def _on_sim_end(self, ev: Event) -> None:
        if self.queue.peek_time() == ev.time:
            # let the other events at t_end run first
            self.queue.schedule(ev.time, EventKind.SIM_END)
            return
        for vid in self.vehicle_ids:
            fo = self.fos[self.registered_at[vid]]
            for st in self.streams[vid]:
                while st.pending:
                    self._finish(st.pending.popleft()[0], Status.DEFERRED, None, fo)
        for a in self.area_ids:
            fo_state = self.fos[a]
            if fo_state.cloud_buffer:
                self.cloud_lines.append(fog.cloud_sync(fo_state, ev.time).to_line())
        self._finished = True

    # message paths -------------------------------------------------------------
    def _on_bsm_tick(self, ev: Event) -> None:
        vid, k = ev.payload
        v = self.vehicles[vid]
        msg = bsm_tick(v, ev.time, self.new_id(), self.pol.bsm_period_s, self.bsm_bytes)
        fo = self.fos[self.registered_at[vid]]
        fo.note("admitted", LayerId.BASE)
        self._dispatch(msg, v, fo, rate_bps=msg.bytes * 8 / self.pol.bsm_period_s)
        nxt = (k + 1) * self.pol.bsm_period_s
        if nxt < self.t_end:
            self.queue.schedule(nxt, EventKind.BSM_TICK, (vid, k + 1))

    def _on_stream_tick(self, ev: Event) -> None:
        vid, idx, k = ev.payload
        st = self.streams[vid][idx]
        d = st.desc
        v = self.vehicles[vid]
        fo = self.fos[self.registered_at[vid]]
        msg = Message(
            id=self.new_id(),
            stream_id=d.id,
            src=vid,
            dst="",
            bytes=d.payload_bytes,
            created_at=ev.time,
            layer=d.layer,
            service=d.service,
            msg_type=d.msg_type,
            relevance=d.geo_relevance,
        )
        verdict = service_engine_admit(d, fo.load, self.policy)
        if verdict is Admission.REJECT:
            self._finish(msg, Status.DROPPED_POLICY, None, fo)
        elif verdict is Admission.DEFER:
            self._defer(st, msg, k, k, fo)
        else:
            backlog = list(st.pending)
            st.pending.clear()
            backlog.append((msg, k))
            for m, k0 in backlog:
                fo.note("admitted", d.layer)
                if not self._dispatch(m, v, fo, d.rate_bps):
                    self._defer(st, m, k0, k, fo)
        nxt = (k + 1) * d.period_s
        if nxt < self.t_end:
            self.queue.schedule(nxt, EventKind.STREAM_TICK, (vid, idx, k + 1))

    def _defer(self, st: StreamState, msg: Message, k0: int, k: int, fo) -> None:
        """Hold ``msg`` (first deferred at tick ``k0``) and age the whole backlog by one tick.

        Every held message is deferred once per stream tick, so a message's
        deferral count is ``k - k0 + 1``; the oldest ones hit the limit first.
        """
        if msg is not None:
            msg.status = Status.DEFERRED
            st.pending.append((msg, k0))
        if st.last_deferral_tick == k:
            self.deferral_count += 1  # backlog already aged at this tick
        else:
            self.deferral_count += len(st.pending)
            st.last_deferral_tick = k
        limit = self.policy.max_deferrals
        while st.pending and k - st.pending[0][1] + 1 >= limit:
            old, _ = st.pending.popleft()
            old.deferrals = limit
            self._finish(old, Status.DROPPED_POLICY, None, fo)

    def _nearest_rsu(self, area: str, rat: str, pos: Position) -> Optional[Rsu]:
        best = None
        best_d = math.inf
        for r in self._rsus_by.get((area, rat), ()):
            d = pos.distance_to(r.position)
            if d < best_d:
                best, best_d = r, d
        return best

    def _available(self, rat: str, area: str, v: Vehicle) -> Optional[Rsu]:
        prof = self.profiles[rat]
        if v.speed_kmh > prof.mobility_limit_kmh:
            return None
        r = self._nearest_rsu(area, rat, v.position)
        if r is None or v.position.distance_to(r.position) > prof.range_m:
            return None
        return r

    def _dispatch(self, msg: Message, v: Vehicle, fo, rate_bps: float) -> bool:
        """Select a RAT and transmit. Returns False when the message must be deferred."""
        area = fo.area
        candidates = {}
        for rat in self._candidate_rats(msg.layer):
            r = self._available(rat, area, v)
            if r is not None:
                candidates[rat] = r
        sel = access_controller_select(msg, msg.layer, {k: True for k in candidates}, self.policy, fo.load, rate_bps)
        if sel.action == "defer":
            return False
        if sel.action == "drop":
            self._finish(msg, Status.DROPPED_NO_COVERAGE, None, fo)
            return True

        rat, mode = sel.rat, sel.mode
        rsu = candidates[rat]
        msg.rat_assigned = rat
        if mode is not Mode.BROADCAST and mode is not Mode.V2V:
            msg.dst = rsu.id
        else:
            msg.dst = BROADCAST
        self._send(msg, v, fo, rat, mode, rsu)
        dup = escalate_geo(msg, msg.relevance, 0, self.policy)
        if dup is not None:
            dup.id = self.new_id()
            self._escalate(dup, v, fo)
        return True

    def _candidate_rats(self, layer: LayerId) -> tuple:
        primary = self.policy.layer_rat_map[layer]
        if layer is LayerId.BASE:
            return (primary, "cv2x")
        if layer is LayerId.ENH1:
            return (primary, "dsrc_px") if self.policy.px_enabled else (primary,)
        return (primary,)

    def _escalate(self, dup: Message, v: Vehicle, fo) -> None:
        self.escalated += 1
        fo.note("escalated", dup.layer)
        rsu = self._available("cv2x", fo.area, v)
        if rsu is None:
            self._finish(dup, Status.DROPPED_NO_COVERAGE, None, fo)
            return
        self._send(dup, v, fo, "cv2x", Mode.BROADCAST, rsu)

    def _channel(self, rat: str, key: str) -> Channel:
        ch = self.channels.get((rat, key))
        if ch is None:
            cap = self.profiles[rat].net_cap_bps if rat in ("dsrc", "dsrc_px") else None
            ch = Channel(f"{rat}:{key}", window_cap_bps=cap, window_s=self.pol.capacity_window_s,
                         queue_limit_s=self.pol.queue_limit_s)
            self.channels[(rat, key)] = ch
        return ch

    def _link(self, vid: str, peer: str, rat: str, now: float) -> LinkState:
        key = (vid, peer, rat)
        link = self.links.get(key)
        if link is None:
            link = LinkState(vid, peer, rat, last_used=now)
            self.links[key] = link
        elif now - link.last_used > self.pol.link_idle_timeout_s:
            # radio went idle; the next transmission re-establishes
            link.established = False
            link.establish_done_at = None
        return link

    def _send(self, msg: Message, v: Vehicle, fo, rat: str, mode: Mode, rsu: Rsu) -> None:
        now = self.queue.clock
        prof = self.profiles[rat]
        if mode is Mode.V2V and rat == "cv2x":
            link = self._link(v.id, "pc5", rat, now)
            channel = self._channel(rat, f"pc5:{fo.area}")
        elif rat in ("cv2x", "mmwave"):
            link = self._link(v.id, rsu.id, rat, now)
            channel = self._channel(rat, rsu.id)
        else:
            link = None
            channel = self._channel(rat, rsu.id)
        was_pending = link is not None and not link.established and link.establish_done_at is None

        overhead = 0.0
        if rat == "mmwave":
            if self.pol.assist:
                overhead = fog.assist_overhead(fo, v, now, rsu.position, self.pol.beam_sectors, self.mmwave)
            else:
                overhead = self.mmwave.overhead_no_assist
        ctx = TxContext(
            now=now,
            tx_pos=v.position,
            rx_pos=rsu.position,
            speed_kmh=v.speed_kmh,
            mode=mode,
            density=self.density.get(v.id, 0),
            link=link,
            channel=channel,
            overhead=overhead,
            horizon=self.t_end,
            contention=self.contention,
            pdr=self.pdr,
            mmwave=self.mmwave,
        )
        out = transmit(msg.bytes, prof, ctx, self.rat_rng[rat])
        if was_pending and link.establish_done_at is not None and not link.established:
            if link.establish_done_at <= self.t_end:
                self.queue.schedule(link.establish_done_at, EventKind.LINK_ESTABLISHED, link)
        if rat == "mmwave":
            self.mmwave_airtime_s += out.airtime_s
            self.mmwave_overhead_s += out.overhead_s
        self._finish(msg, out.status, out.t_rx, fo)
        if out.status is Status.DELIVERED and msg.msg_type == "bsm" and rat in ("dsrc", "dsrc_px"):
            self.queue.schedule(out.t_rx, EventKind.TX_COMPLETE, msg)

    def _on_tx_complete(self, ev: Event) -> None:
        msg = ev.payload
        fo = self.fos[self.registered_at[msg.src]]
        fog.register_bsm(fo, msg, ev.time)

    def _finish(self, msg: Message, status: Status, t_rx: Optional[float], fo) -> None:
        msg.finish(status)
        if status in (Status.DROPPED_POLICY, Status.DROPPED_NO_COVERAGE):
            fo.note("dropped", msg.layer)
        self.sink.record_outcome(
            KpiRecord(
                msg_id=msg.id,
                t_tx_ms=quantize_ms(msg.created_at),
                t_rx_ms=quantize_ms(t_rx) if status is Status.DELIVERED else None,
                src=msg.src,
                dst=msg.dst or BROADCAST,
                rat=msg.rat_assigned or NO_RAT,
                layer=_LAYER_NAMES[msg.layer],
                service=msg.service,
                bytes=msg.bytes,
                status=_STATUS_NAMES[status],
            )
        )

    # inspection ------------------------------------------------------------------
    def registrations(self, vid: str) -> list:
        return [a for a in self.area_ids if vid in self.fos[a].registered]

    # driver -----------------------------------------------------------------------
    def run(self, observer=None) -> RunResult:
        run_until(self, self.t_end, observer)
        if not self._finished:  # pragma: no cover
            raise RuntimeError("simulation ended without processing sim-end")
        extra = {
            "deferral_count": self.deferral_count,
            "escalated": self.escalated,
            "handovers": self.handovers,
            "mmwave_overhead_fraction": (
                round(self.mmwave_overhead_s / self.mmwave_airtime_s, 9) if self.mmwave_airtime_s else None
            ),
            "seed": self.scenario.seed,
        }
        summary = summarize(self.sink.records, self.t_end, extra)
        events = Counter({k.value: n for k, n in self.events.items()})
        return RunResult(self.sink.records, summary, self.cloud_lines, serialize(self.scenario), events)


def simulate(scenario: Scenario, observer=None) -> RunResult:
    return Simulation(scenario).run(observer)
