import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fogv2x.dataplane import (
    DEFAULT_CATALOG,
    LayerId,
    Message,
    StreamDescriptor,
    bsm_tick,
    classify_layer,
    make_descriptor,
    sample_stream_rate,
    service_streams,
)
from fogv2x.engine import RngStream
from fogv2x.rat import Status
from fogv2x.topology import Position, Vehicle

MBPS = 1e6


def _streams(service):
    return {d.msg_type: d for d in service_streams(service, "v1", RngStream(3, "s"))}


def test_emergency_routing_has_lidar():
    d = _streams("emergency_routing")["lidar_raw"]
    assert 50 * MBPS <= d.rate_bps <= 250 * MBPS
    assert d.layer is LayerId.ENH2 and not d.reliable


def test_traffic_planning_has_cav_positions():
    d = _streams("traffic_planning")["cav_positions"]
    assert 10e3 <= d.rate_bps <= 800e3


def test_multimodal_commuting_has_parking():
    d = _streams("multimodal_commuting")["parking"]
    assert 10e3 <= d.rate_bps <= 10 * MBPS


def test_unknown_service():
    with pytest.raises(ValueError):
        service_streams("nope", "v1", RngStream(0, "s"))


@pytest.mark.parametrize(
    "name,layer",
    [("bsm", LayerId.BASE), ("bounding_boxes", LayerId.ENH1), ("lidar_raw", LayerId.ENH2), ("camera_raw", LayerId.ENH2)],
)
def test_classify_layer(name, layer):
    assert classify_layer(name) is layer


def test_geo_relevance_table():
    rel = {n: m.relevance for n, m in DEFAULT_CATALOG.items()}
    assert rel["bsm"] == "local"
    for n in ("lidar_raw", "bounding_boxes", "trajectory"):
        assert rel[n] == "fog_area"
    for n in ("cav_positions", "map_grid", "disruption", "parking"):
        assert rel[n] == "city"


def test_bsm_stream_rate():
    d = make_descriptor("v1", "safety_core", DEFAULT_CATALOG["bsm"], 0.0, {LayerId.BASE: 300})
    assert d.rate_bps == pytest.approx(24_000)


def test_bsm_period_floor():
    v = Vehicle("v1", Position(0, 0), 1.0, 0.0)
    with pytest.raises(ValueError):
        bsm_tick(v, 0.0, 1, period_s=0.05)
    with pytest.raises(ValueError):
        bsm_tick(v, 0.15, 1, period_s=0.1)
    m = bsm_tick(v, 0.3, 1)
    assert m.layer is LayerId.BASE and m.snapshot == (0.0, 0.0, 1.0, 0.0)


def test_base_descriptor_invariants():
    kw = dict(id="v/s/bsm", vehicle="v", service="s", msg_type="bsm", layer=LayerId.BASE, rate_bps=24e3,
              reliable=True, payload_bytes=300)
    with pytest.raises(ValueError):
        StreamDescriptor(geo_relevance="city", period_s=0.1, **kw)
    with pytest.raises(ValueError):
        StreamDescriptor(geo_relevance="local", period_s=0.05, **kw)


def test_enh2_cannot_be_reliable():
    with pytest.raises(ValueError):
        StreamDescriptor("v/s/l", "v", "s", "lidar_raw", LayerId.ENH2, 1e8, "fog_area", True, 0.01, 1000)


def test_message_status_is_terminal_once_set():
    m = Message(1, "s", "v", "*", 10, 0.0, LayerId.BASE, "safety_core", "bsm", "local")
    m.finish(Status.DELIVERED)
    with pytest.raises(ValueError):
        m.finish(Status.ERASED)
    with pytest.raises(ValueError):
        Message(2, "s", "v", "*", 0, 0.0, LayerId.BASE, "safety_core", "bsm", "local")


def test_rate_sampling_degenerate_and_inverted():
    assert sample_stream_rate((5.0, 5.0), RngStream(0, "r")) == 5.0
    with pytest.raises(ValueError):
        sample_stream_rate((6.0, 5.0), RngStream(0, "r"))


def test_disruption_draws_within_bounds():
    r = RngStream(9, "disruption")
    lo, hi = DEFAULT_CATALOG["disruption"].rate_bps
    assert (lo, hi) == (30e3, 100e3)
    draws = [sample_stream_rate((lo, hi), r) for _ in range(10_000)]
    assert lo <= min(draws) and max(draws) <= hi


@settings(max_examples=50)
@given(st.floats(0, 1e9), st.floats(0, 1e9), st.integers(0, 2**32))
def test_rate_sample_within_interval(a, b, seed):
    lo, hi = sorted((a, b))
    assert lo <= sample_stream_rate((lo, hi), RngStream(seed, "p")) <= hi
