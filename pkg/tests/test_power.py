import pytest
from hypothesis import given, settings, strategies as st

from aernoc.engine import run
from aernoc.power import (
    PRESETS,
    TRUENORTH_REFERENCE,
    Activity,
    PowerBreakdown,
    PowerModel,
    breakdown_csv,
    calibrate,
    estimate,
    hop_energy_sensitivity,
    truenorth_table1_illustrative,
)
from aernoc.topology import build_mesh
from aernoc.traffic import WorkloadSpec, poisson_workload

ACT = Activity(spikes=1000, router_traversals=3000, link_traversals=3000, n_routers=16, n_clusters=16)
MODEL = PowerModel(e_router_j=1e-12, e_link_j=2e-12, p_static_router_w=1e-6, p_static_cluster_w=2e-6, e_compute_spike_j=5e-12)


def test_estimate_by_hand():
    b = estimate(ACT, MODEL, 0.5)
    assert b.communication_w == pytest.approx((3000 * 1e-12 + 3000 * 2e-12) / 0.5)
    assert b.compute_w == pytest.approx(1000 * 5e-12 / 0.5)
    assert b.static_w == pytest.approx(16 * 1e-6 + 16 * 2e-6)
    assert sum(b.shares) == pytest.approx(100)


def test_table1_preset_shares():
    model = truenorth_table1_illustrative()
    b = estimate(TRUENORTH_REFERENCE, model, 1.0)
    assert b.total_w == pytest.approx(0.072)
    for got, want in zip(b.shares, (30, 10, 60)):
        assert abs(got - want) < 0.1
    assert (b.compute_w, b.communication_w, b.static_w) == pytest.approx((0.0216, 0.0072, 0.0432))
    assert PRESETS["truenorth-table1-illustrative"]() == model
    assert "illustrative" in model.label


def test_zero_traffic_is_all_static():
    t = build_mesh(4, 4)
    report = run(t, poisson_workload(WorkloadSpec(rate_hz=0), t), duration_ticks=1000)
    b = estimate(report, truenorth_table1_illustrative(), 1.0)
    assert b.shares == (0.0, 0.0, 100.0)


def test_everything_zero():
    b = estimate(Activity(0, 0, 0, 0, 0), MODEL, 1.0)
    assert b.total_w == 0 and b.shares == (0.0, 0.0, 0.0)


def test_zero_duration_rejected():
    with pytest.raises(ValueError, match="wall_duration_s"):
        estimate(ACT, MODEL, 0)


def test_negative_coefficient_rejected():
    with pytest.raises(ValueError):
        PowerModel(e_link_j=-1)


def test_d_scale_half_halves_communication():
    s = hop_energy_sensitivity(ACT, MODEL, 0.5, 1.0)
    assert s.scaled_communication_w == s.communication_w / 2
    assert s.relative == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        hop_energy_sensitivity(ACT, MODEL, 0, 1.0)


@settings(max_examples=200)
@given(
    st.floats(0.01, 100),
    st.floats(0, 1e6),
    st.floats(0, 1e-9),
    st.floats(0, 1e-9),
)
def test_communication_linear_in_hops(d_scale, hops, e_router, e_link):
    a = Activity(10, hops, hops, 4, 4)
    m = PowerModel(e_router_j=e_router, e_link_j=e_link)
    s = hop_energy_sensitivity(a, m, d_scale, 1.0)
    assert s.scaled_communication_w == pytest.approx(d_scale * s.communication_w, rel=1e-12, abs=1e-300)


@settings(max_examples=200)
@given(
    st.floats(1e-6, 10),
    st.tuples(st.floats(0, 100), st.floats(0.01, 100), st.floats(0, 100)).filter(lambda s: sum(s) > 0),
    st.floats(0, 1),
    st.floats(0, 1),
)
def test_calibration_round_trip(total, raw, rf, sf):
    shares = tuple(100 * v / sum(raw) for v in raw)
    shares = (shares[0], shares[1], 100 - shares[0] - shares[1])
    model = calibrate(ACT, 2.0, total, shares, rf, sf)
    b = estimate(ACT, model, 2.0)
    assert b.total_w == pytest.approx(total)
    for got, want in zip(b.shares, shares):
        assert got == pytest.approx(want, abs=1e-6)


def test_calibrate_rejects_bad_shares():
    with pytest.raises(ValueError, match="sum to 100"):
        calibrate(ACT, 1.0, 1.0, (50, 50, 50))
    with pytest.raises(ValueError, match="no events"):
        calibrate(Activity(0, 0, 0, 1, 1), 1.0, 1.0)


def test_breakdown_csv():
    b = PowerBreakdown(0.3, 0.1, 0.6)
    s = hop_energy_sensitivity(ACT, MODEL, 0.5, 1.0)
    text = breakdown_csv(b, [(s, PowerBreakdown(0.3, 0.05, 0.6))])
    lines = text.splitlines()
    assert lines[0] == "component,watts,share_percent"
    assert [l.split(",")[0] for l in lines[1:]] == ["compute", "communication", "static", "total", "communication@d_scale=0.5"]
