import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bell_lab.relativity import (
    C_SI,
    LAB,
    V_CAP,
    ConfigurationError,
    Frame,
    ScanGeometry,
    SpacetimeEvent,
    VCausalModel,
    before_before,
    boost,
    delayed_outcome_viable,
    influence_reaches,
    interval,
    lab_events,
    load_preset,
    preset_names,
    scan_speed_bound,
)

import oracles


def ev(pos, t, party="A", kind="input_chosen", natural=False):
    return SpacetimeEvent(party, kind, pos, t, natural)


# --- intervals and boosts ----------------------------------------------------------


def test_interval_classification_examples():
    o = ev([0, 0, 0], 0.0)
    assert interval(o, ev([1.0, 0, 0], 0.0)).kind == "spacelike"
    assert interval(o, ev([0, 0, 0], 1.0)).kind == "timelike"
    assert interval(o, ev([C_SI, 0, 0], 1.0)).kind == "lightlike"
    assert interval(ev([0], 0.0, natural=True), ev([3.0], 3.0, natural=True)).kind == "lightlike"


def test_mixed_units_rejected():
    with pytest.raises(ValueError):
        interval(ev([0], 0.0), ev([0], 1.0, natural=True))


def test_event_validation():
    with pytest.raises(ValueError):
        ev([0, 0, 0, 0], 0.0)
    with pytest.raises(ValueError):
        ev([0], math.inf)
    with pytest.raises(ValueError):
        SpacetimeEvent("A", "detonation", [0], 0.0)


def test_frame_validation():
    with pytest.raises(ValueError):
        Frame([1.0, 0, 0])
    with pytest.raises(ValueError):
        Frame([0.6, 0.6, 0.6])
    assert Frame(0.6).gamma == pytest.approx(1.25)


def test_rest_frame_boost_is_identity():
    e = ev([1.0, 2.0, 3.0], 4.0)
    b = boost(e, LAB)
    assert np.array_equal(b.position, e.position) and b.time == e.time


def test_boost_matches_matrix_oracle_along_x():
    e = ev([1234.5, 0, 0], 2e-6)
    for beta in (0.1, -0.5, 0.9):
        t, x = oracles.boost_x(e.time, e.position[0], beta)
        b = boost(e, Frame(beta))
        assert b.time == pytest.approx(t, rel=1e-12)
        assert b.position[0] == pytest.approx(x, rel=1e-12)


def test_spacelike_pair_order_reverses_along_separation():
    a = ev([0.0], 0.0, natural=True)
    b = ev([1.0], 0.5, natural=True, party="B")
    # dt' = gamma (dt - beta dx) changes sign at beta = dt/dx = 0.5
    assert boost(b, Frame(0.4)).time - boost(a, Frame(0.4)).time > 0
    assert boost(b, Frame(0.6)).time - boost(a, Frame(0.6)).time < 0


def _event(data, natural=True):
    xyz = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
    t = data.draw(st.floats(-1e3, 1e3))
    return ev(xyz, t, natural=natural)


def _frame(data):
    direction = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=3, max_size=3)))
    norm = np.linalg.norm(direction)
    assume(norm > 1e-3)
    speed = data.draw(st.floats(0.0, 0.99))
    return Frame(direction / norm * speed)


def _roundoff(f):
    # boosted coordinates carry relative error of order gamma^2 eps
    return 4 * f.gamma**2


@settings(max_examples=300, deadline=None)
@given(data=st.data())
def test_interval_invariant_under_boost(data):
    e1, e2, f = _event(data), _event(data), _frame(data)
    before = interval(e1, e2)
    after = interval(boost(e1, f), boost(e2, f))
    scale = (e2.time - e1.time) ** 2 + float(np.sum((e2.position - e1.position) ** 2))
    assert abs(after.value - before.value) <= 1e-12 * max(scale, 1.0) * _roundoff(f)
    if abs(before.value) > 1e-9 * max(scale, 1.0) * _roundoff(f):
        assert after.kind == before.kind


# --- v-causal models -------------------------------------------------------------------


def test_vcausal_speed_limits():
    with pytest.raises(ValueError):
        VCausalModel(v=math.inf)
    with pytest.raises(ValueError):
        VCausalModel(v=0.5)
    with pytest.raises(ValueError):
        VCausalModel(v=V_CAP * 10)
    VCausalModel(v=V_CAP)


def test_influence_examples():
    m = VCausalModel(v=1e5)
    src = ev([0, 0, 0], 0.0)
    assert influence_reaches(src, ev([0, 0, 0], 1e-9, party="B"), VCausalModel(v=1.0))
    assert not influence_reaches(src, ev([1.0, 0, 0], 0.0, party="B"), VCausalModel(v=V_CAP))
    # 18 km at 1e5 c takes about 0.6 ns
    assert influence_reaches(src, ev([18e3, 0, 0], 1e-6, party="B"), m)
    assert not influence_reaches(src, ev([18e3, 0, 0], 0.5e-9, party="B"), m)


@settings(max_examples=200, deadline=None)
@given(data=st.data(), v=st.floats(1.0, 1e6), factor=st.floats(1.0, 1e3))
def test_influence_monotone_in_v(data, v, factor):
    e1, e2 = _event(data), _event(data)
    f = _frame(data)
    if influence_reaches(e1, e2, VCausalModel(f, v)):
        assert influence_reaches(e1, e2, VCausalModel(f, min(v * factor, V_CAP)))


def test_before_before_examples():
    a = ev([0.0, 0, 0], 0.0)
    b = ev([18e3, 0, 0], 0.0, party="B")
    for beta in (1e-6, 0.1, 0.9):
        # each frame moves away from the other party
        assert before_before(a, b, Frame(-beta), Frame(beta))
        assert not before_before(a, b, Frame(beta), Frame(-beta))
    assert not before_before(a, b, LAB, LAB)
    with pytest.raises(ConfigurationError):
        before_before(a, ev([0.0, 0, 0], 1.0, party="B"), Frame(0.1), Frame(-0.1))


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_before_before_symmetry(data):
    e1, e2 = _event(data), _event(data)
    assume(interval(e1, e2).kind == "spacelike")
    fa, fb = _frame(data), _frame(data)
    assert before_before(e1, e2, fa, fb) == before_before(e2, e1, fb, fa)


# --- speed scan ------------------------------------------------------------------------


def geneva(**kw):
    return ScanGeometry(rho=oracles.GENEVA_D, **kw)


def test_scan_bound_at_six_ns_matches_naive_formula():
    r = scan_speed_bound(geneva(), oracles.SYNC_6NS)
    assert r.overall >= 1e4
    assert r.overall == pytest.approx(oracles.naive_speed_bound(oracles.GENEVA_D, oracles.SYNC_6NS), rel=1e-6)
    assert not r.exceeds_cap


def test_scan_bound_doubles_when_sync_halves():
    r6 = scan_speed_bound(geneva(), 6e-9).overall
    r3 = scan_speed_bound(geneva(), 3e-9).overall
    assert r3 / r6 == pytest.approx(2.0, rel=1e-12)


def test_scan_limit_exceeds_cap():
    g = geneva(azimuths_deg=(0.0,), betas=(0.0,))
    assert scan_speed_bound(g, 1e-18).exceeds_cap


def test_scan_rejects_bad_sync():
    with pytest.raises(ValueError):
        scan_speed_bound(geneva(), 0.0)


@settings(max_examples=40, deadline=None)
@given(
    rho=st.floats(1e2, 1e6),
    z=st.floats(-1e5, 1e5),
    phase=st.floats(-math.pi, math.pi),
    hours=st.floats(0.5, 24.0),
    d1=st.floats(1e-10, 1e-6),
    d2=st.floats(1e-10, 1e-6),
)
def test_scan_monotone_and_site_symmetric(rho, z, phase, hours, d1, d2):
    g = ScanGeometry(
        rho=rho, z=z, phase=phase, duration=hours * 3600.0,
        azimuths_deg=tuple(float(a) for a in range(0, 360, 15)),
        elevations_deg=(-30.0, 0.0, 45.0), betas=(0.0, 1e-3, 0.3),
    )
    lo, hi = sorted((d1, d2))
    b_lo = scan_speed_bound(g, lo).overall
    b_hi = scan_speed_bound(g, hi).overall
    assert b_hi <= b_lo * (1 + 1e-12)
    swapped = scan_speed_bound(g.reversed(), lo).overall
    assert swapped == pytest.approx(b_lo, rel=1e-9)


def test_scan_csv_header():
    text = scan_speed_bound(geneva(azimuths_deg=(0.0, 90.0)), 6e-9).to_csv()
    lines = text.splitlines()
    assert lines[0] == "frame_azimuth_deg,frame_beta,v_min_over_c"
    assert len(lines) == 3
    with_elev = scan_speed_bound(geneva(azimuths_deg=(0.0,), elevations_deg=(0.0, 30.0)), 6e-9).to_csv()
    assert with_elev.splitlines()[0] == "frame_azimuth_deg,frame_elevation_deg,frame_beta,v_min_over_c"


def test_presets_load():
    assert {"geneva-18km", "geneva-18km-tight"} <= set(preset_names())
    g6 = ScanGeometry.from_dict(load_preset("geneva-18km"))
    g06 = ScanGeometry.from_dict(load_preset("geneva-18km-tight"))
    b6 = scan_speed_bound(g6, g6.sync_ns * 1e-9).overall
    b06 = scan_speed_bound(g06, g06.sync_ns * 1e-9).overall
    assert 1e4 <= b6 < 2e4
    assert 1e5 <= b06 < 2e5
    with pytest.raises(ConfigurationError):
        load_preset("nowhere")


def test_geometry_from_lat_lon():
    g = ScanGeometry.from_dict({"sites": {"a": {"lat": 46.2, "lon": 6.0}, "b": {"lat": 46.2, "lon": 6.25}}})
    assert 18e3 < g.distance < 21e3
    with pytest.raises(ConfigurationError):
        ScanGeometry.from_dict({"sites": {"a": {}}})
    with pytest.raises(ConfigurationError):
        ScanGeometry.from_dict({"sites": {"a": {"x": 0}, "b": {"x": 1}}, "betas": [1.5]})


# --- delayed outcomes -----------------------------------------------------------------


def test_delayed_outcome_examples():
    ev4 = lab_events(oracles.GENEVA_D)
    r = delayed_outcome_viable(ev4, oracles.DELAY_100US)
    assert r.viable
    assert r.required_speed == pytest.approx(oracles.DELAYED_SPEED, rel=1e-12)
    assert not delayed_outcome_viable(ev4, 0.0).viable
    assert delayed_outcome_viable(ev4, 1.0).required_speed < 1e5
    with pytest.raises(ValueError):
        delayed_outcome_viable(ev4, -1.0)
