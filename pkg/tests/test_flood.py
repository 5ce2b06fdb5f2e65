import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_flooded_customers, chain_network, chain_sewage
from distres._csvio import InputError
from distres.engine import EpisodeConfig, run_ensemble
from distres.fixtures import load_scenario
from distres.flood import (FloodConfig, FloodState, advance_flood, covered, flood_metrics, flooded_area,
                           flooded_customers, pump_power_status)
from distres.fragility import FragilityParams
from distres.hazard import WeatherEvent, WeatherFrame, parse_time
from distres.network import SewageConduit, SewageNetwork, SewagePump


def _capsule(length, radius, angle=0.0, origin=(0.0, 0.0)):
    ox, oy = origin
    end = (ox + length * math.cos(angle), oy + length * math.sin(angle))
    sw = SewageNetwork([SewageConduit("c", ((ox, oy), end))])
    return sw, FloodState({"c": radius}, {"c": frozenset()})


# ---------------------------------------------------------------------------
# pump status

def test_pump_power_status():
    net = chain_network()
    sw = chain_sewage(power_node="N2")
    assert pump_power_status(net, set(), sw.pumps) == set()
    assert pump_power_status(net, {"L2"}, sw.pumps) == {"PS"}
    assert pump_power_status(net, {"L1"}, sw.pumps) == {"PS"}
    assert pump_power_status(net, {"L3"}, sw.pumps) == set()


# ---------------------------------------------------------------------------
# hourly update

def test_upstream_progression_chain():
    sw = chain_sewage((40.0, 50.0, 40.0))
    cfg = FloodConfig(pump_lag_h=1, upstream_rate_m_per_h=100.0)
    rng = np.random.default_rng(0)
    s1 = advance_flood(FloodState(), {"PS"}, {"PS": 1}, sw, cfg, rng)
    assert set(s1.flooded) == {"C0", "C1", "C2"}
    assert all(30.0 <= r <= 60.0 for r in s1.flooded.values())
    s2 = advance_flood(s1, {"PS"}, {"PS": 2}, sw, cfg, rng)
    assert set(s2.flooded) == {"C0", "C1", "C2", "C3"}
    # sustained conduits keep growing
    assert all(s2.flooded[c] > s1.flooded[c] for c in s1.flooded)
    assert s2.sustaining_pump["C3"] == frozenset({"PS"})


def test_lag_delays_flooding():
    sw = chain_sewage()
    cfg = FloodConfig(pump_lag_h=3)
    rng = np.random.default_rng(0)
    s = FloodState()
    for h in (1, 2):
        s = advance_flood(s, {"PS"}, {"PS": h}, sw, cfg, rng)
        assert not s
    s = advance_flood(s, {"PS"}, {"PS": 3}, sw, cfg, rng)
    assert set(s.flooded) == {"C0", "C1", "C2"}


def test_recession_removes_small_radius():
    sw = chain_sewage()
    cfg = FloodConfig(recession_min_m=50.0, recession_max_m=50.0)
    s = advance_flood(FloodState({"C1": 45.0}, {"C1": frozenset()}), set(), {}, sw, cfg,
                      np.random.default_rng(0))
    assert "C1" not in s.flooded and not s
    s = advance_flood(FloodState({"C1": 120.0}, {"C1": frozenset()}), set(), {}, sw, cfg,
                      np.random.default_rng(0))
    assert s.flooded["C1"] == pytest.approx(70.0)


def test_recession_finishes_within_bound():
    sw = chain_sewage()
    cfg = FloodConfig()
    rng = np.random.default_rng(1)
    s = FloodState()
    for h in range(1, 8):
        s = advance_flood(s, {"PS"}, {"PS": h}, sw, cfg, rng)
    bound = math.ceil(max(s.flooded.values()) / cfg.recession_min_m)
    areas = [flooded_area(s, cfg, sw)]
    for _ in range(bound):
        s = advance_flood(s, set(), {}, sw, cfg, rng)
        areas.append(flooded_area(s, cfg, sw))
    assert not s
    assert all(b <= a for a, b in zip(areas, areas[1:]))


def test_flood_config_validation():
    for bad in (dict(pump_lag_h=-1), dict(growth_min_m=70.0), dict(recession_min_m=0.0, recession_max_m=0.0),
                dict(raster_cell_m=0.0)):
        with pytest.raises(InputError):
            FloodConfig(**bad)


# ---------------------------------------------------------------------------
# flooded customers

def _random_state(r):
    """Random sewage tree with random radii on a random subset of conduits."""
    conduits = [SewageConduit("c0", ((0.0, 0.0), (-30.0, 0.0)))]
    pts = {"c0": (0.0, 0.0)}
    for k in range(1, int(r.integers(2, 12))):
        parent = f"c{int(r.integers(k))}"
        px, py = conduits[int(parent[1:])].polyline[0]
        mid = (px + r.uniform(-60, 60), py + r.uniform(-60, 60))
        end = (mid[0] + r.uniform(-40, 40), mid[1] + r.uniform(-40, 40))
        conduits.append(SewageConduit(f"c{k}", (end, mid, (px, py)), parent))
    sw = SewageNetwork(conduits, [SewagePump("p", 0.0, 0.0, "n", "c0")])
    chosen = [c.id for c in conduits if r.random() < 0.6]
    flooded = {c: float(r.uniform(1, 60)) for c in chosen}
    return sw, FloodState(flooded, {c: frozenset() for c in flooded})


def test_flooded_customers_match_brute_force():
    r = np.random.default_rng(11)
    for _ in range(200):
        sw, state = _random_state(r)
        pts = r.uniform(-250, 250, (int(r.integers(1, 80)), 2))
        counts = r.integers(0, 40, len(pts))
        assert flooded_customers(state, (pts, counts), sw) == \
            brute_flooded_customers(pts.tolist(), counts.tolist(), state.flooded, sw)


def test_point_in_two_capsules_counts_once():
    sw = SewageNetwork([SewageConduit("a", ((0, 0), (10, 0))), SewageConduit("b", ((0, 5), (10, 5)))])
    state = FloodState({"a": 10.0, "b": 10.0}, {})
    assert flooded_customers(state, (np.array([[5.0, 2.0]]), np.array([7])), sw) == 7


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), grow=st.floats(0, 50))
def test_flooded_customers_monotone_in_radius(seed, grow):
    r = np.random.default_rng(seed)
    sw, state = _random_state(r)
    if not state.flooded:
        return
    pts = r.uniform(-250, 250, (60, 2))
    counts = r.integers(0, 40, 60)
    c = sorted(state.flooded)[0]
    bigger = FloodState({**state.flooded, c: state.flooded[c] + grow}, state.sustaining_pump)
    assert flooded_customers(bigger, (pts, counts), sw) >= flooded_customers(state, (pts, counts), sw)


# ---------------------------------------------------------------------------
# flooded area

def test_capsule_area_worked_example():
    sw, state = _capsule(100.0, 50.0)
    exact = 2 * 50 * 100 + math.pi * 50 ** 2
    assert exact == pytest.approx(17854, abs=0.5)
    assert flooded_area(state, FloodConfig(raster_cell_m=5.0), sw) == pytest.approx(exact, rel=0.03)


def test_single_capsules_against_analytic_area():
    r = np.random.default_rng(5)
    for _ in range(20):
        L, rad = r.uniform(10, 300), r.uniform(10, 80)
        sw, state = _capsule(L, rad, r.uniform(0, 2 * np.pi), tuple(r.uniform(-500, 500, 2)))
        exact = 2 * rad * L + math.pi * rad ** 2
        assert flooded_area(state, FloodConfig(raster_cell_m=5.0), sw) == pytest.approx(exact, rel=0.03)


def test_area_against_shapely_union():
    shapely = pytest.importorskip("shapely")
    from shapely.geometry import LineString
    from shapely.ops import unary_union
    r = np.random.default_rng(9)
    for _ in range(10):
        sw, state = _random_state(r)
        if not state.flooded:
            continue
        geom = unary_union([LineString(sw.conduit_by_id[c].polyline).buffer(rad, quad_segs=64)
                            for c, rad in state.flooded.items()])
        assert flooded_area(state, FloodConfig(raster_cell_m=2.0), sw) == pytest.approx(geom.area, rel=0.03)


def test_disjoint_capsules_add_and_empty_is_zero():
    sw = SewageNetwork([SewageConduit("a", ((0, 0), (100, 0))), SewageConduit("b", ((0, 1000), (100, 1000)))])
    cfg = FloodConfig(raster_cell_m=5.0)
    a = flooded_area(FloodState({"a": 30.0}, {}), cfg, sw)
    b = flooded_area(FloodState({"b": 30.0}, {}), cfg, sw)
    both = flooded_area(FloodState({"a": 30.0, "b": 30.0}, {}), cfg, sw)
    assert both == pytest.approx(a + b)
    assert flooded_area(FloodState(), cfg, sw) == 0.0
    assert not covered(np.array([[0.0, 0.0]]), FloodState(), sw).any()


# ---------------------------------------------------------------------------
# metrics and coupling

def test_flood_metrics_examples():
    m = flood_metrics([0, 10, 30, 0], [0.0, 100.0, 300.0, 0.0])
    assert m["customer_peak"] == 30 and m["persistence_h"] == 2 and m["customer_auc"] == 40
    m = flood_metrics([0, 1, 1], [0, 1000, 1000])
    assert m["area_peak"] == 1000 and m["area_auc"] == 2000
    assert flood_metrics([], [])["customer_auc"] == 0
    with pytest.raises(InputError):
        flood_metrics([1, 2], [1.0])


def test_all_pumps_powered_means_no_flood():
    sc = load_scenario("small")
    calm = WeatherEvent("calm", parse_time("2023-01-01T00:00Z"),
                        [WeatherFrame(h, {p: 0.0 for p in sc.patches.ids}) for h in range(4)])
    eps = run_ensemble(sc.net, calm, FragilityParams(), EpisodeConfig(), 1, 8, FloodConfig(pump_lag_h=0),
                       sewage=sc.sewage)
    for ep in eps:
        assert set(ep.flood.flooded_customers_trajectory) == {0}
        assert ep.flood.metrics["customer_auc"] == 0


def test_coupled_episode_floods_recede_to_zero():
    sc = load_scenario("small")
    eps = run_ensemble(sc.net, sc.event, FragilityParams(fragility_factor=1.2), EpisodeConfig(),
                       3, 6, FloodConfig(pump_lag_h=1), sewage=sc.sewage)
    assert any(ep.flood.metrics["customer_peak"] > 0 for ep in eps)
    for ep in eps:
        f = ep.flood
        assert len(f.flooded_customers_trajectory) >= len(ep.outage_trajectory)
        assert f.flooded_customers_trajectory[-1] == 0 and f.flooded_area_trajectory[-1] == 0.0
        # no flooding before any pump has been out for the lag
        first_down = next((h for h, s in enumerate(ep.pump_outage_trajectory) if s), None)
        if first_down is None:
            assert f.metrics["customer_auc"] == 0
        else:
            assert all(v == 0 for v in f.flooded_area_trajectory[:first_down])
