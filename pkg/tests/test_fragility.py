import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_network
from distres._csvio import InputError
from distres.fragility import (FragilityParams, LineExposure, effective_threshold, failure_probability,
                               sample_failures_array, sample_hourly_failures)
from distres.hazard import WeatherFrame
from distres.network import PowerLine


def _line(overhead=True, veg=0.0):
    return PowerLine("l", "a", "b", 10.0, overhead, veg, False, "F")


def test_probability_examples():
    p = FragilityParams(fragility_factor=1.0)
    assert failure_probability(55.0, _line(overhead=False), p) == 0.0
    assert failure_probability(30.0, _line(), p) == pytest.approx(0.5)
    assert failure_probability(33.0, _line(), p) == pytest.approx(1 / (1 + math.exp(-1)))
    assert failure_probability(33.0, _line(), p) == pytest.approx(0.7311, abs=1e-4)


def test_threshold_examples():
    assert effective_threshold(_line(), FragilityParams(fragility_factor=1.0)) == pytest.approx(30.0)
    assert effective_threshold(_line(), FragilityParams(fragility_factor=1.2)) == pytest.approx(25.0)
    assert effective_threshold(_line(veg=0.5), FragilityParams(fragility_factor=0.8)) == pytest.approx(33.75)


def test_cap_and_validation():
    assert failure_probability(500.0, _line(), FragilityParams()) == pytest.approx(0.95)
    with pytest.raises(InputError):
        FragilityParams(fragility_factor=0)
    with pytest.raises(InputError):
        FragilityParams(veg_sensitivity=1.0)


@settings(max_examples=200, deadline=None)
@given(g1=st.floats(0, 80), g2=st.floats(0, 80), f1=st.floats(0.3, 2), f2=st.floats(0.3, 2),
       v1=st.floats(0, 1), v2=st.floats(0, 1))
def test_probability_monotone_in_gust_factor_vegetation(g1, g2, f1, f2, v1, v2):
    (g1, g2), (f1, f2), (v1, v2) = sorted((g1, g2)), sorted((f1, f2)), sorted((v1, v2))
    lo = failure_probability(g1, _line(veg=v1), FragilityParams(fragility_factor=f1))
    assert lo <= failure_probability(g2, _line(veg=v1), FragilityParams(fragility_factor=f1))
    assert lo <= failure_probability(g1, _line(veg=v1), FragilityParams(fragility_factor=f2))
    assert lo <= failure_probability(g1, _line(veg=v2), FragilityParams(fragility_factor=f1))
    assert 0.0 <= lo <= 0.95


def test_strictly_increasing_below_cap():
    p = FragilityParams(fragility_factor=1.0, p_cap=1.0)
    g = np.linspace(0, 45, 200)
    v = [failure_probability(x, _line(), p) for x in g]
    assert np.all(np.diff(v) > 0)


# ---------------------------------------------------------------------------
# sampling

def _net_and_frame(r, n=60, gust=None):
    net = random_network(r, n, patches=("P0", "P1"))
    gust = gust or {"P0": float(r.uniform(15, 40)), "P1": float(r.uniform(15, 40))}
    return net, WeatherFrame(0, gust)


def test_calm_frame_fails_nothing():
    r = np.random.default_rng(0)
    net, frame = _net_and_frame(r, gust={"P0": 0.0, "P1": 0.0})
    assert sample_hourly_failures(net, frame, set(), FragilityParams(), np.random.default_rng(1)) == set()


def test_already_failed_are_not_resampled():
    r = np.random.default_rng(1)
    net, frame = _net_and_frame(r, gust={"P0": 80.0, "P1": 80.0})
    every = {ln.id for ln in net.lines}
    assert sample_hourly_failures(net, frame, every, FragilityParams(), np.random.default_rng(2)) == set()


def test_zero_cap_never_fails():
    r = np.random.default_rng(2)
    net, frame = _net_and_frame(r, gust={"P0": 80.0, "P1": 80.0})
    assert sample_hourly_failures(net, frame, set(), FragilityParams(p_cap=0.0), np.random.default_rng(3)) == set()


def test_missing_patch_gust():
    r = np.random.default_rng(3)
    net, _ = _net_and_frame(r)
    with pytest.raises(InputError):
        sample_hourly_failures(net, WeatherFrame(0, {"P0": 10.0}), set(), FragilityParams(),
                               np.random.default_rng(0))


def test_empirical_rate_matches_closed_form():
    net = random_network(np.random.default_rng(4), 1)
    ln = net.lines[0]
    net = type(net)(net.nodes, [PowerLine(ln.id, ln.from_node, ln.to_node, 1.0, True, 0.0, False,
                                          ln.feeder_id)], net.feeders)
    p = FragilityParams(fragility_factor=1.0)
    frame = WeatherFrame(0, {"P0": 33.0})
    rng = np.random.default_rng(2024)
    hits = sum(bool(sample_hourly_failures(net, frame, set(), p, rng)) for _ in range(10000))
    assert hits / 10000 == pytest.approx(0.7311, abs=0.015)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_array_sampler_consumes_stream_like_set_sampler(seed):
    r = np.random.default_rng(seed)
    net, frame = _net_and_frame(r, n=int(r.integers(1, 80)))
    failed = {ln.id for ln in net.lines if r.random() < 0.3}
    p = FragilityParams(fragility_factor=float(r.uniform(0.6, 1.4)))
    a_rng, b_rng = np.random.default_rng(seed), np.random.default_rng(seed)
    a = sample_hourly_failures(net, frame, failed, p, a_rng)
    patch_ids = ["P0", "P1"]
    exp = LineExposure(net, patch_ids)
    intact = ~net.line_mask(failed)
    b = sample_failures_array(exp, np.array([frame.gust[k] for k in patch_ids]), intact, p, b_rng)
    assert a == {net.lines[i].id for i in b}
    # both leave the stream in the same state
    assert a_rng.random() == b_rng.random()
