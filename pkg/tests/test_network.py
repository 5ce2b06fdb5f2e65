import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bfs_disconnected, chain_network, random_network
from distres._csvio import InputError
from distres.network import (PowerLine, PowerNetwork, PowerNode, SewageConduit, SewageNetwork,
                             SewagePump, apply_topology_assumption, disconnected_customers,
                             downstream_customers, load_network, load_sewage, save_network,
                             upstream_conduits, validate_network, validate_sewage)


# ---------------------------------------------------------------------------
# validation

def test_two_node_feeder_is_valid():
    assert validate_network(chain_network((0, 5))) == []


def test_line_across_feeders_is_named():
    nodes = [PowerNode("A0", 0, 0, "A", 0, "P0", "substation_root"),
             PowerNode("B0", 9, 0, "B", 0, "P0", "substation_root"),
             PowerNode("A1", 1, 0, "A", 3, "P0"),
             PowerNode("B1", 8, 0, "B", 3, "P0")]
    lines = [PowerLine("a", "A0", "A1", 1, True, 0, False, "A"),
             PowerLine("b", "B0", "B1", 1, True, 0, False, "B"),
             PowerLine("x", "A1", "B1", 7, True, 0, False, "A")]
    problems = validate_network(PowerNetwork(nodes, lines, {"A": "A0", "B": "B0"}))
    assert len(problems) == 1
    assert "line x" in problems[0]


def test_three_node_cycle_is_non_radial():
    nodes = [PowerNode("R", 0, 0, "F", 0, "P0", "substation_root"),
             PowerNode("a", 1, 0, "F", 1, "P0"), PowerNode("b", 0, 1, "F", 1, "P0")]
    lines = [PowerLine("1", "R", "a", 1, True, 0, False, "F"),
             PowerLine("2", "R", "b", 1, True, 0, False, "F"),
             PowerLine("3", "a", "b", 1.4, True, 0, False, "F")]
    problems = validate_network(PowerNetwork(nodes, lines, {"F": "R"}))
    assert any("non-radial feeder" in p for p in problems)


def test_root_with_customers_and_bad_fields_are_reported():
    nodes = [PowerNode("R", 0, 0, "F", 4, "P0", "substation_root"),
             PowerNode("a", 1, 0, "F", 1, "PX")]
    lines = [PowerLine("1", "R", "a", -1, True, 1.5, False, "F")]
    problems = validate_network(PowerNetwork(nodes, lines, {"F": "R"}), patch_ids={"P0"})
    text = "\n".join(problems)
    assert "substation_root carries customers" in text
    assert "unknown patch" in text
    assert "non-positive length" in text
    assert "vegetation" in text


def test_reversed_line_is_reported():
    nodes = [PowerNode("R", 0, 0, "F", 0, "P0", "substation_root"),
             PowerNode("a", 1, 0, "F", 1, "P0")]
    lines = [PowerLine("1", "a", "R", 1, True, 0, False, "F")]
    problems = validate_network(PowerNetwork(nodes, lines, {"F": "R"}))
    assert any("not oriented" in p for p in problems)


# ---------------------------------------------------------------------------
# connectivity

def test_chain_examples():
    net = chain_network()
    assert disconnected_customers(net, set()) == 0
    # L2 is line a-b
    assert disconnected_customers(net, {"L2"}) == 90
    assert disconnected_customers(net, {"L2", "L4"}) == 90
    assert downstream_customers(net, "L3") == 70


def test_downstream_of_leaf_and_root_line():
    net = chain_network((0, 0, 7))
    assert downstream_customers(net, "L2") == 7
    net = chain_network((0, 30, 50, 40))
    assert downstream_customers(net, "L1") == 120


def test_unknown_line_is_input_error():
    net = chain_network()
    with pytest.raises(InputError):
        disconnected_customers(net, {"nope"})
    with pytest.raises(InputError):
        downstream_customers(net, "nope")


def test_disconnected_matches_bfs_oracle():
    r = np.random.default_rng(7)
    for _ in range(300):
        net = random_network(r, int(r.integers(1, 120)))
        ids = [ln.id for ln in net.lines]
        k = int(r.integers(0, len(ids) + 1))
        failed = set(r.choice(ids, size=k, replace=False)) if k else set()
        assert disconnected_customers(net, failed) == bfs_disconnected(net, failed)


def test_single_line_equals_downstream_exhaustively():
    r = np.random.default_rng(8)
    for _ in range(20):
        net = random_network(r, int(r.integers(1, 50)))
        for ln in net.lines:
            assert disconnected_customers(net, {ln.id}) == downstream_customers(net, ln.id)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 80), frac=st.floats(0, 1))
def test_disconnected_is_monotone_in_failures(seed, n, frac):
    r = np.random.default_rng(seed)
    net = random_network(r, n)
    ids = [ln.id for ln in net.lines]
    b = {i for i in ids if r.random() < frac}
    a = {i for i in b if r.random() < 0.5}
    assert disconnected_customers(net, a) <= disconnected_customers(net, b)
    assert 0 <= disconnected_customers(net, b) <= net.total_customers


# ---------------------------------------------------------------------------
# topology assumption

def _with_service():
    nodes = [PowerNode("R", 0, 0, "F", 0, "P0", "substation_root"),
             PowerNode("j", 100, 0, "F", 0, "P0"),
             *(PowerNode(f"s{i}", 100, 20 * (i + 1), "F", 5, "P0", "service_point") for i in range(3))]
    lines = [PowerLine("t", "R", "j", 100, False, 0.3, False, "F"),
             *(PowerLine(f"d{i}", "j", f"s{i}", 20, i != 1, 0.1, True, "F") for i in range(3))]
    return PowerNetwork(nodes, lines, {"F": "R"})


def test_all_overhead_sets_every_line():
    out = apply_topology_assumption(_with_service(), "all_overhead")
    assert all(ln.overhead for ln in out.lines)
    assert sum(ln.overhead for ln in out.lines) == len(out.lines)


def test_service_underground_field_diff():
    net = _with_service()
    out = apply_topology_assumption(net, "service_underground")
    for a, b in zip(net.lines, out.lines):
        if a.service_drop:
            assert b.overhead is False
            assert (a.id, a.from_node, a.to_node, a.length_m, a.vegetation) == \
                   (b.id, b.from_node, b.to_node, b.length_m, b.vegetation)
        else:
            assert a == b
    assert apply_topology_assumption(out, "service_underground").lines == out.lines
    assert out.nodes == net.nodes


def test_unknown_topology_mode():
    with pytest.raises(InputError):
        apply_topology_assumption(_with_service(), "meshed")


# ---------------------------------------------------------------------------
# sewage upstream traversal

def _branching():
    conduits = [SewageConduit("L", ((0, 0), (-10, 0))),
                SewageConduit("A", ((60, 0), (0, 0)), "L"),
                SewageConduit("B", ((0, 80), (0, 0)), "L"),
                SewageConduit("A2", ((120, 0), (60, 0)), "A")]
    return SewageNetwork(conduits, [SewagePump("P", 0, 0, "N1", "L")])


def test_upstream_chain_example():
    from conftest import chain_sewage
    sw = chain_sewage((40.0, 50.0, 40.0))
    got = upstream_conduits(sw, "PS", 100.0)
    assert got == pytest.approx({"C0": 0.0, "C1": 40.0, "C2": 90.0})
    assert upstream_conduits(sw, "PS", 0.0) == {"C0": 0.0}


def test_upstream_branching_includes_both_first_branch_conduits():
    got = upstream_conduits(_branching(), "P", 100.0)
    assert set(got) == {"L", "A", "B"}
    assert got["A"] == pytest.approx(60.0)
    assert got["B"] == pytest.approx(80.0)
    assert set(upstream_conduits(_branching(), "P", 120.0)) == {"L", "A", "B", "A2"}


def test_upstream_unknown_pump():
    with pytest.raises(InputError):
        upstream_conduits(_branching(), "nope", 10)


@settings(max_examples=50, deadline=None)
@given(d1=st.floats(0, 500), d2=st.floats(0, 500))
def test_upstream_monotone_in_distance(d1, d2):
    lo, hi = sorted((d1, d2))
    assert set(upstream_conduits(_branching(), "P", lo)) <= set(upstream_conduits(_branching(), "P", hi))


def test_conduit_length_and_cycle_detection():
    c = SewageConduit("c", ((0, 0), (3, 4), (3, 10)))
    assert c.length_m == pytest.approx(11.0, rel=1e-6)
    loop = SewageNetwork([SewageConduit("a", ((0, 0), (1, 0)), "b"),
                          SewageConduit("b", ((1, 0), (2, 0)), "a")])
    assert any("cycle" in p for p in validate_sewage(loop))


# ---------------------------------------------------------------------------
# bundle IO

def test_bundle_round_trip(tmp_path):
    net = _with_service()
    sw = _branching()
    sw = SewageNetwork(sw.conduits, [SewagePump("P", 0, 0, "j", "L")])
    save_network(tmp_path, net, sw)
    back = load_network(tmp_path)
    assert back.nodes == net.nodes and back.lines == net.lines and back.feeders == net.feeders
    sw2 = load_sewage(tmp_path, back)
    assert sw2.conduits == sw.conduits and sw2.pumps == sw.pumps


def test_load_rejects_meshed_and_reports_line_numbers(tmp_path):
    (tmp_path / "nodes.csv").write_text(
        "id,x_m,y_m,feeder_id,customers,patch_id,kind\n"
        "R,0,0,F,0,P0,substation_root\na,1,0,F,1,P0,junction\nb,0,1,F,1,P0,junction\n")
    (tmp_path / "lines.csv").write_text(
        "id,from_node,to_node,length_m,overhead,vegetation,service_drop,feeder_id\n"
        "1,R,a,1,true,0,false,F\n2,R,b,1,true,0,false,F\n3,a,b,1,true,0,false,F\n")
    with pytest.raises(InputError, match="non-radial"):
        load_network(tmp_path)
    (tmp_path / "lines.csv").write_text(
        "id,from_node,to_node,length_m,overhead,vegetation,service_drop,feeder_id\n"
        "1,R,a,1,yes,0,false,F\n")
    with pytest.raises(InputError, match=r"lines.csv:2"):
        load_network(tmp_path)


def test_header_mismatch(tmp_path):
    (tmp_path / "nodes.csv").write_text("id,x,y\n")
    with pytest.raises(InputError, match="header"):
        load_network(tmp_path)
