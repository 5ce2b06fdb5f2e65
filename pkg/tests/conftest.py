"""Shared builders and independent oracles for the test suite.

The oracles here deliberately avoid the package's own indexing tricks: the
connectivity oracle is a plain BFS over intact lines, the flood oracle loops
over every (point, segment) pair in pure Python.
"""

import math
from collections import deque

import numpy as np
import pytest

from distres.network import PowerLine, PowerNetwork, PowerNode, SewageConduit, SewageNetwork, SewagePump


def chain_network(customers=(0, 10, 20, 30, 40), spacing=100.0, overhead=True, vegetation=0.0,
                  patch="P0"):
    """Single feeder ``N0 - N1 - ... - Nk`` along the x axis; line ``Li`` feeds ``Ni``."""
    nodes = [PowerNode(f"N{i}", i * spacing, 0.0, "F0", c, patch,
                       "substation_root" if i == 0 else "junction")
             for i, c in enumerate(customers)]
    lines = [PowerLine(f"L{i}", f"N{i - 1}", f"N{i}", spacing, overhead, vegetation, False, "F0")
             for i in range(1, len(customers))]
    return PowerNetwork(nodes, lines, {"F0": "N0"})


def random_network(rng, n_lines, n_feeders=None, patches=("P0",)):
    """Random radial forest with ``n_lines`` lines over 1 to 3 feeders."""
    n_feeders = n_feeders or int(rng.integers(1, 4))
    n_feeders = max(1, min(n_feeders, n_lines + 1))
    nodes, lines, feeders = [], [], {}
    members = {}
    for f in range(n_feeders):
        fid = f"F{f}"
        rid = f"F{f}R"
        nodes.append(PowerNode(rid, 1000.0 * f, 0.0, fid, 0, patches[0], "substation_root"))
        feeders[fid] = rid
        members[fid] = [rid]
    pos = {n.id: (n.x, n.y) for n in nodes}
    for k in range(n_lines):
        fid = f"F{int(rng.integers(n_feeders))}"
        parent = members[fid][int(rng.integers(len(members[fid])))]
        nid = f"{fid}N{k}"
        px, py = pos[parent]
        x, y = px + float(rng.uniform(-50, 50)), py + float(rng.uniform(10, 60))
        pos[nid] = (x, y)
        nodes.append(PowerNode(nid, x, y, fid, int(rng.integers(0, 30)),
                               patches[int(rng.integers(len(patches)))], "junction"))
        lines.append(PowerLine(f"{fid}L{k}", parent, nid, float(math.hypot(x - px, y - py)),
                               bool(rng.random() < 0.8), float(rng.uniform(0, 1)),
                               bool(rng.random() < 0.3), fid))
        members[fid].append(nid)
    # shuffle file order so nothing depends on insertion order
    perm_n = rng.permutation(len(nodes))
    perm_l = rng.permutation(len(lines))
    return PowerNetwork([nodes[i] for i in perm_n], [lines[i] for i in perm_l], feeders)


def bfs_disconnected(net, failed):
    """Customers unreachable from every root over intact lines (undirected BFS)."""
    failed = set(failed)
    adj = {n.id: [] for n in net.nodes}
    for ln in net.lines:
        if ln.id not in failed:
            adj[ln.from_node].append(ln.to_node)
            adj[ln.to_node].append(ln.from_node)
    seen = set(net.feeders.values())
    q = deque(seen)
    while q:
        v = q.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                q.append(w)
    return sum(n.customers for n in net.nodes if n.id not in seen)


def point_segment_distance(p, a, b):
    (px, py), (ax, ay), (bx, by) = p, a, b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def brute_flooded_customers(points, counts, flooded, sewage):
    total = 0
    for p, c in zip(points, counts):
        hit = False
        for cid, r in flooded.items():
            poly = sewage.conduit_by_id[cid].polyline
            for a, b in zip(poly[:-1], poly[1:]):
                if point_segment_distance(p, a, b) <= r:
                    hit = True
                    break
            if hit:
                break
        total += int(c) if hit else 0
    return total


def chain_sewage(lengths=(40.0, 50.0, 40.0), lift_length=30.0, power_node="N1"):
    """Pump ``PS`` with a lift conduit ``C0`` and a straight upstream chain ``C1..Ck``."""
    conduits = [SewageConduit("C0", ((0.0, 0.0), (-lift_length, 0.0)), None)]
    x = 0.0
    for i, L in enumerate(lengths, start=1):
        conduits.append(SewageConduit(f"C{i}", ((x + L, 0.0), (x, 0.0)), f"C{i - 1}"))
        x += L
    return SewageNetwork(conduits, [SewagePump("PS", 0.0, 0.0, power_node, "C0")])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_merge(candidates, max_gap_h=3, min_duration_h=6):
    """Event spans by dilating a boolean hour mask, then trimming to candidates.

    Each candidate hour ``c`` covers ``[c, c + max_gap_h + 1)``; two candidates
    end up in one covered run exactly when at most ``max_gap_h`` hours separate
    them. Returns ``[(start, end)]`` with inclusive duration >= min_duration_h.
    """
    if not candidates:
        return []
    lo, hi = min(candidates), max(candidates)
    span = hi - lo + max_gap_h + 2
    cand = np.zeros(span, dtype=bool)
    cand[np.asarray(candidates) - lo] = True
    cover = np.zeros(span, dtype=bool)
    for c in np.flatnonzero(cand):
        cover[c:c + max_gap_h + 1] = True
    out = []
    t = 0
    while t < span:
        if cover[t]:
            s = t
            while t < span and cover[t]:
                t += 1
            inside = np.flatnonzero(cand[s:t]) + s
            a, b = int(inside[0]) + lo, int(inside[-1]) + lo
            if b - a + 1 >= min_duration_h:
                out.append((a, b))
        else:
            t += 1
    return out


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, when any acceptance test ran."""
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for name in sorted(results):
            terminalreporter.write_line(results[name])
