"""Power distribution and sewage graphs.

The power network is a forest of radial feeders. Lines are oriented from the
feeder root toward the leaves, so each non-root node has exactly one incoming
line. Connectivity queries use a preorder numbering of every feeder tree: the
subtree below a line is a contiguous block of that numbering, which turns
"which customers lost service" into an interval-union problem.

Coordinates are planar, in meters.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from ._csvio import InputError, field_errors, fmt_float, parse_bool, read_rows, write_rows

NODE_KINDS = ("substation_root", "junction", "service_point")

NODES_HEADER = ("id", "x_m", "y_m", "feeder_id", "customers", "patch_id", "kind")
LINES_HEADER = ("id", "from_node", "to_node", "length_m", "overhead", "vegetation",
                "service_drop", "feeder_id")
CONDUITS_HEADER = ("id", "polyline_wkt_like", "downstream_id")
PUMPS_HEADER = ("id", "x_m", "y_m", "power_node_id", "lift_conduit_id")


@dataclass(frozen=True)
class PowerNode:
    id: str
    x: float
    y: float
    feeder_id: str
    customers: int
    patch_id: str
    kind: str = "junction"

    @property
    def position(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class PowerLine:
    id: str
    from_node: str
    to_node: str
    length_m: float
    overhead: bool
    vegetation: float
    service_drop: bool
    feeder_id: str


class _Topology:
    """Index arrays derived from a radial network (built once, read-only)."""

    def __init__(self, net):
        nodes, lines = net.nodes, net.lines
        self.node_index = {n.id: i for i, n in enumerate(nodes)}
        self.line_index = {ln.id: i for i, ln in enumerate(lines)}
        n_nodes = len(nodes)

        self.line_to = np.array([self.node_index[ln.to_node] for ln in lines], dtype=np.int64)
        self.line_from = np.array([self.node_index[ln.from_node] for ln in lines], dtype=np.int64)
        self.parent_line = np.full(n_nodes, -1, dtype=np.int64)
        self.parent_line[self.line_to] = np.arange(len(lines))

        children = [[] for _ in range(n_nodes)]
        for i in range(len(lines)):
            children[self.line_from[i]].append(int(self.line_to[i]))

        # iterative preorder over each feeder, feeders in sorted id order
        self.tin = np.zeros(n_nodes, dtype=np.int64)
        self.tout = np.zeros(n_nodes, dtype=np.int64)
        order = []
        for fid in sorted(net.feeders):
            root = self.node_index[net.feeders[fid]]
            stack = [(root, False)]
            while stack:
                v, done = stack.pop()
                if done:
                    self.tout[v] = len(order)
                    continue
                self.tin[v] = len(order)
                order.append(v)
                stack.append((v, True))
                for c in reversed(children[v]):
                    stack.append((c, False))
        if len(order) != n_nodes:
            raise InputError("network is not a radial forest rooted at the feeder roots")
        self.order = np.array(order, dtype=np.int64)

        customers = np.array([n.customers for n in nodes], dtype=np.int64)
        self.customers = customers
        self.customers_pre = customers[self.order]
        cs = np.concatenate([[0], np.cumsum(self.customers_pre)])
        self.line_tin = self.tin[self.line_to]
        self.line_tout = self.tout[self.line_to]
        self.line_downstream = cs[self.line_tout] - cs[self.line_tin]
        self.total_customers = int(customers.sum())

        self.feeder_ids = sorted(net.feeders)
        fidx = {f: i for i, f in enumerate(self.feeder_ids)}
        self.node_feeder = np.array([fidx[n.feeder_id] for n in nodes], dtype=np.int64)
        self.node_feeder_pre = self.node_feeder[self.order]
        self.line_feeder = np.array([fidx[ln.feeder_id] for ln in lines], dtype=np.int64)
        self.feeder_totals = np.bincount(self.node_feeder, weights=customers,
                                         minlength=len(self.feeder_ids)).astype(np.int64)

        xy = np.array([[n.x, n.y] for n in nodes], dtype=float).reshape(-1, 2)
        self.node_xy = xy
        self.line_mid = 0.5 * (xy[self.line_from] + xy[self.line_to]) if len(lines) else np.zeros((0, 2))

    def outage_mask(self, failed):
        """Boolean mask over preorder positions of disconnected nodes.

        ``failed`` is a boolean array over lines.
        """
        idx = np.flatnonzero(failed)
        diff = np.zeros(len(self.order) + 1, dtype=np.int64)
        np.add.at(diff, self.line_tin[idx], 1)
        np.add.at(diff, self.line_tout[idx], -1)
        return np.cumsum(diff[:-1]) > 0

    def customers_out(self, failed):
        if not failed.any():
            return 0
        return int(self.customers_pre[self.outage_mask(failed)].sum())

    def feeder_out(self, failed):
        nf = len(self.feeder_ids)
        if not failed.any():
            return np.zeros(nf, dtype=np.int64)
        m = self.outage_mask(failed)
        return np.bincount(self.node_feeder_pre[m], weights=self.customers_pre[m],
                           minlength=nf).astype(np.int64)

    def node_disconnected(self, failed):
        """Boolean mask over node indices (file order)."""
        out = np.zeros(len(self.order), dtype=bool)
        if failed.any():
            out[self.order[self.outage_mask(failed)]] = True
        return out


@dataclass(frozen=True)
class PowerNetwork:
    nodes: tuple
    lines: tuple
    feeders: dict = field(hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "feeders", dict(self.feeders))

    @cached_property
    def topo(self):
        return _Topology(self)

    def node(self, node_id):
        return self.nodes[self.topo.node_index[node_id]]

    def line(self, line_id):
        try:
            return self.lines[self.topo.line_index[line_id]]
        except KeyError:
            raise InputError(f"unknown line id {line_id!r}") from None

    @property
    def total_customers(self):
        return sum(n.customers for n in self.nodes)

    def line_mask(self, line_ids):
        """Boolean array over lines for a collection of line ids."""
        mask = np.zeros(len(self.lines), dtype=bool)
        index = self.topo.line_index
        for lid in line_ids:
            try:
                mask[index[lid]] = True
            except KeyError:
                raise InputError(f"unknown line id {lid!r}") from None
        return mask

    def customer_points(self):
        """Node positions with customer multiplicity, nodes with zero customers dropped."""
        cust = self.topo.customers
        keep = cust > 0
        return self.topo.node_xy[keep], cust[keep]


def validate_network(net, patch_ids=None):
    """List every invariant violation of ``net``; an empty list means valid.

    Each entry is a string that starts with the offending node, line or
    feeder id. ``patch_ids`` (optional) enables the patch reference check.
    """
    problems = []
    node_by_id = {}
    for n in net.nodes:
        if n.id in node_by_id:
            problems.append(f"node {n.id}: duplicate id")
        node_by_id[n.id] = n
        if n.kind not in NODE_KINDS:
            problems.append(f"node {n.id}: unknown kind {n.kind!r}")
        if n.customers < 0:
            problems.append(f"node {n.id}: negative customer count")
        if n.kind == "substation_root" and n.customers != 0:
            problems.append(f"node {n.id}: substation_root carries customers")
        if n.feeder_id not in net.feeders:
            problems.append(f"node {n.id}: feeder {n.feeder_id!r} has no root")
        if patch_ids is not None and n.patch_id not in patch_ids:
            problems.append(f"node {n.id}: unknown patch {n.patch_id!r}")

    for fid, root in net.feeders.items():
        r = node_by_id.get(root)
        if r is None:
            problems.append(f"feeder {fid}: root node {root!r} missing")
        elif r.kind != "substation_root" or r.feeder_id != fid:
            problems.append(f"feeder {fid}: root {root!r} is not this feeder's substation_root")

    seen = set()
    adjacency = {n: [] for n in node_by_id}
    good_lines = []
    for ln in net.lines:
        if ln.id in seen:
            problems.append(f"line {ln.id}: duplicate id")
        seen.add(ln.id)
        if not ln.length_m > 0:
            problems.append(f"line {ln.id}: non-positive length")
        if not 0.0 <= ln.vegetation <= 1.0:
            problems.append(f"line {ln.id}: vegetation outside [0, 1]")
        a, b = node_by_id.get(ln.from_node), node_by_id.get(ln.to_node)
        if a is None or b is None:
            problems.append(f"line {ln.id}: unknown endpoint")
            continue
        if a.feeder_id != b.feeder_id or ln.feeder_id != a.feeder_id:
            problems.append(f"line {ln.id}: connects different feeders")
            continue
        adjacency[a.id].append((b.id, ln))
        adjacency[b.id].append((a.id, ln))
        good_lines.append(ln)

    # radiality per feeder: union-find cycle check, then BFS reachability/orientation
    parent = {n: n for n in node_by_id}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    cyclic = set()
    for ln in good_lines:
        ra, rb = find(ln.from_node), find(ln.to_node)
        if ra == rb:
            cyclic.add(ln.feeder_id)
        else:
            parent[ra] = rb
    for fid in sorted(cyclic):
        problems.append(f"feeder {fid}: non-radial feeder (cycle)")

    for fid, root in net.feeders.items():
        if fid in cyclic or root not in node_by_id:
            continue
        depth = {root: 0}
        frontier = [root]
        while frontier:
            nxt = []
            for v in frontier:
                for w, _ in adjacency[v]:
                    if w not in depth:
                        depth[w] = depth[v] + 1
                        nxt.append(w)
            frontier = nxt
        members = [n.id for n in net.nodes if n.feeder_id == fid]
        for nid in members:
            if nid not in depth:
                problems.append(f"node {nid}: not connected to feeder {fid} root")
        for ln in good_lines:
            if ln.feeder_id != fid:
                continue
            da, db = depth.get(ln.from_node), depth.get(ln.to_node)
            if da is not None and db is not None and db != da + 1:
                problems.append(f"line {ln.id}: not oriented root-to-leaf")
    return problems


def disconnected_customers(net, failed_lines):
    """Customers with no intact path to their feeder root."""
    return net.topo.customers_out(net.line_mask(failed_lines))


def downstream_customers(net, line_id):
    """Customers in the subtree fed through ``line_id``."""
    net.line(line_id)
    return int(net.topo.line_downstream[net.topo.line_index[line_id]])


def apply_topology_assumption(net, mode):
    """Return a copy of ``net`` under a service-connection assumption.

    ``service_underground`` buries every service drop and leaves other lines
    as loaded; ``all_overhead`` makes every line overhead.
    """
    if mode == "service_underground":
        lines = [replace(ln, overhead=False) if ln.service_drop else ln for ln in net.lines]
    elif mode == "all_overhead":
        lines = [replace(ln, overhead=True) for ln in net.lines]
    else:
        raise InputError(f"unknown topology mode {mode!r}")
    return PowerNetwork(net.nodes, lines, net.feeders)


# ---------------------------------------------------------------------------
# sewage network


@dataclass(frozen=True)
class SewageConduit:
    id: str
    polyline: tuple
    downstream_id: str = None

    @property
    def length_m(self):
        p = np.asarray(self.polyline, dtype=float)
        return float(np.hypot(*np.diff(p, axis=0).T).sum())


@dataclass(frozen=True)
class SewagePump:
    id: str
    x: float
    y: float
    power_node_id: str
    lift_conduit_id: str

    @property
    def position(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class SewageNetwork:
    conduits: tuple = ()
    pumps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "conduits", tuple(self.conduits))
        object.__setattr__(self, "pumps", tuple(self.pumps))

    @cached_property
    def conduit_by_id(self):
        return {c.id: c for c in self.conduits}

    @cached_property
    def pump_by_id(self):
        return {p.id: p for p in self.pumps}

    @cached_property
    def upstream_of(self):
        up = {c.id: [] for c in self.conduits}
        for c in self.conduits:
            if c.downstream_id:
                up[c.downstream_id].append(c.id)
        for v in up.values():
            v.sort()
        return up

    @cached_property
    def lengths(self):
        return {c.id: c.length_m for c in self.conduits}


def validate_sewage(sewage, net=None):
    problems = []
    ids = sewage.conduit_by_id
    for c in sewage.conduits:
        if len(c.polyline) < 2:
            problems.append(f"conduit {c.id}: polyline needs at least two points")
        elif not c.length_m > 0:
            problems.append(f"conduit {c.id}: zero length")
        if c.downstream_id and c.downstream_id not in ids:
            problems.append(f"conduit {c.id}: unknown downstream {c.downstream_id!r}")
    for c in sewage.conduits:
        seen = {c.id}
        cur = c.downstream_id
        while cur and cur in ids:
            if cur in seen:
                problems.append(f"conduit {c.id}: downstream links cycle")
                break
            seen.add(cur)
            cur = ids[cur].downstream_id
    node_ids = {n.id for n in net.nodes} if net is not None else None
    for p in sewage.pumps:
        if p.lift_conduit_id not in ids:
            problems.append(f"pump {p.id}: unknown lift conduit {p.lift_conduit_id!r}")
        if node_ids is not None and p.power_node_id not in node_ids:
            problems.append(f"pump {p.id}: unknown power node {p.power_node_id!r}")
    return problems


def upstream_conduits(sewage, pump_id, max_distance_m):
    """Conduits backed up from a pump within ``max_distance_m``.

    Walks the reversed downstream links from the pump's lift conduit. The lift
    conduit itself sits at distance 0; every upstream conduit is reached at the
    summed length of the upstream conduits on its path, its own length
    included. Returns ``{conduit_id: cumulative_distance}``.
    """
    pump = sewage.pump_by_id.get(pump_id)
    if pump is None:
        raise InputError(f"unknown pump {pump_id!r}")
    up, lengths = sewage.upstream_of, sewage.lengths
    out = {pump.lift_conduit_id: 0.0}
    stack = [(pump.lift_conduit_id, 0.0)]
    while stack:
        cid, d = stack.pop()
        for u in up[cid]:
            du = d + lengths[u]
            if du <= max_distance_m and u not in out:
                out[u] = du
                stack.append((u, du))
    return out


# ---------------------------------------------------------------------------
# bundle IO


def load_network(directory, patch_ids=None):
    """Read ``nodes.csv``/``lines.csv`` and reject invalid (e.g. meshed) feeders."""
    d = Path(directory)
    nodes, lines, feeders = [], [], {}
    for lineno, r in read_rows(d / "nodes.csv", NODES_HEADER):
        with field_errors(d / "nodes.csv", lineno):
            n = PowerNode(r["id"], float(r["x_m"]), float(r["y_m"]), r["feeder_id"],
                          int(r["customers"]), r["patch_id"], r["kind"])
        nodes.append(n)
        if n.kind == "substation_root":
            if n.feeder_id in feeders:
                raise InputError(f"{d / 'nodes.csv'}:{lineno}: second root for feeder {n.feeder_id}")
            feeders[n.feeder_id] = n.id
    for lineno, r in read_rows(d / "lines.csv", LINES_HEADER):
        with field_errors(d / "lines.csv", lineno):
            lines.append(PowerLine(r["id"], r["from_node"], r["to_node"], float(r["length_m"]),
                                   parse_bool(r["overhead"]), float(r["vegetation"]),
                                   parse_bool(r["service_drop"]), r["feeder_id"]))
    net = PowerNetwork(nodes, lines, feeders)
    problems = validate_network(net, patch_ids)
    if problems:
        raise InputError("invalid network: " + "; ".join(problems[:20]))
    return net


def _parse_polyline(text):
    pts = []
    for pair in text.split(";"):
        pair = pair.strip()
        if not pair:
            continue
        x, y = pair.split()
        pts.append((float(x), float(y)))
    return tuple(pts)


def load_sewage(directory, net=None):
    """Read ``conduits.csv``/``pumps.csv``; missing files give an empty network."""
    d = Path(directory)
    if not (d / "conduits.csv").exists():
        return SewageNetwork()
    conduits, pumps = [], []
    for lineno, r in read_rows(d / "conduits.csv", CONDUITS_HEADER):
        with field_errors(d / "conduits.csv", lineno):
            conduits.append(SewageConduit(r["id"], _parse_polyline(r["polyline_wkt_like"]),
                                          r["downstream_id"] or None))
    if (d / "pumps.csv").exists():
        for lineno, r in read_rows(d / "pumps.csv", PUMPS_HEADER):
            with field_errors(d / "pumps.csv", lineno):
                pumps.append(SewagePump(r["id"], float(r["x_m"]), float(r["y_m"]),
                                        r["power_node_id"], r["lift_conduit_id"]))
    sewage = SewageNetwork(conduits, pumps)
    problems = validate_sewage(sewage, net)
    if problems:
        raise InputError("invalid sewage network: " + "; ".join(problems[:20]))
    return sewage


def save_network(directory, net, sewage=None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_rows(d / "nodes.csv", NODES_HEADER,
               [(n.id, fmt_float(n.x), fmt_float(n.y), n.feeder_id, n.customers, n.patch_id, n.kind)
                for n in net.nodes])
    write_rows(d / "lines.csv", LINES_HEADER,
               [(ln.id, ln.from_node, ln.to_node, fmt_float(ln.length_m),
                 str(ln.overhead).lower(), fmt_float(ln.vegetation),
                 str(ln.service_drop).lower(), ln.feeder_id) for ln in net.lines])
    if sewage is not None:
        write_rows(d / "conduits.csv", CONDUITS_HEADER,
                   [(c.id, ";".join(f"{fmt_float(x)} {fmt_float(y)}" for x, y in c.polyline),
                     c.downstream_id or "") for c in sewage.conduits])
        write_rows(d / "pumps.csv", PUMPS_HEADER,
                   [(p.id, fmt_float(p.x), fmt_float(p.y), p.power_node_id, p.lift_conduit_id)
                    for p in sewage.pumps])
