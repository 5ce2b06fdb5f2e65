"""Deterministic synthetic instances: networks, sewage overlays, observed series.

Feeders are grown as random radial trees on a plane. Roughly half of each
feeder's nodes are junctions forming the primary/lateral structure and the
rest are customer service points hanging off junctions by short service
drops. Pumps sit on junction nodes and each gets a chain of upstream
conduits (with occasional side branches) draining into its lift conduit.
"""

import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ._csvio import InputError
from .curation import ObservedSeries
from .engine import run_episode
from .hazard import PatchGrid, SynthEventParams, synth_wind_event
from .network import (PowerLine, PowerNetwork, PowerNode, SewageConduit, SewageNetwork, SewagePump,
                      validate_network, validate_sewage)
from .rng import splitmix64

OBSERVED_TAG = 0x4F425356  # "OBSV"


@dataclass(frozen=True)
class FixtureSpec:
    feeders: int = 4
    nodes_per_feeder: int = 60
    customers_range: tuple = (5, 40)
    underground_fraction: float = 0.1
    vegetation_range: tuple = (0.0, 1.0)
    service_vegetation_range: tuple = None
    pumps: int = 0
    conduit_chain_length: int = 6
    patch_rows: int = 4
    patch_cols: int = 4
    seed: int = 0
    feeder_spacing_m: float = 3000.0
    junction_step_m: tuple = (150.0, 400.0)
    service_drop_m: tuple = (20.0, 60.0)
    conduit_length_m: tuple = (40.0, 80.0)
    branch_probability: float = 0.3
    pump_depth_quantiles: tuple = (0.0, 1.0)
    lateral_bias: float = 2.0

    def __post_init__(self):
        if self.service_vegetation_range is None:
            object.__setattr__(self, "service_vegetation_range", self.vegetation_range)
        for name in ("customers_range", "vegetation_range", "service_vegetation_range",
                     "junction_step_m", "service_drop_m", "conduit_length_m", "pump_depth_quantiles"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.feeders < 1 or self.nodes_per_feeder < 2:
            raise InputError("need at least one feeder with two nodes")
        if self.patch_rows < 1 or self.patch_cols < 1:
            raise InputError("patch grid needs at least one row and column")
        if not 0.0 <= self.underground_fraction <= 1.0:
            raise InputError("underground_fraction must be in [0, 1]")
        for lo, hi in (self.vegetation_range, self.service_vegetation_range):
            if not 0.0 <= lo <= hi <= 1.0:
                raise InputError("vegetation ranges must lie within [0, 1]")
        if self.pumps < 0 or (self.pumps and self.conduit_chain_length < 1):
            raise InputError("pumps need conduit_chain_length >= 1")


def _grow_feeder(rng, spec, fid, origin):
    """Node records ``(id, x, y, parent_index, kind)`` for one feeder."""
    n_rest = spec.nodes_per_feeder - 1
    n_service = (n_rest + 1) // 2
    n_junction = n_rest - n_service
    recs = [(f"{fid}_N000", origin[0], origin[1], -1, "substation_root")]
    heading = rng.uniform(0, 2 * np.pi)
    for _ in range(n_junction):
        # lateral_bias > 0 favours recently added junctions, giving long laterals
        pool = [i for i, r in enumerate(recs) if r[4] != "service_point"]
        weights = np.arange(1, len(pool) + 1, dtype=float) ** spec.lateral_bias
        parent = pool[int(rng.choice(len(pool), p=weights / weights.sum()))]
        px, py = recs[parent][1], recs[parent][2]
        ang = heading + rng.normal(0, 0.9)
        step = rng.uniform(*spec.junction_step_m)
        recs.append((f"{fid}_N{len(recs):03d}", px + step * np.cos(ang), py + step * np.sin(ang),
                     parent, "junction"))
    for _ in range(n_service):
        pool = [i for i, r in enumerate(recs) if r[4] == "junction"] or [0]
        parent = pool[int(rng.integers(len(pool)))]
        px, py = recs[parent][1], recs[parent][2]
        ang = rng.uniform(0, 2 * np.pi)
        step = rng.uniform(*spec.service_drop_m)
        recs.append((f"{fid}_N{len(recs):03d}", px + step * np.cos(ang), py + step * np.sin(ang),
                     parent, "service_point"))
    return recs


def generate_fixture(spec):
    """``(PowerNetwork, SewageNetwork, PatchGrid)`` for ``spec``; pure in ``spec``."""
    rng = np.random.Generator(np.random.PCG64(splitmix64(spec.seed)))
    side = int(np.ceil(np.sqrt(spec.feeders)))
    feeder_recs = []
    for k in range(spec.feeders):
        fid = f"F{k:02d}"
        origin = ((k % side) * spec.feeder_spacing_m, (k // side) * spec.feeder_spacing_m)
        feeder_recs.append((fid, _grow_feeder(rng, spec, fid, origin)))

    xy = np.array([(r[1], r[2]) for _, recs in feeder_recs for r in recs])
    pad = 100.0
    lo, hi = xy.min(axis=0) - pad, xy.max(axis=0) + pad
    patches = PatchGrid.regular(lo[0], lo[1], hi[0], hi[1], spec.patch_rows, spec.patch_cols)

    nodes, lines, feeders = [], [], {}
    cmin, cmax = spec.customers_range
    for fid, recs in feeder_recs:
        feeders[fid] = recs[0][0]
        for i, (nid, x, y, parent, kind) in enumerate(recs):
            customers = int(rng.integers(cmin, cmax + 1)) if kind == "service_point" else 0
            x, y = round(float(x), 3), round(float(y), 3)
            nodes.append(PowerNode(nid, x, y, fid, customers, patches.locate(x, y), kind))
            if parent >= 0:
                pn = recs[parent]
                veg = spec.service_vegetation_range if kind == "service_point" else spec.vegetation_range
                length = float(np.hypot(x - pn[1], y - pn[2]))
                lines.append(PowerLine(
                    f"{fid}_L{i:03d}", pn[0], nid, round(max(length, 1.0), 3),
                    bool(rng.random() >= spec.underground_fraction),
                    round(float(rng.uniform(*veg)), 4),
                    kind == "service_point", fid))
    net = PowerNetwork(nodes, lines, feeders)

    sewage = SewageNetwork()
    if spec.pumps:
        sewage = _grow_sewage(rng, spec, net)
    problems = validate_network(net, set(patches.ids)) + validate_sewage(sewage, net)
    if problems:
        raise AssertionError("fixture generator produced an invalid bundle: " + "; ".join(problems))
    return net, sewage, patches


def _depths(net):
    depth = {r: 0 for r in net.feeders.values()}
    parent = {ln.to_node: ln.from_node for ln in net.lines}

    def d(n):
        if n not in depth:
            depth[n] = d(parent[n]) + 1
        return depth[n]

    for n in net.nodes:
        d(n.id)
    return depth


def _grow_sewage(rng, spec, net):
    junctions = [n for n in net.nodes if n.kind == "junction"]
    if tuple(spec.pump_depth_quantiles) != (0.0, 1.0):
        depth = _depths(net)
        lo, hi = np.quantile([depth[n.id] for n in junctions], spec.pump_depth_quantiles)
        junctions = [n for n in junctions if lo <= depth[n.id] <= hi]
    if len(junctions) < spec.pumps:
        raise InputError("more pumps requested than junction nodes")
    chosen = rng.choice(len(junctions), size=spec.pumps, replace=False)
    conduits, pumps = [], []
    for k, j in enumerate(sorted(chosen)):
        node = junctions[j]
        px, py = node.x, node.y
        pid = f"PS{k:02d}"
        ang = rng.uniform(0, 2 * np.pi)
        lift = f"{pid}_C00"
        out = (round(px + 30 * np.cos(ang + np.pi), 3), round(py + 30 * np.sin(ang + np.pi), 3))
        conduits.append(SewageConduit(lift, ((px, py), out), None))
        pumps.append(SewagePump(pid, px, py, node.id, lift))
        # main chain heading away from the pump, with optional one-conduit side branches
        prev_id, prev_pt = lift, (px, py)
        n = 0
        for _ in range(spec.conduit_chain_length):
            n += 1
            a = ang + rng.normal(0, 0.3)
            step = rng.uniform(*spec.conduit_length_m)
            pt = (round(prev_pt[0] + step * np.cos(a), 3), round(prev_pt[1] + step * np.sin(a), 3))
            cid = f"{pid}_C{n:02d}"
            conduits.append(SewageConduit(cid, (pt, prev_pt), prev_id))
            if rng.random() < spec.branch_probability:
                n += 1
                b = a + rng.choice([-1.0, 1.0]) * np.pi / 2
                bstep = rng.uniform(*spec.conduit_length_m)
                bpt = (round(pt[0] + bstep * np.cos(b), 3), round(pt[1] + bstep * np.sin(b), 3))
                conduits.append(SewageConduit(f"{pid}_C{n:02d}", (bpt, pt), cid))
            prev_id, prev_pt = cid, pt
    return SewageNetwork(conduits, pumps)


def observed_seed(seed):
    """Seed of the hidden episode behind ``generate_observed_series``."""
    return splitmix64((int(seed) & ((1 << 64) - 1)) ^ OBSERVED_TAG)


def generate_observed_series(net, event, frag, cfg, seed):
    """One hidden episode's per-feeder trajectory, timestamped from the event start."""
    from datetime import timedelta

    ep = run_episode(net, event, frag, cfg, observed_seed(seed), record_feeders=True)
    n = len(ep.outage_trajectory)
    hours = tuple(event.start_time + timedelta(hours=h) for h in range(n))
    totals = {f: int(t) for f, t in zip(net.topo.feeder_ids, net.topo.feeder_totals)}
    return ObservedSeries(hours, {f: list(v) for f, v in ep.feeder_trajectory.items()}, totals)


# ---------------------------------------------------------------------------
# canonical scenarios shipped with the package


@dataclass(frozen=True)
class Scenario:
    name: str
    spec: FixtureSpec
    event_params: SynthEventParams
    event_seed: int
    net: PowerNetwork
    sewage: SewageNetwork
    patches: PatchGrid
    settings: dict = None

    @property
    def event(self):
        return synth_wind_event(self.event_params, self.patches, self.event_seed)


def scenario_names():
    return sorted(p.stem for p in resources.files("distres.data").iterdir() if p.name.endswith(".json"))


def scenario_from_dict(name, d):
    """Build a scenario from ``{"fixture", "event", "event_seed", "settings"}``.

    ``settings`` carries suggested run parameters (topology, fragility,
    flood, base_seed) and is not used to build the instance itself.
    """
    unknown = set(d) - {"fixture", "event", "event_seed", "settings"}
    if unknown:
        raise InputError(f"unknown scenario keys: {sorted(unknown)}")
    spec = FixtureSpec(**d["fixture"])
    net, sewage, patches = generate_fixture(spec)
    ev = dict(d["event"])
    if ev.get("storm_center") == "network_center":
        xy = net.topo.node_xy
        ev["storm_center"] = tuple(float(v) for v in (xy.min(axis=0) + xy.max(axis=0)) / 2)
    return Scenario(name, spec, SynthEventParams(**ev), int(d.get("event_seed", 0)), net, sewage,
                    patches, dict(d.get("settings", {})))


def load_scenario(name_or_path):
    """Load a scenario by canonical name (``small``, ``medium``, ``coupled``) or JSON path."""
    p = Path(str(name_or_path))
    if p.suffix == ".json" and p.exists():
        return scenario_from_dict(p.stem, json.loads(p.read_text(encoding="utf-8")))
    ref = resources.files("distres.data") / f"{name_or_path}.json"
    if not ref.is_file():
        raise InputError(f"unknown scenario {name_or_path!r}; known: {scenario_names()}")
    return scenario_from_dict(str(name_or_path), json.loads(ref.read_text(encoding="utf-8")))


def spec_to_dict(spec):
    return asdict(spec)
