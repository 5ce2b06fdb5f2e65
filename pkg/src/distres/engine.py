"""Monte Carlo outage-and-restoration episodes.

An episode has two phases. During the hazard window every hour's gust frame
is applied to the intact overhead lines and failures accumulate; nothing is
repaired. From the end of the window, crews work through the failed lines:
the next free crew picks a line by the configured ordering policy, travels
there in a straight line, repairs it for a uniform random time, and the line
is back in service at the (real-valued) finish time. Customers out is
recorded at integer hours until every line is repaired, ending with one zero.

Optionally the pump outage trajectory drives the flood model hour by hour.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._csvio import InputError
from .flood import FloodState, advance_flood, flood_metrics, FloodResult, covered, flooded_area, upstream_table
from .fragility import LineExposure, sample_failures_array
from .rng import episode_seed, episode_streams

POLICIES = ("proximity", "random", "criticality", "hybrid_dynamic")


@dataclass(frozen=True)
class EpisodeConfig:
    crews: int = 12
    repair_time_h: tuple = (2.0, 3.0)
    ordering: str = "proximity"
    travel_speed_m_per_h: float = 30000.0
    hybrid_weights: tuple = (0.4, 0.3, 0.3)
    backlog_ramp_h: float = 24.0

    def __post_init__(self):
        object.__setattr__(self, "repair_time_h", tuple(float(v) for v in self.repair_time_h))
        object.__setattr__(self, "hybrid_weights", tuple(float(v) for v in self.hybrid_weights))
        if self.crews < 1:
            raise InputError("crews must be >= 1")
        lo, hi = self.repair_time_h
        if not 0 <= lo <= hi:
            raise InputError("repair_time_h must satisfy 0 <= min <= max")
        if self.ordering not in POLICIES:
            raise InputError(f"unknown ordering {self.ordering!r}; expected one of {POLICIES}")
        if self.travel_speed_m_per_h < 0:
            raise InputError("travel_speed_m_per_h must be >= 0 (0 disables travel)")
        if len(self.hybrid_weights) != 3 or min(self.hybrid_weights) < 0 or sum(self.hybrid_weights) <= 0:
            raise InputError("hybrid_weights must be three non-negative numbers, not all zero")
        if not self.backlog_ramp_h > 0:
            raise InputError("backlog_ramp_h must be positive")


@dataclass
class CrewState:
    crew_id: int
    position: tuple
    busy_until: float
    assigned_line: str = None


@dataclass(frozen=True)
class EpisodeResult:
    episode_index: int
    seed: int
    outage_trajectory: tuple
    failure_log: tuple
    repair_log: tuple
    pump_outage_trajectory: tuple = ()
    feeder_trajectory: dict = field(default=None, compare=True)
    flood: FloodResult = None


# ---------------------------------------------------------------------------
# repair ordering


def _minmax(v):
    v = np.asarray(v, dtype=float)
    span = v.max() - v.min()
    if span <= 0:
        return np.zeros_like(v)
    return (v - v.min()) / span


def backlog_weight(hour, hazard_window, cfg):
    """Backlog weight ramps linearly from w_b to 2*w_b over ``backlog_ramp_h``."""
    elapsed = max(0.0, hour - hazard_window)
    return cfg.hybrid_weights[2] * (1.0 + min(1.0, elapsed / cfg.backlog_ramp_h))


def _pick_index(policy, cand, crew_xy, topo, hour, backlog, rng, cfg, hazard_window):
    """Position in ``cand`` of the next line to repair.

    ``cand`` holds line indices sorted by line id, so ``argmax``/``argmin``
    (first occurrence) break ties toward the lowest id.
    """
    if len(cand) == 1:
        return 0
    if policy == "random":
        return int(rng.integers(len(cand)))
    if policy == "criticality":
        return int(np.argmax(topo.line_downstream[cand]))
    dist = np.hypot(*(topo.line_mid[cand] - crew_xy).T)
    if policy == "proximity":
        return int(np.argmin(dist))
    if policy == "hybrid_dynamic":
        wc, wd, _ = cfg.hybrid_weights
        wb = backlog_weight(hour, hazard_window, cfg)
        total = wc + wd + wb
        score = (wc * _minmax(topo.line_downstream[cand])
                 + wd * (1.0 - _minmax(dist))
                 + wb * _minmax(backlog[topo.line_feeder[cand]])) / total
        return int(np.argmax(score))
    raise InputError(f"unknown ordering {policy!r}")


def pick_next_repair(policy, failed, crew, net, hour, backlog, rng, cfg=EpisodeConfig(),
                     hazard_window=0):
    """Id of the line ``crew`` should repair next.

    ``backlog`` maps feeder id to its outstanding failed-line count.
    """
    if not failed:
        raise InputError("no failed lines to choose from")
    topo = net.topo
    ids = sorted(failed)
    cand = np.array([topo.line_index[i] for i in ids], dtype=np.int64)
    bl = np.array([backlog.get(f, 0) for f in topo.feeder_ids], dtype=float)
    k = _pick_index(policy, cand, np.asarray(crew.position, dtype=float), topo, hour, bl, rng,
                    cfg, hazard_window)
    return ids[k]


# ---------------------------------------------------------------------------
# episodes


class Prepared:
    """Per-ensemble precomputation shared read-only by all episodes."""

    def __init__(self, net, event, sewage=None):
        if not event.frames:
            raise InputError("event has no frames")
        self.net = net
        self.topo = net.topo
        patch_ids = sorted({n.patch_id for n in net.nodes})
        self.gust = event.gust_matrix(patch_ids)
        self.exposure = LineExposure(net, patch_ids)
        self.hazard_window = event.hazard_window_hours
        ids = [ln.id for ln in net.lines]
        self.line_ids = ids
        self.id_rank = np.empty(len(ids), dtype=np.int64)
        self.id_rank[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(len(ids))
        roots = [net.feeders[f] for f in self.topo.feeder_ids]
        self.crew_home = [self.topo.node_xy[self.topo.node_index[r]] for r in roots]

        self.sewage = sewage
        self.pumps = tuple(sewage.pumps) if sewage is not None else ()
        if self.pumps:
            self.pump_ids = [p.id for p in self.pumps]
            self.pump_node = np.array([self.topo.node_index[p.power_node_id] for p in self.pumps])
            self.upstream = upstream_table(sewage)
            self.customer_points = net.customer_points()


def _dispatch(prep, failed_idx, cfg, rng_repair, rng_policy):
    """Assign every failed line to a crew; returns repair records in dispatch order."""
    topo, H = prep.topo, prep.hazard_window
    cand = failed_idx[np.argsort(prep.id_rank[failed_idx], kind="stable")]
    nf = len(topo.feeder_ids)
    crews = [CrewState(k, tuple(prep.crew_home[k % nf]), float(H)) for k in range(cfg.crews)]
    backlog = np.bincount(topo.line_feeder[cand], minlength=nf).astype(float)
    lo, hi = cfg.repair_time_h
    speed = cfg.travel_speed_m_per_h
    records = []
    while cand.size:
        crew = min(crews, key=lambda c: (c.busy_until, c.crew_id))
        t = crew.busy_until
        xy = np.asarray(crew.position, dtype=float)
        k = _pick_index(cfg.ordering, cand, xy, topo, t, backlog, rng_policy, cfg, H)
        line = int(cand[k])
        travel = float(np.hypot(*(topo.line_mid[line] - xy))) / speed if speed > 0 else 0.0
        start = t + travel
        finish = start + rng_repair.uniform(lo, hi)
        records.append((start, finish, line, crew.crew_id))
        crew.busy_until = finish
        crew.position = tuple(topo.line_mid[line])
        crew.assigned_line = prep.line_ids[line]
        backlog[topo.line_feeder[line]] -= 1
        cand = np.delete(cand, k)
    return records


def run_episode(net, event, frag, cfg, seed, *, sewage=None, flood=None, episode_index=0,
                record_feeders=False, prep=None):
    prep = prep or Prepared(net, event, sewage)
    topo, H = prep.topo, prep.hazard_window
    streams = episode_streams(seed)
    n_lines = len(net.lines)

    failed = np.zeros(n_lines, dtype=bool)
    fail_hour = np.full(n_lines, -1, dtype=np.int64)
    for h in range(H):
        new = sample_failures_array(prep.exposure, prep.gust[h], ~failed, frag, streams["failures"])
        failed[new] = True
        fail_hour[new] = h
    failed_idx = np.flatnonzero(failed)
    order = failed_idx[np.lexsort((prep.id_rank[failed_idx], fail_hour[failed_idx]))]
    failure_log = tuple((int(fail_hour[i]), prep.line_ids[i]) for i in order)

    records = _dispatch(prep, failed_idx, cfg, streams["repair"], streams["policy"])
    finish = np.full(n_lines, np.inf)
    for _, f, line, _ in records:
        finish[line] = f
    end = max(H, math.ceil(max((r[1] for r in records), default=0.0)))

    traj, feeders, pump_down = [], [], []
    for h in range(end + 1):
        state = (fail_hour >= 0) & (fail_hour <= h) & (finish > h)
        if not state.any():
            traj.append(0)
            if record_feeders:
                feeders.append(np.zeros(len(topo.feeder_ids), dtype=np.int64))
            if prep.pumps:
                pump_down.append(frozenset())
            continue
        mask = topo.outage_mask(state)
        traj.append(int(topo.customers_pre[mask].sum()))
        if record_feeders:
            feeders.append(np.bincount(topo.node_feeder_pre[mask], weights=topo.customers_pre[mask],
                                       minlength=len(topo.feeder_ids)).astype(np.int64))
        if prep.pumps:
            down = np.zeros(len(topo.order), dtype=bool)
            down[topo.order[mask]] = True
            pump_down.append(frozenset(pid for pid, n in zip(prep.pump_ids, prep.pump_node) if down[n]))

    repair_log = tuple((s, f, prep.line_ids[line], c) for s, f, line, c in records)
    feeder_traj = None
    if record_feeders:
        arr = np.array(feeders)
        feeder_traj = {fid: tuple(int(v) for v in arr[:, j]) for j, fid in enumerate(topo.feeder_ids)}
    flood_result = None
    if flood is not None and prep.pumps:
        flood_result = simulate_flood(prep, pump_down, flood, streams["flood"])
    return EpisodeResult(episode_index, int(seed), tuple(traj), failure_log, repair_log,
                         tuple(pump_down), feeder_traj, flood_result)


def simulate_flood(prep, pump_down, cfg, rng):
    """Flood trajectories for one episode's per-hour unpowered pump sets.

    Runs past the end of the power trajectory (all pumps powered) until every
    flooded conduit has receded.
    """
    state = FloodState()
    hours_unpowered = {}
    customers, area = [], []
    h = 0
    while h < len(pump_down) or state:
        down = pump_down[h] if h < len(pump_down) else frozenset()
        hours_unpowered = {p: hours_unpowered.get(p, 0) + 1 for p in down}
        state = advance_flood(state, down, hours_unpowered, prep.sewage, cfg, rng, prep.upstream)
        if state:
            xy, counts = prep.customer_points
            customers.append(int(counts[covered(xy, state, prep.sewage)].sum()))
            area.append(flooded_area(state, cfg, prep.sewage))
        else:
            customers.append(0)
            area.append(0.0)
        h += 1
    return FloodResult(tuple(customers), tuple(area), flood_metrics(customers, area))


# ---------------------------------------------------------------------------
# ensembles

_WORKER = {}


def _init_worker(args):
    _WORKER["args"] = args
    _WORKER["prep"] = Prepared(args["net"], args["event"], args["sewage"])


def _run_index(i):
    a = _WORKER["args"]
    return run_episode(a["net"], a["event"], a["frag"], a["cfg"], episode_seed(a["base_seed"], i),
                       sewage=a["sewage"], flood=a["flood"], episode_index=i,
                       record_feeders=a["record_feeders"], prep=_WORKER["prep"])


def run_ensemble(net, event, frag, cfg, base_seed, n_episodes, flood=None, *, sewage=None,
                 workers=1, record_feeders=False):
    """``n_episodes`` independent episodes; episode ``i`` uses ``episode_seed(base_seed, i)``.

    Results are stored by index, so the output does not depend on ``workers``.
    """
    if n_episodes < 1:
        raise InputError("n_episodes must be >= 1")
    args = dict(net=net, event=event, frag=frag, cfg=cfg, base_seed=base_seed, sewage=sewage,
                flood=flood, record_feeders=record_feeders)
    workers = max(1, int(workers or 1))
    if workers == 1 or n_episodes == 1:
        _init_worker(args)
        try:
            return [_run_index(i) for i in range(n_episodes)]
        finally:
            _WORKER.clear()
    chunk = max(1, n_episodes // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(args,)) as ex:
        return list(ex.map(_run_index, range(n_episodes), chunksize=chunk))


def default_workers():
    return os.cpu_count() or 1
