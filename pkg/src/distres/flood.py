"""Sewage-backup flooding driven by pump power loss.

An unpowered pump stops lifting sewage; after a lag, conduits upstream of it
(within a distance that grows each failed hour) are marked flooded and given
a buffer radius that grows by a random increment every hour they stay
sustained. Once no failed pump sustains a conduit its radius shrinks by a
random decrement until it disappears. The flood footprint is the union of the
conduit buffers ("capsules").
"""

from dataclasses import dataclass, field

import numpy as np

from ._csvio import InputError
from .network import upstream_conduits


@dataclass(frozen=True)
class FloodConfig:
    pump_lag_h: int = 1
    growth_min_m: float = 30.0
    growth_max_m: float = 60.0
    upstream_rate_m_per_h: float = 100.0
    recession_min_m: float = 30.0
    recession_max_m: float = 60.0
    raster_cell_m: float = 10.0

    def __post_init__(self):
        if self.pump_lag_h < 0:
            raise InputError("pump_lag_h must be non-negative")
        if not (self.growth_min_m <= self.growth_max_m and self.recession_min_m <= self.recession_max_m):
            raise InputError("flood ranges must satisfy min <= max")
        if not (self.upstream_rate_m_per_h > 0 and self.raster_cell_m > 0):
            raise InputError("upstream rate and raster cell size must be positive")
        if self.recession_min_m <= 0:
            raise InputError("recession_min_m must be positive so floods recede")


@dataclass(frozen=True)
class FloodState:
    flooded: dict = field(default_factory=dict)
    sustaining_pump: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.flooded)


@dataclass(frozen=True)
class FloodResult:
    flooded_customers_trajectory: tuple
    flooded_area_trajectory: tuple
    metrics: dict


def pump_power_status(net, failed_lines, pumps):
    """Ids of pumps whose power node has lost its path to the feeder root."""
    if not isinstance(failed_lines, np.ndarray):
        failed_lines = net.line_mask(failed_lines)
    down = net.topo.node_disconnected(failed_lines)
    idx = net.topo.node_index
    return {p.id for p in pumps if down[idx[p.power_node_id]]}


def upstream_table(sewage):
    """Every conduit upstream of each pump with its distance, sorted by distance."""
    table = {}
    for p in sewage.pumps:
        d = upstream_conduits(sewage, p.id, float("inf"))
        table[p.id] = sorted(d.items(), key=lambda kv: (kv[1], kv[0]))
    return table


def advance_flood(state, unpowered, hours_unpowered, sewage, cfg, rng, table=None):
    """One hourly flood update; returns a new ``FloodState``.

    ``hours_unpowered[p]`` counts consecutive unpowered hours including the
    current one. Random draws are taken in sorted conduit-id order.
    """
    reach = {}
    for pid in sorted(unpowered):
        hu = hours_unpowered.get(pid, 0)
        if hu < cfg.pump_lag_h:
            continue
        limit = cfg.upstream_rate_m_per_h * (hu - cfg.pump_lag_h + 1)
        if table is not None:
            conduits = [c for c, d in table[pid] if d <= limit]
        else:
            conduits = upstream_conduits(sewage, pid, limit)
        for c in conduits:
            reach.setdefault(c, set()).add(pid)

    flooded, sustain = {}, {}
    for c in sorted(set(state.flooded) | set(reach)):
        if c in reach:
            flooded[c] = state.flooded.get(c, 0.0) + rng.uniform(cfg.growth_min_m, cfg.growth_max_m)
            sustain[c] = frozenset(reach[c])
        else:
            r = state.flooded[c] - rng.uniform(cfg.recession_min_m, cfg.recession_max_m)
            if r > 0:
                flooded[c] = r
                sustain[c] = frozenset()
    return FloodState(flooded, sustain)


def _segments(sewage, conduit_ids):
    """Stacked segment endpoints and the owning conduit's position in ``conduit_ids``."""
    a, b, owner = [], [], []
    for k, cid in enumerate(conduit_ids):
        p = np.asarray(sewage.conduit_by_id[cid].polyline, dtype=float)
        a.append(p[:-1])
        b.append(p[1:])
        owner.append(np.full(len(p) - 1, k))
    return np.concatenate(a), np.concatenate(b), np.concatenate(owner)


def _segment_distance(pts, a, b):
    """Distance from each point (rows) to each segment (columns)."""
    ab = b - a
    ap = pts[:, None, :] - a[None, :, :]
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.where(denom > 0, np.einsum("kij,ij->ki", ap, ab) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.hypot(*(pts[:, None, :] - closest).transpose(2, 0, 1))


def covered(points, state, sewage, chunk=4096):
    """Boolean mask of points inside the union of flooded capsules."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    mask = np.zeros(len(pts), dtype=bool)
    if not state.flooded or len(pts) == 0:
        return mask
    ids = sorted(state.flooded)
    a, b, owner = _segments(sewage, ids)
    radius = np.array([state.flooded[c] for c in ids])[owner]
    lo = np.minimum(a, b) - radius[:, None]
    hi = np.maximum(a, b) + radius[:, None]
    near = np.flatnonzero(np.all(pts >= lo.min(axis=0), axis=1) & np.all(pts <= hi.max(axis=0), axis=1))
    for s in range(0, len(near), chunk):
        sel = near[s:s + chunk]
        d = _segment_distance(pts[sel], a, b)
        mask[sel] = np.any(d <= radius[None, :], axis=1)
    return mask


def flooded_customers(state, customer_points, sewage):
    """Customers whose location lies within any flooded conduit's buffer.

    ``customer_points`` is ``(xy, counts)``; a point covered by several
    capsules counts once.
    """
    xy, counts = customer_points
    if not state.flooded:
        return 0
    return int(np.asarray(counts)[covered(xy, state, sewage)].sum())


def _capsule_rows(a, b, r, ys):
    """x-interval of one capsule on each horizontal line ``y in ys``.

    The capsule is convex and is the union of two end disks and the swept
    rectangle, so each row meets it in one interval: the hull of the pieces'
    intervals. Rows that miss it get ``(inf, -inf)``.
    """
    left = np.full(ys.shape, np.inf)
    right = np.full(ys.shape, -np.inf)
    for c in (a, b):
        dy = ys - c[1]
        hit = np.abs(dy) <= r
        w = np.sqrt(np.maximum(r * r - dy * dy, 0.0))
        left = np.where(hit, np.minimum(left, c[0] - w), left)
        right = np.where(hit, np.maximum(right, c[0] + w), right)
    d = b - a
    L = np.hypot(*d)
    if L > 0:
        n = np.array([-d[1], d[0]]) * (r / L)
        quad = (a + n, b + n, b - n, a - n)
        for p, q in zip(quad, quad[1:] + quad[:1]):
            if p[1] == q[1]:
                continue
            ylo, yhi = min(p[1], q[1]), max(p[1], q[1])
            hit = (ys >= ylo) & (ys <= yhi)
            x = p[0] + (ys - p[1]) * (q[0] - p[0]) / (q[1] - p[1])
            left = np.where(hit, np.minimum(left, x), left)
            right = np.where(hit, np.maximum(right, x), right)
    return left, right


def flooded_area(state, cfg, sewage):
    """Area (m^2) of the capsule union by counting covered raster cell centres.

    Cells are aligned to multiples of ``cfg.raster_cell_m``. The error is
    bounded by roughly perimeter * cell size.
    """
    if not state.flooded:
        return 0.0
    h = cfg.raster_cell_m
    ids = sorted(state.flooded)
    a, b, owner = _segments(sewage, ids)
    radius = np.array([state.flooded[c] for c in ids])[owner]
    lo = (np.minimum(a, b) - radius[:, None]).min(axis=0)
    hi = (np.maximum(a, b) + radius[:, None]).max(axis=0)
    i0, j0 = np.floor(lo / h).astype(int)
    i1, j1 = np.ceil(hi / h).astype(int)
    nx, ny = i1 - i0, j1 - j0
    ys = (np.arange(j0, j1) + 0.5) * h
    # per row, +1 where a capsule's covered run of cell centres starts, -1 after it ends
    diff = np.zeros((ny, nx + 1), dtype=np.int32)
    rows = np.arange(ny)
    for k in range(len(a)):
        left, right = _capsule_rows(a[k], b[k], radius[k], ys)
        ok = np.isfinite(left)
        if not ok.any():
            continue
        il = np.clip(np.ceil(left[ok] / h - 0.5).astype(np.int64) - i0, 0, nx)
        ir = np.clip(np.floor(right[ok] / h - 0.5).astype(np.int64) - i0 + 1, 0, nx)
        keep = ir > il
        np.add.at(diff, (rows[ok][keep], il[keep]), 1)
        np.add.at(diff, (rows[ok][keep], ir[keep]), -1)
    n = int(np.count_nonzero(np.cumsum(diff[:, :nx], axis=1) > 0))
    return n * h * h


def flood_metrics(customers, area):
    customers = np.asarray(customers, dtype=float)
    area = np.asarray(area, dtype=float)
    if customers.shape != area.shape:
        raise InputError("flood trajectories must have the same length")
    if customers.size == 0:
        return dict(customer_peak=0, persistence_h=0, customer_auc=0, area_peak=0.0, area_auc=0.0)
    return dict(
        customer_peak=int(customers.max()),
        persistence_h=int(np.count_nonzero(customers > 0)),
        customer_auc=int(customers.sum()),
        area_peak=float(area.max()),
        area_auc=float(area.sum()),
    )
