"""Observed outage series and historical event curation.

Outage polygons are intersected with the customer-carrying nodes of the
power graph to count customers out per feeder per hour. Candidate hours are
those in which enough feeders exceed an outage fraction; candidate runs
separated by short gaps are merged into events, short events dropped, and
events touching near-systemwide outage hours flagged for review.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from datetime import timedelta

import numpy as np

from ._csvio import InputError, field_errors, read_rows, write_rows
from .hazard import format_time, parse_time

log = logging.getLogger(__name__)

POLYGONS_HEADER = ("timestamp", "polygon_id", "vertex_index", "x_m", "y_m")
SERIES_HEADER = ("timestamp", "feeder_id", "customers_out", "feeder_total")


@dataclass(frozen=True)
class OutagePolygonSnapshot:
    timestamp: object
    polygons: tuple

    def __post_init__(self):
        polys = tuple(tuple((float(x), float(y)) for x, y in p) for p in self.polygons)
        for p in polys:
            if len(p) < 3:
                raise InputError(f"{self.timestamp}: polygon with {len(p)} vertices (need >= 3)")
            if _signed_area(p) == 0:
                raise InputError(f"{self.timestamp}: zero-area polygon")
        object.__setattr__(self, "polygons", polys)


@dataclass(frozen=True)
class ObservedSeries:
    hours: tuple
    per_feeder_out: dict
    per_feeder_total: dict

    def system_trajectory(self, start=None, end=None):
        """Total customers out per hour, optionally restricted to ``[start, end]``."""
        total = np.zeros(len(self.hours), dtype=np.int64)
        for v in self.per_feeder_out.values():
            total += np.asarray(v, dtype=np.int64)
        keep = [i for i, h in enumerate(self.hours)
                if (start is None or h >= start) and (end is None or h <= end)]
        return total[keep]

    @property
    def total_customers(self):
        return sum(self.per_feeder_total.values())


@dataclass
class CuratedEvent:
    start_hour: object
    end_hour: object
    candidate_hours: list = field(default_factory=list)
    excluded: bool = False
    reason: str = ""

    @property
    def duration_h(self):
        return _hour_diff(self.end_hour, self.start_hour) + 1


def _hour_diff(a, b):
    if isinstance(a, (int, np.integer)):
        return int(a - b)
    return int(round((a - b).total_seconds() / 3600))


def _signed_area(p):
    x = np.array([v[0] for v in p])
    y = np.array([v[1] for v in p])
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def points_in_polygon(points, poly, eps=1e-9):
    """Even-odd ray casting; points on an edge (within ``eps``) count as inside."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    px, py = pts[:, 0], pts[:, 1]
    v = np.asarray(poly, dtype=float)
    a, b = v, np.roll(v, -1, axis=0)
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    for (x1, y1), (x2, y2) in zip(a, b):
        # crossing test for a ray toward +x
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xint)
        dx, dy = x2 - x1, y2 - y1
        seg2 = dx * dx + dy * dy
        t = np.clip(((px - x1) * dx + (py - y1) * dy) / seg2, 0.0, 1.0) if seg2 > 0 else 0.0
        on_edge |= np.hypot(px - (x1 + t * dx), py - (y1 + t * dy)) <= eps
    return inside | on_edge


def observed_outage_series(snapshots, net):
    """Per-feeder customers out per hour from outage polygon snapshots.

    Hours missing between the first and last snapshot are filled with zero
    outage (and logged). A node is out when it lies in any polygon of the hour.
    """
    topo = net.topo
    xy, cust, feeder = topo.node_xy, topo.customers, topo.node_feeder
    fids = topo.feeder_ids
    totals = {f: int(t) for f, t in zip(fids, topo.feeder_totals)}
    if not snapshots:
        return ObservedSeries((), {f: [] for f in fids}, totals)
    by_time = {}
    for s in snapshots:
        by_time.setdefault(s.timestamp, []).extend(s.polygons)
    times = sorted(by_time)
    first, last = times[0], times[-1]
    span = _hour_diff(last, first)
    hours = [first + (timedelta(hours=k) if not isinstance(first, int) else k) for k in range(span + 1)]
    missing = len(hours) - len(times)
    if missing:
        log.warning("%d hour(s) without outage snapshots treated as zero outage", missing)
    out = {f: [] for f in fids}
    has_cust = cust > 0
    for h in hours:
        inside = np.zeros(len(cust), dtype=bool)
        for poly in by_time.get(h, ()):
            cand = has_cust & ~inside
            if cand.any():
                idx = np.flatnonzero(cand)
                inside[idx] |= points_in_polygon(xy[idx], poly)
        per = np.bincount(feeder[inside], weights=cust[inside], minlength=len(fids))
        for j, f in enumerate(fids):
            out[f].append(int(per[j]))
    return ObservedSeries(tuple(hours), out, totals)


def detect_candidate_hours(series, frac_threshold=0.05, min_feeders=2):
    """Hours where at least ``min_feeders`` feeders have out/total strictly above the threshold."""
    fids = [f for f in series.per_feeder_out if series.per_feeder_total.get(f, 0) > 0]
    cands = []
    for i, h in enumerate(series.hours):
        n = sum(series.per_feeder_out[f][i] / series.per_feeder_total[f] > frac_threshold
                for f in fids)
        if n >= min_feeders:
            cands.append(h)
    return cands


def merge_and_filter(candidates, max_gap_h=3, min_duration_h=6, keep_short=False):
    """Merge candidate runs across gaps of up to ``max_gap_h`` hours; drop short events.

    Duration counts hours inclusively from first to last candidate, gap hours
    included. ``keep_short`` returns the pre-filter events.
    """
    events = []
    for h in candidates:
        if events and _hour_diff(h, events[-1].end_hour) - 1 <= max_gap_h:
            events[-1].end_hour = h
            events[-1].candidate_hours.append(h)
        else:
            events.append(CuratedEvent(h, h, [h]))
    if keep_short:
        return events
    return [e for e in events if e.duration_h >= min_duration_h]


def flag_systemwide_artifacts(series, events, coverage_threshold=0.8):
    """Mark events containing an hour with systemwide coverage >= threshold as excluded."""
    total = series.total_customers
    traj = series.system_trajectory()
    index = {h: i for i, h in enumerate(series.hours)}
    for e in events:
        idx = [i for h, i in index.items() if e.start_hour <= h <= e.end_hour]
        if total > 0 and idx and traj[idx].max() / total >= coverage_threshold:
            e.excluded = True
            e.reason = "systemwide-artifact"
    return events


def curate(series, frac_threshold=0.05, min_feeders=2, max_gap_h=3, min_duration_h=6,
           coverage_threshold=0.8):
    cands = detect_candidate_hours(series, frac_threshold, min_feeders)
    events = merge_and_filter(cands, max_gap_h, min_duration_h)
    return flag_systemwide_artifacts(series, events, coverage_threshold)


# ---------------------------------------------------------------------------
# IO


def load_polygons(path):
    """Read ``outage_polygons.csv`` into snapshots sorted by timestamp.

    A zero-byte file means no outage polygons at all.
    """
    if Path(path).stat().st_size == 0:
        return []
    polys = {}
    for lineno, r in read_rows(path, POLYGONS_HEADER):
        with field_errors(path, lineno):
            t = parse_time(r["timestamp"])
            polys.setdefault(t, {}).setdefault(r["polygon_id"], []).append(
                (int(r["vertex_index"]), float(r["x_m"]), float(r["y_m"])))
    snaps = []
    for t in sorted(polys):
        rings = []
        for pid, verts in polys[t].items():
            verts.sort()
            rings.append([(x, y) for _, x, y in verts])
            if len(verts) < 3:
                raise InputError(f"{path}: polygon {pid} at {format_time(t)} has {len(verts)} vertices")
        snaps.append(OutagePolygonSnapshot(t, tuple(rings)))
    return snaps


def save_polygons(path, snapshots):
    rows = []
    for s in snapshots:
        for k, poly in enumerate(s.polygons):
            for i, (x, y) in enumerate(poly):
                rows.append((format_time(s.timestamp), f"poly{k}", i, x, y))
    write_rows(path, POLYGONS_HEADER, rows)


def save_series(path, series):
    rows = []
    for i, h in enumerate(series.hours):
        for f in sorted(series.per_feeder_out):
            rows.append((format_time(h), f, series.per_feeder_out[f][i], series.per_feeder_total[f]))
    write_rows(path, SERIES_HEADER, rows)


def load_series(path):
    hours, out, totals = {}, {}, {}
    for lineno, r in read_rows(path, SERIES_HEADER):
        with field_errors(path, lineno):
            t = parse_time(r["timestamp"])
            hours[t] = None
            out.setdefault(r["feeder_id"], {})[t] = int(r["customers_out"])
            totals[r["feeder_id"]] = int(r["feeder_total"])
    hs = sorted(hours)
    return ObservedSeries(tuple(hs), {f: [v.get(h, 0) for h in hs] for f, v in out.items()}, totals)


def events_to_json(events):
    return [{"start": format_time(e.start_hour) if not isinstance(e.start_hour, int) else e.start_hour,
             "end": format_time(e.end_hour) if not isinstance(e.end_hour, int) else e.end_hour,
             "duration_h": e.duration_h, "excluded": e.excluded, "reason": e.reason}
            for e in events]


def save_events(path, events):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(events_to_json(events), fh, indent=2)
        fh.write("\n")
