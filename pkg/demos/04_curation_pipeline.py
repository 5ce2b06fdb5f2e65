"""From hourly outage polygons to curated events.

Builds a synthetic polygon feed over the small network with one real storm
plus two decoys: a short blip and a territory-wide reporting glitch. The feed
becomes per-feeder outage fractions, then the curation rules run on it.

Run with ``python3 demos/04_curation_pipeline.py``.
"""

from datetime import timedelta

import numpy as np

from distres.curation import (OutagePolygonSnapshot, curate, detect_candidate_hours, merge_and_filter,
                              observed_outage_series)
from distres.fixtures import load_scenario
from distres.hazard import parse_time

sc = load_scenario("small")
net = sc.net
t0 = parse_time("2023-08-24T00:00Z")
xy = net.topo.node_xy
lo, hi = xy.min(axis=0) - 10, xy.max(axis=0) + 10


def hr(t):
    return int((t - t0).total_seconds() // 3600)


def box(x0, y0, x1, y1):
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


def feeder_patch(fid, share):
    """Box over the first ``share`` of a feeder's service points (sorted by x)."""
    pts = np.array([(n.x, n.y) for n in net.nodes if n.feeder_id == fid and n.customers > 0])
    pts = pts[np.argsort(pts[:, 0])][: max(1, int(share * len(pts)))]
    return box(*(pts.min(axis=0) - 1), *(pts.max(axis=0) + 1))


storm = (feeder_patch("F00", 0.3), feeder_patch("F01", 0.2))
snaps = []
for h in range(40):
    if 2 <= h <= 6 or 9 <= h <= 13:    # storm with a 2 h lull
        polys = storm
    elif h in (20, 21):                 # short blip on one feeder pair
        polys = storm
    elif h in range(30, 36):            # glitch: the whole territory reported out
        polys = (box(*lo, *hi),)
    else:
        polys = (feeder_patch("F02", 0.02),)
    snaps.append(OutagePolygonSnapshot(t0 + timedelta(hours=h), polys))

series = observed_outage_series(snaps, net)
print("customers out per hour:", [int(v) for v in series.system_trajectory()])

cands = detect_candidate_hours(series)
print("candidate hours:", [hr(c) for c in cands])
raw = merge_and_filter(cands, keep_short=True)
print("merged spans before the 6 h filter:", [(hr(e.start_hour), hr(e.end_hour)) for e in raw])
for e in curate(series):
    s = hr(e.start_hour)
    print(f"event hours {s}..{s + e.duration_h - 1}: {e.duration_h} h, "
          f"{'excluded (' + e.reason + ')' if e.excluded else 'retained'}")
