"""Walk through one storm episode on the small packaged network.

Run with ``python3 demos/01_single_episode.py``.
"""

import numpy as np

from distres.engine import EpisodeConfig, run_ensemble, run_episode
from distres.fixtures import load_scenario
from distres.fragility import FragilityParams, failure_probability
from distres.hazard import spatial_stats, type_event
from distres.metrics import summarize
from distres.network import apply_topology_assumption, downstream_customers

sc = load_scenario("small")
net = apply_topology_assumption(sc.net, "service_underground")
ev = sc.event
print(f"{len(net.lines)} lines, {net.total_customers} customers, {len(net.feeders)} feeders")
print(f"event {ev.event_id}: {ev.hazard_window_hours} h, typed as {type_event(ev)}")

# the storm in numbers: p95 and max gust over patches, hour by hour
for f in ev.frames:
    p95, mx = spatial_stats(f)
    print(f"  hour {f.hour_index:2d}  p95 {p95:5.1f} m/s  max {mx:5.1f} m/s")

# how fragile is a typical overhead line at the peak?
frag = FragilityParams(fragility_factor=1.0)
line = next(ln for ln in net.lines if ln.overhead)
for g in (20.0, 25.0, 30.0, 35.0):
    print(f"  gust {g:4.1f} -> hourly failure probability {failure_probability(g, line, frag):.3f}")

ep = run_episode(net, ev, frag, EpisodeConfig(crews=4), seed=2024)
print("\nfailures (hour, line):", ep.failure_log[:8], "..." if len(ep.failure_log) > 8 else "")
print("customers out by hour:", list(ep.outage_trajectory))
print("first repairs (start, finish, line, crew):")
for s, f, lid, c in ep.repair_log[:5]:
    print(f"  {s:6.2f} {f:6.2f}  {lid:10s} crew {c}  feeds {downstream_customers(net, lid)} customers")
print(summarize(ep.outage_trajectory))

# same storm, four repair orderings, 64 episodes each
print("\nmean outage AUC (customer-hours) by ordering:")
for ordering in ("proximity", "random", "criticality", "hybrid_dynamic"):
    res = run_ensemble(net, ev, frag, EpisodeConfig(crews=4, ordering=ordering), 7, 64)
    auc = np.mean([summarize(r.outage_trajectory).auc_customer_hours for r in res])
    print(f"  {ordering:15s} {auc:9.0f}")
