"""Self-consistency check: recover a known fragility factor.

An "observed" outage series is one hidden episode at factor 0.8. Ensembles
at other factors are compared against it with the mean ratio and the
strict and pragmatic hit rules.

Run with ``python3 demos/02_calibration_sweep.py`` (about a minute).
"""

import numpy as np

from distres.engine import EpisodeConfig, run_ensemble
from distres.fixtures import generate_observed_series, load_scenario
from distres.fragility import FragilityParams
from distres.metrics import METRICS, assess, convergence_report, summarize
from distres.network import apply_topology_assumption

sc = load_scenario("medium")
net = apply_topology_assumption(sc.net, "service_underground")
cfg = EpisodeConfig()

observed = generate_observed_series(net, sc.event, FragilityParams(fragility_factor=0.8), cfg, 100)
obs = observed.system_trajectory()
print("observed:", summarize(obs))

print("\nfactor   " + "  ".join(f"{m:>18s}" for m in METRICS))
for f in (0.6, 0.7, 0.8, 0.9, 1.0):
    res = run_ensemble(net, sc.event, FragilityParams(fragility_factor=f), cfg, 11, 128)
    a = assess(obs, [r.outage_trajectory for r in res])
    cells = [f"{a[m]['ratio']:6.2f} {'S' if a[m]['strict_hit'] else '-'}{'P' if a[m]['pragmatic_hit'] else '-'}"
             for m in METRICS]
    print(f"{f:5.1f}   " + "  ".join(f"{c:>18s}" for c in cells))
print("(ratio = simulated mean / observed; S strict hit, P pragmatic hit)")

# how many episodes are enough? nested prefixes of one 512-episode ensemble
res = run_ensemble(net, sc.event, FragilityParams(fragility_factor=0.8), cfg, 11, 512)
s = [summarize(r.outage_trajectory).as_dict() for r in res]
ladder = [32, 64, 128, 256, 512]
means = {m: [float(np.mean([v[m] for v in s[:n]])) for n in ladder] for m in METRICS}
rows, verdict, _ = convergence_report(ladder, means)
for m in METRICS:
    print(f"{m:9s}", " ".join(f"{v:10.1f}" for v in means[m]))
print(verdict)
