"""Power outages that last long enough stop sewage pumps and back up sewers.

Runs 1000 coupled episodes and groups them by power-outage AUC decile to
show that flooding only appears among the worst outages.

Run with ``python3 demos/03_flood_coupling.py`` (about 20 s).
"""

import numpy as np

from distres.engine import EpisodeConfig, run_ensemble
from distres.fixtures import load_scenario
from distres.flood import FloodConfig
from distres.fragility import FragilityParams
from distres.metrics import decile_report, summarize
from distres.network import apply_topology_assumption

sc = load_scenario("coupled")
st = sc.settings
net = apply_topology_assumption(sc.net, st["topology"])
flood = FloodConfig(**st["flood"])
print(f"{len(sc.sewage.pumps)} pumps, {len(sc.sewage.conduits)} conduits, pump lag {flood.pump_lag_h} h")

res = run_ensemble(net, sc.event, FragilityParams(**st["fragility"]), EpisodeConfig(), st["base_seed"], 1000,
                   flood, sewage=sc.sewage)
power_auc = np.array([summarize(r.outage_trajectory).auc_customer_hours for r in res])
flags = np.array([r.flood.metrics["customer_peak"] > 0 for r in res])
fauc = np.array([r.flood.metrics["customer_auc"] for r in res])
print(f"flood occurrence {flags.mean():.1%}, mean flood customer AUC {fauc.mean():.1f}")

print("\ndecile  mean power AUC  flood occurrence  mean flood AUC")
for row in decile_report(power_auc, flags, fauc):
    print(f"{row['decile']:6d}  {row['mean_power_auc']:14.0f}  {row['flood_occurrence']:16.2f}  "
          f"{row['mean_flood_customer_auc']:14.1f}")

# the longest pump outage is what matters, not the number of customers out
longest = []
for r in res:
    run, best = {}, 0
    for down in r.pump_outage_trajectory:
        run = {p: run.get(p, 0) + 1 for p in down}
        best = max([best, *run.values()])
    longest.append(best)
longest = np.array(longest)
print(f"\nlongest pump outage: flooded episodes {longest[flags].min() if flags.any() else 0} h and up, "
      f"dry episodes at most {longest[~flags].max()} h")

worst = int(np.argmax(fauc))
f = res[worst].flood
print(f"worst episode {worst}: flooded customers by hour {list(f.flooded_customers_trajectory)}")
print(f"peak flooded area {max(f.flooded_area_trajectory) / 1e6:.2f} km^2")
