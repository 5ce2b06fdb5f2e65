"""Trajectory summaries and simulated-vs-observed assessment.

Three summaries per outage trajectory: peak customers out, restoration
duration (first to last hour with anyone out, inclusive) and outage
intensity (area under the hourly curve, customer-hours). An observed event
is compared against the ensemble through the mean ratio and two hit rules:
strict (observed inside the p05-p95 band) and pragmatic (mean within 0.5x
to 2x of observed). All bounds are inclusive.
"""

from dataclasses import dataclass

import numpy as np

from ._csvio import InputError

METRICS = ("peak", "duration", "auc")


@dataclass(frozen=True)
class SummaryMetrics:
    peak_customers: float
    duration_h: float
    auc_customer_hours: float

    def as_dict(self):
        return {"peak": self.peak_customers, "duration": self.duration_h,
                "auc": self.auc_customer_hours}


def summarize(trajectory):
    t = np.asarray(trajectory, dtype=float)
    if t.size == 0:
        raise InputError("empty trajectory")
    nz = np.flatnonzero(t > 0)
    duration = float(nz[-1] - nz[0] + 1) if nz.size else 0.0
    peak = t.max()
    auc = t.sum()
    # keep integer counts integral
    if np.all(t == np.round(t)):
        peak, auc = int(peak), int(auc)
    else:
        peak, auc = float(peak), float(auc)
    return SummaryMetrics(peak, duration, auc)


def quantile(values, q):
    """Linear interpolation between order statistics at index ``q*(n-1)``."""
    if not 0.0 <= q <= 1.0:
        raise InputError(f"quantile level {q} outside [0, 1]")
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise InputError("no values")
    pos = q * (v.size - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, v.size - 1)
    return float(v[lo] + (pos - lo) * (v[hi] - v[lo]))


@dataclass(frozen=True)
class EnsembleDistribution:
    metric_name: str
    values: tuple

    @classmethod
    def of(cls, name, values):
        values = tuple(float(v) for v in values)
        if not values:
            raise InputError("empty ensemble")
        return cls(name, values)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def p05(self):
        return quantile(self.values, 0.05)

    @property
    def p95(self):
        return quantile(self.values, 0.95)


def ratio(sim_mean, observed):
    if not observed > 0:
        raise InputError("observed metric must be positive for ratio assessment")
    return sim_mean / observed


def pragmatic(r, low=0.5, high=2.0):
    return low <= r <= high


def hits(dist, observed):
    """``(strict, pragmatic)`` hit flags for one metric."""
    r = ratio(dist.mean, observed)
    return dist.p05 <= observed <= dist.p95, pragmatic(r)


def ensemble_distributions(trajectories):
    """Per-metric ``EnsembleDistribution`` over a list of trajectories."""
    summaries = [summarize(t).as_dict() for t in trajectories]
    return {m: EnsembleDistribution.of(m, [s[m] for s in summaries]) for m in METRICS}


def assess(observed_trajectory, trajectories):
    """Per-metric assessment dict; zero observed metrics are marked not assessable."""
    obs = summarize(observed_trajectory).as_dict()
    out = {}
    for m, dist in ensemble_distributions(trajectories).items():
        entry = {"observed": obs[m], "sim_mean": dist.mean, "p05": dist.p05, "p95": dist.p95}
        if obs[m] > 0:
            strict, prag = hits(dist, obs[m])
            entry.update(ratio=ratio(dist.mean, obs[m]), strict_hit=bool(strict),
                         pragmatic_hit=bool(prag), assessable=True)
        else:
            entry.update(ratio=None, strict_hit=None, pragmatic_hit=None, assessable=False,
                         note="not assessable: observed metric is zero")
        out[m] = entry
    return out


def decile_groups(n):
    """Group sizes for ``n`` items in 10 groups; lower groups take the remainder."""
    base, extra = divmod(n, 10)
    return [base + (1 if k < extra else 0) for k in range(10)]


def decile_report(power_auc, flood_flags, flood_customer_auc):
    """Flood occurrence and mean flood intensity by power-AUC decile.

    Episodes are ordered by power AUC (stable, so ties keep episode order)
    and cut into 10 groups whose sizes differ by at most one.
    """
    power_auc = np.asarray(power_auc, dtype=float)
    flags = np.asarray(flood_flags, dtype=bool)
    fauc = np.asarray(flood_customer_auc, dtype=float)
    if not (power_auc.shape == flags.shape == fauc.shape):
        raise InputError("decile_report inputs must have equal lengths")
    if power_auc.size < 10:
        raise InputError("decile_report needs at least 10 episodes")
    order = np.argsort(power_auc, kind="stable")
    rows, start = [], 0
    for k, size in enumerate(decile_groups(power_auc.size)):
        idx = order[start:start + size]
        start += size
        rows.append({"decile": k + 1, "episodes": int(size),
                     "flood_occurrence": float(flags[idx].mean()),
                     "mean_flood_customer_auc": float(fauc[idx].mean()),
                     "mean_power_auc": float(power_auc[idx].mean())})
    return rows


def convergence_report(ladder, rung_means, threshold=0.05):
    """Mean stability along an episode ladder.

    ``rung_means`` maps metric name to the ensemble mean at each rung. A rung
    is stable when it and every later rung change by less than ``threshold``
    relative to the final rung, for every metric. A change of exactly
    ``threshold`` does not count as stable, and in a ladder of two or more
    rungs the final rung alone never makes a verdict. Returns ``(rows, verdict, stable_at)``.
    """
    ladder = list(ladder)
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise InputError("ladder must be strictly ascending")
    rows = []
    ok = np.ones(len(ladder), dtype=bool)
    for m, means in rung_means.items():
        means = np.asarray(means, dtype=float)
        if means.size != len(ladder):
            raise InputError(f"metric {m}: {means.size} means for {len(ladder)} rungs")
        final = means[-1]
        if final == 0:
            rel = np.where(means == 0, 0.0, np.inf)
        else:
            rel = np.abs(means - final) / abs(final)
        good = rel < threshold
        ok &= good
        for n, mu, r, g in zip(ladder, means, rel, good):
            rows.append({"rung": n, "metric": m, "mean": float(mu),
                         "rel_change_vs_final": float(r), "within": bool(g)})
    stable_at = None
    # the final rung trivially matches itself, so it is the verdict only for a one-rung ladder
    for i in range(max(1, len(ladder) - 1)):
        if ok[i:].all():
            stable_at = ladder[i]
            break
    for row in rows:
        row["stable"] = stable_at is not None and row["rung"] >= stable_at
    verdict = f"stable at {stable_at}" if stable_at is not None else "not stable within ladder"
    return rows, verdict, stable_at
