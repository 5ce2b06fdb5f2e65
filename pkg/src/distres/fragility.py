"""Wind fragility of overhead lines.

Failure probability per line-hour is logistic in gust speed around an
effective threshold. The fragility factor divides the base threshold, so a
larger factor moves the whole curve toward lower gusts; vegetation lowers the
threshold further. Underground lines never fail from wind.
"""

from dataclasses import dataclass

import numpy as np

from ._csvio import InputError


@dataclass(frozen=True)
class FragilityParams:
    theta0_ms: float = 30.0
    slope_ms: float = 3.0
    fragility_factor: float = 0.80
    veg_sensitivity: float = 0.2
    p_cap: float = 0.95

    def __post_init__(self):
        if not (self.theta0_ms > 0 and self.slope_ms > 0 and self.fragility_factor > 0):
            raise InputError("theta0_ms, slope_ms and fragility_factor must be positive")
        if not 0.0 <= self.veg_sensitivity < 1.0:
            raise InputError("veg_sensitivity must be in [0, 1)")
        if not 0.0 <= self.p_cap <= 1.0:
            raise InputError("p_cap must be in [0, 1]")


def effective_threshold(line, p):
    return _threshold(line.vegetation, p)


def _threshold(vegetation, p):
    return (p.theta0_ms / p.fragility_factor) * (1.0 - p.veg_sensitivity * vegetation)


def _logistic(z):
    # clip keeps exp finite; probabilities this far out are 0 or 1 to double precision
    return 1.0 / (1.0 + np.exp(-np.clip(z, -700.0, 700.0)))


def failure_probability(gust_ms, line, p):
    if not line.overhead:
        return 0.0
    z = (gust_ms - effective_threshold(line, p)) / p.slope_ms
    return float(min(p.p_cap, _logistic(z)))


def failure_probabilities(gust, vegetation, overhead, p):
    """Vectorized ``failure_probability`` over aligned per-line arrays."""
    z = (np.asarray(gust, float) - _threshold(np.asarray(vegetation, float), p)) / p.slope_ms
    prob = np.minimum(p.p_cap, _logistic(z))
    return np.where(overhead, prob, 0.0)


class LineExposure:
    """Per-line arrays the sampler needs, aligned with ``net.lines``.

    Each line is exposed to the gust of its ``to_node``'s patch.
    """

    def __init__(self, net, patch_ids):
        col = {pid: j for j, pid in enumerate(patch_ids)}
        try:
            self.patch_col = np.array([col[net.node(ln.to_node).patch_id] for ln in net.lines],
                                      dtype=np.int64)
        except KeyError as exc:
            raise InputError(f"line exposure patch {exc.args[0]!r} missing from weather") from None
        self.vegetation = np.array([ln.vegetation for ln in net.lines], dtype=float)
        self.overhead = np.array([ln.overhead for ln in net.lines], dtype=bool)

    def probabilities(self, gust_row, p):
        return failure_probabilities(gust_row[self.patch_col], self.vegetation, self.overhead, p)


def sample_hourly_failures(net, frame, already_failed, p, rng):
    """Line ids failing during one hour.

    One uniform draw per intact overhead line, in network line order; a line
    fails when its draw falls below its failure probability.
    """
    gust = frame.gust
    out = set()
    for ln in net.lines:
        if ln.id in already_failed or not ln.overhead:
            continue
        pid = net.node(ln.to_node).patch_id
        if pid not in gust:
            raise InputError(f"frame {frame.hour_index}: no gust for patch {pid!r}")
        u = rng.random()
        if u < failure_probability(gust[pid], ln, p):
            out.add(ln.id)
    return out


def sample_failures_array(exposure, gust_row, intact, p, rng):
    """Array form of ``sample_hourly_failures`` used by the episode loop.

    Draws exactly one variate per intact overhead line, in line order, so it
    consumes the stream identically to the set-based version.
    """
    cand = np.flatnonzero(intact & exposure.overhead)
    if cand.size == 0:
        return cand
    u = rng.random(cand.size)
    prob = failure_probabilities(gust_row[exposure.patch_col[cand]], exposure.vegetation[cand],
                                 True, p)
    return cand[u < prob]
