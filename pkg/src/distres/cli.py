"""Batch command-line interface: ``distres <command> [options]``.

Every command reads one JSON run config (``--config``), applies ``--set
key=value`` overrides (dotted keys reach into blocks, values parse as JSON
and fall back to plain strings), then the global flags, and writes its
outputs under ``output_dir``. Relative paths in a config file are resolved
against the file's directory.

Config keys
-----------
network_dir      directory with nodes.csv, lines.csv, patches.csv and
                 optionally conduits.csv, pumps.csv
event_file       weather_event.csv (event_meta.json alongside)
synth_event      SynthEventParams fields plus ``seed``
scenario         packaged scenario name or JSON path; replaces network_dir
                 and the event, and supplies defaults from its settings
topology         service_underground | all_overhead | as_is
fragility        FragilityParams fields
episode          EpisodeConfig fields
flood            FloodConfig fields (used when flood_enabled or ``--flood``)
flood_enabled    bool
episodes         ensemble size
base_seed        ensemble base seed
output_dir       output directory
ladder           episode ladder for ``convergence``
max_episodes     largest rung ``convergence`` will run
sweep            fragility factors for ``sweep``
observed         {"series": observed_series.csv, "events": [{"id", "start",
                 "end"}]} or {"series", "curated_events": path}
ensemble_dir     where ``assess`` reads episodes.csv (default output_dir)
polygons         outage_polygons.csv for ``curate``
curation         thresholds for ``curate``
typing           WindTypingThresholds fields for ``type-event``
grid             {"cells", "gusts", "event_id", "start_time"} grid extract
                 that ``type-event`` maps onto the patches first

Exit codes: 0 success, 2 input or config error, 3 internal invariant
violation.
"""

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._csvio import InputError, fmt_float, read_rows, write_rows
from .curation import (curate, load_polygons, load_series, observed_outage_series,
                       save_events, save_series)
from .engine import EpisodeConfig, run_ensemble
from .fixtures import generate_observed_series, load_scenario
from .flood import FloodConfig
from .fragility import FragilityParams
from .hazard import (SynthEventParams, WeatherEvent, WindTypingThresholds, format_time,
                     load_grid_extract, load_patches, load_weather_event, map_grid_to_patches,
                     parse_time, save_patches, save_weather_event, spatial_stats, synth_wind_event,
                     type_event)
from .metrics import METRICS, assess, convergence_report, decile_report, summarize
from .network import apply_topology_assumption, load_network, load_sewage, save_network

log = logging.getLogger("distres")

TOP_KEYS = ("network_dir", "event_file", "synth_event", "scenario", "topology", "fragility",
            "episode", "flood", "flood_enabled", "episodes", "base_seed", "output_dir", "ladder",
            "max_episodes", "sweep", "observed", "ensemble_dir", "polygons", "curation", "typing",
            "grid")
PATH_KEYS = ("network_dir", "event_file", "output_dir", "ensemble_dir", "polygons")
CURATION_KEYS = ("frac_threshold", "min_feeders", "max_gap_h", "min_duration_h", "coverage_threshold")
DEFAULT_LADDER = (32, 64, 128, 256, 512, 1000)

EPISODES_HEADER = ("episode", "hour", "customers_out")
REPAIRS_HEADER = ("episode", "line_id", "crew_id", "start_hour", "finish_hour")
FLOOD_EPISODES_HEADER = ("episode", "hour", "flooded_customers", "flooded_area_m2")
FLOOD_METRICS_HEADER = ("episode", "customer_peak", "persistence_h", "customer_auc", "area_peak",
                        "area_auc")
DECILES_HEADER = ("decile", "episodes", "flood_occurrence", "mean_flood_customer_auc")
CONVERGENCE_HEADER = ("rung", "metric", "mean", "rel_change_vs_final", "stable")
SWEEP_HEADER = ("factor", "peak_ratio", "duration_ratio", "auc_ratio", "peak_mean", "duration_mean",
                "auc_mean")


class InvariantError(RuntimeError):
    """An internal consistency check failed; outputs must not be trusted."""


# ---------------------------------------------------------------------------
# configuration


def _block(cls, d, name):
    d = dict(d or {})
    known = cls.__dataclass_fields__
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise InputError(f"unknown key(s) in {name}: {', '.join(unknown)}")
    return cls(**d)


@dataclass
class RunConfig:
    network_dir: Path = None
    event_file: Path = None
    synth_event: dict = None
    scenario: str = None
    topology: str = "service_underground"
    fragility: FragilityParams = field(default_factory=FragilityParams)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    flood: FloodConfig = field(default_factory=FloodConfig)
    flood_enabled: bool = False
    episodes: int = 256
    base_seed: int = 0
    output_dir: Path = Path("out")
    ladder: tuple = DEFAULT_LADDER
    max_episodes: int = 10000
    sweep: tuple = ()
    observed: dict = None
    ensemble_dir: Path = None
    polygons: Path = None
    curation: dict = field(default_factory=dict)
    typing: WindTypingThresholds = field(default_factory=WindTypingThresholds)
    grid: dict = None
    raw: dict = field(default_factory=dict, repr=False)
    base: Path = Path(".")

    @classmethod
    def from_dict(cls, d, base=Path(".")):
        unknown = sorted(set(d) - set(TOP_KEYS))
        if unknown:
            raise InputError(f"unknown config key(s): {', '.join(unknown)}")
        base = Path(base)
        kw = {}
        scenario_settings = {}
        if d.get("scenario") is not None:
            if d.get("network_dir") or d.get("event_file") or d.get("synth_event"):
                raise InputError("scenario excludes network_dir, event_file and synth_event")
            kw["scenario"] = str(d["scenario"])
            scenario_settings = _scenario(kw["scenario"], base).settings or {}
        elif d.get("event_file") is not None and d.get("synth_event") is not None:
            raise InputError("give exactly one of event_file / synth_event")
        for k in PATH_KEYS:
            if d.get(k) is not None:
                kw[k] = _resolve(d[k], base)
        if d.get("synth_event") is not None:
            kw["synth_event"] = dict(d["synth_event"])

        def pick(k):
            return d[k] if k in d else scenario_settings.get(k)

        if pick("topology") is not None:
            kw["topology"] = str(pick("topology"))
        if kw.get("topology", "service_underground") not in ("service_underground", "all_overhead",
                                                             "as_is"):
            raise InputError(f"unknown topology {kw['topology']!r}")
        kw["fragility"] = _block(FragilityParams, pick("fragility"), "fragility")
        kw["episode"] = _block(EpisodeConfig, pick("episode"), "episode")
        kw["flood"] = _block(FloodConfig, pick("flood"), "flood")
        kw["typing"] = _block(WindTypingThresholds, d.get("typing"), "typing")
        if d.get("flood_enabled") is not None:
            kw["flood_enabled"] = bool(d["flood_enabled"])
        if pick("base_seed") is not None:
            kw["base_seed"] = _u64(pick("base_seed"))
        if d.get("episodes") is not None:
            kw["episodes"] = int(d["episodes"])
        if d.get("max_episodes") is not None:
            kw["max_episodes"] = int(d["max_episodes"])
        if d.get("ladder") is not None:
            kw["ladder"] = tuple(int(v) for v in d["ladder"])
        if d.get("sweep") is not None:
            kw["sweep"] = tuple(float(v) for v in d["sweep"])
        if d.get("observed") is not None:
            obs = dict(d["observed"])
            bad = sorted(set(obs) - {"series", "events", "curated_events"})
            if bad:
                raise InputError(f"unknown key(s) in observed: {', '.join(bad)}")
            for k in ("series", "curated_events"):
                if obs.get(k) is not None:
                    obs[k] = _resolve(obs[k], base)
            kw["observed"] = obs
        if d.get("curation") is not None:
            bad = sorted(set(d["curation"]) - set(CURATION_KEYS))
            if bad:
                raise InputError(f"unknown key(s) in curation: {', '.join(bad)}")
            kw["curation"] = dict(d["curation"])
        if d.get("grid") is not None:
            g = dict(d["grid"])
            for k in ("cells", "gusts"):
                if k not in g:
                    raise InputError(f"grid needs {k!r}")
                g[k] = _resolve(g[k], base)
            kw["grid"] = g
        cfg = cls(**kw, raw=d, base=base)
        if cfg.episodes < 1:
            raise InputError("episodes must be >= 1")
        return cfg

    def hash(self):
        """sha256 of the canonical config text, excluding where outputs go."""
        d = {k: v for k, v in self.raw.items() if k not in ("output_dir", "ensemble_dir")}
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


def _u64(v):
    v = int(v)
    if not 0 <= v < 1 << 64:
        raise InputError(f"seed {v} is not an unsigned 64-bit integer")
    return v


def _resolve(p, base):
    p = Path(str(p))
    return p if p.is_absolute() else Path(base) / p


_SCENARIOS = {}


def _scenario(name, base):
    p = _resolve(name, base)
    key = str(p) if p.suffix == ".json" else name
    if key not in _SCENARIOS:
        _SCENARIOS[key] = load_scenario(p if p.suffix == ".json" else name)
    return _SCENARIOS[key]


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(d, assignments):
    """Apply ``key=value`` strings to a config dict; dotted keys reach into blocks."""
    d = json.loads(json.dumps(d))
    for item in assignments or ():
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        if parts[0] not in TOP_KEYS:
            raise InputError(f"unknown config key: {parts[0]}")
        node = d
        for p in parts[:-1]:
            if node.get(p) is None:
                node[p] = {}
            node = node[p]
            if not isinstance(node, dict):
                raise InputError(f"--set {key}: {p} is not a block")
        node[parts[-1]] = _parse_value(text)
    return d


def build_config(args):
    d, base = {}, Path(".")
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InputError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(d, dict):
            raise InputError(f"{path}: config must be a JSON object")
        base = path.parent
    d = apply_overrides(d, getattr(args, "set", None))
    # flags win over file and --set; their paths are relative to the working directory
    if getattr(args, "seed", None) is not None:
        d["base_seed"] = args.seed
    if getattr(args, "episodes", None) is not None:
        d["episodes"] = args.episodes
    if getattr(args, "flood", False):
        d["flood_enabled"] = True
    if getattr(args, "output", None) is not None:
        d["output_dir"] = str(Path(args.output).resolve())
    return RunConfig.from_dict(d, base)


# ---------------------------------------------------------------------------
# inputs


def load_inputs(cfg, need_event=True):
    """``(net, sewage, patches, event)`` for a config, topology applied to ``net``."""
    if cfg.scenario is not None:
        sc = _scenario(cfg.scenario, cfg.base)
        net, sewage, patches = sc.net, sc.sewage, sc.patches
        event = sc.event if need_event else None
    else:
        if cfg.network_dir is None:
            raise InputError("config needs network_dir (or scenario)")
        patches = None
        if (cfg.network_dir / "patches.csv").exists():
            patches = load_patches(cfg.network_dir / "patches.csv")
        net = load_network(cfg.network_dir, set(patches.ids) if patches else None)
        sewage = load_sewage(cfg.network_dir, net)
        event = load_event(cfg, patches) if need_event else None
    if cfg.topology != "as_is":
        net = apply_topology_assumption(net, cfg.topology)
    return net, sewage, patches, event


def load_event(cfg, patches):
    if (cfg.event_file is None) == (cfg.synth_event is None):
        raise InputError("give exactly one of event_file / synth_event")
    if cfg.event_file is not None:
        return load_weather_event(cfg.event_file)
    params = dict(cfg.synth_event)
    seed = _u64(params.pop("seed", 0))
    if patches is None:
        raise InputError("synth_event needs patches.csv in network_dir")
    if "storm_center" in params:
        params["storm_center"] = tuple(params["storm_center"])
    return synth_wind_event(_block(SynthEventParams, params, "synth_event"), patches, seed)


def _time(text, what):
    try:
        return parse_time(text)
    except (TypeError, ValueError):
        raise InputError(f"{what}: bad timestamp {text!r} (expected YYYY-MM-DDThh:00Z)") from None


def load_observed(cfg):
    """``[(event_id, start, end, trajectory)]`` from the observed block."""
    obs = cfg.observed
    if not obs or obs.get("series") is None:
        raise InputError("config needs observed.series")
    series = load_series(obs["series"])
    windows = []
    if obs.get("curated_events") is not None:
        for k, e in enumerate(json.loads(Path(obs["curated_events"]).read_text(encoding="utf-8"))):
            if not e.get("excluded"):
                windows.append((f"event{k}", _time(e.get("start"), "curated event start"),
                                _time(e.get("end"), "curated event end")))
    for e in obs.get("events") or ():
        windows.append((str(e.get("id", f"event{len(windows)}")),
                        _time(e["start"], "observed start") if e.get("start") else None,
                        _time(e["end"], "observed end") if e.get("end") else None))
    if not windows:
        windows.append(("observed", None, None))
    out = []
    for eid, start, end in windows:
        traj = series.system_trajectory(start, end)
        if traj.size == 0:
            raise InputError(f"observed window {eid} contains no hours")
        out.append((eid, start, end, traj))
    return out


def read_ensemble(path):
    """Trajectories from ``episodes.csv``, ordered by episode index."""
    by_ep = {}
    for _, r in read_rows(path, EPISODES_HEADER):
        try:
            by_ep.setdefault(int(r["episode"]), {})[int(r["hour"])] = int(r["customers_out"])
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
    if not by_ep:
        raise InputError(f"{path}: no episodes")
    out = []
    for ep in sorted(by_ep):
        hours = by_ep[ep]
        if sorted(hours) != list(range(len(hours))):
            raise InputError(f"{path}: episode {ep} hours are not 0..n-1")
        out.append([hours[h] for h in range(len(hours))])
    return out


# ---------------------------------------------------------------------------
# outputs


def _outdir(cfg):
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def check_ensemble(results, net):
    """Cheap invariants every ensemble must satisfy before it is written."""
    total = net.total_customers
    for r in results:
        t = np.asarray(r.outage_trajectory)
        if t.size == 0 or t[-1] != 0 or t.min() < 0 or t.max() > total:
            raise InvariantError(f"episode {r.episode_index}: trajectory out of bounds or not restored")
        if len(r.repair_log) != len(r.failure_log):
            raise InvariantError(f"episode {r.episode_index}: repairs do not match failures")


def write_ensemble(out, results, cfg, flood_on, wall):
    rows, reps = [], []
    for r in results:
        rows.extend((r.episode_index, h, v) for h, v in enumerate(r.outage_trajectory))
        reps.extend((r.episode_index, lid, c, fmt_float(s), fmt_float(f)) for s, f, lid, c in r.repair_log)
    write_rows(out / "episodes.csv", EPISODES_HEADER, rows)
    write_rows(out / "repairs.csv", REPAIRS_HEADER, reps)
    if flood_on:
        fe, fm = [], []
        for r in results:
            c, a = r.flood.flooded_customers_trajectory, r.flood.flooded_area_trajectory
            fe.extend((r.episode_index, h, ci, fmt_float(ai)) for h, (ci, ai) in enumerate(zip(c, a)))
            m = r.flood.metrics
            fm.append((r.episode_index, m["customer_peak"], m["persistence_h"], m["customer_auc"],
                       fmt_float(m["area_peak"]), fmt_float(m["area_auc"])))
        write_rows(out / "flood_episodes.csv", FLOOD_EPISODES_HEADER, fe)
        write_rows(out / "flood_metrics.csv", FLOOD_METRICS_HEADER, fm)
        if len(results) >= 10:
            power = [summarize(r.outage_trajectory).auc_customer_hours for r in results]
            flags = [r.flood.metrics["customer_peak"] > 0 for r in results]
            fauc = [r.flood.metrics["customer_auc"] for r in results]
            write_rows(out / "deciles.csv", DECILES_HEADER,
                       [(d["decile"], d["episodes"], fmt_float(d["flood_occurrence"]),
                         fmt_float(d["mean_flood_customer_auc"]))
                        for d in decile_report(power, flags, fauc)])
    _write_json(out / "ensemble_meta.json", {
        "base_seed": cfg.base_seed,
        "episode_seeds": [r.seed for r in results],
        "episodes": len(results),
        "config_hash": cfg.hash(),
        "flood": flood_on,
        "wall_clock_s": round(wall, 3),
    })


def _means(trajectories):
    s = [summarize(t).as_dict() for t in trajectories]
    return {m: float(np.mean([x[m] for x in s])) for m in METRICS}


def _simulate(cfg, workers, n=None, frag=None, flood_on=None):
    net, sewage, _, event = load_inputs(cfg)
    flood_on = cfg.flood_enabled if flood_on is None else flood_on
    if flood_on and not sewage.pumps:
        raise InputError("flood enabled but the network has no pumps")
    t0 = time.perf_counter()
    results = run_ensemble(net, event, frag or cfg.fragility, cfg.episode, cfg.base_seed,
                           n or cfg.episodes, cfg.flood if flood_on else None,
                           sewage=sewage if sewage.pumps else None, workers=workers)
    check_ensemble(results, net)
    return net, results, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, workers=1):
    _, results, wall = _simulate(cfg, workers)
    out = _outdir(cfg)
    write_ensemble(out, results, cfg, cfg.flood_enabled, wall)
    m = _means([r.outage_trajectory for r in results])
    print(f"episodes={len(results)} mean_peak={m['peak']:.1f} mean_duration={m['duration']:.2f} "
          f"mean_auc={m['auc']:.1f} wall={wall:.2f}s")
    return results


def cmd_assess(cfg, workers=1):
    src = cfg.ensemble_dir or cfg.output_dir
    trajectories = read_ensemble(src / "episodes.csv")
    report = {}
    for eid, start, end, traj in load_observed(cfg):
        a = assess(traj, trajectories)
        report[eid] = {"start": format_time(start) if start else None,
                       "end": format_time(end) if end else None,
                       "episodes": len(trajectories), "metrics": a}
    out = _outdir(cfg)
    _write_json(out / "assessment.json", report)
    for eid, rep in report.items():
        cells = []
        for m in METRICS:
            e = rep["metrics"][m]
            if e["assessable"]:
                cells.append(f"{m}: ratio={e['ratio']:.3f} strict={e['strict_hit']} "
                             f"pragmatic={e['pragmatic_hit']}")
            else:
                cells.append(f"{m}: not assessable")
        print(f"{eid}: " + "; ".join(cells))
    return report


def cmd_sweep(cfg, workers=1):
    if not cfg.sweep:
        raise InputError("sweep needs a non-empty list of fragility factors")
    observed = load_observed(cfg)[0][3]
    obs = summarize(observed).as_dict()
    rows = []
    for f in cfg.sweep:
        frag = FragilityParams(**{**asdict(cfg.fragility), "fragility_factor": f})
        _, results, _ = _simulate(cfg, workers, frag=frag, flood_on=False)
        m = _means([r.outage_trajectory for r in results])
        ratios = [fmt_float(m[k] / obs[k]) if obs[k] > 0 else "" for k in METRICS]
        rows.append((fmt_float(f), *ratios, *(fmt_float(m[k]) for k in METRICS)))
        print(f"factor={f}: " + " ".join(f"{k}_ratio={r or 'n/a'}" for k, r in zip(METRICS, ratios)))
    write_rows(_outdir(cfg) / "sweep.csv", SWEEP_HEADER, rows)
    return rows


def cmd_convergence(cfg, workers=1):
    ladder = list(cfg.ladder)
    if not ladder:
        raise InputError("ladder must not be empty")
    if ladder[-1] > cfg.max_episodes:
        raise InputError(f"ladder rung {ladder[-1]} exceeds max_episodes {cfg.max_episodes}")
    if any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] < 1:
        raise InputError("ladder must be strictly ascending positive integers")
    _, results, _ = _simulate(cfg, workers, n=ladder[-1], flood_on=False)
    s = [summarize(r.outage_trajectory).as_dict() for r in results]
    # nested prefixes of one ensemble
    means = {m: [float(np.mean([x[m] for x in s[:n]])) for n in ladder] for m in METRICS}
    rows, verdict, _ = convergence_report(ladder, means)
    write_rows(_outdir(cfg) / "convergence.csv", CONVERGENCE_HEADER,
               [(r["rung"], r["metric"], fmt_float(r["mean"]), fmt_float(r["rel_change_vs_final"]),
                 str(r["stable"]).lower()) for r in rows])
    print(verdict)
    return rows, verdict


def cmd_curate(cfg, workers=1):
    if cfg.polygons is None:
        raise InputError("config needs polygons (outage_polygons.csv)")
    net, _, _, _ = load_inputs(cfg, need_event=False)
    series = observed_outage_series(load_polygons(cfg.polygons), net)
    events = curate(series, **cfg.curation)
    out = _outdir(cfg)
    save_events(out / "curated_events.json", events)
    save_series(out / "observed_series.csv", series)
    kept = sum(not e.excluded for e in events)
    print(f"hours={len(series.hours)} events={len(events)} retained={kept}")
    return events


def cmd_type_event(cfg, workers=1):
    if cfg.grid is not None:
        patches = _patches_for(cfg)
        frames = map_grid_to_patches(load_grid_extract(cfg.grid["cells"], cfg.grid["gusts"]), patches)
        event = WeatherEvent(str(cfg.grid.get("event_id", "grid-event")),
                             _time(cfg.grid.get("start_time", "2000-01-01T00:00Z"), "grid start_time"), frames)
        save_weather_event(_outdir(cfg) / "weather_event.csv", event)
    else:
        event = load_event(cfg, _patches_for(cfg) if cfg.synth_event is not None else None) \
            if cfg.scenario is None else _scenario(cfg.scenario, cfg.base).event
    label = type_event(event, cfg.typing)
    stats = [spatial_stats(f) for f in event.frames]
    qualifying = [f.hour_index for f, (p95, mx) in zip(event.frames, stats)
                  if p95 >= cfg.typing.p95_gust_ms or mx >= cfg.typing.max_gust_ms]
    _write_json(_outdir(cfg) / "event_type.json", {
        "event_id": event.event_id, "event_type": label,
        "hazard_window_hours": event.hazard_window_hours,
        "qualifying_hours": qualifying, "thresholds": asdict(cfg.typing)})
    print(f"{event.event_id}: {label} ({len(qualifying)} qualifying hours)")
    return label


def _patches_for(cfg):
    if cfg.scenario is not None:
        return _scenario(cfg.scenario, cfg.base).patches
    if cfg.network_dir is None or not (cfg.network_dir / "patches.csv").exists():
        raise InputError("need patches.csv in network_dir")
    return load_patches(cfg.network_dir / "patches.csv")


def cmd_gen_fixture(scenario, output, seed=None, episodes=256):
    """Write a scenario as a file bundle plus a ready-to-run ``config.json``.

    The bundle holds the network CSVs, the weather event, one hidden-episode
    observed series (seeded by ``seed``) and the scenario definition.
    """
    sc = load_scenario(scenario)
    out = Path(output)
    settings = sc.settings or {}
    save_network(out / "network", sc.net, sc.sewage if sc.sewage.pumps else None)
    save_patches(out / "network" / "patches.csv", sc.patches)
    event = sc.event
    save_weather_event(out / "weather_event.csv", event)

    topology = settings.get("topology", "service_underground")
    net = sc.net if topology == "as_is" else apply_topology_assumption(sc.net, topology)
    frag = _block(FragilityParams, settings.get("fragility"), "fragility")
    ep = _block(EpisodeConfig, settings.get("episode"), "episode")
    obs_seed = _u64(seed if seed is not None else settings.get("base_seed", 0))
    save_series(out / "observed_series.csv", generate_observed_series(net, event, frag, ep, obs_seed))

    spec = {"fixture": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(sc.spec).items()},
            "event": {k: list(v) if isinstance(v, tuple) else v
                      for k, v in asdict(sc.event_params).items() if v != float("inf")},
            "event_seed": sc.event_seed, "settings": settings}
    _write_json(out / "scenario.json", spec)
    config = {"network_dir": "network", "event_file": "weather_event.csv", "topology": topology,
              "fragility": asdict(frag), "episode": {k: list(v) if isinstance(v, tuple) else v
                                                     for k, v in asdict(ep).items()},
              "episodes": episodes, "base_seed": settings.get("base_seed", 0),
              "ladder": list(DEFAULT_LADDER), "sweep": [0.6, 0.8, 1.0, 1.2],
              "observed": {"series": "observed_series.csv"}, "output_dir": "out"}
    if sc.sewage.pumps:
        config["flood"] = asdict(_block(FloodConfig, settings.get("flood"), "flood"))
    _write_json(out / "config.json", config)
    print(f"wrote {sc.name} bundle to {out} ({len(sc.net.lines)} lines, "
          f"{sc.net.total_customers} customers, {len(sc.sewage.pumps)} pumps)")
    return out


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "simulate": cmd_simulate,
    "assess": cmd_assess,
    "sweep": cmd_sweep,
    "convergence": cmd_convergence,
    "curate": cmd_curate,
    "type-event": cmd_type_event,
}


def _global_flags(p, default):
    p.add_argument("--config", default=default, help="JSON run config")
    p.add_argument("--seed", type=int, default=default, help="base seed (unsigned 64-bit)")
    p.add_argument("--episodes", type=int, default=default, help="ensemble size")
    p.add_argument("--workers", type=int, default=default, help="worker processes")
    p.add_argument("--output", default=default, help="output directory")
    p.add_argument("--flood", action="store_true", default=default, help="run the flood model")
    p.add_argument("--set", action="append", default=default, metavar="KEY=VALUE",
                   help="config override; repeatable; dotted keys reach into blocks")
    p.add_argument("-v", "--verbose", action="store_true", default=default)


def make_parser():
    parser = argparse.ArgumentParser(prog="distres", description=__doc__.split("\n")[0])
    _global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "gen-fixture"):
        sp = sub.add_parser(name)
        # SUPPRESS keeps flags given before the command from being reset
        _global_flags(sp, argparse.SUPPRESS)
        if name == "gen-fixture":
            sp.add_argument("--scenario", default="medium",
                            help="packaged scenario name or scenario JSON path")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen-fixture":
            if args.output is None:
                raise InputError("gen-fixture needs --output")
            cmd_gen_fixture(args.scenario, args.output, args.seed,
                            args.episodes if args.episodes is not None else 256)
        else:
            cfg = build_config(args)
            workers = args.workers if args.workers is not None else 1
            if workers < 1:
                raise InputError("--workers must be >= 1")
            COMMANDS[args.command](cfg, workers)
    except (InputError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InvariantError, AssertionError) as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
