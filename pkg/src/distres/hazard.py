"""Hourly wind-gust fields on study-area patches.

Patches are axis-aligned rectangles. A weather event is a dense sequence of
hourly frames, each holding one gust value (m/s) per patch.
"""

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from functools import cached_property
from pathlib import Path

import numpy as np

from ._csvio import InputError, field_errors, fmt_float, read_rows, write_rows

PATCHES_HEADER = ("patch_id", "x_min", "y_min", "x_max", "y_max")
EVENT_HEADER = ("hour_index", "patch_id", "gust_ms")
CELLS_HEADER = ("cell_id", "x_min", "y_min", "x_max", "y_max")
CELL_GUSTS_HEADER = ("hour_index", "cell_id", "gust_ms")


@dataclass(frozen=True)
class PatchGrid:
    """Patches as ``(patch_id, (x_min, y_min, x_max, y_max))`` pairs."""

    patches: tuple

    def __post_init__(self):
        patches = tuple((str(pid), tuple(float(v) for v in rect)) for pid, rect in self.patches)
        object.__setattr__(self, "patches", patches)
        ids = [pid for pid, _ in patches]
        if len(set(ids)) != len(ids):
            raise InputError("duplicate patch ids")
        for pid, (x0, y0, x1, y1) in patches:
            if not (x1 > x0 and y1 > y0):
                raise InputError(f"patch {pid}: degenerate rectangle")

    @property
    def ids(self):
        return [pid for pid, _ in self.patches]

    @cached_property
    def rects(self):
        return np.array([r for _, r in self.patches], dtype=float).reshape(-1, 4)

    @cached_property
    def centers(self):
        r = self.rects
        return np.column_stack([(r[:, 0] + r[:, 2]) / 2, (r[:, 1] + r[:, 3]) / 2])

    def locate(self, x, y):
        """Id of the first patch containing ``(x, y)`` (closed rectangles), else None."""
        r = self.rects
        hit = np.flatnonzero((r[:, 0] <= x) & (x <= r[:, 2]) & (r[:, 1] <= y) & (y <= r[:, 3]))
        return self.patches[hit[0]][0] if len(hit) else None

    @classmethod
    def regular(cls, x_min, y_min, x_max, y_max, rows, cols):
        xs = np.linspace(x_min, x_max, cols + 1)
        ys = np.linspace(y_min, y_max, rows + 1)
        patches = []
        for i in range(rows):
            for j in range(cols):
                patches.append((f"P{i:02d}_{j:02d}", (xs[j], ys[i], xs[j + 1], ys[i + 1])))
        return cls(tuple(patches))


@dataclass(frozen=True)
class WeatherFrame:
    hour_index: int
    gust: dict


@dataclass(frozen=True)
class WeatherEvent:
    event_id: str
    start_time: datetime
    frames: tuple
    event_type: str = "untyped"

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        for i, f in enumerate(self.frames):
            if f.hour_index != i:
                raise InputError(f"event {self.event_id}: frame {i} has hour_index {f.hour_index}")

    @property
    def hazard_window_hours(self):
        return len(self.frames)

    def gust_matrix(self, patch_ids):
        """``(hours, len(patch_ids))`` gust array; missing patch values raise InputError."""
        m = np.empty((len(self.frames), len(patch_ids)))
        for h, f in enumerate(self.frames):
            for j, pid in enumerate(patch_ids):
                try:
                    m[h, j] = f.gust[pid]
                except KeyError:
                    raise InputError(f"hour {h}: no gust for patch {pid!r}") from None
        return m


@dataclass(frozen=True)
class WindTypingThresholds:
    p95_gust_ms: float = 17.0
    max_gust_ms: float = 22.0
    min_hours: int = 2
    require_consecutive: bool = False

    def __post_init__(self):
        if not (self.p95_gust_ms > 0 and self.max_gust_ms > 0 and self.min_hours > 0):
            raise InputError("typing thresholds must be positive")


def _overlap(a, b):
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    return w * h if w > 0 and h > 0 else 0.0


def map_grid_to_patches(grid_cells, patches):
    """Area-weighted mean of overlapping grid-cell gust series for each patch.

    ``grid_cells`` is a list of ``(rect, hourly_series)``; all series must have
    the same length. Returns one ``WeatherFrame`` per hour.
    """
    if not grid_cells:
        raise InputError("no grid cells")
    series = np.array([np.asarray(s, dtype=float) for _, s in grid_cells])
    n_hours = series.shape[1]
    rects = [tuple(map(float, r)) for r, _ in grid_cells]
    values = {}
    for pid, prect in patches.patches:
        w = np.array([_overlap(prect, r) for r in rects])
        if w.sum() <= 0:
            raise InputError(f"patch {pid}: no overlapping grid cell")
        values[pid] = (w @ series) / w.sum()
    return [WeatherFrame(h, {pid: float(v[h]) for pid, v in values.items()}) for h in range(n_hours)]


def spatial_stats(frame):
    """``(p95, max)`` of the patch gusts; p95 interpolates linearly at index 0.95*(n-1)."""
    v = np.fromiter(frame.gust.values(), dtype=float)
    if v.size == 0:
        raise InputError("empty frame")
    return float(np.quantile(v, 0.95, method="linear")), float(v.max())


def type_event(event, th=WindTypingThresholds()):
    if not event.frames:
        raise InputError("event has no frames")
    qualifying = []
    for f in event.frames:
        p95, mx = spatial_stats(f)
        qualifying.append(p95 >= th.p95_gust_ms or mx >= th.max_gust_ms)
    if th.require_consecutive:
        run = best = 0
        for q in qualifying:
            run = run + 1 if q else 0
            best = max(best, run)
        count = best
    else:
        count = sum(qualifying)
    return "wind" if count >= th.min_hours else "untyped"


@dataclass(frozen=True)
class SynthEventParams:
    duration_h: int
    peak_gust_ms: float
    storm_center: tuple = (0.0, 0.0)
    radius_m: float = float("inf")
    ramp_shape: str = "triangular"
    noise_ms: float = 0.0
    event_id: str = "synthetic"
    start_time: str = "2023-01-01T00:00Z"


def temporal_ramp(hour, duration_h, shape="triangular"):
    """Triangular ramp equal to 1 at hour ``duration_h // 2``; ``flat`` is always 1."""
    if shape == "flat" or duration_h == 1:
        return 1.0
    if shape != "triangular":
        raise InputError(f"unknown ramp shape {shape!r}")
    c = duration_h // 2
    return max(0.0, 1.0 - abs(hour - c) / (c + 1))


def spatial_decay(distance, radius_m):
    """Gaussian fall-off ``exp(-d^2 / (2 r^2))``; an infinite radius gives 1."""
    if not np.isfinite(radius_m):
        return np.ones_like(np.asarray(distance, dtype=float))
    return np.exp(-0.5 * (np.asarray(distance, dtype=float) / radius_m) ** 2)


def synth_wind_event(params, patches, seed):
    """Deterministic synthetic gust event over ``patches``.

    Gust at a patch = peak * ramp(hour) * decay(distance of the patch centre
    from the storm centre) + uniform noise in [-noise, noise], floored at 0.
    """
    if isinstance(params, dict):
        params = SynthEventParams(**params)
    if not patches.patches:
        raise InputError("empty patch grid")
    if params.duration_h < 1 or not params.peak_gust_ms >= 0:
        raise InputError("duration_h must be >= 1 and peak_gust_ms >= 0")
    rng = np.random.Generator(np.random.PCG64(int(seed) & ((1 << 64) - 1)))
    d = np.hypot(*(patches.centers - np.asarray(params.storm_center, dtype=float)).T)
    decay = spatial_decay(d, params.radius_m)
    ids = patches.ids
    frames = []
    for h in range(params.duration_h):
        g = params.peak_gust_ms * temporal_ramp(h, params.duration_h, params.ramp_shape) * decay
        noise = rng.uniform(-1.0, 1.0, size=len(ids)) * params.noise_ms
        g = np.maximum(g + noise, 0.0)
        frames.append(WeatherFrame(h, dict(zip(ids, map(float, g)))))
    return WeatherEvent(params.event_id, parse_time(params.start_time), frames)


def parse_time(text):
    if isinstance(text, datetime):
        return text
    return datetime.strptime(text, "%Y-%m-%dT%H:%MZ").replace(tzinfo=timezone.utc)


def format_time(t):
    return t.strftime("%Y-%m-%dT%H:00Z")


# ---------------------------------------------------------------------------
# IO


def load_patches(path):
    patches = []
    for lineno, r in read_rows(path, PATCHES_HEADER):
        with field_errors(path, lineno):
            patches.append((r["patch_id"], tuple(float(r[k]) for k in PATCHES_HEADER[1:])))
    return PatchGrid(tuple(patches))


def save_patches(path, patches):
    write_rows(path, PATCHES_HEADER,
               [(pid, *map(fmt_float, rect)) for pid, rect in patches.patches])


def load_weather_event(csv_path, meta_path=None):
    """Read ``weather_event.csv`` plus its ``event_meta.json`` companion."""
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_name("event_meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    by_hour = {}
    for lineno, r in read_rows(csv_path, EVENT_HEADER):
        with field_errors(csv_path, lineno):
            h, g = int(r["hour_index"]), float(r["gust_ms"])
            if g < 0:
                raise ValueError("negative gust")
        by_hour.setdefault(h, {})[r["patch_id"]] = g
    n = meta["hazard_window_hours"]
    if sorted(by_hour) != list(range(n)):
        raise InputError(f"{csv_path}: hours must be 0..{n - 1} to match hazard_window_hours")
    frames = [WeatherFrame(h, by_hour[h]) for h in range(n)]
    return WeatherEvent(meta["event_id"], parse_time(meta["start_time"]), frames)


def save_weather_event(csv_path, event):
    csv_path = Path(csv_path)
    rows = [(f.hour_index, pid, fmt_float(g)) for f in event.frames for pid, g in f.gust.items()]
    write_rows(csv_path, EVENT_HEADER, rows)
    meta = {"event_id": event.event_id, "start_time": format_time(event.start_time),
            "hazard_window_hours": event.hazard_window_hours}
    csv_path.with_name("event_meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_grid_extract(cells_path, gusts_path):
    """Read ``grid_cells.csv`` + ``grid_gusts.csv`` into ``map_grid_to_patches`` input."""
    rects = {}
    for lineno, r in read_rows(cells_path, CELLS_HEADER):
        with field_errors(cells_path, lineno):
            rects[r["cell_id"]] = tuple(float(r[k]) for k in CELLS_HEADER[1:])
    series = {cid: {} for cid in rects}
    for lineno, r in read_rows(gusts_path, CELL_GUSTS_HEADER):
        with field_errors(gusts_path, lineno):
            series[r["cell_id"]][int(r["hour_index"])] = float(r["gust_ms"])
    out = []
    for cid, rect in rects.items():
        s = series[cid]
        out.append((rect, [s[h] for h in range(len(s))]))
    return out
