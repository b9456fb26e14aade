"""Core data types and ingestion for count panels, geometry and point events.

Time steps are opaque consecutive integers plus a declared season length P;
calendar tokens (``YYYY-MM``, ``YYYY-Www``) are mapped to consecutive indices
at ingestion and never interpreted again. All coordinates are planar km;
lon/lat input is converted with an equirectangular approximation about the
data centroid.
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")
_WEEK_RE = re.compile(r"^(\d{4})-W(\d{2})$", re.IGNORECASE)
_INT_RE = re.compile(r"^[+-]?\d+$")


class IngestError(ValueError):
    """Raised when an input file violates the documented CSV contract."""


def parse_time_token(token: str) -> int:
    """Map a time token to an absolute integer index.

    Integers map to themselves, ``YYYY-MM`` to a consecutive month index and
    ``YYYY-Www`` to a consecutive ISO-week index (via the week's Monday), so
    53-week years stay consecutive.
    """
    token = token.strip()
    if _INT_RE.match(token):
        return int(token)
    m = _MONTH_RE.match(token)
    if m:
        year, month = int(m.group(1)), int(m.group(2))
        if not 1 <= month <= 12:
            raise ValueError(f"month out of range in {token!r}")
        return year * 12 + (month - 1)
    m = _WEEK_RE.match(token)
    if m:
        year, week = int(m.group(1)), int(m.group(2))
        monday = _dt.date.fromisocalendar(year, week, 1)
        return monday.toordinal() // 7
    raise ValueError(f"unparseable time token {token!r}")


@dataclass(frozen=True)
class CountSeries:
    """Univariate count time series with a seasonal cycle length."""

    values: np.ndarray
    period_length: int = 1
    start: Optional[str] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.int64)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("values must be a non-empty 1-d array")
        if np.any(vals < 0):
            raise ValueError("counts must be non-negative")
        if self.period_length < 1:
            raise ValueError("period_length must be >= 1")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class CountPanel:
    """Region x time matrix of counts plus the shared time axis."""

    counts: np.ndarray
    region_ids: tuple[str, ...]
    period_length: int = 1
    start: Optional[str] = None
    time_labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] < 1 or counts.shape[1] < 1:
            raise ValueError("counts must be a non-empty 2-d matrix")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if len(self.region_ids) != counts.shape[0]:
            raise ValueError("region_ids length must match row count")
        if len(set(self.region_ids)) != len(self.region_ids):
            raise ValueError("region_ids must be unique")
        if self.time_labels is not None and len(self.time_labels) != counts.shape[1]:
            raise ValueError("time_labels length must match column count")
        if self.period_length < 1:
            raise ValueError("period_length must be >= 1")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "region_ids", tuple(self.region_ids))

    @property
    def n_regions(self) -> int:
        return self.counts.shape[0]

    @property
    def n_time(self) -> int:
        return self.counts.shape[1]

    def up_to(self, t: int) -> "CountPanel":
        """Prospective slice: columns 0..t inclusive, nothing later."""
        if not 0 <= t < self.n_time:
            raise IndexError(f"time index {t} outside panel range")
        labels = self.time_labels[: t + 1] if self.time_labels else None
        return CountPanel(self.counts[:, : t + 1].copy(), self.region_ids,
                          self.period_length, self.start, labels)

    def series(self, region: Optional[str] = None) -> CountSeries:
        """Single-region series, or the all-region total when region is None."""
        if region is None:
            vals = self.counts.sum(axis=0)
        else:
            try:
                i = self.region_ids.index(region)
            except ValueError:
                raise KeyError(f"unknown region {region!r}") from None
            vals = self.counts[i]
        return CountSeries(vals, self.period_length, self.start)


@dataclass(frozen=True)
class StudyGeometry:
    """Region centroids (planar km), populations and optional adjacency."""

    region_ids: tuple[str, ...]
    centroids: np.ndarray
    populations: np.ndarray
    adjacency: Optional[np.ndarray] = None

    def __post_init__(self):
        cent = np.asarray(self.centroids, dtype=float)
        pops = np.asarray(self.populations, dtype=float)
        n = len(self.region_ids)
        if cent.shape != (n, 2):
            raise ValueError("centroids must be an (n_regions, 2) array")
        if pops.shape != (n,):
            raise ValueError("populations must have one entry per region")
        if np.any(pops <= 0):
            raise ValueError("populations must be positive")
        if len(set(self.region_ids)) != n:
            raise ValueError("region_ids must be unique")
        if self.adjacency is not None:
            adj = np.asarray(self.adjacency, dtype=bool)
            if adj.shape != (n, n):
                raise ValueError("adjacency must be (n_regions, n_regions)")
            if not np.array_equal(adj, adj.T):
                raise ValueError("adjacency must be symmetric")
            if np.any(np.diag(adj)):
                raise ValueError("adjacency must be irreflexive")
            object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "centroids", cent)
        object.__setattr__(self, "populations", pops)
        object.__setattr__(self, "region_ids", tuple(self.region_ids))

    @property
    def n_regions(self) -> int:
        return len(self.region_ids)

    @property
    def total_population(self) -> float:
        return float(self.populations.sum())

    def reorder(self, region_ids: Sequence[str]) -> "StudyGeometry":
        """Return the geometry restricted/reordered to the given region ids.

        Region ids present in the geometry but absent from ``region_ids``
        (i.e. never observed in the counts) are an error: silently dropping
        them would distort population baselines.
        """
        if set(region_ids) != set(self.region_ids):
            missing = sorted(set(self.region_ids) - set(region_ids))
            extra = sorted(set(region_ids) - set(self.region_ids))
            raise ValueError(
                f"region mismatch between counts and geometry: "
                f"{len(missing)} geometry regions without counts {missing[:5]}, "
                f"{len(extra)} count regions without geometry {extra[:5]}")
        idx = [self.region_ids.index(r) for r in region_ids]
        adj = self.adjacency[np.ix_(idx, idx)] if self.adjacency is not None else None
        return StudyGeometry(tuple(region_ids), self.centroids[idx],
                             self.populations[idx], adj)


@dataclass(frozen=True)
class EventStream:
    """Time-ordered point events (planar km, continuous time in days)."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    horizon: float
    study_area_hint: Optional[str] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if not (x.shape == y.shape == t.shape) or x.ndim != 1:
            raise ValueError("x, y, t must be 1-d arrays of equal length")
        if t.size and np.any(np.diff(t) < 0):
            raise ValueError("events must be sorted ascending in time")
        if t.size and t[-1] > self.horizon:
            raise ValueError("events beyond the declared horizon")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)

    def __len__(self) -> int:
        return int(self.t.size)


@dataclass(frozen=True)
class AlarmRecord:
    """One detector decision: statistic, threshold and method payload."""

    time_index: int
    statistic_value: float
    threshold: float
    alarm: bool
    detail: Mapping[str, object] = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        def _clean(v):
            if isinstance(v, (np.integer,)):
                return int(v)
            if isinstance(v, (np.floating,)):
                return float(v)
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: _clean(u) for k, u in v.items()}
            if isinstance(v, (list, tuple)):
                return [_clean(u) for u in v]
            return v

        return {
            "time_index": int(self.time_index),
            "statistic_value": float(self.statistic_value),
            "threshold": float(self.threshold),
            "alarm": bool(self.alarm),
            "detail": _clean(dict(self.detail)),
        }


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

_DEFAULT_COUNT_SCHEMA = {"region": "region", "time": "time", "count": "count"}


def _open_rows(path) -> tuple[list[str], list[tuple[int, dict]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        rows = [(lineno, {k.strip(): (v or "").strip() for k, v in row.items() if k})
                for lineno, row in enumerate(reader, start=2)]
    return header, rows


def ingest_count_panel(path, schema: Optional[Mapping[str, str]] = None,
                       period_length: int = 1) -> CountPanel:
    """Read a ``region,time,count`` CSV into a dense panel.

    Cells absent from the file densify to 0; duplicate (region, time) rows
    are an error naming the offending row.
    """
    cols = dict(_DEFAULT_COUNT_SCHEMA)
    if schema:
        cols.update(schema)
    header, rows = _open_rows(path)
    for key in ("region", "time", "count"):
        if cols[key] not in header:
            raise IngestError(f"{path}: missing column {cols[key]!r}")

    seen: dict[tuple[str, int], int] = {}
    records: list[tuple[str, int, int, str]] = []
    for lineno, row in rows:
        if not row.get(cols["region"]) and not row.get(cols["time"]):
            continue  # blank line
        region = row[cols["region"]]
        try:
            tidx = parse_time_token(row[cols["time"]])
        except ValueError as exc:
            raise IngestError(f"{path}, row {lineno}: {exc}") from None
        try:
            count = int(row[cols["count"]])
        except ValueError:
            raise IngestError(f"{path}, row {lineno}: "
                              f"bad count {row[cols['count']]!r}") from None
        if count < 0:
            raise IngestError(f"{path}, row {lineno}: negative count {count}")
        key = (region, tidx)
        if key in seen:
            raise IngestError(f"{path}, row {lineno}: duplicate cell "
                              f"(region={region!r}, time={row[cols['time']]!r}), "
                              f"first seen at row {seen[key]}")
        seen[key] = lineno
        records.append((region, tidx, count, row[cols["time"]]))

    if not records:
        raise IngestError(f"{path}: no data rows")
    regions = tuple(sorted({r for r, _, _, _ in records}))
    tmin = min(t for _, t, _, _ in records)
    tmax = max(t for _, t, _, _ in records)
    n_time = tmax - tmin + 1
    counts = np.zeros((len(regions), n_time), dtype=np.int64)
    ridx = {r: i for i, r in enumerate(regions)}
    label_by_t: dict[int, str] = {}
    for region, tidx, count, raw in records:
        counts[ridx[region], tidx - tmin] = count
        label_by_t.setdefault(tidx - tmin, raw)
    # raw label where observed, plain offset index otherwise
    labels = tuple(label_by_t.get(j, str(tmin + j)) for j in range(n_time))
    return CountPanel(counts, regions, period_length, labels[0], labels)


def ingest_geometry(path, adjacency_path=None) -> StudyGeometry:
    """Read region geometry (planar km or lon/lat) and optional adjacency."""
    header, rows = _open_rows(path)
    lonlat = "lon" in header and "lat" in header
    if not lonlat and not ("x_km" in header and "y_km" in header):
        raise IngestError(f"{path}: need columns x_km,y_km or lon,lat")
    if "region" not in header or "population" not in header:
        raise IngestError(f"{path}: need columns region, population")
    ids, coords, pops = [], [], []
    for lineno, row in rows:
        if not row.get("region"):
            continue
        ids.append(row["region"])
        try:
            if lonlat:
                coords.append((float(row["lon"]), float(row["lat"])))
            else:
                coords.append((float(row["x_km"]), float(row["y_km"])))
            pops.append(float(row["population"]))
        except ValueError as exc:
            raise IngestError(f"{path}, row {lineno}: {exc}") from None
    coords_arr = np.asarray(coords, dtype=float)
    if lonlat:
        coords_arr = lonlat_to_planar_km(coords_arr[:, 0], coords_arr[:, 1])
    adjacency = None
    if adjacency_path is not None:
        idx = {r: i for i, r in enumerate(ids)}
        adjacency = np.zeros((len(ids), len(ids)), dtype=bool)
        _, adj_rows = _open_rows(adjacency_path)
        for lineno, row in adj_rows:
            a, b = row.get("region_a"), row.get("region_b")
            if not a and not b:
                continue
            if a not in idx or b not in idx:
                raise IngestError(f"{adjacency_path}, row {lineno}: "
                                  f"unknown region in pair ({a!r}, {b!r})")
            if a == b:
                raise IngestError(f"{adjacency_path}, row {lineno}: self-loop {a!r}")
            adjacency[idx[a], idx[b]] = True
            adjacency[idx[b], idx[a]] = True
    return StudyGeometry(tuple(ids), coords_arr, np.asarray(pops), adjacency)


def lonlat_to_planar_km(lon, lat) -> np.ndarray:
    """Equirectangular projection about the data centroid.

    x = R * dlon * cos(lat0), y = R * dlat, R = 6371 km. Adequate at country
    scale and fully deterministic.
    """
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    lon0, lat0 = lon.mean(), lat.mean()
    x = EARTH_RADIUS_KM * np.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_KM * np.radians(lat - lat0)
    return np.column_stack([x, y])


def _parse_event_time(token: str, path, lineno: int) -> float:
    token = token.strip()
    try:
        return float(token)
    except ValueError:
        pass
    try:
        if "T" in token or " " in token:
            stamp = _dt.datetime.fromisoformat(token)
            day = stamp.date().toordinal()
            frac = (stamp - _dt.datetime.combine(stamp.date(), _dt.time())).total_seconds() / 86400.0
            return day + frac
        return float(_dt.date.fromisoformat(token).toordinal())
    except ValueError:
        raise IngestError(f"{path}, row {lineno}: unparseable timestamp {token!r}") from None


def ingest_events(path, projection: str = "planar",
                  horizon: Optional[float] = None) -> EventStream:
    """Read point events, project to planar km and sort ascending by time.

    Ties in timestamps keep file order (stable sort); the detector recursion
    needs a total order. Calendar dates become days (proleptic ordinal), so
    differences are in days.
    """
    if projection not in ("planar", "lonlat"):
        raise ValueError("projection must be 'planar' or 'lonlat'")
    header, rows = _open_rows(path)
    if projection == "planar":
        cx, cy = "x", "y"
        tcol = "time" if "time" in header else "t"
    else:
        cx, cy = "lon", "lat"
        tcol = "date" if "date" in header else "time"
    for col in (cx, cy, tcol):
        if col not in header:
            raise IngestError(f"{path}: missing column {col!r}")
    xs, ys, ts = [], [], []
    for lineno, row in rows:
        if not row.get(cx) and not row.get(cy):
            continue
        try:
            xs.append(float(row[cx]))
            ys.append(float(row[cy]))
        except ValueError as exc:
            raise IngestError(f"{path}, row {lineno}: {exc}") from None
        t = _parse_event_time(row[tcol], path, lineno)
        if horizon is not None and t > horizon:
            raise IngestError(f"{path}, row {lineno}: timestamp {row[tcol]!r} "
                              f"beyond declared horizon {horizon}")
        ts.append(t)
    xs_arr, ys_arr, ts_arr = map(np.asarray, (xs, ys, ts))
    if projection == "lonlat" and len(xs):
        planar = lonlat_to_planar_km(xs_arr, ys_arr)
        xs_arr, ys_arr = planar[:, 0], planar[:, 1]
    order = np.argsort(ts_arr, kind="stable")
    ts_sorted = ts_arr[order]
    hz = float(horizon) if horizon is not None else float(ts_sorted[-1]) if len(ts_sorted) else 0.0
    return EventStream(xs_arr[order], ys_arr[order], ts_sorted, hz)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def aggregate(panel: CountPanel,
              region_partition: Optional[Mapping[str, Iterable[str]]] = None,
              time_block: int = 1) -> CountPanel:
    """Sum the panel over a region partition and/or consecutive time blocks.

    The partition must cover every region exactly once. A trailing partial
    time block is kept (never dropped), so the grand total is preserved for
    any block length.
    """
    if time_block < 1:
        raise ValueError("time_block must be >= 1")
    counts = panel.counts
    region_ids = panel.region_ids
    if region_partition is not None:
        assigned: dict[str, str] = {}
        for group, members in region_partition.items():
            for r in members:
                if r in assigned:
                    raise ValueError(f"region {r!r} assigned to both "
                                     f"{assigned[r]!r} and {group!r}")
                assigned[r] = group
        missing = set(region_ids) - set(assigned)
        unknown = set(assigned) - set(region_ids)
        if missing:
            raise ValueError(f"partition misses regions: {sorted(missing)[:5]}")
        if unknown:
            raise ValueError(f"partition names unknown regions: {sorted(unknown)[:5]}")
        groups = tuple(sorted(region_partition))
        out = np.zeros((len(groups), counts.shape[1]), dtype=np.int64)
        gidx = {g: i for i, g in enumerate(groups)}
        for i, r in enumerate(region_ids):
            out[gidx[assigned[r]]] += counts[i]
        counts, region_ids = out, groups
    if time_block > 1:
        T = counts.shape[1]
        n_blocks = (T + time_block - 1) // time_block
        out = np.zeros((counts.shape[0], n_blocks), dtype=np.int64)
        for j in range(n_blocks):
            out[:, j] = counts[:, j * time_block:(j + 1) * time_block].sum(axis=1)
        counts = out
        period = max(1, panel.period_length // time_block)
        return CountPanel(counts, region_ids, period, panel.start, None)
    labels = panel.time_labels if counts.shape[1] == panel.n_time else None
    return CountPanel(counts, region_ids, panel.period_length, panel.start, labels)


def write_count_panel(panel: CountPanel, path, sparse: bool = False) -> None:
    """Serialize a panel back to the documented region,time,count CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region", "time", "count"])
        for i, region in enumerate(panel.region_ids):
            for j in range(panel.n_time):
                c = int(panel.counts[i, j])
                if sparse and c == 0:
                    continue
                label = panel.time_labels[j] if panel.time_labels else str(j)
                writer.writerow([region, label, c])
