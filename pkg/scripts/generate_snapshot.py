#!/usr/bin/env python3
"""Generate the bundled synthetic IMD-like snapshot under data/imd_snapshot/.

The snapshot mimics the shape of the public invasive-meningococcal-disease
surveillance data for Germany 2002-2008 (413 districts, two finetypes,
monthly counts, point events for finetype B) but every number here is drawn
from a seeded generator; it is NOT the original dataset export. The
manifest records faithful=false so exact-number acceptance checks skip.

Construction, in order:
  1. 413 district centroids (four real anchor districts around Aachen, the
     rest sampled in a Germany-shaped bounding box), log-normal populations
     scaled to 82.2M, and a 16-state partition by nearest state seed.
  2. Finetype-B point events: district-month Poisson draws proportional to
     population with a winter-peaking season, plus a multiplicative cluster
     in the four Aachen-area districts from 2004-03 for 12 months. Each
     event gets a centroid-jittered coordinate and a uniform day-in-month.
  3. counts_b = exact district-month aggregation of those events (event
     month = calendar month of the event date; district = generating
     district). counts_c is an independent no-cluster panel.

Run from the repository root:  python scripts/generate_snapshot.py
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import math
from pathlib import Path

import numpy as np

SEED = 20214
N_DISTRICTS = 413
MONTHS = [(y, m) for y in range(2002, 2009) for m in range(1, 13)]  # 84
TOTAL_POPULATION = 82_200_000.0
NATIONAL_B_PER_MONTH = 4.0   # mean cases/month, finetype B, outside cluster
NATIONAL_C_PER_MONTH = 3.6
SEASONAL_AMPLITUDE = 0.35    # winter peak on the log scale
CLUSTER_DISTRICTS = ["aachen", "dueren", "heinsberg", "euskirchen"]
CLUSTER_START = (2004, 3)
CLUSTER_MONTHS = 12
CLUSTER_RELATIVE_RISK = 22.0
JITTER_KM = 8.0

ANCHORS = {
    # district: (lon, lat, population) - approximate real values
    "aachen": (6.084, 50.775, 555_000.0),
    "dueren": (6.482, 50.802, 263_000.0),
    "heinsberg": (6.096, 51.063, 254_000.0),
    "euskirchen": (6.787, 50.660, 192_000.0),
}

STATE_SEEDS = {
    "schleswig-holstein": (9.8, 54.2), "hamburg": (10.0, 53.55),
    "lower-saxony": (9.2, 52.8), "bremen": (8.8, 53.08),
    "north-rhine-westphalia": (7.5, 51.5), "hesse": (9.0, 50.6),
    "rhineland-palatinate": (7.4, 49.9), "baden-wuerttemberg": (9.0, 48.5),
    "bavaria": (11.5, 48.8), "saarland": (7.0, 49.4),
    "berlin": (13.4, 52.52), "brandenburg": (13.4, 52.0),
    "mecklenburg-vorpommern": (12.5, 53.7), "saxony": (13.5, 51.0),
    "saxony-anhalt": (11.7, 52.0), "thuringia": (11.0, 50.9),
}


def month_index(year: int, month: int) -> int:
    return MONTHS.index((year, month))


def build_geometry(rng):
    names, lons, lats, pops = [], [], [], []
    for name, (lon, lat, pop) in ANCHORS.items():
        names.append(name)
        lons.append(lon)
        lats.append(lat)
        pops.append(pop)
    n_rest = N_DISTRICTS - len(ANCHORS)
    lons += list(rng.uniform(6.1, 14.9, n_rest))
    lats += list(rng.uniform(47.4, 54.8, n_rest))
    names += [f"d{i:03d}" for i in range(len(ANCHORS) + 1, N_DISTRICTS + 1)]
    raw = rng.lognormal(mean=11.7, sigma=0.7, size=n_rest)
    scale = (TOTAL_POPULATION - sum(pops)) / raw.sum()
    pops += list(raw * scale)
    states = []
    for lon, lat in zip(lons, lats):
        best = min(STATE_SEEDS,
                   key=lambda s: (STATE_SEEDS[s][0] - lon) ** 2
                   + (STATE_SEEDS[s][1] - lat) ** 2)
        states.append(best)
    return names, np.array(lons), np.array(lats), np.array(pops), states


def seasonal_rate(per_month: float, month: int) -> float:
    # IMD peaks in winter
    return per_month * math.exp(
        SEASONAL_AMPLITUDE * math.cos(2.0 * math.pi * (month - 1) / 12.0))


def draw_counts(rng, pops, with_cluster: bool, names):
    shares = pops / pops.sum()
    counts = np.zeros((N_DISTRICTS, len(MONTHS)), dtype=np.int64)
    cluster_idx = [names.index(d) for d in CLUSTER_DISTRICTS]
    start = month_index(*CLUSTER_START)
    per_month = NATIONAL_B_PER_MONTH if with_cluster else NATIONAL_C_PER_MONTH
    for j, (year, month) in enumerate(MONTHS):
        lam = shares * seasonal_rate(per_month, month)
        if with_cluster and start <= j < start + CLUSTER_MONTHS:
            lam = lam.copy()
            lam[cluster_idx] *= CLUSTER_RELATIVE_RISK
        counts[:, j] = rng.poisson(lam)
    return counts


def events_from_counts(rng, counts, lons, lats):
    """One jittered point event per counted case; returns rows sorted by date."""
    lat0 = float(np.mean(lats))
    km_per_deg_lat = 111.195
    km_per_deg_lon = km_per_deg_lat * math.cos(math.radians(lat0))
    rows = []
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            c = int(counts[i, j])
            if c == 0:
                continue
            year, month = MONTHS[j]
            first = dt.date(year, month, 1)
            n_days = ((dt.date(year + month // 12, month % 12 + 1, 1) - first)
                      .days)
            for _ in range(c):
                day = int(rng.integers(0, n_days))
                lon = lons[i] + rng.normal(0.0, JITTER_KM / km_per_deg_lon)
                lat = lats[i] + rng.normal(0.0, JITTER_KM / km_per_deg_lat)
                rows.append((round(lon, 5), round(lat, 5),
                             (first + dt.timedelta(days=day)).isoformat()))
    rows.sort(key=lambda r: r[2])
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def counts_rows(counts, names):
    """Sparse cells plus zero anchors so every district and the full
    2002-01..2008-12 span survive densification."""
    rows = []
    for i, name in enumerate(names):
        for j, (year, month) in enumerate(MONTHS):
            c = int(counts[i, j])
            anchor = j == 0 or (j == len(MONTHS) - 1 and i == 0)
            if c > 0 or anchor:
                rows.append((name, f"{year:04d}-{month:02d}", c))
    return rows


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def main():
    out_dir = Path(__file__).resolve().parents[1] / "data" / "imd_snapshot"
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)

    names, lons, lats, pops, states = build_geometry(rng)
    counts_b = draw_counts(rng, pops, with_cluster=True, names=names)
    counts_c = draw_counts(rng, pops, with_cluster=False, names=names)
    event_rows = events_from_counts(rng, counts_b, lons, lats)

    write_csv(out_dir / "geometry.csv", ["region", "lon", "lat", "population"],
              [(n, round(lo, 5), round(la, 5), round(p, 1))
               for n, lo, la, p in zip(names, lons, lats, pops)])
    write_csv(out_dir / "states.csv", ["region", "state"],
              list(zip(names, states)))
    write_csv(out_dir / "counts_b.csv", ["region", "time", "count"],
              counts_rows(counts_b, names))
    write_csv(out_dir / "counts_c.csv", ["region", "time", "count"],
              counts_rows(counts_c, names))
    write_csv(out_dir / "events_b.csv", ["lon", "lat", "date"], event_rows)

    files = {}
    for key, fname, rows in [
            ("geometry", "geometry.csv", N_DISTRICTS),
            ("states", "states.csv", N_DISTRICTS),
            ("counts_b", "counts_b.csv", len(counts_rows(counts_b, names))),
            ("counts_c", "counts_c.csv", len(counts_rows(counts_c, names))),
            ("events_b", "events_b.csv", len(event_rows))]:
        files[key] = {"path": fname, "sha256": sha256(out_dir / fname),
                      "rows": rows}
    manifest = {
        "faithful": False,
        "provenance": (
            "Synthetic stand-in generated by scripts/generate_snapshot.py "
            f"(seed {SEED}). Shapes mimic the public German IMD surveillance "
            "dataset (413 districts, monthly 2002-2008, finetypes B and C, "
            "point events for B, cluster planted in the four Aachen-area "
            "districts from 2004-03) but no value comes from the original "
            "export, so published worked-example numbers are not reproduced "
            "here and snapshot-gated acceptance checks must skip."),
        "mapping_notes": (
            "Event month = calendar month of the event date. Event district "
            "= generating district (events are drawn around district "
            "centroids with 8 km jitter, not re-assigned by polygon). "
            "counts_b is the exact district-month aggregation of events_b."),
        "seed": SEED,
        "files": files,
        "totals": {
            "n_districts": N_DISTRICTS,
            "n_months": len(MONTHS),
            "counts_b_total": int(counts_b.sum()),
            "counts_c_total": int(counts_c.sum()),
            "events_b_total": len(event_rows),
            "events_horizon_days": dt.date(2008, 12, 31).toordinal(),
            "cluster_districts": CLUSTER_DISTRICTS,
            "cluster_start": f"{CLUSTER_START[0]:04d}-{CLUSTER_START[1]:02d}",
            "cluster_months": CLUSTER_MONTHS,
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2)
                                           + "\n", encoding="utf-8")
    print(f"snapshot written to {out_dir}")
    print(f"  counts_b total {counts_b.sum()}, counts_c total "
          f"{counts_c.sum()}, events {len(event_rows)}")


if __name__ == "__main__":
    main()
