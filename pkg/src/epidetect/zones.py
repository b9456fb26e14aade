"""Construction of the candidate zone sets and space-time windows scanned by
the scan statistics.

Distances are Euclidean on the planar km centroids; distance ties break by
region index so zone generation is deterministic for a given geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import StudyGeometry

MAX_ZONES = 1_000_000


@dataclass(frozen=True)
class Zone:
    """A non-empty, sorted, duplicate-free set of region indices."""

    regions: tuple[int, ...]

    def __post_init__(self):
        if len(self.regions) == 0:
            raise ValueError("zone must be non-empty")
        regions = tuple(int(r) for r in self.regions)
        if any(r < 0 for r in regions):
            raise ValueError("region indices must be >= 0")
        if tuple(sorted(set(regions))) != regions:
            raise ValueError("regions must be sorted and unique")
        object.__setattr__(self, "regions", regions)

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)


@dataclass(frozen=True)
class SpaceTimeWindow:
    """A zone crossed with the D most recent time steps (a cylinder ending
    at the present)."""

    zone: Zone
    duration: int

    def __post_init__(self):
        if self.duration < 1:
            raise ValueError("duration must be >= 1")


def _neighbor_order(geometry: StudyGeometry) -> np.ndarray:
    """neighbor_order[i] lists all regions sorted by (distance to i, index);
    entry 0 is always i itself."""
    cent = geometry.centroids
    diff = cent[:, None, :] - cent[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    n = geometry.n_regions
    order = np.empty((n, n), dtype=int)
    idx = np.arange(n)
    for i in range(n):
        order[i] = np.lexsort((idx, dist[i]))
    return order


def _validated_zone_list(zone_set: set[tuple[int, ...]]) -> list[Zone]:
    ordered = sorted(zone_set, key=lambda z: (len(z), z))
    return [Zone(z) for z in ordered]


def knn_zones(geometry: StudyGeometry, k_max: int) -> list[Zone]:
    """For each center i and k = 0..k_max, the zone of i plus its k nearest
    neighbors; deduplicated across centers."""
    n = geometry.n_regions
    if not 0 <= k_max < n:
        raise ValueError(f"k_max must be in [0, {n - 1}]")
    order = _neighbor_order(geometry)
    out: set[tuple[int, ...]] = set()
    for i in range(n):
        for k in range(k_max + 1):
            out.add(tuple(sorted(order[i, :k + 1].tolist())))
    return _validated_zone_list(out)


def population_capped_zones(geometry: StudyGeometry,
                            fraction: float = 0.5) -> list[Zone]:
    """k-nearest-neighbor zones grown per center until adding the next
    neighbor would push the zone population above fraction * total. The
    center itself is always included, whatever its population."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    order = _neighbor_order(geometry)
    pops = geometry.populations
    cap = fraction * geometry.total_population
    out: set[tuple[int, ...]] = set()
    for i in range(geometry.n_regions):
        members = [order[i, 0]]
        total = pops[order[i, 0]]
        out.add((int(order[i, 0]),))
        for j in order[i, 1:]:
            if total + pops[j] > cap:
                break
            members.append(int(j))
            total += pops[j]
            out.add(tuple(sorted(members)))
    return _validated_zone_list(out)


def flexible_zones(geometry: StudyGeometry, k_max: int) -> list[Zone]:
    """All adjacency-connected subsets of each center's (k_max+1)-nearest
    neighborhood that contain the center, deduplicated globally.

    Enumeration is a connected-subgraph DFS with canonical extension
    pruning, so each subset of a neighborhood is visited once. Zone counts
    beyond MAX_ZONES abort with an error; k_max above ~30 is impractical.
    """
    if geometry.adjacency is None:
        raise ValueError("flexible zones need geometry adjacency")
    n = geometry.n_regions
    if not 0 <= k_max < n:
        raise ValueError(f"k_max must be in [0, {n - 1}]")
    order = _neighbor_order(geometry)
    adj_lists = [np.flatnonzero(geometry.adjacency[i]) for i in range(n)]
    out: set[tuple[int, ...]] = set()

    for center in range(n):
        hood = set(order[center, :k_max + 1].tolist())

        def extend(current: frozenset[int], frontier: list[int],
                   forbidden: frozenset[int]) -> None:
            out.add(tuple(sorted(current)))
            if len(out) > MAX_ZONES:
                raise RuntimeError(
                    f"zone enumeration exceeded {MAX_ZONES} zones; "
                    f"reduce k_max")
            for pos, v in enumerate(frontier):
                new_frontier = [u for u in frontier[pos + 1:]]
                for u in adj_lists[v]:
                    if (u in hood and u not in current
                            and u not in forbidden and u not in frontier):
                        new_frontier.append(int(u))
                extend(current | {v}, new_frontier,
                       forbidden | frozenset(frontier[:pos]))

        start_frontier = [int(u) for u in adj_lists[center] if u in hood]
        extend(frozenset([center]), start_frontier, frozenset())
    return _validated_zone_list(out)


def windows(zones: list[Zone], d_max: int) -> list[SpaceTimeWindow]:
    """Cartesian product of zones and trailing durations 1..d_max."""
    if not zones:
        raise ValueError("empty zone set")
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    return [SpaceTimeWindow(zone=z, duration=d)
            for d in range(1, d_max + 1) for z in zones]
