"""Deterministic synthetic tour instances for desk-scale evaluation."""

from __future__ import annotations

import math
import random
from pathlib import Path

from . import formats
from .model import OpInstance, Spot
from .providers import DEFAULT_WALKING_SPEED_KMH, Gazetteer, OfflineProvider

KM_PER_DEG_LAT = 110.574
DISC_RADIUS_KM = 5.0
DEFAULT_CENTER = (48.2082, 16.3738)


def gen_instance(
    seed: int,
    n_spots: int,
    budget_policy: float = 0.6,
    walking_speed_kmh: float = DEFAULT_WALKING_SPEED_KMH,
    center: tuple[float, float] = DEFAULT_CENTER,
) -> OpInstance:
    """Spots scattered in a 5 km disc around a central depot, scores
    U[1,10], stays U[20,90] minutes, walking-time matrix, and a budget of
    ``budget_policy`` times (total stay + nearest-neighbour tour time)."""
    if n_spots < 1:
        raise ValueError("n_spots must be >= 1")
    rng = random.Random(seed)
    lat0, lon0 = center
    spots = [Spot(id="start", name="Start", address="", lat=lat0, lon=lon0)]
    score = [0.0]
    duration = [0.0]
    for k in range(n_spots):
        r = DISC_RADIUS_KM * math.sqrt(rng.random())
        angle = rng.random() * 2 * math.pi
        dlat = (r * math.cos(angle)) / KM_PER_DEG_LAT
        dlon = (r * math.sin(angle)) / (KM_PER_DEG_LAT * math.cos(math.radians(lat0)))
        spots.append(
            Spot(
                id=f"s{k + 1:02d}",
                name=f"Spot {k + 1}",
                address="",
                lat=lat0 + dlat,
                lon=lon0 + dlon,
            )
        )
        score.append(rng.uniform(1.0, 10.0))
        duration.append(rng.uniform(20.0, 90.0))
    provider = OfflineProvider(gazetteer=Gazetteer([]), walking_speed_kmh=walking_speed_kmh)
    matrix = provider.travel_matrix(spots)
    budget = budget_policy * (sum(duration) + _nearest_neighbour_time(matrix))
    return OpInstance(
        spots=spots,
        depot_index=0,
        travel_time=matrix,
        score=score,
        duration=duration,
        budget_minutes=budget,
    )


def random_matrix_instance(
    seed: int,
    n_spots: int,
    travel_range: tuple[float, float] = (5.0, 40.0),
    duration_range: tuple[float, float] = (20.0, 90.0),
    budget_policy: float = 0.6,
) -> OpInstance:
    """Non-geometric variant: independently drawn (possibly asymmetric)
    travel times. Useful for stressing solvers beyond metric inputs."""
    if n_spots < 1:
        raise ValueError("n_spots must be >= 1")
    rng = random.Random(seed)
    n = n_spots + 1
    spots = [Spot(id="start", name="Start")] + [
        Spot(id=f"s{k + 1:02d}", name=f"Spot {k + 1}") for k in range(n_spots)
    ]
    matrix = [
        [0.0 if i == j else rng.uniform(*travel_range) for j in range(n)]
        for i in range(n)
    ]
    score = [0.0] + [rng.uniform(1.0, 10.0) for _ in range(n_spots)]
    duration = [0.0] + [rng.uniform(*duration_range) for _ in range(n_spots)]
    budget = budget_policy * (sum(duration) + _nearest_neighbour_time(matrix))
    return OpInstance(
        spots=spots,
        depot_index=0,
        travel_time=matrix,
        score=score,
        duration=duration,
        budget_minutes=budget,
    )


def _nearest_neighbour_time(matrix: list[list[float]]) -> float:
    n = len(matrix)
    unvisited = set(range(1, n))
    cur = 0
    total = 0.0
    while unvisited:
        nxt = min(unvisited, key=lambda j: (matrix[cur][j], j))
        total += matrix[cur][nxt]
        unvisited.remove(nxt)
        cur = nxt
    total += matrix[cur][0]
    return total


def write_instances(
    out_dir: str | Path,
    seed: int,
    count: int,
    n_spots: int,
    budget_policy: float = 0.6,
) -> list[Path]:
    """One file per instance, seeded as seed, seed+1, ...; regenerating
    with the same arguments reproduces identical bytes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(count):
        instance = gen_instance(seed + k, n_spots, budget_policy)
        path = out / f"instance-{seed + k:04d}.json"
        formats.save_op_instance(path, instance)
        paths.append(path)
    return paths
