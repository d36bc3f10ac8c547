"""Observable providers: geocoding and travel-time matrices.

Offline mode resolves addresses from a bundled gazetteer and derives
walking times from great-circle distance at a configured speed. Live mode
calls configurable HTTP endpoints and caches responses on disk so repeated
sessions are reproducible and rate-limit friendly.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import httpx

from .model import Spot

EARTH_RADIUS_KM = 6371.0088
DEFAULT_WALKING_SPEED_KMH = 4.8


class NotFound(LookupError):
    """Address absent from the gazetteer / geocoding service."""


class ApiUnavailable(RuntimeError):
    """Live endpoint failed; no partial matrices are ever returned."""


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometres."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlmb / 2) ** 2
    return EARTH_RADIUS_KM * 2 * math.asin(math.sqrt(a))


def _normalize(text: str) -> str:
    return " ".join(text.casefold().split())


class Gazetteer:
    """Name/address -> coordinates lookup backed by a JSON array of
    {name, address, lat, lon} entries."""

    def __init__(self, entries: list[dict]):
        self._by_key: dict[str, tuple[float, float]] = {}
        for e in entries:
            coords = (float(e["lat"]), float(e["lon"]))
            for key in (e.get("name"), e.get("address")):
                if key:
                    self._by_key.setdefault(_normalize(str(key)), coords)

    @classmethod
    def from_file(cls, path: str | Path) -> "Gazetteer":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def bundled(cls) -> "Gazetteer":
        data = resources.files("planloop.fixtures").joinpath("gazetteer.json")
        return cls(json.loads(data.read_text(encoding="utf-8")))

    def lookup(self, address: str) -> tuple[float, float]:
        if not address or not address.strip():
            raise ValueError("address must be non-empty")
        key = _normalize(address)
        if key in self._by_key:
            return self._by_key[key]
        # Fall back to the part before the first comma ("Louvre, Paris").
        head = _normalize(address.split(",")[0])
        if head in self._by_key:
            return self._by_key[head]
        raise NotFound(address)


class OfflineProvider:
    """Deterministic provider: gazetteer geocoding plus straight-line
    walking times."""

    mode = "offline_haversine"

    def __init__(
        self,
        gazetteer: Gazetteer | None = None,
        walking_speed_kmh: float = DEFAULT_WALKING_SPEED_KMH,
    ):
        if walking_speed_kmh <= 0:
            raise ValueError("walking speed must be positive")
        self.gazetteer = gazetteer or Gazetteer.bundled()
        self.walking_speed_kmh = walking_speed_kmh

    def geocode(self, address: str) -> tuple[float, float]:
        return self.gazetteer.lookup(address)

    def travel_matrix(self, spots: list[Spot]) -> list[list[float]]:
        coords = []
        for s in spots:
            if not s.geocoded:
                raise ValueError(f"spot {s.id!r} has no coordinates")
            coords.append((s.lat, s.lon))
        n = len(coords)
        matrix = [[0.0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                km = haversine_km(*coords[i], *coords[j])
                minutes = km / self.walking_speed_kmh * 60.0
                matrix[i][j] = minutes
                matrix[j][i] = minutes
        return matrix


class LiveProvider:
    """HTTP geocoding + routing client with an on-disk JSON cache keyed by
    coordinates and mode. A failed pair fails the whole matrix: matrices
    never mix cached and fresh provenance with partial errors."""

    mode = "live_api"

    def __init__(
        self,
        geocode_url: str,
        route_url: str,
        api_key: str = "",
        travel_mode: str = "walking",
        cache_dir: str | Path | None = None,
        timeout: float = 10.0,
        client: httpx.Client | None = None,
    ):
        self.geocode_url = geocode_url
        self.route_url = route_url
        self.api_key = api_key
        self.travel_mode = travel_mode
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._client = client or httpx.Client(timeout=timeout)
        self._cache_lock = threading.Lock()

    def _cached(self, key: str) -> dict | None:
        if self.cache_dir is None:
            return None
        path = self.cache_dir / f"{hashlib.sha256(key.encode()).hexdigest()}.json"
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return None

    def _store(self, key: str, value: dict) -> None:
        if self.cache_dir is None:
            return
        with self._cache_lock:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            path = self.cache_dir / f"{hashlib.sha256(key.encode()).hexdigest()}.json"
            path.write_text(json.dumps(value, sort_keys=True), encoding="utf-8")

    def geocode(self, address: str) -> tuple[float, float]:
        if not address or not address.strip():
            raise ValueError("address must be non-empty")
        key = f"geocode:{_normalize(address)}"
        hit = self._cached(key)
        if hit is not None:
            return hit["lat"], hit["lon"]
        try:
            resp = self._client.get(
                self.geocode_url,
                params={"q": address, "key": self.api_key},
            )
            resp.raise_for_status()
            data = resp.json()
        except httpx.HTTPError as exc:
            raise ApiUnavailable(f"geocoding failed: {exc}") from exc
        results = data.get("results") or []
        if not results:
            raise NotFound(address)
        first = results[0]
        value = {"lat": float(first["lat"]), "lon": float(first["lon"])}
        self._store(key, value)
        return value["lat"], value["lon"]

    def _pair_minutes(self, a: tuple[float, float], b: tuple[float, float]) -> float:
        key = f"route:{self.travel_mode}:{a[0]:.6f},{a[1]:.6f}->{b[0]:.6f},{b[1]:.6f}"
        hit = self._cached(key)
        if hit is not None:
            return float(hit["minutes"])
        try:
            resp = self._client.get(
                self.route_url,
                params={
                    "from": f"{a[0]},{a[1]}",
                    "to": f"{b[0]},{b[1]}",
                    "mode": self.travel_mode,
                    "key": self.api_key,
                },
            )
            resp.raise_for_status()
            data = resp.json()
            minutes = float(data["minutes"])
        except (httpx.HTTPError, KeyError, TypeError, ValueError) as exc:
            raise ApiUnavailable(f"routing failed: {exc}") from exc
        self._store(key, {"minutes": minutes})
        return minutes

    def travel_matrix(self, spots: list[Spot]) -> list[list[float]]:
        coords = []
        for s in spots:
            if not s.geocoded:
                raise ValueError(f"spot {s.id!r} has no coordinates")
            coords.append((s.lat, s.lon))
        n = len(coords)
        matrix = [[0.0] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                if i != j:
                    matrix[i][j] = self._pair_minutes(coords[i], coords[j])
        return matrix


def geocode_spots(spots: list[Spot], provider) -> list[Spot]:
    """Return spots with coordinates filled in where the provider can
    resolve them; unresolvable spots pass through un-geocoded."""
    out: list[Spot] = []
    for s in spots:
        if s.geocoded:
            out.append(s)
            continue
        query = s.address or s.name
        try:
            lat, lon = provider.geocode(query)
        except NotFound:
            try:
                lat, lon = provider.geocode(s.name)
            except (NotFound, ValueError):
                out.append(s)
                continue
        except ValueError:
            out.append(s)
            continue
        out.append(
            Spot(
                id=s.id,
                name=s.name,
                address=s.address,
                lat=lat,
                lon=lon,
                reason=s.reason,
                sources=s.sources,
            )
        )
    return out
