"""Runtime configuration: provider mode, LLM backends, service settings.

Configuration is a JSON file; API keys are named by environment variable,
never stored. Without a file the defaults give a fully offline setup:
bundled gazetteer, haversine walking times, and the bundled mock fixtures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .llm import DEFAULT_RETRIES, DEFAULT_TEMPERATURE, HttpBackend, MockBackend
from .providers import (
    DEFAULT_WALKING_SPEED_KMH,
    Gazetteer,
    LiveProvider,
    OfflineProvider,
)


def bundled_llm_fixtures() -> Path:
    return Path(str(resources.files("planloop.fixtures") / "llm"))


@dataclass
class BackendConfig:
    id: str = "mock-1"
    kind: str = "mock"  # mock | http
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "PLANLOOP_API_KEY"
    temperature: float = DEFAULT_TEMPERATURE
    retries: int = DEFAULT_RETRIES
    fixtures: str | None = None


@dataclass
class ProviderConfig:
    mode: str = "offline"  # offline | live
    walking_speed_kmh: float = DEFAULT_WALKING_SPEED_KMH
    gazetteer: str | None = None
    geocode_url: str = ""
    route_url: str = ""
    api_key_env: str = "PLANLOOP_MAPS_KEY"
    travel_mode: str = "walking"
    cache_dir: str | None = None


@dataclass
class AppConfig:
    listen: str = "127.0.0.1:8734"
    store_path: str = "planloop-sessions.db"
    static_dir: str | None = None
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    backends: list[BackendConfig] = field(default_factory=lambda: [BackendConfig()])


def load_config(path: str | Path | None) -> AppConfig:
    if path is None:
        return AppConfig()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    provider = ProviderConfig(**data.get("provider", {}))
    backends = [BackendConfig(**b) for b in data.get("backends", [])] or [
        BackendConfig()
    ]
    return AppConfig(
        listen=data.get("listen", "127.0.0.1:8734"),
        store_path=data.get("store_path", "planloop-sessions.db"),
        static_dir=data.get("static_dir"),
        provider=provider,
        backends=backends,
    )


def build_provider(cfg: ProviderConfig):
    if cfg.mode == "offline":
        gaz = Gazetteer.from_file(cfg.gazetteer) if cfg.gazetteer else Gazetteer.bundled()
        return OfflineProvider(gazetteer=gaz, walking_speed_kmh=cfg.walking_speed_kmh)
    if cfg.mode == "live":
        import os

        return LiveProvider(
            geocode_url=cfg.geocode_url,
            route_url=cfg.route_url,
            api_key=os.environ.get(cfg.api_key_env, ""),
            travel_mode=cfg.travel_mode,
            cache_dir=cfg.cache_dir,
        )
    raise ValueError(f"unknown provider mode {cfg.mode!r}")


def build_backend(cfg: BackendConfig):
    if cfg.kind == "mock":
        fixtures = Path(cfg.fixtures) if cfg.fixtures else bundled_llm_fixtures()
        return MockBackend(fixtures, id=cfg.id)
    if cfg.kind == "http":
        return HttpBackend(
            id=cfg.id,
            endpoint=cfg.endpoint,
            model=cfg.model,
            api_key_env=cfg.api_key_env,
            temperature=cfg.temperature,
        )
    raise ValueError(f"unknown backend kind {cfg.kind!r}")


def backend_factory(config: AppConfig):
    """Factory handed to the session engine: the first ``count`` configured
    backends; mock ids auto-extend so a two-backend request works even with
    a single configured mock."""

    def factory(count: int):
        count = max(1, count)
        built = [build_backend(b) for b in config.backends[:count]]
        while len(built) < count:
            base = config.backends[0]
            if base.kind != "mock":
                break
            clone = BackendConfig(
                id=f"mock-{len(built) + 1}",
                kind="mock",
                fixtures=base.fixtures,
            )
            built.append(build_backend(clone))
        return built

    return factory
