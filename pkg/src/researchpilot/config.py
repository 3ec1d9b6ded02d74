"""Configuration loading: environment variables, an optional local env file,
explicit overrides, and per-run override merging.

Precedence, highest first: explicit overrides (CLI flags), process
environment, ./.env file, built-in defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .agents import PipelineDeps, SearchFn
from .domain import ConfigError, RuntimeConfig
from .embeddings import Embedder
from .search import DEFAULT_ARXIV_BASE_URL, DEFAULT_S2_BASE_URL, search_papers
from .store import ReportStore

DEFAULT_DB_PATH = "./researchpilot.db"
DEFAULT_PORT = 8080
DEFAULT_HOST = "127.0.0.1"
ENV_FILE = ".env"

_CONFIG_KEYS = ("provider", "model", "api_key", "base_url", "embedding_mode")


@dataclass(frozen=True)
class ServerSettings:
    """Everything the service needs beyond the per-run RuntimeConfig."""

    config: RuntimeConfig
    s2_api_key: str | None = None
    s2_base_url: str = DEFAULT_S2_BASE_URL
    arxiv_base_url: str = DEFAULT_ARXIV_BASE_URL
    db_path: str = DEFAULT_DB_PATH
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT


def load_env_file(path: str | Path = ENV_FILE) -> dict[str, str]:
    """Parse KEY=VALUE lines; blank lines and # comments are skipped, and
    matching surrounding quotes are stripped. Missing file → empty mapping."""
    env_path = Path(path)
    if not env_path.is_file():
        return {}
    values: dict[str, str] = {}
    for line in env_path.read_text(encoding="utf-8").splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#") or "=" not in stripped:
            continue
        key, _, value = stripped.partition("=")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
            value = value[1:-1]
        values[key.strip()] = value
    return values


def _lookup(
    name: str,
    overrides: Mapping[str, str],
    env: Mapping[str, str],
    file_env: Mapping[str, str],
) -> str | None:
    for layer in (overrides, env, file_env):
        value = layer.get(name)
        if value is not None and value != "":
            return value
    return None


def load_settings(
    overrides: Mapping[str, str] | None = None,
    *,
    env: Mapping[str, str] | None = None,
    env_file: str | Path = ENV_FILE,
) -> ServerSettings:
    """Assemble settings from override/env/file layers.

    `overrides` uses the env-var names (RP_PROVIDER, ...). Unknown enum
    values and non-numeric ports raise ConfigError.
    """
    overrides = overrides or {}
    env = os.environ if env is None else env
    file_env = load_env_file(env_file)

    def get(name: str) -> str | None:
        return _lookup(name, overrides, env, file_env)

    try:
        config = RuntimeConfig(
            provider=get("RP_PROVIDER") or "mock",
            model=get("RP_MODEL") or "mock-model",
            api_key=get("RP_API_KEY"),
            base_url=get("RP_BASE_URL"),
            embedding_mode=get("RP_EMBEDDING_MODE") or "auto",
        )
    except ValueError as exc:
        raise ConfigError(f"configuration error: {exc}") from exc

    port_text = get("RP_PORT") or str(DEFAULT_PORT)
    try:
        port = int(port_text)
    except ValueError as exc:
        raise ConfigError(f"configuration error: RP_PORT must be an integer, got {port_text!r}") from exc

    return ServerSettings(
        config=config,
        s2_api_key=get("RP_S2_API_KEY"),
        s2_base_url=get("RP_S2_BASE_URL") or DEFAULT_S2_BASE_URL,
        arxiv_base_url=get("RP_ARXIV_BASE_URL") or DEFAULT_ARXIV_BASE_URL,
        db_path=get("RP_DB_PATH") or DEFAULT_DB_PATH,
        host=get("RP_HOST") or DEFAULT_HOST,
        port=port,
    )


def merge_overrides(base: RuntimeConfig, overrides: Mapping[str, object]) -> RuntimeConfig:
    """Merge per-run override fields onto the base config, field-level: a set
    field wins, an absent/empty field inherits. Unknown fields and unknown
    enum values are configuration errors."""
    unknown = set(overrides) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(
            f"configuration error: unknown override fields: {', '.join(sorted(unknown))}"
        )
    merged: dict[str, object] = {
        "provider": base.provider,
        "model": base.model,
        "api_key": base.api_key,
        "base_url": base.base_url,
        "embedding_mode": base.embedding_mode,
    }
    for key in _CONFIG_KEYS:
        value = overrides.get(key)
        if value is None or value == "":
            continue
        if not isinstance(value, str):
            raise ConfigError(f"configuration error: override {key} must be a string")
        merged[key] = value
    try:
        return RuntimeConfig(**merged)  # type: ignore[arg-type]
    except ValueError as exc:
        raise ConfigError(f"configuration error: {exc}") from exc


def build_search_fn(settings: ServerSettings) -> SearchFn:
    """Close retrieval endpoints and credentials over the search entrypoint."""

    async def search(question: str, *, on_source_done=None):
        return await search_papers(
            question,
            s2_api_key=settings.s2_api_key,
            s2_base_url=settings.s2_base_url,
            arxiv_base_url=settings.arxiv_base_url,
            on_source_done=on_source_done,
        )

    return search


def build_deps(
    settings: ServerSettings,
    config: RuntimeConfig,
    store: ReportStore,
) -> PipelineDeps:
    """Wire one run's dependencies: retrieval from settings, the shared
    store, and an embedder for the (possibly overridden) run config."""
    return PipelineDeps(
        search=build_search_fn(settings),
        store=store,
        embed=Embedder(config).embed,
    )
