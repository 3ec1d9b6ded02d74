from __future__ import annotations

import pytest

from .fixture_servers import (
    FixtureServer,
    ScriptedProvider,
    arxiv_entry,
    make_arxiv_route,
    make_embeddings_route,
    make_s2_route,
    s2_entry,
)


@pytest.fixture
def fixture_server():
    server = FixtureServer().start()
    yield server
    server.stop()


@pytest.fixture
def scholarly(fixture_server):
    """One server playing both scholarly APIs, preloaded with 3 + 3 entries.

    Returns (server, s2_state, arxiv_state); mutate the state dicts to change
    behavior mid-test.
    """
    s2_state = {"entries": [s2_entry(i) for i in range(1, 4)]}
    arxiv_state = {"entries": [arxiv_entry(i) for i in range(1, 4)]}
    fixture_server.route("GET", "/graph/v1/paper/search", make_s2_route(s2_state))
    fixture_server.route("GET", "/api/query", make_arxiv_route(arxiv_state))
    return fixture_server, s2_state, arxiv_state


@pytest.fixture
def provider(fixture_server):
    """OpenAI-compatible provider fixture; returns (server, script)."""
    script = ScriptedProvider()
    fixture_server.route("POST", "/chat/completions", script.handler)
    return fixture_server, script


@pytest.fixture
def embeddings_server(fixture_server):
    state: dict = {}
    fixture_server.route("POST", "/embeddings", make_embeddings_route(state))
    return fixture_server, state
