"""Shared test helpers: the event-trace grammar checker and small utilities."""

from __future__ import annotations

import json

from researchpilot.domain import Paper

AGENT_ORDER = ["search", "extraction", "synthesis", "writer"]
AGENT_TYPES = {"agent_started", "agent_progress", "agent_completed"}
TERMINAL_TYPES = {"done", "error"}


def check_event_trace(events: list[dict]) -> list[str]:
    """Check one run's event dicts against the grammar

        queued (started progress* completed){0..4} (done | error)

    with agents in the fixed order search, extraction, synthesis, writer and
    seq strictly increasing from 0. A trailing incomplete group (started, some
    progress, no completed) is tolerated only when the terminal is error:
    a stage that dies mid-flight cannot unsend its started event.

    Returns a list of violation strings; empty means the trace conforms.
    """
    violations: list[str] = []
    if not events:
        return ["empty trace"]

    for i, event in enumerate(events):
        if event.get("seq") != i:
            violations.append(f"event {i}: seq {event.get('seq')} != {i}")
        has_agent = "agent" in event
        if (event.get("type") in AGENT_TYPES) != has_agent:
            violations.append(f"event {i}: agent presence wrong for {event.get('type')}")

    if events[0].get("type") != "queued":
        violations.append(f"first event is {events[0].get('type')}, not queued")
    terminal = events[-1].get("type")
    if terminal not in TERMINAL_TYPES:
        violations.append(f"last event is {terminal}, not terminal")
    for i, event in enumerate(events[:-1]):
        if event.get("type") in TERMINAL_TYPES:
            violations.append(f"event {i}: terminal {event.get('type')} before the end")

    # walk the stage groups
    body = events[1:-1]
    group = 0  # index into AGENT_ORDER
    state = "between"  # between groups | inside a group
    for i, event in enumerate(body, start=1):
        etype, agent = event.get("type"), event.get("agent")
        if state == "between":
            if etype != "agent_started":
                violations.append(f"event {i}: expected agent_started, got {etype}")
                break
            if group >= len(AGENT_ORDER):
                violations.append(f"event {i}: more than {len(AGENT_ORDER)} stage groups")
                break
            if agent != AGENT_ORDER[group]:
                violations.append(
                    f"event {i}: group {group} agent {agent}, expected {AGENT_ORDER[group]}"
                )
                break
            state = "inside"
        else:
            if agent != AGENT_ORDER[group]:
                violations.append(
                    f"event {i}: agent {agent} inside group {AGENT_ORDER[group]}"
                )
                break
            if etype == "agent_progress":
                continue
            if etype == "agent_completed":
                state = "between"
                group += 1
                continue
            violations.append(f"event {i}: unexpected {etype} inside a group")
            break
    else:
        if state == "inside" and terminal != "error":
            violations.append("incomplete stage group but terminal is not error")
    return violations


def parse_ndjson(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def make_paper(
    i: int = 1,
    *,
    paper_id: str | None = None,
    title: str | None = None,
    doi: str | None = None,
    source: str = "arxiv",
    abstract: str = "An abstract about the question.",
    year: int | None = 2020,
    url: str | None = None,
    authors: list[str] | None = None,
) -> Paper:
    return Paper(
        id=paper_id if paper_id is not None else f"{source}-{i}",
        title=title if title is not None else f"Paper Number {i}",
        abstract=abstract,
        source=source,
        url=url if url is not None else f"https://example.org/{source}/{i}",
        year=year,
        authors=authors if authors is not None else ["A. Author"],
        doi=doi,
    )
