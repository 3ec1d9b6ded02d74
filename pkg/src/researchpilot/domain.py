"""Core value types shared by every pipeline stage, plus small pure text helpers.

Everything here is an immutable value object: construct, validate, pass around
freely between concurrent tasks.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any

PAPER_CAP = 10  # hard ceiling on papers per report

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class Source(str, Enum):
    SEMANTIC_SCHOLAR = "semantic_scholar"
    ARXIV = "arxiv"


class Provider(str, Enum):
    OPENAI_COMPATIBLE = "openai_compatible"
    ANTHROPIC = "anthropic"
    MOCK = "mock"


class EmbeddingMode(str, Enum):
    REMOTE = "remote"
    LOCAL = "local"
    AUTO = "auto"


class EventType(str, Enum):
    QUEUED = "queued"
    AGENT_STARTED = "agent_started"
    AGENT_PROGRESS = "agent_progress"
    AGENT_COMPLETED = "agent_completed"
    DONE = "done"
    ERROR = "error"


class Agent(str, Enum):
    SEARCH = "search"
    EXTRACTION = "extraction"
    SYNTHESIS = "synthesis"
    WRITER = "writer"


_AGENT_EVENT_TYPES = {
    EventType.AGENT_STARTED,
    EventType.AGENT_PROGRESS,
    EventType.AGENT_COMPLETED,
}


class ConfigError(Exception):
    """Raised when the runtime configuration cannot support the requested run."""


@dataclass(frozen=True)
class Paper:
    """One retrieved scholarly record. Abstract is always nonempty:
    records without abstracts are filtered out before construction."""

    id: str
    title: str
    abstract: str
    source: Source
    url: str
    year: int | None = None
    authors: list[str] = field(default_factory=list)
    doi: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("paper id must be nonempty")
        if not self.abstract:
            raise ValueError("paper abstract must be nonempty")
        if not isinstance(self.source, Source):
            object.__setattr__(self, "source", Source(self.source))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "abstract": self.abstract,
            "source": self.source.value,
            "url": self.url,
            "year": self.year,
            "authors": list(self.authors),
            "doi": self.doi,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Paper:
        return cls(
            id=data["id"],
            title=data["title"],
            abstract=data["abstract"],
            source=Source(data["source"]),
            url=data["url"],
            year=data.get("year"),
            authors=list(data.get("authors") or []),
            doi=data.get("doi"),
        )


@dataclass(frozen=True)
class PaperExtraction:
    """Five-list structured summary of one abstract. All lists are always
    present; an absent aspect is an empty list, never a missing field."""

    paper_id: str
    claims: list[str] = field(default_factory=list)
    methods: list[str] = field(default_factory=list)
    datasets: list[str] = field(default_factory=list)
    results: list[str] = field(default_factory=list)
    limitations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "paper_id": self.paper_id,
            "claims": list(self.claims),
            "methods": list(self.methods),
            "datasets": list(self.datasets),
            "results": list(self.results),
            "limitations": list(self.limitations),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PaperExtraction:
        return cls(
            paper_id=data["paper_id"],
            claims=list(data.get("claims") or []),
            methods=list(data.get("methods") or []),
            datasets=list(data.get("datasets") or []),
            results=list(data.get("results") or []),
            limitations=list(data.get("limitations") or []),
        )


@dataclass(frozen=True)
class Synthesis:
    """Cross-paper consolidation: consensus, contradictions, open gaps."""

    consensus: list[str] = field(default_factory=list)
    contradictions: list[str] = field(default_factory=list)
    open_gaps: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "consensus": list(self.consensus),
            "contradictions": list(self.contradictions),
            "open_gaps": list(self.open_gaps),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Synthesis:
        return cls(
            consensus=list(data.get("consensus") or []),
            contradictions=list(data.get("contradictions") or []),
            open_gaps=list(data.get("open_gaps") or []),
        )


_LABEL_RE = re.compile(r"^R([1-9]\d*)$")


@dataclass(frozen=True)
class ReferenceEntry:
    label: str
    paper_id: str

    def __post_init__(self) -> None:
        if not _LABEL_RE.match(self.label):
            raise ValueError(f"reference label must look like R1..Rn, got {self.label!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "paper_id": self.paper_id}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ReferenceEntry:
        return cls(label=data["label"], paper_id=data["paper_id"])


@dataclass(frozen=True)
class Report:
    """The persisted bundle produced by one completed run."""

    report_id: str
    question: str
    papers: list[Paper]
    extractions: list[PaperExtraction]
    synthesis: Synthesis
    draft_markdown: str
    warnings: list[str]
    references: list[ReferenceEntry]
    created_at: str

    def __post_init__(self) -> None:
        if not self.question:
            raise ValueError("report question must be nonempty")
        if len(self.papers) > PAPER_CAP:
            raise ValueError(f"report holds {len(self.papers)} papers, cap is {PAPER_CAP}")
        paper_ids = [p.id for p in self.papers]
        if len(set(paper_ids)) != len(paper_ids):
            raise ValueError("report papers carry duplicate ids")
        extraction_ids = [e.paper_id for e in self.extractions]
        if sorted(extraction_ids) != sorted(paper_ids):
            raise ValueError("extractions do not biject onto papers")
        if len(self.references) != len(self.papers):
            raise ValueError("one reference entry per paper is required")
        labels = [r.label for r in self.references]
        if labels != [f"R{i}" for i in range(1, len(self.papers) + 1)]:
            raise ValueError(f"reference labels must be R1..R{len(self.papers)}, got {labels}")
        ref_ids = [r.paper_id for r in self.references]
        if len(set(ref_ids)) != len(ref_ids):
            raise ValueError("reference paper_ids must be distinct")

    def to_dict(self) -> dict[str, Any]:
        return {
            "report_id": self.report_id,
            "question": self.question,
            "papers": [p.to_dict() for p in self.papers],
            "extractions": [e.to_dict() for e in self.extractions],
            "synthesis": self.synthesis.to_dict(),
            "draft_markdown": self.draft_markdown,
            "warnings": list(self.warnings),
            "references": [r.to_dict() for r in self.references],
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Report:
        return cls(
            report_id=data["report_id"],
            question=data["question"],
            papers=[Paper.from_dict(p) for p in data["papers"]],
            extractions=[PaperExtraction.from_dict(e) for e in data["extractions"]],
            synthesis=Synthesis.from_dict(data["synthesis"]),
            draft_markdown=data["draft_markdown"],
            warnings=list(data.get("warnings") or []),
            references=[ReferenceEntry.from_dict(r) for r in data["references"]],
            created_at=data["created_at"],
        )


@dataclass(frozen=True)
class PipelineEvent:
    """One streamed lifecycle record. seq values are strictly increasing
    within a run, starting at 0; agent is set only for the agent_* types."""

    type: EventType
    agent: Agent | None
    seq: int
    ts: str
    data: dict[str, Any]

    def __post_init__(self) -> None:
        if self.seq < 0:
            raise ValueError("event seq must be non-negative")
        has_agent = self.agent is not None
        if has_agent != (self.type in _AGENT_EVENT_TYPES):
            raise ValueError(f"event type {self.type.value} and agent {self.agent!r} disagree")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"type": self.type.value}
        if self.agent is not None:
            out["agent"] = self.agent.value
        out["seq"] = self.seq
        out["ts"] = self.ts
        out["data"] = self.data
        return out

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


@dataclass(frozen=True)
class RuntimeConfig:
    """Provider/model/key/embedding settings for one run. The api_key is kept
    out of repr so the secret cannot leak through logging or error text."""

    provider: Provider = Provider.MOCK
    model: str = "mock-model"
    api_key: str | None = field(default=None, repr=False)
    base_url: str | None = None
    embedding_mode: EmbeddingMode = EmbeddingMode.AUTO

    def __post_init__(self) -> None:
        if not isinstance(self.provider, Provider):
            object.__setattr__(self, "provider", Provider(self.provider))
        if not isinstance(self.embedding_mode, EmbeddingMode):
            object.__setattr__(self, "embedding_mode", EmbeddingMode(self.embedding_mode))


def validate_runtime_config(config: RuntimeConfig) -> None:
    """Reject configurations that cannot run: empty model, or a real provider
    with no credential. The mock provider never needs a key."""
    if not config.model:
        raise ConfigError("configuration error: model must be nonempty")
    if config.provider is not Provider.MOCK and not config.api_key:
        raise ConfigError(
            f"configuration error: api_key is required for provider '{config.provider.value}'"
        )


def normalize_title(title: str) -> str:
    """Lowercase, drop non-alphanumeric characters, collapse whitespace runs.

    The result is the canonical title key for deduplication; the function is
    idempotent.
    """
    lowered = title.lower()
    kept = "".join(ch for ch in lowered if ch.isalnum() or ch.isspace())
    return " ".join(kept.split())


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; shared by the hashing embedder and
    keyword search so both sides agree on what a token is."""
    return _TOKEN_RE.findall(text.lower())


def assign_reference_labels(papers: list[Paper]) -> list[ReferenceEntry]:
    """Label papers R1..Rn in input order."""
    seen: set[str] = set()
    for paper in papers:
        if paper.id in seen:
            raise ValueError(f"duplicate paper id in reference assignment: {paper.id}")
        seen.add(paper.id)
    return [
        ReferenceEntry(label=f"R{i}", paper_id=paper.id)
        for i, paper in enumerate(papers, start=1)
    ]


_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


def new_report_id(now_ms: int | None = None) -> str:
    """26-character sortable id: 48-bit millisecond timestamp followed by
    80 random bits, Crockford base32. Lexicographic order tracks creation time."""
    ts = int(time.time() * 1000) if now_ms is None else now_ms
    value = (ts & ((1 << 48) - 1)) << 80 | int.from_bytes(os.urandom(10), "big")
    chars = []
    for _ in range(26):
        chars.append(_CROCKFORD[value & 31])
        value >>= 5
    return "".join(reversed(chars))


def utc_now() -> str:
    """Current UTC time as an RFC 3339 string with millisecond precision."""
    now = datetime.now(timezone.utc)
    return now.strftime("%Y-%m-%dT%H:%M:%S.") + f"{now.microsecond // 1000:03d}Z"


def canonical_json(payload: dict[str, Any]) -> str:
    """Stable serialization: sorted keys, compact separators, raw UTF-8."""
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
