"""The extraction, synthesis, and writer agents, plus the four-stage pipeline
orchestrator that emits lifecycle events and persists the finished report.

Stage order is fixed: search, extraction, synthesis, writer. Extraction walks
papers sequentially and reports per-paper progress. Any stage error ends the
run with a single terminal error event; a persistence failure after a
successful pipeline is only a warning.
"""

from __future__ import annotations

import asyncio
import logging
import re
from dataclasses import dataclass, replace
from typing import Awaitable, Callable

from .domain import (
    Agent,
    ConfigError,
    EventType,
    Paper,
    PaperExtraction,
    PipelineEvent,
    ReferenceEntry,
    Report,
    RuntimeConfig,
    Synthesis,
    assign_reference_labels,
    new_report_id,
    utc_now,
    validate_runtime_config,
)
from .embeddings import EmbedFn
from .llm import InputField, OutputField, OutputShape, Signature, complete_structured
from .search import NoPapersError
from .store import ReportStore

logger = logging.getLogger(__name__)

ABSTRACT_PROMPT_LIMIT = 4000  # characters of abstract sent to the extractor
WRITER_MAX_TOKENS = 2048

_EXTRACTION_FIELDS = ("claims", "methods", "datasets", "results", "limitations")

EXTRACTION_SIGNATURE = Signature(
    name="extract_findings",
    instruction=(
        "Read one paper abstract in the context of a research question and pull "
        "out what the paper asserts, how it works, what it evaluates on, what it "
        "finds, and what it concedes. Use short self-contained statements."
    ),
    inputs=(
        InputField("question", "the research question guiding the review"),
        InputField("title", "the paper title"),
        InputField("abstract", "the paper abstract"),
    ),
    outputs=(
        OutputField("claims", "assertions the paper makes"),
        OutputField("methods", "techniques or procedures used"),
        OutputField("datasets", "datasets or corpora evaluated on"),
        OutputField("results", "quantitative or qualitative findings"),
        OutputField("limitations", "caveats the paper concedes"),
    ),
)

SYNTHESIS_SIGNATURE = Signature(
    name="synthesize_findings",
    instruction=(
        "Consolidate structured findings from several papers. Report where the "
        "papers agree, where they disagree, and what none of them answer."
    ),
    inputs=(
        InputField("question", "the research question guiding the review"),
        InputField("extractions", "structured findings, one block per paper"),
    ),
    outputs=(
        OutputField("consensus", "points most papers agree on"),
        OutputField("contradictions", "points where papers disagree"),
        OutputField("open_gaps", "questions no paper answers"),
    ),
)

WRITER_SIGNATURE = Signature(
    name="draft_related_work",
    instruction=(
        "Write a markdown related-work section for the research question. Cite "
        "papers inline with their bracketed labels, e.g. [R1]. Cite only labels "
        "present in the bibliography. Do not write a references section."
    ),
    inputs=(
        InputField("question", "the research question guiding the review"),
        InputField("consensus", "points of agreement across papers"),
        InputField("contradictions", "points of disagreement across papers"),
        InputField("open_gaps", "unanswered questions"),
        InputField("bibliography", "available citation labels, one per line"),
    ),
    outputs=(
        OutputField(
            "draft_markdown",
            "the related-work section in markdown",
            shape=OutputShape.STRING,
        ),
    ),
)


@dataclass(frozen=True)
class RunHandle:
    """Identity of one pipeline run; the run id becomes the report id."""

    run_id: str
    question: str
    config: RuntimeConfig
    started_at: str


async def run_extraction(
    question: str, paper: Paper, config: RuntimeConfig
) -> PaperExtraction:
    """Extract the five structured lists from one abstract."""
    fields = await complete_structured(
        EXTRACTION_SIGNATURE,
        {
            "question": question,
            "title": paper.title,
            "abstract": paper.abstract[:ABSTRACT_PROMPT_LIMIT],
        },
        config,
    )
    return PaperExtraction(
        paper_id=paper.id, **{name: fields[name] for name in _EXTRACTION_FIELDS}
    )


def _extraction_block(extraction: PaperExtraction) -> str:
    lines = [f"paper: {extraction.paper_id}"]
    for name in _EXTRACTION_FIELDS:
        values = getattr(extraction, name)
        lines.append(f"{name}: " + ("; ".join(values) if values else "(none)"))
    return "\n".join(lines)


async def run_synthesis(
    question: str, extractions: list[PaperExtraction], config: RuntimeConfig
) -> Synthesis:
    """Consolidate per-paper findings into consensus, contradictions, gaps."""
    if not extractions:
        raise ValueError("synthesis requires at least one extraction")
    fields = await complete_structured(
        SYNTHESIS_SIGNATURE,
        {
            "question": question,
            "extractions": "\n\n".join(_extraction_block(e) for e in extractions),
        },
        config,
    )
    return Synthesis(
        consensus=fields["consensus"],
        contradictions=fields["contradictions"],
        open_gaps=fields["open_gaps"],
    )


_LABEL_SCAN = re.compile(r"\[R(\d+)\]")
_REFS_HEADING = re.compile(r"(?im)^#{1,6}\s*references\s*$")


def _bibliography(papers: list[Paper], references: list[ReferenceEntry]) -> str:
    by_id = {p.id: p for p in papers}
    lines = []
    for ref in references:
        paper = by_id[ref.paper_id]
        title = paper.title or "(untitled)"
        year = paper.year if paper.year is not None else "n.d."
        lines.append(f"{ref.label}: {title} ({year}, {paper.source.value})")
    return "\n".join(lines)


def _reference_section(papers: list[Paper], references: list[ReferenceEntry]) -> str:
    by_id = {p.id: p for p in papers}
    lines = ["## References"]
    for ref in references:
        paper = by_id[ref.paper_id]
        title = paper.title or "(untitled)"
        year = paper.year if paper.year is not None else "n.d."
        entry = f"- [{ref.label}] {title}."
        if paper.authors:
            entry += " " + ", ".join(paper.authors)
        entry += f" ({year})."
        if paper.url:
            entry += f" {paper.url}"
        lines.append(entry)
    return "\n".join(lines)


def postprocess_draft(
    raw_draft: str, references: list[ReferenceEntry]
) -> tuple[str, list[str]]:
    """Replace unknown citation labels with "[?]", drop any model-written
    references section, and return the cleaned body plus warnings."""
    known = {ref.label for ref in references}
    warnings: list[str] = []

    def substitute(match: re.Match[str]) -> str:
        label = f"R{match.group(1)}"
        if label in known:
            return match.group(0)
        warning = f"unknown citation label {label}"
        if warning not in warnings:
            warnings.append(warning)
        return "[?]"

    body = _LABEL_SCAN.sub(substitute, raw_draft)
    heading = _REFS_HEADING.search(body)
    if heading:
        body = body[: heading.start()]
    return body.rstrip(), warnings


async def run_writer(
    question: str,
    synthesis: Synthesis,
    papers: list[Paper],
    references: list[ReferenceEntry],
    config: RuntimeConfig,
) -> tuple[str, list[str]]:
    """Draft the related-work section and finish it mechanically: unknown
    labels become "[?]" with a warning, and the references section is always
    generated from the retrieved papers, never trusted from the model."""
    fields = await complete_structured(
        WRITER_SIGNATURE,
        {
            "question": question,
            "consensus": "\n".join(synthesis.consensus) or "(none)",
            "contradictions": "\n".join(synthesis.contradictions) or "(none)",
            "open_gaps": "\n".join(synthesis.open_gaps) or "(none)",
            "bibliography": _bibliography(papers, references),
        },
        config,
        max_tokens=WRITER_MAX_TOKENS,
    )
    body, warnings = postprocess_draft("\n\n".join(fields["draft_markdown"]), references)
    draft = (body + "\n\n" if body else "") + _reference_section(papers, references)
    return draft, warnings


# --- orchestration ------------------------------------------------------------

SearchFn = Callable[..., Awaitable[tuple[list[Paper], list[str]]]]


@dataclass(frozen=True)
class PipelineDeps:
    """Everything the orchestrator touches outside the LLM: retrieval,
    persistence, and the embedding capability used at save time."""

    search: SearchFn
    store: ReportStore
    embed: EmbedFn | None = None


class EventEmitter:
    """Builds correctly sequenced events and hands them to a sink callback."""

    def __init__(self, sink: Callable[[PipelineEvent], None]):
        self._sink = sink
        self._seq = 0

    def emit(
        self, type: EventType, agent: Agent | None = None, **data: object
    ) -> None:
        event = PipelineEvent(
            type=type, agent=agent, seq=self._seq, ts=utc_now(), data=dict(data)
        )
        self._seq += 1
        self._sink(event)


async def run_pipeline(
    question: str,
    config: RuntimeConfig,
    deps: PipelineDeps,
    emit: Callable[[PipelineEvent], None],
) -> Report | None:
    """Run all four stages in order, streaming lifecycle events.

    Returns the completed report (including any warnings added at save time),
    or None when the run ended with an error event. Exactly one terminal
    event is emitted either way.
    """
    emitter = EventEmitter(emit)
    emitter.emit(EventType.QUEUED)
    handle = RunHandle(
        run_id=new_report_id(), question=question.strip(), config=config,
        started_at=utc_now(),
    )
    stage = "setup"
    try:
        if not handle.question:
            raise ValueError("question must be nonempty")
        validate_runtime_config(config)

        stage = "search"
        emitter.emit(EventType.AGENT_STARTED, Agent.SEARCH)
        papers, warnings = await deps.search(
            handle.question,
            on_source_done=lambda source: emitter.emit(
                EventType.AGENT_PROGRESS, Agent.SEARCH, source=source.value
            ),
        )
        emitter.emit(
            EventType.AGENT_COMPLETED,
            Agent.SEARCH,
            paper_count=len(papers),
            warning_count=len(warnings),
        )

        stage = "extraction"
        emitter.emit(EventType.AGENT_STARTED, Agent.EXTRACTION)
        extractions: list[PaperExtraction] = []
        for index, paper in enumerate(papers, start=1):
            extractions.append(await run_extraction(handle.question, paper, config))
            emitter.emit(
                EventType.AGENT_PROGRESS,
                Agent.EXTRACTION,
                current=index,
                total=len(papers),
            )
        emitter.emit(
            EventType.AGENT_COMPLETED, Agent.EXTRACTION, extraction_count=len(extractions)
        )

        stage = "synthesis"
        emitter.emit(EventType.AGENT_STARTED, Agent.SYNTHESIS)
        synthesis = await run_synthesis(handle.question, extractions, config)
        emitter.emit(
            EventType.AGENT_COMPLETED,
            Agent.SYNTHESIS,
            consensus=len(synthesis.consensus),
            contradictions=len(synthesis.contradictions),
            open_gaps=len(synthesis.open_gaps),
        )

        stage = "writer"
        emitter.emit(EventType.AGENT_STARTED, Agent.WRITER)
        references = assign_reference_labels(papers)
        draft, writer_warnings = await run_writer(
            handle.question, synthesis, papers, references, config
        )
        warnings = warnings + writer_warnings
        emitter.emit(EventType.AGENT_COMPLETED, Agent.WRITER, draft_chars=len(draft))

        report = Report(
            report_id=handle.run_id,
            question=handle.question,
            papers=papers,
            extractions=extractions,
            synthesis=synthesis,
            draft_markdown=draft,
            warnings=warnings,
            references=references,
            created_at=utc_now(),
        )
        # the run has succeeded; persistence trouble must not fail it
        try:
            _, save_warnings = await asyncio.to_thread(
                deps.store.save_report, report, deps.embed
            )
        except Exception as exc:  # noqa: BLE001 - degraded per failure policy
            logger.warning("report persistence failed: %s", exc)
            save_warnings = [f"persistence failed: {exc}"]
        if save_warnings:
            report = replace(report, warnings=warnings + save_warnings)
        emitter.emit(EventType.DONE, report_id=report.report_id)
        return report
    except NoPapersError as exc:
        detail = "; ".join(exc.warnings)
        message = str(exc) + (f" ({detail})" if detail else "")
        emitter.emit(EventType.ERROR, stage=stage, message=message)
        return None
    except ConfigError as exc:
        emitter.emit(EventType.ERROR, stage=stage, message=str(exc))
        return None
    except Exception as exc:  # noqa: BLE001 - every stage error becomes one event
        logger.warning("run failed at stage %s: %s", stage, exc)
        emitter.emit(EventType.ERROR, stage=stage, message=f"{type(exc).__name__}: {exc}")
        return None
