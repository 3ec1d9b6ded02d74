"""Scholarly retrieval: Semantic Scholar and arXiv queried concurrently,
merged round-robin, deduplicated by DOI-or-title, truncated to the paper cap.

Source failures never raise past the query functions; they come back as
SourceResult.failure text and surface as run warnings, so one healthy source
is enough to keep a run alive.
"""

from __future__ import annotations

import asyncio
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from itertools import zip_longest
from typing import Awaitable, Callable

import httpx

from .domain import PAPER_CAP, Paper, Source, normalize_title

logger = logging.getLogger(__name__)

DEFAULT_S2_BASE_URL = "https://api.semanticscholar.org"
DEFAULT_ARXIV_BASE_URL = "https://export.arxiv.org"
REQUEST_TIMEOUT_SECONDS = 15.0
PER_SOURCE_LIMIT = 10  # one healthy source must be able to fill the cap alone

_S2_FIELDS = "title,abstract,url,year,authors,externalIds"
_ATOM = "{http://www.w3.org/2005/Atom}"
_ARXIV_NS = "{http://arxiv.org/schemas/atom}"


class NoPapersError(Exception):
    """Raised when retrieval produced nothing to work with."""

    def __init__(self, warnings: list[str]):
        super().__init__("no papers retrieved")
        self.warnings = warnings


@dataclass(frozen=True)
class SourceResult:
    """Outcome of one source query: papers on success, failure text otherwise."""

    source: Source
    papers: list[Paper] = field(default_factory=list)
    failure: str | None = None

    def __post_init__(self) -> None:
        if self.failure is not None and self.papers:
            raise ValueError("a failed source result cannot carry papers")


def _failure(source: Source, detail: str) -> SourceResult:
    text = f"{source.value}: {detail}"
    logger.warning("source query failed: %s", text)
    return SourceResult(source=source, failure=text)


async def _get(
    client: httpx.AsyncClient | None, url: str, params: dict, headers: dict
) -> httpx.Response:
    if client is not None:
        return await client.get(
            url, params=params, headers=headers, timeout=REQUEST_TIMEOUT_SECONDS
        )
    async with httpx.AsyncClient(timeout=REQUEST_TIMEOUT_SECONDS) as own:
        return await own.get(url, params=params, headers=headers)


def _parse_s2_entry(entry: dict) -> Paper | None:
    paper_id = entry.get("paperId")
    abstract = entry.get("abstract")
    if not paper_id or not abstract:
        return None
    year = entry.get("year")
    external = entry.get("externalIds") or {}
    doi = external.get("DOI")
    authors = [
        a["name"]
        for a in entry.get("authors") or []
        if isinstance(a, dict) and a.get("name")
    ]
    return Paper(
        id=str(paper_id),
        title=entry.get("title") or "",
        abstract=abstract,
        source=Source.SEMANTIC_SCHOLAR,
        url=entry.get("url") or f"https://www.semanticscholar.org/paper/{paper_id}",
        year=year if isinstance(year, int) else None,
        authors=authors,
        doi=doi if isinstance(doi, str) and doi else None,
    )


async def query_semantic_scholar(
    question: str,
    limit: int = PER_SOURCE_LIMIT,
    api_key: str | None = None,
    *,
    base_url: str = DEFAULT_S2_BASE_URL,
    client: httpx.AsyncClient | None = None,
) -> SourceResult:
    """Query the Semantic Scholar paper-search endpoint. Entries without an
    abstract are dropped before the limit is applied."""
    source = Source.SEMANTIC_SCHOLAR
    url = f"{base_url.rstrip('/')}/graph/v1/paper/search"
    params = {"query": question, "limit": limit, "fields": _S2_FIELDS}
    headers = {"x-api-key": api_key} if api_key else {}
    try:
        resp = await _get(client, url, params, headers)
    except httpx.TimeoutException:
        return _failure(source, "timeout")
    except httpx.HTTPError as exc:
        return _failure(source, f"request failed: {type(exc).__name__}")
    if resp.status_code != 200:
        return _failure(source, f"HTTP {resp.status_code}")
    try:
        entries = resp.json().get("data") or []
        papers = [p for p in map(_parse_s2_entry, entries) if p is not None]
    except (ValueError, TypeError, AttributeError):
        return _failure(source, "parse error")
    return SourceResult(source=source, papers=papers[:limit])


def _arxiv_entry_to_paper(entry: ET.Element) -> Paper | None:
    def text(tag: str) -> str:
        node = entry.find(_ATOM + tag)
        return node.text or "" if node is not None and node.text else ""

    raw_id = text("id").strip()
    abstract = " ".join(text("summary").split())
    if not raw_id or not abstract:
        return None
    native_id = raw_id.rsplit("/abs/", 1)[-1] if "/abs/" in raw_id else raw_id
    url = raw_id
    for link in entry.findall(_ATOM + "link"):
        if link.get("rel") == "alternate" and link.get("href"):
            url = link.get("href", url)
            break
    published = text("published")
    year = None
    if len(published) >= 4 and published[:4].isdigit():
        year = int(published[:4])
    authors = []
    for author in entry.findall(_ATOM + "author"):
        name = author.find(_ATOM + "name")
        if name is not None and name.text:
            authors.append(name.text.strip())
    doi_node = entry.find(_ARXIV_NS + "doi")
    doi = doi_node.text.strip() if doi_node is not None and doi_node.text else None
    return Paper(
        id=native_id,
        title=" ".join(text("title").split()),
        abstract=abstract,
        source=Source.ARXIV,
        url=url,
        year=year,
        authors=authors,
        doi=doi,
    )


async def query_arxiv(
    question: str,
    limit: int = PER_SOURCE_LIMIT,
    *,
    base_url: str = DEFAULT_ARXIV_BASE_URL,
    client: httpx.AsyncClient | None = None,
) -> SourceResult:
    """Query the arXiv Atom API; entry summary becomes the abstract, the
    published year becomes the year."""
    source = Source.ARXIV
    url = f"{base_url.rstrip('/')}/api/query"
    params = {
        "search_query": f"all:{question}",
        "start": 0,
        "max_results": limit,
    }
    try:
        resp = await _get(client, url, params, {})
    except httpx.TimeoutException:
        return _failure(source, "timeout")
    except httpx.HTTPError as exc:
        return _failure(source, f"request failed: {type(exc).__name__}")
    if resp.status_code != 200:
        return _failure(source, f"HTTP {resp.status_code}")
    try:
        root = ET.fromstring(resp.text)
    except ET.ParseError:
        return _failure(source, "parse error")
    papers = []
    for entry in root.findall(_ATOM + "entry"):
        paper = _arxiv_entry_to_paper(entry)
        if paper is not None:
            papers.append(paper)
    return SourceResult(source=source, papers=papers[:limit])


def _is_duplicate(
    candidate: Paper,
    kept_dois: set[str],
    titles_all: set[str],
    titles_nodoi: set[str],
) -> bool:
    title = normalize_title(candidate.title)
    if candidate.doi is not None:
        # title equality only counts against kept papers that lack a DOI
        return candidate.doi.lower() in kept_dois or title in titles_nodoi
    return title in titles_all


def merge_and_dedup(
    results: list[SourceResult], cap: int = PAPER_CAP
) -> tuple[list[Paper], list[str]]:
    """Interleave successful sources round-robin (Semantic Scholar first),
    drop duplicates keeping first occurrences, truncate to `cap`.

    Two papers are duplicates iff they share a case-insensitive DOI, or,
    when either lacks a DOI, their normalized titles are equal.
    """
    warnings = [r.failure for r in results if r.failure is not None]
    ordered = sorted(
        (r for r in results if r.failure is None),
        key=lambda r: r.source is not Source.SEMANTIC_SCHOLAR,
    )
    interleaved: list[Paper] = []
    for group in zip_longest(*(r.papers for r in ordered)):
        interleaved.extend(p for p in group if p is not None)

    kept: list[Paper] = []
    kept_dois: set[str] = set()
    titles_all: set[str] = set()
    titles_nodoi: set[str] = set()
    for paper in interleaved:
        if _is_duplicate(paper, kept_dois, titles_all, titles_nodoi):
            continue
        kept.append(paper)
        title = normalize_title(paper.title)
        titles_all.add(title)
        if paper.doi is not None:
            kept_dois.add(paper.doi.lower())
        else:
            titles_nodoi.add(title)
        if len(kept) == cap:
            break
    if not kept:
        raise NoPapersError(warnings)
    return kept, warnings


ProgressFn = Callable[[Source], None]


async def search_papers(
    question: str,
    *,
    s2_api_key: str | None = None,
    s2_base_url: str = DEFAULT_S2_BASE_URL,
    arxiv_base_url: str = DEFAULT_ARXIV_BASE_URL,
    cap: int = PAPER_CAP,
    on_source_done: ProgressFn | None = None,
) -> tuple[list[Paper], list[str]]:
    """Run both source queries concurrently and merge.

    `on_source_done` fires as each source finishes (completion order); the
    merged result depends only on the two SourceResults, never on timing.
    """

    async def tracked(
        coro: Awaitable[SourceResult],
    ) -> SourceResult:
        result = await coro
        if on_source_done is not None:
            on_source_done(result.source)
        return result

    async with httpx.AsyncClient(timeout=REQUEST_TIMEOUT_SECONDS) as client:
        s2, arxiv = await asyncio.gather(
            tracked(
                query_semantic_scholar(
                    question, api_key=s2_api_key, base_url=s2_base_url, client=client
                )
            ),
            tracked(query_arxiv(question, base_url=arxiv_base_url, client=client)),
        )
    return merge_and_dedup([s2, arxiv], cap=cap)
