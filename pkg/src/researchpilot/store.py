"""SQLite-backed report persistence plus an embedded brute-force vector index.

Reports live in one table as canonical-JSON documents; vectors live beside
them as packed little-endian float32 blobs. Vector trouble never loses a
report: the relational write happens first and embedding failures degrade to
warnings, with keyword search over questions as the query-time fallback.
"""

from __future__ import annotations

import json
import logging
import sqlite3
import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import Report, canonical_json, tokenize
from .embeddings import DIMENSION, EmbedFn, Embedding, EmbeddingUnavailable

logger = logging.getLogger(__name__)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS reports (
    report_id TEXT PRIMARY KEY,
    question TEXT NOT NULL,
    created_at TEXT NOT NULL,
    payload TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS vectors (
    key TEXT NOT NULL,
    kind TEXT NOT NULL,
    report_id TEXT NOT NULL,
    vector BLOB NOT NULL,
    PRIMARY KEY (key, kind)
);
CREATE INDEX IF NOT EXISTS idx_vectors_report ON vectors (report_id);
"""


class NotFound(Exception):
    """Lookup by id missed."""


class VectorKind(str, Enum):
    REPORT = "report"
    PAPER = "paper"
    EXTRACTION = "extraction"


@dataclass(frozen=True)
class ReportSummary:
    report_id: str
    question: str
    created_at: str


@dataclass(frozen=True)
class SearchHit:
    report_id: str
    question: str
    score: float
    created_at: str
    match_kind: str  # "vector" or "keyword"


def _pack(vector: np.ndarray) -> bytes:
    return np.asarray(vector, dtype="<f4").tobytes()


def _unpack(blob: bytes) -> np.ndarray:
    return np.frombuffer(blob, dtype="<f4").astype(np.float64)


def keyword_score(query: str, question: str) -> float:
    """Fraction of distinct query tokens present among the question's tokens."""
    query_tokens = set(tokenize(query))
    if not query_tokens:
        return 0.0
    question_tokens = set(tokenize(question))
    return len(query_tokens & question_tokens) / len(query_tokens)


class ReportStore:
    """Single-file store; one shared connection, writes serialized by a lock."""

    def __init__(self, db_path: str, *, vector_enabled: bool = True):
        self.db_path = db_path
        self.vector_enabled = vector_enabled
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(db_path, check_same_thread=False)
        self._conn.executescript(_SCHEMA)
        self._conn.commit()

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- persistence -----------------------------------------------------

    def save_report(
        self, report: Report, embed: EmbedFn | None = None
    ) -> tuple[str, list[str]]:
        """Persist the report document, then its vectors. The document write
        is atomic and idempotent on report_id; vector trouble is reported as
        a warning, never as a failure of the save."""
        payload = canonical_json(report.to_dict())
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO reports (report_id, question, created_at, payload) "
                "VALUES (?, ?, ?, ?) "
                "ON CONFLICT(report_id) DO UPDATE SET "
                "question=excluded.question, created_at=excluded.created_at, "
                "payload=excluded.payload",
                (report.report_id, report.question, report.created_at, payload),
            )
        warnings: list[str] = []
        if not self.vector_enabled:
            warnings.append("vector index disabled: report saved without vectors")
            return report.report_id, warnings
        if embed is None:
            warnings.append("no embedder available: report saved without vectors")
            return report.report_id, warnings
        try:
            rows = self._vector_rows(report, embed)
            with self._lock, self._conn:
                self._conn.execute(
                    "DELETE FROM vectors WHERE report_id = ?", (report.report_id,)
                )
                self._conn.executemany(
                    "INSERT OR REPLACE INTO vectors (key, kind, report_id, vector) "
                    "VALUES (?, ?, ?, ?)",
                    rows,
                )
        except (EmbeddingUnavailable, sqlite3.Error) as exc:
            logger.warning("vector persistence failed for %s: %s", report.report_id, exc)
            warnings.append(f"vector persistence failed: {exc}")
        return report.report_id, warnings

    def _vector_rows(
        self, report: Report, embed: EmbedFn
    ) -> list[tuple[str, str, str, bytes]]:
        rows = [
            (
                report.report_id,
                VectorKind.REPORT.value,
                report.report_id,
                _pack(embed(report.question).vector),
            )
        ]
        for paper in report.papers:
            rows.append(
                (
                    f"{report.report_id}/{paper.id}",
                    VectorKind.PAPER.value,
                    report.report_id,
                    _pack(embed(f"{paper.title}\n{paper.abstract}").vector),
                )
            )
        for extraction in report.extractions:
            text = "\n".join(
                extraction.claims
                + extraction.methods
                + extraction.datasets
                + extraction.results
                + extraction.limitations
            )
            rows.append(
                (
                    f"{report.report_id}/{extraction.paper_id}",
                    VectorKind.EXTRACTION.value,
                    report.report_id,
                    _pack(embed(text).vector),
                )
            )
        return rows

    def get_report(self, report_id: str) -> Report:
        with self._lock:
            row = self._conn.execute(
                "SELECT payload FROM reports WHERE report_id = ?", (report_id,)
            ).fetchone()
        if row is None:
            raise NotFound(f"report not found: {report_id}")
        return Report.from_dict(json.loads(row[0]))

    def get_payload(self, report_id: str) -> str:
        """The stored canonical-JSON document, byte-exact."""
        with self._lock:
            row = self._conn.execute(
                "SELECT payload FROM reports WHERE report_id = ?", (report_id,)
            ).fetchone()
        if row is None:
            raise NotFound(f"report not found: {report_id}")
        return row[0]

    def list_reports(self, limit: int = 20) -> list[ReportSummary]:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        with self._lock:
            rows = self._conn.execute(
                "SELECT report_id, question, created_at FROM reports "
                "ORDER BY created_at DESC, report_id DESC LIMIT ?",
                (limit,),
            ).fetchall()
        return [ReportSummary(*row) for row in rows]

    # -- vector index ------------------------------------------------------

    def upsert_vector(
        self,
        key: str,
        kind: VectorKind,
        vector: np.ndarray | Embedding,
        report_id: str = "",
    ) -> None:
        """Write one vector into the index, replacing any previous value under
        the same (key, kind)."""
        vec = vector.vector if isinstance(vector, Embedding) else vector
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (DIMENSION,):
            raise ValueError(f"vector must have dimension {DIMENSION}")
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT OR REPLACE INTO vectors (key, kind, report_id, vector) "
                "VALUES (?, ?, ?, ?)",
                (key, kind.value, report_id, _pack(vec)),
            )

    def vector_search(
        self, query_vector: np.ndarray | Embedding, kind: VectorKind, k: int
    ) -> list[tuple[str, float]]:
        """Exact cosine top-k over all stored vectors of one kind; ties break
        by key ascending."""
        if k < 1:
            raise ValueError("k must be >= 1")
        query = (
            query_vector.vector if isinstance(query_vector, Embedding) else query_vector
        )
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (DIMENSION,):
            raise ValueError(f"query vector must have dimension {DIMENSION}")
        with self._lock:
            rows = self._conn.execute(
                "SELECT key, vector FROM vectors WHERE kind = ?", (kind.value,)
            ).fetchall()
        q_norm = float(np.linalg.norm(query))
        scored: list[tuple[str, float]] = []
        for key, blob in rows:
            vec = _unpack(blob)
            denom = q_norm * float(np.linalg.norm(vec))
            score = float(np.dot(query, vec) / denom) if denom > 0 else 0.0
            scored.append((key, score))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]

    def search_reports(
        self, query: str, k: int = 5, embed: EmbedFn | None = None
    ) -> list[SearchHit]:
        """Vector search over report vectors when possible, keyword fallback
        over stored questions otherwise. Never raises for search trouble."""
        if not query:
            raise ValueError("query must be nonempty")
        if k < 1:
            raise ValueError("k must be >= 1")
        if self.vector_enabled and embed is not None:
            try:
                hits = self._vector_hits(query, k, embed)
            except EmbeddingUnavailable as exc:
                logger.warning("query embedding failed, keyword fallback: %s", exc)
            else:
                return hits
        return self._keyword_hits(query, k)

    def _vector_hits(self, query: str, k: int, embed: EmbedFn) -> list[SearchHit]:
        results = self.vector_search(embed(query), VectorKind.REPORT, k)
        hits = []
        for report_id, score in results:
            with self._lock:
                row = self._conn.execute(
                    "SELECT question, created_at FROM reports WHERE report_id = ?",
                    (report_id,),
                ).fetchone()
            if row is None:
                continue  # orphaned vector; skip rather than fabricate
            hits.append(
                SearchHit(
                    report_id=report_id,
                    question=row[0],
                    score=score,
                    created_at=row[1],
                    match_kind="vector",
                )
            )
        return hits

    def _keyword_hits(self, query: str, k: int) -> list[SearchHit]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT report_id, question, created_at FROM reports"
            ).fetchall()
        scored = []
        for report_id, question, created_at in rows:
            score = keyword_score(query, question)
            if score > 0:
                scored.append(
                    SearchHit(
                        report_id=report_id,
                        question=question,
                        score=score,
                        created_at=created_at,
                        match_kind="keyword",
                    )
                )
        # newest-first within equal scores: order by recency, then stably by score
        scored.sort(key=lambda h: (h.created_at, h.report_id), reverse=True)
        scored.sort(key=lambda h: h.score, reverse=True)
        return scored[:k]
