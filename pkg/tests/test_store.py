import threading
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from researchpilot.domain import (
    PaperExtraction,
    Report,
    Synthesis,
    assign_reference_labels,
    canonical_json,
    new_report_id,
    utc_now,
)
from researchpilot.embeddings import DIMENSION, EmbeddingUnavailable, embed_local
from researchpilot.store import (
    NotFound,
    ReportStore,
    VectorKind,
    keyword_score,
)

from .helpers import make_paper
from .oracles import oracle_keyword_score, oracle_vector_topk


def build_report(
    question="What is retrieval augmented generation?",
    n_papers=3,
    report_id=None,
    created_at=None,
    draft="body text [R1]",
    warnings=(),
) -> Report:
    papers = [make_paper(i) for i in range(1, n_papers + 1)]
    return Report(
        report_id=report_id or new_report_id(),
        question=question,
        papers=papers,
        extractions=[
            PaperExtraction(paper_id=p.id, claims=[f"claim about {p.title}"])
            for p in papers
        ],
        synthesis=Synthesis(consensus=["agreement"], open_gaps=["gap"]),
        draft_markdown=draft + "\n\n## References\n- [R1] x",
        warnings=list(warnings),
        references=assign_reference_labels(papers),
        created_at=created_at or utc_now(),
    )


@pytest.fixture
def store(tmp_path):
    s = ReportStore(str(tmp_path / "test.db"))
    yield s
    s.close()


class TestSaveAndGet:
    def test_round_trip_preserves_everything(self, store):
        report = build_report(warnings=["semantic_scholar: HTTP 429"])
        report_id, warnings = store.save_report(report, embed_local)
        assert report_id == report.report_id
        assert warnings == []
        loaded = store.get_report(report_id)
        assert loaded == report
        assert loaded.draft_markdown == report.draft_markdown

    def test_payload_is_canonical_json(self, store):
        report = build_report()
        store.save_report(report, embed_local)
        assert store.get_payload(report.report_id) == canonical_json(report.to_dict())

    def test_unknown_id_raises(self, store):
        with pytest.raises(NotFound):
            store.get_report("nonexistent")

    def test_save_twice_is_idempotent(self, store):
        report = build_report()
        store.save_report(report, embed_local)
        store.save_report(report, embed_local)
        rows = store._conn.execute("SELECT COUNT(*) FROM reports").fetchone()[0]
        assert rows == 1
        vec_rows = store._conn.execute(
            "SELECT COUNT(*) FROM vectors WHERE kind = 'report'"
        ).fetchone()[0]
        assert vec_rows == 1

    def test_overwrite_returns_latest(self, store):
        report = build_report()
        store.save_report(report, embed_local)
        from dataclasses import replace

        v2 = replace(report, draft_markdown="revised\n\n## References\n- [R1] x")
        store.save_report(v2, embed_local)
        assert store.get_report(report.report_id).draft_markdown.startswith("revised")

    def test_paper_and_extraction_vectors_namespaced(self, store):
        report = build_report(n_papers=2)
        store.save_report(report, embed_local)
        keys = {
            (row[0], row[1])
            for row in store._conn.execute("SELECT key, kind FROM vectors")
        }
        expected = {(report.report_id, "report")}
        for paper in report.papers:
            expected.add((f"{report.report_id}/{paper.id}", "paper"))
            expected.add((f"{report.report_id}/{paper.id}", "extraction"))
        assert keys == expected

    def test_vector_disabled_save_warns_but_persists(self, tmp_path):
        store = ReportStore(str(tmp_path / "novec.db"), vector_enabled=False)
        try:
            report = build_report()
            _, warnings = store.save_report(report, embed_local)
            assert len(warnings) == 1
            assert "vector" in warnings[0]
            assert store.get_report(report.report_id) == report
        finally:
            store.close()

    def test_embedding_failure_degrades_to_warning(self, store):
        def broken(text):
            raise EmbeddingUnavailable("remote embeddings not configured")

        report = build_report()
        _, warnings = store.save_report(report, broken)
        assert any("vector persistence failed" in w for w in warnings)
        assert store.get_report(report.report_id) == report

    def test_concurrent_saves_both_land(self, store):
        reports = [build_report(question=f"question {i}") for i in range(2)]

        def save(r):
            store.save_report(r, embed_local)

        threads = [threading.Thread(target=save, args=(r,)) for r in reports]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for r in reports:
            assert store.get_report(r.report_id) == r


class TestListReports:
    def test_empty_store(self, store):
        assert store.list_reports(5) == []

    def test_newest_first_with_limit(self, store):
        stamps = [
            "2026-01-01T00:00:00.000Z",
            "2026-01-02T00:00:00.000Z",
            "2026-01-03T00:00:00.000Z",
        ]
        ids = []
        for stamp in stamps:
            report = build_report(created_at=stamp)
            store.save_report(report, embed_local)
            ids.append(report.report_id)
        top2 = store.list_reports(2)
        assert [s.report_id for s in top2] == [ids[2], ids[1]]

    def test_limit_above_count_returns_all(self, store):
        for i in range(5):
            store.save_report(build_report(question=f"q {i}"), embed_local)
        assert len(store.list_reports(100)) == 5

    def test_limit_must_be_positive(self, store):
        with pytest.raises(ValueError):
            store.list_reports(0)


class TestVectorSearch:
    def _one_hot(self, index):
        vec = np.zeros(DIMENSION)
        vec[index] = 1.0
        return vec

    def test_self_match_scores_one(self, store):
        store.upsert_vector("a", VectorKind.REPORT, self._one_hot(3))
        store.upsert_vector("b", VectorKind.REPORT, self._one_hot(5))
        [(key, score), _] = store.vector_search(self._one_hot(3), VectorKind.REPORT, 2)
        assert key == "a"
        assert abs(score - 1.0) < 1e-6

    def test_orthogonal_vectors_score_zero(self, store):
        store.upsert_vector("x", VectorKind.REPORT, self._one_hot(0))
        [(_, score)] = store.vector_search(self._one_hot(1), VectorKind.REPORT, 1)
        assert score == 0.0

    def test_ties_break_by_key_ascending(self, store):
        same = self._one_hot(7)
        for key in ("zeta", "alpha", "mid"):
            store.upsert_vector(key, VectorKind.REPORT, same)
        results = store.vector_search(same, VectorKind.REPORT, 3)
        assert [key for key, _ in results] == ["alpha", "mid", "zeta"]

    def test_kind_filtering(self, store):
        store.upsert_vector("r1", VectorKind.REPORT, self._one_hot(1))
        store.upsert_vector("p1", VectorKind.PAPER, self._one_hot(1))
        results = store.vector_search(self._one_hot(1), VectorKind.PAPER, 10)
        assert [key for key, _ in results] == ["p1"]

    def test_matches_full_sort_oracle(self, store):
        rng = np.random.default_rng(42)
        stored = {}
        for i in range(50):
            vec = rng.normal(size=DIMENSION)
            key = f"key-{i:02d}"
            store.upsert_vector(key, VectorKind.REPORT, vec)
            # the oracle sees the same float32-quantized bytes the index stores
            stored[key] = np.asarray(vec, dtype="<f4").astype(float).tolist()
        query = rng.normal(size=DIMENSION)
        for k in (1, 3, 5, 10):
            expected = oracle_vector_topk(query.tolist(), stored, k)
            actual = store.vector_search(query, VectorKind.REPORT, k)
            assert [key for key, _ in actual] == [key for key, _ in expected]
            for (_, got), (_, want) in zip(actual, expected):
                assert abs(got - want) < 1e-9


class TestSearchReports:
    def test_own_question_is_top_vector_hit(self, store):
        report = build_report(question="How does dedup affect recall?")
        store.save_report(report, embed_local)
        store.save_report(build_report(question="Unrelated topic entirely"), embed_local)
        hits = store.search_reports("How does dedup affect recall?", 5, embed_local)
        assert hits[0].report_id == report.report_id
        assert hits[0].match_kind == "vector"
        assert hits[0].score >= 0.999

    def test_disabled_index_uses_keyword_with_exact_score(self, tmp_path):
        store = ReportStore(str(tmp_path / "kw.db"), vector_enabled=False)
        try:
            report = build_report(question="retrieval augmented generation pipelines")
            store.save_report(report, embed_local)
            hits = store.search_reports("retrieval generation cats dogs", 5, embed_local)
            assert [h.match_kind for h in hits] == ["keyword"]
            assert hits[0].score == pytest.approx(0.5)
        finally:
            store.close()

    def test_embedding_failure_falls_back_to_keyword(self, store):
        report = build_report(question="streaming lifecycle events")
        store.save_report(report, embed_local)

        def broken(text):
            raise EmbeddingUnavailable("down")

        hits = store.search_reports("streaming events", 5, broken)
        assert hits
        assert hits[0].match_kind == "keyword"

    def test_keyword_ties_newest_first(self, tmp_path):
        store = ReportStore(str(tmp_path / "ties.db"), vector_enabled=False)
        try:
            old = build_report(
                question="alpha beta", created_at="2026-01-01T00:00:00.000Z"
            )
            new = build_report(
                question="alpha beta", created_at="2026-02-01T00:00:00.000Z"
            )
            store.save_report(old, embed_local)
            store.save_report(new, embed_local)
            hits = store.search_reports("alpha", 5, embed_local)
            assert [h.report_id for h in hits] == [new.report_id, old.report_id]
        finally:
            store.close()

    def test_empty_store_returns_empty(self, store):
        assert store.search_reports("anything", 5, embed_local) == []

    def test_zero_score_questions_excluded(self, tmp_path):
        store = ReportStore(str(tmp_path / "zero.db"), vector_enabled=False)
        try:
            store.save_report(build_report(question="completely different"), embed_local)
            assert store.search_reports("unrelated words", 3, embed_local) == []
        finally:
            store.close()


class TestKeywordScore:
    def test_half_overlap(self):
        assert keyword_score("a b c d", "a c x") == pytest.approx(0.5)

    def test_case_insensitive(self):
        assert keyword_score("Alpha", "alpha beta") == 1.0

    @given(st.text(max_size=40), st.text(max_size=40))
    def test_matches_reference_scorer(self, query, question):
        assert keyword_score(query, question) == pytest.approx(
            oracle_keyword_score(query, question)
        )
