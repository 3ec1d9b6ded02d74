import json
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from researchpilot.domain import (
    Agent,
    ConfigError,
    EventType,
    PipelineEvent,
    Report,
    RuntimeConfig,
    Synthesis,
    assign_reference_labels,
    canonical_json,
    new_report_id,
    normalize_title,
    tokenize,
    utc_now,
    validate_runtime_config,
)

from .helpers import make_paper
from .oracles import oracle_normalize_title


class TestNormalizeTitle:
    def test_lowercase_only(self):
        assert normalize_title("Attention Is All You Need") == "attention is all you need"

    def test_punctuation_and_whitespace(self):
        assert (
            normalize_title("  Graph   Neural-Networks: A Survey! ")
            == "graph neuralnetworks a survey"
        )

    def test_empty(self):
        assert normalize_title("") == ""

    @given(st.text(max_size=80))
    def test_idempotent_and_matches_reference(self, title):
        once = normalize_title(title)
        assert normalize_title(once) == once
        assert once == oracle_normalize_title(title)


def test_tokenize_lowercases_and_splits():
    assert tokenize("Retrieval-Augmented Generation, 2024!") == [
        "retrieval",
        "augmented",
        "generation",
        "2024",
    ]
    assert tokenize("") == []


class TestReferenceLabels:
    def test_empty(self):
        assert assign_reference_labels([]) == []

    def test_singleton(self):
        paper = make_paper(1)
        [entry] = assign_reference_labels([paper])
        assert entry.label == "R1"
        assert entry.paper_id == paper.id

    def test_ten_papers_zip_oracle(self):
        papers = [make_paper(i) for i in range(1, 11)]
        entries = assign_reference_labels(papers)
        expected = list(zip((f"R{i}" for i in range(1, 11)), (p.id for p in papers)))
        assert [(e.label, e.paper_id) for e in entries] == expected

    def test_duplicate_ids_rejected(self):
        papers = [make_paper(1), make_paper(1)]
        with pytest.raises(ValueError, match="duplicate"):
            assign_reference_labels(papers)


class TestPaperInvariants:
    def test_empty_abstract_rejected(self):
        with pytest.raises(ValueError, match="abstract"):
            make_paper(1, abstract="")

    def test_empty_id_rejected(self):
        with pytest.raises(ValueError, match="id"):
            make_paper(1, paper_id="")

    def test_source_coerced_from_string(self):
        assert make_paper(1, source="semantic_scholar").source.value == "semantic_scholar"

    def test_unknown_source_rejected(self):
        with pytest.raises(ValueError):
            make_paper(1, source="crossref")


def _report(papers, extractions=None, references=None, **kw):
    from researchpilot.domain import PaperExtraction

    if extractions is None:
        extractions = [PaperExtraction(paper_id=p.id) for p in papers]
    if references is None:
        references = assign_reference_labels(papers)
    defaults = dict(
        report_id=new_report_id(),
        question="What is retrieval augmented generation?",
        papers=papers,
        extractions=extractions,
        synthesis=Synthesis(consensus=["x"]),
        draft_markdown="body\n\n## References",
        warnings=[],
        references=references,
        created_at=utc_now(),
    )
    defaults.update(kw)
    return Report(**defaults)


class TestReportInvariants:
    def test_valid_report_constructs(self):
        report = _report([make_paper(i) for i in range(1, 4)])
        assert [r.label for r in report.references] == ["R1", "R2", "R3"]

    def test_paper_cap_enforced(self):
        papers = [make_paper(i) for i in range(1, 12)]
        with pytest.raises(ValueError, match="cap"):
            _report(papers)

    def test_extraction_bijection_enforced(self):
        from researchpilot.domain import PaperExtraction

        papers = [make_paper(1), make_paper(2)]
        with pytest.raises(ValueError, match="biject"):
            _report(papers, extractions=[PaperExtraction(paper_id=papers[0].id)])

    def test_label_sequence_enforced(self):
        from researchpilot.domain import ReferenceEntry

        papers = [make_paper(1), make_paper(2)]
        bad = [
            ReferenceEntry(label="R1", paper_id=papers[0].id),
            ReferenceEntry(label="R3", paper_id=papers[1].id),
        ]
        with pytest.raises(ValueError, match="labels"):
            _report(papers, references=bad)

    def test_round_trip_dict(self):
        report = _report([make_paper(i) for i in range(1, 4)])
        assert Report.from_dict(report.to_dict()) == report


class TestPipelineEvent:
    def test_agent_required_for_agent_types(self):
        with pytest.raises(ValueError):
            PipelineEvent(
                type=EventType.AGENT_STARTED, agent=None, seq=0, ts=utc_now(), data={}
            )

    def test_agent_forbidden_for_terminal(self):
        with pytest.raises(ValueError):
            PipelineEvent(
                type=EventType.DONE, agent=Agent.WRITER, seq=5, ts=utc_now(), data={}
            )

    def test_to_dict_omits_agent_when_absent(self):
        event = PipelineEvent(
            type=EventType.QUEUED, agent=None, seq=0, ts=utc_now(), data={}
        )
        assert "agent" not in event.to_dict()
        line = event.to_json_line()
        assert json.loads(line)["type"] == "queued"


class TestReportId:
    def test_shape(self):
        rid = new_report_id()
        assert len(rid) == 26
        assert re.fullmatch(r"[0-9A-HJKMNP-TV-Z]{26}", rid)

    def test_time_ordering(self):
        earlier = new_report_id(now_ms=1_000_000)
        later = new_report_id(now_ms=2_000_000)
        assert earlier < later

    def test_uniqueness(self):
        ids = {new_report_id() for _ in range(500)}
        assert len(ids) == 500


def test_utc_now_is_rfc3339_with_millis():
    assert re.fullmatch(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z", utc_now())


def test_canonical_json_is_sorted_and_compact():
    text = canonical_json({"b": 1, "a": [1, 2], "ü": "ö"})
    assert text == '{"a":[1,2],"b":1,"ü":"ö"}'


class TestRuntimeConfig:
    def test_mock_needs_no_key(self):
        validate_runtime_config(RuntimeConfig())

    def test_real_provider_needs_key(self):
        config = RuntimeConfig(provider="openai_compatible", model="m")
        with pytest.raises(ConfigError, match="openai_compatible"):
            validate_runtime_config(config)

    def test_real_provider_with_key_passes(self):
        validate_runtime_config(
            RuntimeConfig(provider="anthropic", model="m", api_key="k")
        )

    def test_empty_model_rejected(self):
        with pytest.raises(ConfigError, match="model"):
            validate_runtime_config(RuntimeConfig(model=""))

    def test_repr_hides_api_key(self):
        config = RuntimeConfig(provider="openai_compatible", api_key="sk-SENTINEL-123")
        assert "sk-SENTINEL-123" not in repr(config)
