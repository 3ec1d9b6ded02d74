"""researchpilot: a self-hostable literature-review assistant.

A research question goes through four fixed stages (search, extraction,
synthesis, writer); the run streams lifecycle events and ends in a persisted,
citation-labeled report searchable from history.
"""

import logging

from .domain import (
    Paper,
    PaperExtraction,
    PipelineEvent,
    ReferenceEntry,
    Report,
    RuntimeConfig,
    Synthesis,
)

__version__ = "0.1.0"

# stay silent unless the embedding application configures logging; keeps the
# CLI's NDJSON stderr stream free of stray log lines
logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "Paper",
    "PaperExtraction",
    "PipelineEvent",
    "ReferenceEntry",
    "Report",
    "RuntimeConfig",
    "Synthesis",
    "__version__",
]
