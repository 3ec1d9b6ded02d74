"""Provider-agnostic chat completions, declarative prompt signatures, and
defensive parsing of structured model output.

A Signature declares named input and output fields; render_prompt turns it
into a deterministic request asking for a single JSON object. Parsing walks an
extraction ladder (plain JSON, fenced JSON, brace substring) and coerces the
result so every declared field is always present. One repair re-prompt is
allowed before giving up.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

import httpx

from .domain import Provider, RuntimeConfig

logger = logging.getLogger(__name__)

DEFAULT_OPENAI_BASE_URL = "https://api.openai.com/v1"
DEFAULT_ANTHROPIC_BASE_URL = "https://api.anthropic.com"
ANTHROPIC_VERSION = "2023-06-01"
REQUEST_TIMEOUT_SECONDS = 60.0


class ProviderError(Exception):
    """The model provider failed: transport error, bad status, or bad shape."""


class RateLimited(ProviderError):
    """The provider rejected the call for rate or quota reasons."""


class MalformedOutput(Exception):
    """No JSON object could be recovered from the model's text."""


class OutputShape(str, Enum):
    STRING_ARRAY = "string_array"
    STRING = "string"


@dataclass(frozen=True)
class InputField:
    name: str
    description: str


@dataclass(frozen=True)
class OutputField:
    name: str
    description: str
    shape: OutputShape = OutputShape.STRING_ARRAY


@dataclass(frozen=True)
class Signature:
    """A named LLM task with declared input and output fields."""

    name: str
    instruction: str
    inputs: tuple[InputField, ...]
    outputs: tuple[OutputField, ...]

    def __post_init__(self) -> None:
        names = [f.name for f in self.outputs]
        if any(not n for n in names) or len(set(names)) != len(names):
            raise ValueError("signature output field names must be unique and nonempty")


@dataclass(frozen=True)
class CompletionRequest:
    system_text: str
    user_text: str
    model: str
    max_tokens: int = 1024
    temperature: float = 0.2

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


def render_prompt(
    sig: Signature,
    values: Mapping[str, str],
    *,
    model: str = "",
    max_tokens: int = 1024,
    temperature: float = 0.2,
) -> CompletionRequest:
    """Render a signature plus input values into a deterministic request.

    The system text names the task (the mock provider keys off it), carries
    the instruction, and pins the exact JSON contract. The user text lists one
    FIELD_NAME block per declared input, in declaration order.
    """
    for f in sig.inputs:
        if f.name not in values:
            raise ValueError(f"missing input field: {f.name}")

    out_names = [f.name for f in sig.outputs]
    array_names = [f.name for f in sig.outputs if f.shape is OutputShape.STRING_ARRAY]
    string_names = [f.name for f in sig.outputs if f.shape is OutputShape.STRING]
    lines = [f"Task: {sig.name}", sig.instruction, ""]
    lines.append(
        "Answer with a single JSON object whose keys are exactly: "
        + ", ".join(out_names)
        + "."
    )
    if array_names:
        lines.append("These keys hold arrays of strings: " + ", ".join(array_names) + ".")
    if string_names:
        lines.append("These keys hold a single string: " + ", ".join(string_names) + ".")
    for f in sig.outputs:
        lines.append(f"- {f.name}: {f.description}")
    system_text = "\n".join(lines)

    user_text = "\n\n".join(f"{f.name.upper()}:\n{values[f.name]}" for f in sig.inputs)
    return CompletionRequest(
        system_text=system_text,
        user_text=user_text,
        model=model,
        max_tokens=max_tokens,
        temperature=temperature,
    )


async def complete(req: CompletionRequest, config: RuntimeConfig) -> str:
    """Run one chat completion against the configured provider and return the
    assistant text verbatim."""
    if config.provider is Provider.MOCK:
        return _mock_complete(req)
    if config.provider is Provider.OPENAI_COMPATIBLE:
        return await _complete_openai(req, config)
    return await _complete_anthropic(req, config)


def _model_name(req: CompletionRequest, config: RuntimeConfig) -> str:
    return req.model or config.model


def _raise_for_status(status: int, body: str, secret: str | None) -> None:
    snippet = " ".join(body.split())[:200]
    if secret:
        # a provider error body may echo the credential; never propagate it
        snippet = snippet.replace(secret, "[redacted]")
    if status == 429 or (status >= 400 and "quota" in body.lower()):
        raise RateLimited(f"provider rate limit (HTTP {status}): {snippet}")
    raise ProviderError(f"provider returned HTTP {status}: {snippet}")


async def _post_json(
    url: str, payload: dict, headers: dict, secret: str | None
) -> dict:
    try:
        async with httpx.AsyncClient(timeout=REQUEST_TIMEOUT_SECONDS) as client:
            resp = await client.post(url, json=payload, headers=headers)
    except httpx.TimeoutException as exc:
        raise ProviderError("provider request timed out") from exc
    except httpx.HTTPError as exc:
        raise ProviderError(f"provider request failed: {type(exc).__name__}") from exc
    if resp.status_code != 200:
        _raise_for_status(resp.status_code, resp.text, secret)
    try:
        return resp.json()
    except ValueError as exc:
        raise ProviderError("provider returned non-JSON body") from exc


async def _complete_openai(req: CompletionRequest, config: RuntimeConfig) -> str:
    base = (config.base_url or DEFAULT_OPENAI_BASE_URL).rstrip("/")
    headers = {}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    payload = {
        "model": _model_name(req, config),
        "messages": [
            {"role": "system", "content": req.system_text},
            {"role": "user", "content": req.user_text},
        ],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    }
    data = await _post_json(f"{base}/chat/completions", payload, headers, config.api_key)
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProviderError("unexpected provider response shape") from exc
    return content or ""


async def _complete_anthropic(req: CompletionRequest, config: RuntimeConfig) -> str:
    base = (config.base_url or DEFAULT_ANTHROPIC_BASE_URL).rstrip("/")
    headers = {"anthropic-version": ANTHROPIC_VERSION}
    if config.api_key:
        headers["x-api-key"] = config.api_key
    payload = {
        "model": _model_name(req, config),
        "system": req.system_text,
        "messages": [{"role": "user", "content": req.user_text}],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    }
    data = await _post_json(f"{base}/v1/messages", payload, headers, config.api_key)
    try:
        parts = data["content"]
        # multi-part responses are concatenated in order
        return "".join(p.get("text", "") for p in parts if isinstance(p, dict))
    except (KeyError, TypeError) as exc:
        raise ProviderError("unexpected provider response shape") from exc


# --- mock provider -----------------------------------------------------------

_TASK_RE = re.compile(r"Task: (\S+)")
_BIB_LINE_RE = re.compile(r"^R(\d+): (.+?) \(", re.MULTILINE)


def _block(user_text: str, name: str) -> str:
    match = re.search(
        rf"(?ms)^{name}:\n(.*?)(?=\n\n[A-Z_]+:\n|\Z)",
        user_text,
    )
    return match.group(1).strip() if match else ""


def _mock_complete(req: CompletionRequest) -> str:
    """Offline deterministic provider: canned JSON keyed by the task name in
    the system text, flavored with the request's own input values."""
    match = _TASK_RE.search(req.system_text)
    task = match.group(1) if match else ""
    if task == "extract_findings":
        title = _block(req.user_text, "TITLE") or "the paper"
        return json.dumps(
            {
                "claims": [
                    f"{title} reports measurable gains over its baseline.",
                    f"{title} argues that staged decomposition improves inspectability.",
                ],
                "methods": [
                    "controlled comparison against a single-stage baseline",
                    "ablation over retrieval depth",
                ],
                "datasets": ["a held-out domain evaluation corpus"],
                "results": ["consistent improvement across the reported settings"],
                "limitations": ["evaluation restricted to abstracts rather than full texts"],
            }
        )
    if task == "synthesize_findings":
        question = _block(req.user_text, "QUESTION") or "the question"
        return json.dumps(
            {
                "consensus": [
                    f"Most papers share a common framing of: {question}",
                    "Staged pipelines are preferred over single-shot prompting.",
                    "Structured intermediate outputs aid inspection and debugging.",
                    "Retrieval quality bounds downstream synthesis quality.",
                ],
                "contradictions": [
                    "Papers disagree on whether abstracts alone suffice for extraction.",
                    "Reported gains vary with the evaluation corpus.",
                ],
                "open_gaps": [
                    "Few papers verify citations against source text.",
                    "Cross-domain generalization remains untested.",
                    "Cost and latency tradeoffs are rarely quantified.",
                ],
            }
        )
    if task == "draft_related_work":
        question = _block(req.user_text, "QUESTION") or "the research question"
        bibliography = _block(req.user_text, "BIBLIOGRAPHY")
        cited = _BIB_LINE_RE.findall(bibliography)
        paragraphs = [
            "## Related Work",
            f"The literature addressing {question} spans retrieval, structured "
            "extraction, and synthesis. This section surveys the retrieved papers "
            "and situates their findings against one another.",
        ]
        for label, title in cited:
            paragraphs.append(
                f"Prior work examined {title} in depth [R{label}], and its findings "
                "bear directly on the present question. The reported evidence both "
                "motivates and constrains the approaches considered here."
            )
        paragraphs.append(
            "Taken together, these studies converge on staged, inspectable designs "
            "while leaving verification and cross-domain robustness open."
        )
        return json.dumps({"draft_markdown": "\n\n".join(paragraphs)})
    return "{}"


# --- defensive output parsing ------------------------------------------------

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n(.*?)```", re.DOTALL)


def _try_object(text: str) -> dict | None:
    try:
        parsed = json.loads(text)
    except (json.JSONDecodeError, ValueError):
        return None
    return parsed if isinstance(parsed, dict) else None


def _extract_object(raw: str) -> dict:
    obj = _try_object(raw)
    if obj is not None:
        return obj
    fence = _FENCE_RE.search(raw)
    if fence:
        obj = _try_object(fence.group(1))
        if obj is not None:
            return obj
    start = raw.find("{")
    end = raw.rfind("}")
    if start != -1 and end > start:
        obj = _try_object(raw[start : end + 1])
        if obj is not None:
            return obj
    raise MalformedOutput(raw[:200])


def _stringify(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (dict, list)):
        return json.dumps(value, ensure_ascii=False)
    return str(value)


def parse_structured_output(raw: str, sig: Signature) -> dict[str, list[str]]:
    """Recover the declared fields from model text.

    Every declared field comes back as a list of strings: missing fields
    default to empty, bare scalars are wrapped, non-string elements are
    stringified, undeclared keys are dropped.
    """
    obj = _extract_object(raw)
    result: dict[str, list[str]] = {}
    for f in sig.outputs:
        value = obj.get(f.name)
        if value is None:
            result[f.name] = []
        elif isinstance(value, list):
            result[f.name] = [_stringify(v) for v in value]
        else:
            result[f.name] = [_stringify(value)]
    return result


async def complete_structured(
    sig: Signature,
    values: Mapping[str, str],
    config: RuntimeConfig,
    *,
    max_tokens: int = 1024,
    temperature: float = 0.2,
) -> dict[str, list[str]]:
    """Render, complete, parse; on a parse failure issue exactly one repair
    re-prompt, then let MalformedOutput stand."""
    req = render_prompt(
        sig, values, model=config.model, max_tokens=max_tokens, temperature=temperature
    )
    raw = await complete(req, config)
    try:
        return parse_structured_output(raw, sig)
    except MalformedOutput:
        keys = ", ".join(f.name for f in sig.outputs)
        logger.debug("unparseable %s output, issuing one repair re-prompt", sig.name)
        retry = replace(
            req,
            user_text=req.user_text + f"\n\nReturn ONLY a valid JSON object with keys: {keys}",
        )
        raw = await complete(retry, config)
        return parse_structured_output(raw, sig)
