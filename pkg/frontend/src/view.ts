import { renderMarkdown } from "./markdown.js";
import type {
  ConfigView,
  PipelineEvent,
  Report,
  RunOverrides,
  SearchHit,
} from "./types.js";

export function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

// ---------------------------------------------------------------- config --

const PROVIDERS = ["mock", "openai_compatible", "anthropic"];
const EMBEDDING_MODES = ["remote", "local", "auto"];

/**
 * Render the active server config as badges. The server never sends the
 * API key itself, only whether one is set; the badge reflects that flag.
 */
export function renderConfigBadges(container: HTMLElement, config: ConfigView | null): void {
  container.textContent = "";
  if (config === null) {
    container.appendChild(el("span", "notice", "config unavailable; using defaults"));
    config = {
      provider: "mock",
      model: "mock-model",
      base_url: null,
      embedding_mode: "auto",
      api_key_set: false,
    };
  }
  container.appendChild(el("span", "badge badge-provider", config.provider));
  container.appendChild(el("span", "badge badge-model", config.model));
  container.appendChild(el("span", "badge badge-embedding", `embeddings: ${config.embedding_mode}`));
  const keyBadge = el(
    "span",
    config.api_key_set ? "badge badge-key key-set" : "badge badge-key key-missing",
    config.api_key_set ? "key configured" : "no key",
  );
  container.appendChild(keyBadge);
}

function labelled(name: string, input: HTMLElement): HTMLElement {
  const wrap = el("label", "field");
  wrap.appendChild(el("span", "field-name", name));
  wrap.appendChild(input);
  return wrap;
}

function selectWith(name: string, options: string[]): HTMLSelectElement {
  const select = document.createElement("select");
  select.name = name;
  const blank = document.createElement("option");
  blank.value = "";
  blank.textContent = "(inherit)";
  select.appendChild(blank);
  for (const value of options) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value;
    select.appendChild(option);
  }
  return select;
}

/**
 * Build the per-run override fields. The key input is write-only: type
 * password, never pre-populated, cleared along with the rest on reset.
 */
export function buildOverridesFieldset(): HTMLFieldSetElement {
  const fieldset = document.createElement("fieldset");
  fieldset.className = "overrides";
  const legend = document.createElement("legend");
  legend.textContent = "overrides for this run";
  fieldset.appendChild(legend);

  fieldset.appendChild(labelled("provider", selectWith("provider", PROVIDERS)));

  const model = document.createElement("input");
  model.type = "text";
  model.name = "model";
  fieldset.appendChild(labelled("model", model));

  const apiKey = document.createElement("input");
  apiKey.type = "password";
  apiKey.name = "api_key";
  apiKey.autocomplete = "off";
  fieldset.appendChild(labelled("api key", apiKey));

  const baseUrl = document.createElement("input");
  baseUrl.type = "text";
  baseUrl.name = "base_url";
  fieldset.appendChild(labelled("base url", baseUrl));

  fieldset.appendChild(labelled("embedding mode", selectWith("embedding_mode", EMBEDDING_MODES)));
  return fieldset;
}

/** Collect only the fields the user actually filled in. */
export function collectOverrides(fieldset: HTMLFieldSetElement): RunOverrides {
  const overrides: RunOverrides = {};
  const fields = fieldset.querySelectorAll<HTMLInputElement | HTMLSelectElement>("input, select");
  for (const field of fields) {
    const value = field.value.trim();
    if (value !== "") {
      overrides[field.name as keyof RunOverrides] = value;
    }
  }
  return overrides;
}

// ------------------------------------------------------------ event feed --

function eventText(event: PipelineEvent): string {
  switch (event.type) {
    case "queued":
      return "queued";
    case "agent_started":
      return `${event.agent}: started`;
    case "agent_progress": {
      const { current, total } = event.data as { current?: number; total?: number };
      if (typeof current === "number" && typeof total === "number") {
        return `${event.agent}: ${current}/${total}`;
      }
      return `${event.agent}: ${JSON.stringify(event.data)}`;
    }
    case "agent_completed": {
      const summary = Object.keys(event.data).length > 0 ? ` ${JSON.stringify(event.data)}` : "";
      return `${event.agent}: completed${summary}`;
    }
    case "done":
      return `done: report ${String(event.data.report_id ?? "")}`;
    case "error": {
      const stage = String(event.data.stage ?? "unknown");
      const message = String(event.data.message ?? "");
      return `error at ${stage}: ${message}`;
    }
  }
}

export function renderEventRow(event: PipelineEvent): HTMLElement {
  const row = el("div", `event event-${event.type}`, eventText(event));
  row.dataset.type = event.type;
  row.dataset.seq = String(event.seq);
  return row;
}

/** One row per event, in order; the feed never drops or reorders lines. */
export function renderFeed(container: HTMLElement, events: PipelineEvent[]): void {
  container.textContent = "";
  for (const event of events) {
    container.appendChild(renderEventRow(event));
  }
}

// ---------------------------------------------------------------- report --

function listSection(title: string, items: string[]): HTMLElement {
  const section = el("div", "synthesis-block");
  section.appendChild(el("h4", undefined, title));
  if (items.length === 0) {
    section.appendChild(el("p", "empty", "none noted"));
    return section;
  }
  const list = el("ul");
  for (const item of items) {
    list.appendChild(el("li", undefined, item));
  }
  section.appendChild(list);
  return section;
}

export function renderReport(container: HTMLElement, report: Report): void {
  container.textContent = "";
  container.appendChild(el("h3", "report-question", report.question));
  container.appendChild(
    el("p", "report-meta", `${report.report_id} · ${report.created_at} · ${report.papers.length} papers`),
  );

  if (report.warnings.length > 0) {
    const panel = el("div", "warnings");
    panel.appendChild(el("h4", undefined, "warnings"));
    const list = el("ul");
    for (const warning of report.warnings) {
      list.appendChild(el("li", undefined, warning));
    }
    panel.appendChild(list);
    container.appendChild(panel);
  }

  const draft = el("div", "draft");
  draft.innerHTML = renderMarkdown(report.draft_markdown);
  container.appendChild(draft);

  const synthesis = el("div", "synthesis");
  synthesis.appendChild(listSection("consensus", report.synthesis.consensus));
  synthesis.appendChild(listSection("contradictions", report.synthesis.contradictions));
  synthesis.appendChild(listSection("open gaps", report.synthesis.open_gaps));
  container.appendChild(synthesis);

  const papers = el("div", "papers");
  papers.appendChild(el("h4", undefined, `papers (${report.papers.length})`));
  const paperList = el("ul");
  for (const paper of report.papers) {
    const item = el("li", "paper");
    const link = document.createElement("a");
    link.href = paper.url;
    link.target = "_blank";
    link.rel = "noopener";
    link.textContent = paper.title;
    item.appendChild(link);
    const detail = [paper.source, paper.year === null ? "n.d." : String(paper.year)];
    if (paper.authors.length > 0) {
      detail.push(paper.authors.join(", "));
    }
    item.appendChild(el("span", "paper-detail", ` (${detail.join(" · ")})`));
    paperList.appendChild(item);
  }
  papers.appendChild(paperList);
  container.appendChild(papers);

  const titleById = new Map(report.papers.map((paper) => [paper.id, paper.title]));
  const refs = el("div", "references");
  refs.appendChild(el("h4", undefined, "references"));
  const refList = el("ol");
  for (const ref of report.references) {
    // anchor target for the [R<k>] links inside the rendered draft
    const item = el("li", "reference", `[${ref.label}] ${titleById.get(ref.paper_id) ?? ref.paper_id}`);
    item.id = `ref-${ref.label}`;
    refList.appendChild(item);
  }
  refs.appendChild(refList);
  container.appendChild(refs);
}

// --------------------------------------------------------------- history --

export function renderHits(
  container: HTMLElement,
  hits: SearchHit[],
  onOpen: (reportId: string) => void,
): void {
  container.textContent = "";
  if (hits.length === 0) {
    container.appendChild(el("p", "empty", "no matches"));
    return;
  }
  for (const hit of hits) {
    const row = el("div", "hit");
    row.dataset.reportId = hit.report_id;
    row.appendChild(el("span", "hit-question", hit.question));
    row.appendChild(
      el("span", "hit-meta", ` ${hit.created_at} · ${hit.score.toFixed(3)} · ${hit.match_kind}`),
    );
    row.addEventListener("click", () => onOpen(hit.report_id));
    container.appendChild(row);
  }
}
