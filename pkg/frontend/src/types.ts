// Wire types mirroring the backend's JSON exactly. Field names are the
// server's snake_case; do not rename them here.

export type EventType =
  | "queued"
  | "agent_started"
  | "agent_progress"
  | "agent_completed"
  | "done"
  | "error";

export type AgentName = "search" | "extraction" | "synthesis" | "writer";

export const AGENT_ORDER: AgentName[] = ["search", "extraction", "synthesis", "writer"];

export interface PipelineEvent {
  type: EventType;
  agent?: AgentName;
  seq: number;
  ts: string;
  data: Record<string, unknown>;
}

export interface Paper {
  id: string;
  title: string;
  abstract: string;
  source: "semantic_scholar" | "arxiv";
  url: string;
  year: number | null;
  authors: string[];
  doi: string | null;
}

export interface PaperExtraction {
  paper_id: string;
  claims: string[];
  methods: string[];
  datasets: string[];
  results: string[];
  limitations: string[];
}

export interface Synthesis {
  consensus: string[];
  contradictions: string[];
  open_gaps: string[];
}

export interface ReferenceEntry {
  label: string;
  paper_id: string;
}

export interface Report {
  report_id: string;
  question: string;
  papers: Paper[];
  extractions: PaperExtraction[];
  synthesis: Synthesis;
  references: ReferenceEntry[];
  draft_markdown: string;
  warnings: string[];
  created_at: string;
}

export interface ConfigView {
  provider: string;
  model: string;
  base_url: string | null;
  embedding_mode: string;
  api_key_set: boolean;
}

export interface ReportSummary {
  report_id: string;
  question: string;
  created_at: string;
}

export interface SearchHit {
  report_id: string;
  question: string;
  score: number;
  created_at: string;
  match_kind: "vector" | "keyword";
}

// Per-run config overrides; empty fields are omitted before sending.
export interface RunOverrides {
  provider?: string;
  model?: string;
  api_key?: string;
  base_url?: string;
  embedding_mode?: string;
}
