import type { PipelineEvent, Report } from "./types.js";

export type RunPhase = "idle" | "streaming" | "done" | "error";

/**
 * State for a single research run. Transitions are one-way:
 *
 *   idle -> streaming -> done  -> idle
 *                     -> error -> idle
 *
 * Events are append-only and must arrive in strictly increasing seq order.
 * All transition helpers return a fresh object; callers never mutate.
 */
export interface UiRunState {
  phase: RunPhase;
  events: PipelineEvent[];
  report: Report | null;
  errorMessage: string | null;
}

export function initialRunState(): UiRunState {
  return { phase: "idle", events: [], report: null, errorMessage: null };
}

export function startRun(state: UiRunState): UiRunState {
  if (state.phase !== "idle") {
    throw new Error(`cannot start a run while ${state.phase}`);
  }
  return { phase: "streaming", events: [], report: null, errorMessage: null };
}

export function applyEvent(state: UiRunState, event: PipelineEvent): UiRunState {
  if (state.phase !== "streaming") {
    throw new Error(`cannot apply event while ${state.phase}`);
  }
  const last = state.events[state.events.length - 1];
  if (last !== undefined && event.seq <= last.seq) {
    throw new Error(`event seq ${event.seq} not after ${last.seq}`);
  }
  const events = [...state.events, event];
  if (event.type === "done") {
    return { phase: "done", events, report: null, errorMessage: null };
  }
  if (event.type === "error") {
    const stage = typeof event.data.stage === "string" ? event.data.stage : "unknown";
    const message = typeof event.data.message === "string" ? event.data.message : "";
    return {
      phase: "error",
      events,
      report: null,
      errorMessage: `error at ${stage}: ${message}`,
    };
  }
  return { ...state, events };
}

/** Network-level failure: the stream dropped without a terminal event. */
export function failRun(state: UiRunState, message: string): UiRunState {
  if (state.phase !== "streaming") {
    throw new Error(`cannot fail a run while ${state.phase}`);
  }
  return { ...state, phase: "error", errorMessage: message };
}

export function attachReport(state: UiRunState, report: Report): UiRunState {
  if (state.phase !== "done") {
    throw new Error(`cannot attach a report while ${state.phase}`);
  }
  return { ...state, report };
}

export function resetRun(state: UiRunState): UiRunState {
  if (state.phase === "streaming") {
    throw new Error("cannot reset while streaming");
  }
  return initialRunState();
}
