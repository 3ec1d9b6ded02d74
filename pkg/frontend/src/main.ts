import { ApiClient } from "./api.js";
import {
  applyEvent,
  attachReport,
  failRun,
  initialRunState,
  resetRun,
  startRun,
  type UiRunState,
} from "./state.js";
import {
  buildOverridesFieldset,
  collectOverrides,
  el,
  renderConfigBadges,
  renderEventRow,
  renderHits,
  renderReport,
} from "./view.js";

export interface AppHandle {
  /** Settles once the initial GET /config attempt finishes. */
  ready: Promise<void>;
  /** The in-flight run, if any; settles when the run reaches done or error. */
  pendingRun: Promise<void> | null;
  pendingSearch: Promise<void> | null;
  getState(): UiRunState;
  client: ApiClient;
}

/**
 * Mount the console into `root`. Three panels: run (question, overrides,
 * live event feed), report (rendered draft and structured fields), and
 * history (saved-report search). One run may be active at a time; a new
 * submit is accepted only once the previous run reached done or error.
 */
export function initApp(root: HTMLElement, baseUrl = ""): AppHandle {
  const client = new ApiClient(baseUrl);
  let state = initialRunState();

  root.textContent = "";
  const header = el("header");
  header.appendChild(el("h1", undefined, "researchpilot"));
  const badges = el("div");
  badges.id = "config-badges";
  header.appendChild(badges);
  root.appendChild(header);

  const panels = el("main", "panels");
  root.appendChild(panels);

  // run panel
  const runPanel = el("section", "panel");
  runPanel.id = "run-panel";
  panels.appendChild(runPanel);

  const form = document.createElement("form");
  form.id = "run-form";
  const question = document.createElement("textarea");
  question.name = "question";
  question.rows = 3;
  question.placeholder = "research question";
  form.appendChild(question);
  const overridesFieldset = buildOverridesFieldset();
  form.appendChild(overridesFieldset);
  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "run";
  form.appendChild(submit);
  runPanel.appendChild(form);

  const status = el("p", "status", "idle");
  status.id = "run-status";
  runPanel.appendChild(status);
  const errorLine = el("p", "error");
  errorLine.id = "run-error";
  runPanel.appendChild(errorLine);
  const feed = el("div", "feed");
  feed.id = "feed";
  runPanel.appendChild(feed);

  // report panel
  const reportPanel = el("section", "panel");
  reportPanel.id = "report-panel";
  const reportView = el("div");
  reportView.id = "report";
  reportPanel.appendChild(reportView);
  panels.appendChild(reportPanel);

  // history panel
  const historyPanel = el("section", "panel");
  historyPanel.id = "history-panel";
  const searchForm = document.createElement("form");
  searchForm.id = "search-form";
  const searchInput = document.createElement("input");
  searchInput.type = "search";
  searchInput.name = "q";
  searchInput.placeholder = "search past reports";
  searchForm.appendChild(searchInput);
  const searchButton = document.createElement("button");
  searchButton.type = "submit";
  searchButton.textContent = "search";
  searchForm.appendChild(searchButton);
  historyPanel.appendChild(searchForm);
  const hits = el("div");
  hits.id = "hits";
  historyPanel.appendChild(hits);
  panels.appendChild(historyPanel);

  function setState(next: UiRunState): void {
    state = next;
    status.textContent = state.phase;
    runPanel.dataset.phase = state.phase;
    errorLine.textContent = state.errorMessage ?? "";
  }
  setState(state);

  async function runFlow(text: string): Promise<void> {
    setState(startRun(state));
    feed.textContent = "";
    const overrides = collectOverrides(overridesFieldset);
    try {
      for await (const event of client.research(text, overrides)) {
        setState(applyEvent(state, event));
        feed.appendChild(renderEventRow(event));
      }
      if (state.phase === "streaming") {
        setState(failRun(state, "connection lost before the run finished"));
        return;
      }
      if (state.phase === "done") {
        const last = state.events[state.events.length - 1];
        const reportId = String(last.data.report_id ?? "");
        const report = await client.getReport(reportId);
        setState(attachReport(state, report));
        renderReport(reportView, report);
      }
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      if (state.phase === "streaming") {
        setState(failRun(state, message));
      } else {
        errorLine.textContent = message;
      }
    }
  }

  const handle: AppHandle = {
    ready: Promise.resolve(),
    pendingRun: null,
    pendingSearch: null,
    getState: () => state,
    client,
  };

  handle.ready = (async () => {
    try {
      renderConfigBadges(badges, await client.getConfig());
    } catch {
      renderConfigBadges(badges, null);
    }
  })();

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (state.phase === "streaming") {
      return;
    }
    const text = question.value.trim();
    if (text === "") {
      errorLine.textContent = "enter a question first";
      return;
    }
    if (state.phase !== "idle") {
      setState(resetRun(state));
    }
    handle.pendingRun = runFlow(text);
  });

  async function openReport(reportId: string): Promise<void> {
    try {
      renderReport(reportView, await client.getReport(reportId));
    } catch (err) {
      reportView.textContent = err instanceof Error ? err.message : String(err);
    }
  }

  searchForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const query = searchInput.value.trim();
    if (query === "") {
      return;
    }
    handle.pendingSearch = (async () => {
      try {
        renderHits(hits, await client.searchReports(query), (id) => void openReport(id));
      } catch (err) {
        hits.textContent = "";
        hits.appendChild(el("p", "error", err instanceof Error ? err.message : String(err)));
      }
    })();
  });

  return handle;
}
