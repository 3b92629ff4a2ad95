/** Dashboard bootstrap: wires the API client, the polling store and the
 *  panels together. All engine mutations funnel through one MutationGate so
 *  at most one POST is in flight at a time. */

import { ApiError, ControlApi, type LabelValue } from "./api.js";
import { drawLossChart } from "./chart.js";
import {
  createQueryEditor,
  renderLabeling,
  renderPopulation,
  renderStatusBar,
} from "./panels.js";
import {
  InjectedTags,
  MutationGate,
  Poller,
  emptyView,
  refreshView,
  type RunView,
} from "./state.js";

const TOP_K = 15;

export interface AppOptions {
  api: ControlApi;
  root: HTMLElement;
  pollIntervalMs: number;
}

export interface App {
  poller: Poller;
  view(): RunView;
}

export function createApp(options: AppOptions): App {
  const { api, root } = options;
  const tags = new InjectedTags();
  const gate = new MutationGate();
  let view = emptyView();
  let labelNotice: string | null = null;

  root.textContent = "";
  const statusBar = document.createElement("header");
  const chartCanvas = document.createElement("canvas");
  chartCanvas.width = 900;
  chartCanvas.height = 260;
  chartCanvas.className = "loss-chart";
  const populationRoot = document.createElement("section");
  const labelingRoot = document.createElement("section");
  const editor = createQueryEditor((text) => submitInjection(text));
  root.append(statusBar, chartCanvas, populationRoot, editor.root, labelingRoot);

  function render(): void {
    renderStatusBar(statusBar, view, gate.busy, {
      pause: () => mutateAndRefresh(() => api.pause()),
      resume: () => mutateAndRefresh(() => api.resume()),
    });
    drawLossChart(chartCanvas, view.history);
    renderPopulation(populationRoot, view.population, tags, {
      copy: (query) => void navigator.clipboard?.writeText(query),
      edit: (query) => editor.setText(query),
    });
    renderLabeling(labelingRoot, view.pending, labelNotice, {
      label: (id, value) => submitLabel(id, value),
    });
  }

  const poller = new Poller(async () => {
    view = await refreshView(api, view, TOP_K);
    render();
  }, options.pollIntervalMs);

  function mutateAndRefresh(operation: () => Promise<unknown>): void {
    void gate
      .run(operation)
      .catch(() => undefined)
      .then(() => poller.runOnce());
  }

  function submitInjection(text: string): void {
    if (!text.trim()) return;
    void gate
      .run(() => api.inject([text]))
      .then((genomes) => {
        tags.mark(genomes);
        editor.showAccepted(genomes.length);
      })
      .catch((err) => editor.showError(err))
      .then(() => poller.runOnce());
  }

  function submitLabel(id: string, value: LabelValue): void {
    void gate
      .run(() => api.label(id, value))
      .then(() => {
        labelNotice = null;
      })
      .catch((err) => {
        // already labeled elsewhere: drop the row and say so
        if (err instanceof ApiError && err.status === 404) {
          labelNotice = `${id} was already labeled; removed from the queue`;
          view = { ...view, pending: view.pending.filter((d) => d.id !== id) };
        } else {
          labelNotice = `labeling failed: ${err instanceof Error ? err.message : err}`;
        }
      })
      .then(() => poller.runOnce());
  }

  function onKeydown(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "TEXTAREA" || target.tagName === "INPUT")) return;
    if (view.pending.length === 0) return;
    if (event.key === "r") submitLabel(view.pending[0].id, "relevant");
    else if (event.key === "i") submitLabel(view.pending[0].id, "irrelevant");
  }
  root.ownerDocument.addEventListener("keydown", onKeydown);

  return { poller, view: () => view };
}

export function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? "";
  const pollIntervalMs = Number(params.get("poll") ?? "2000") || 2000;
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const app = createApp({ api: new ControlApi(base), root, pollIntervalMs });
  app.poller.start();
}
