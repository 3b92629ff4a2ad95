/** DOM rendering for the dashboard panels. Render functions rebuild their
 *  panel from the current view; the query editor is long-lived so polling
 *  never clobbers what the operator is typing. */

import type { PendingDoc, PopulationEntry } from "./api.js";
import { ApiError } from "./api.js";
import { controlState, type InjectedTags, type RunView } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function fmt(value: number | null, digits = 4): string {
  if (value === null || !Number.isFinite(value)) return "—";
  return value.toFixed(digits);
}

// ---------------------------------------------------------------------------
// status bar + run controls

export interface RunControlHandlers {
  pause(): void;
  resume(): void;
}

export function renderStatusBar(
  root: HTMLElement,
  view: RunView,
  busy: boolean,
  handlers: RunControlHandlers,
): void {
  root.textContent = "";
  const status = view.status?.status ?? null;

  const chip = el("span", `chip chip-${status ?? "unknown"}`, status ?? "connecting");
  chip.dataset.role = "status-chip";
  root.appendChild(chip);

  const facts = el("span", "facts");
  if (view.status) {
    const s = view.status;
    facts.textContent =
      `generation ${s.generation} · ${s.corpus_size} docs · ` +
      `${s.labeled_relevant}+ / ${s.labeled_irrelevant}− labeled · ` +
      `tokens ${s.budget.spent}/${s.budget.total}`;
  }
  root.appendChild(facts);

  const controls = controlState(status);
  const pauseBtn = el("button", "", "pause");
  pauseBtn.dataset.role = "pause";
  pauseBtn.disabled = busy || !controls.canPause;
  pauseBtn.addEventListener("click", () => handlers.pause());
  const resumeBtn = el("button", "", "resume");
  resumeBtn.dataset.role = "resume";
  resumeBtn.disabled = busy || !controls.canResume;
  resumeBtn.addEventListener("click", () => handlers.resume());
  root.append(pauseBtn, resumeBtn);

  if (view.connectionError) {
    const banner = el("div", "banner", `API unreachable, retrying… (${view.connectionError})`);
    banner.dataset.role = "error-banner";
    root.appendChild(banner);
  }
}

// ---------------------------------------------------------------------------
// population panel

export interface PopulationHandlers {
  copy(query: string): void;
  edit(query: string): void;
}

export function renderPopulation(
  root: HTMLElement,
  population: PopulationEntry[],
  tags: InjectedTags,
  handlers: PopulationHandlers,
): void {
  root.textContent = "";
  root.appendChild(el("h2", "", "population"));
  if (population.length === 0) {
    root.appendChild(el("p", "empty", "population not evaluated yet"));
    return;
  }
  const table = el("table", "population");
  const head = el("tr");
  for (const title of ["#", "loss", "f_p", "f_n", "len", "query", ""]) {
    head.appendChild(el("th", "", title));
  }
  table.appendChild(head);

  population.forEach((entry, rank) => {
    const row = el("tr");
    row.dataset.role = "individual";
    row.appendChild(el("td", "", String(rank + 1)));
    row.appendChild(el("td", "num", fmt(entry.loss, 6)));
    row.appendChild(el("td", "num", fmt(entry.f_p)));
    row.appendChild(el("td", "num", fmt(entry.f_n)));
    row.appendChild(el("td", "num", String(entry.length)));

    const queryCell = el("td", "query");
    const text = entry.query ?? "(oversized)";
    queryCell.appendChild(el("code", "", text));
    if (tags.has(entry.genome)) {
      const tag = el("span", "tag", "injected");
      tag.dataset.role = "injected-tag";
      queryCell.appendChild(tag);
    }
    row.appendChild(queryCell);

    const actions = el("td", "actions");
    if (entry.query !== null) {
      const query = entry.query;
      const copyBtn = el("button", "small", "copy");
      copyBtn.dataset.role = "copy";
      copyBtn.addEventListener("click", () => handlers.copy(query));
      const editBtn = el("button", "small", "edit");
      editBtn.dataset.role = "edit";
      editBtn.addEventListener("click", () => handlers.edit(query));
      actions.append(copyBtn, editBtn);
    }
    row.appendChild(actions);
    table.appendChild(row);
  });
  root.appendChild(table);
}

// ---------------------------------------------------------------------------
// query editor (long-lived)

export interface QueryEditor {
  readonly root: HTMLElement;
  setText(text: string): void;
  getText(): string;
  showError(err: unknown): void;
  showAccepted(count: number): void;
  clearNotice(): void;
}

export function createQueryEditor(onSubmit: (text: string) => void): QueryEditor {
  const root = el("section", "editor");
  root.appendChild(el("h2", "", "edit & inject"));
  const textarea = el("textarea");
  textarea.rows = 3;
  textarea.placeholder = 'e.g. (crash OR wreck) AND (NOT movie)';
  textarea.dataset.role = "editor-text";
  const submit = el("button", "", "inject into population");
  submit.dataset.role = "inject";
  const notice = el("div", "notice");
  notice.dataset.role = "editor-notice";
  const caretLine = el("pre", "caret-line");
  submit.addEventListener("click", () => onSubmit(textarea.value));
  root.append(textarea, submit, notice, caretLine);

  return {
    root,
    setText(text) {
      textarea.value = text;
      notice.textContent = "";
      caretLine.textContent = "";
    },
    getText: () => textarea.value,
    showError(err) {
      caretLine.textContent = "";
      if (err instanceof ApiError && err.offset !== undefined) {
        notice.textContent = `rejected: ${err.message}`;
        notice.className = "notice error";
        // point at the reported byte offset (ASCII queries: byte == char)
        caretLine.textContent = textarea.value + "\n" + " ".repeat(err.offset) + "^";
      } else {
        notice.textContent = `rejected: ${err instanceof Error ? err.message : String(err)}`;
        notice.className = "notice error";
      }
    },
    showAccepted(count) {
      notice.className = "notice ok";
      notice.textContent = `accepted: ${count} quer${count === 1 ? "y" : "ies"} queued for the next generation`;
      caretLine.textContent = "";
    },
    clearNotice() {
      notice.textContent = "";
      caretLine.textContent = "";
    },
  };
}

// ---------------------------------------------------------------------------
// labeling panel

export interface LabelingHandlers {
  label(id: string, value: "relevant" | "irrelevant"): void;
}

export function renderLabeling(
  root: HTMLElement,
  pending: PendingDoc[],
  notice: string | null,
  handlers: LabelingHandlers,
): void {
  root.textContent = "";
  root.appendChild(el("h2", "", `labeling queue (${pending.length})`));
  if (notice) {
    const note = el("p", "notice", notice);
    note.dataset.role = "label-notice";
    root.appendChild(note);
  }
  if (pending.length === 0) {
    const empty = el("p", "empty", "nothing waiting for a label");
    empty.dataset.role = "label-empty";
    root.appendChild(empty);
    return;
  }
  const doc = pending[0];
  const card = el("div", "doc-card");
  card.dataset.role = "label-card";
  card.dataset.docId = doc.id;
  card.appendChild(el("div", "doc-id", doc.id));
  card.appendChild(el("p", "doc-text", doc.text));
  const relevant = el("button", "label-btn relevant", "relevant (r)");
  relevant.dataset.role = "label-relevant";
  relevant.addEventListener("click", () => handlers.label(doc.id, "relevant"));
  const irrelevant = el("button", "label-btn irrelevant", "irrelevant (i)");
  irrelevant.dataset.role = "label-irrelevant";
  irrelevant.addEventListener("click", () => handlers.label(doc.id, "irrelevant"));
  card.append(relevant, irrelevant);
  root.appendChild(card);
}
