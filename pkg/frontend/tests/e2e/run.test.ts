// @vitest-environment happy-dom
/** End-to-end: spawn a real interactive run (Python CLI), mount the actual
 *  dashboard against its control API, and drive it by clicking the rendered
 *  controls: inject -> resume -> top-k, draining 50 labels, pause/resume. */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { request } from "node:http";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ControlApi } from "../../src/api.js";
import { createApp, type App } from "../../src/main.js";

const PYTHON = process.env.PYTHON ?? "python3";
const PORT = 19000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;
const TARGET = "(t002 OR t005) AND (t003 OR t008)";

/** happy-dom's fetch enforces the same-origin policy, so the e2e talks to
 *  the loopback server through node:http with a Response-shaped wrapper. */
function nodeFetch(url: string, init?: RequestInit): Promise<Response> {
  const body = init?.body === undefined ? undefined : Buffer.from(String(init.body));
  return new Promise((resolve, reject) => {
    const req = request(
      url,
      {
        method: init?.method ?? "GET",
        headers: {
          ...((init?.headers as Record<string, string>) ?? {}),
          ...(body ? { "Content-Length": String(body.length) } : {}),
        },
      },
      (res) => {
        const chunks: Buffer[] = [];
        res.on("data", (chunk) => chunks.push(chunk));
        res.on("end", () => {
          const text = Buffer.concat(chunks).toString("utf-8");
          resolve({
            ok: (res.statusCode ?? 500) < 400,
            status: res.statusCode ?? 0,
            statusText: res.statusMessage ?? "",
            json: async () => JSON.parse(text || "{}"),
          } as unknown as Response);
        });
      },
    );
    req.on("error", reject);
    if (body) req.write(body);
    req.end();
  });
}

let proc: ChildProcess;
let procExit: Promise<number | null>;
let api: ControlApi;
let app: App;
let root: HTMLElement;

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

async function tickUntil(predicate: () => boolean, what: string, ms = 20000): Promise<void> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    await app.poller.runOnce();
    if (predicate()) return;
    await sleep(40);
  }
  throw new Error(`timed out waiting for ${what}`);
}

function click(role: string): void {
  const node = root.querySelector(`[data-role=${role}]`) as HTMLButtonElement | null;
  if (!node) throw new Error(`no control with role ${role}`);
  node.click();
}

function chipText(): string {
  return root.querySelector("[data-role=status-chip]")?.textContent ?? "";
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "qe-ui-e2e-"));
  const run = (args: string[]) => {
    const r = spawnSync(PYTHON, ["-m", "queryevolve.cli", ...args], { encoding: "utf-8" });
    if (r.status !== 0) throw new Error(`${args[0]} failed: ${r.stderr}`);
  };
  run(["synth", "--docs", "1200", "--vocab", "150", "--seed", "5",
       "--out", join(dir, "corpus.jsonl")]);
  run(["synth", "--docs", "1500", "--vocab", "150", "--seed", "6", "--unlabeled",
       "--id-prefix", "h", "--out", join(dir, "hidden.jsonl")]);
  writeFileSync(join(dir, "run.toml"), [
    'mode = "interactive"',
    `corpus = "${join(dir, "corpus.jsonl")}"`,
    `hidden_corpus = "${join(dir, "hidden.jsonl")}"`,
    "generations = 0",
    `checkpoint_dir = "${join(dir, "run")}"`,
    "",
    "[http]",
    `port = ${PORT}`,
    "",
    "[budget]",
    "total = 4",
    "",
    "[ga]",
    "population_size = 30",
    "rng_seed = 11",
    "fetch_every = 2",
    "",
  ].join("\n"));

  proc = spawn(PYTHON, ["-m", "queryevolve.cli", "run", "--config", join(dir, "run.toml")],
               { stdio: ["ignore", "inherit", "inherit"] });
  procExit = new Promise((resolve) => proc.on("exit", (code) => resolve(code)));

  api = new ControlApi(BASE, nodeFetch);
  const deadline = Date.now() + 30000;
  for (;;) {
    try {
      await api.status();
      break;
    } catch {
      if (Date.now() > deadline) throw new Error("run never came up");
      await sleep(100);
    }
  }

  root = document.createElement("div");
  document.body.appendChild(root);
  app = createApp({ api, root, pollIntervalMs: 150 });
}, 60000);

afterAll(async () => {
  try {
    await api.stop();
  } catch {
    // already down
  }
  const code = await Promise.race([procExit, sleep(15000).then(() => "timeout" as const)]);
  if (code === "timeout") {
    proc.kill("SIGKILL");
    throw new Error("run did not exit after /stop");
  }
  expect(code).toBe(0);
}, 30000);

describe("steering console against a live run", () => {
  it("renders a running view from the API alone", async () => {
    await tickUntil(() => chipText() === "running", "running chip");
    expect(root.textContent).toContain("generation");
    expect(root.querySelectorAll("[data-role=individual]").length).toBeGreaterThan(0);
  });

  it("pause and resume render within one poll of the server transition", async () => {
    click("pause");
    // the server acknowledges at a generation boundary; once its status reads
    // paused, the very next poll must render it
    const deadline = Date.now() + 10000;
    while ((await api.status()).status !== "paused") {
      if (Date.now() > deadline) throw new Error("server never paused");
      await sleep(25);
    }
    await app.poller.runOnce();
    expect(chipText()).toBe("paused");
    const pauseBtn = root.querySelector("[data-role=pause]") as HTMLButtonElement;
    expect(pauseBtn.disabled).toBe(true); // conflicting control disabled

    click("resume");
    const deadline2 = Date.now() + 10000;
    while ((await api.status()).status !== "running") {
      if (Date.now() > deadline2) throw new Error("server never resumed");
      await sleep(25);
    }
    await app.poller.runOnce();
    expect(chipText()).toBe("running");
  }, 30000);

  it("inject -> resume -> top-k round trip completes", async () => {
    click("pause");
    await tickUntil(() => chipText() === "paused", "paused chip");

    const textarea = root.querySelector("[data-role=editor-text]") as HTMLTextAreaElement;
    textarea.value = TARGET;
    click("inject");
    await tickUntil(
      () => (root.querySelector("[data-role=editor-notice]")?.textContent ?? "").includes("accepted"),
      "inject acknowledgement",
    );

    click("resume");
    // the planted target ranks first once evaluated, so the injected tag
    // must surface in the top-k panel
    await tickUntil(
      () => root.querySelector("[data-role=injected-tag]") !== null,
      "injected tag in population",
      30000,
    );
    const taggedRow = root.querySelector("[data-role=injected-tag]")!.closest("tr")!;
    expect(taggedRow.textContent).toContain("t002");
  }, 60000);

  it("bad injections surface the parser diagnostic at its byte offset", async () => {
    const textarea = root.querySelector("[data-role=editor-text]") as HTMLTextAreaElement;
    textarea.value = "(t002 AND";
    click("inject");
    await tickUntil(
      () => (root.querySelector("[data-role=editor-notice]")?.textContent ?? "").includes("rejected"),
      "inject rejection",
    );
    const caret = root.querySelector("pre.caret-line")!.textContent!;
    expect(caret.split("\n")[1]).toBe(" ".repeat(9) + "^");
  });

  it("drains the label queue for 50 documents with no lost updates", async () => {
    await tickUntil(() => app.view().pending.length >= 50, "50 pending labels", 30000);
    const before = app.view().status!;
    const beforeTotal = before.labeled_relevant + before.labeled_irrelevant;
    const beforePending = app.view().pending.length;

    const labeled: string[] = [];
    for (let i = 0; i < 50; i++) {
      const card = root.querySelector("[data-role=label-card]") as HTMLElement;
      const docId = card.dataset.docId!;
      if (i % 3 === 0) {
        // keyboard shortcut path
        document.dispatchEvent(new KeyboardEvent("keydown", { key: i % 2 ? "i" : "r", bubbles: true }));
      } else {
        click(i % 2 ? "label-irrelevant" : "label-relevant");
      }
      labeled.push(docId);
      await tickUntil(
        () => (root.querySelector("[data-role=label-card]") as HTMLElement | null)?.dataset.docId !== docId,
        `label ${i} acknowledged`,
      );
    }
    expect(new Set(labeled).size).toBe(50); // every click hit a fresh document

    await tickUntil(() => {
      const s = app.view().status!;
      return s.labeled_relevant + s.labeled_irrelevant === beforeTotal + 50;
    }, "labeled counts advanced by exactly 50");
    expect(app.view().pending.length).toBe(beforePending - 50);
  }, 120000);
});
