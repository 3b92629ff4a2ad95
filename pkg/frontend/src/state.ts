/** Client-side view state. The engine is the single source of truth: this
 *  store only caches the latest API responses plus per-session annotations
 *  (which genomes the operator injected), so reloading the page reproduces
 *  the same view from the API alone. */

import type {
  ControlApi,
  Metrics,
  PendingDoc,
  PopulationEntry,
  RunStatus,
  StatusResponse,
} from "./api.js";

export interface RunView {
  status: StatusResponse | null;
  history: Metrics[];
  population: PopulationEntry[];
  pending: PendingDoc[];
  /** banner text when the API is unreachable; null when healthy */
  connectionError: string | null;
}

export function emptyView(): RunView {
  return { status: null, history: [], population: [], pending: [], connectionError: null };
}

export function genomeKey(genome: number[]): string {
  return genome.join(",");
}

/** Remembers which genomes this session injected so the population panel can
 *  tag them when they show up. */
export class InjectedTags {
  private readonly keys = new Set<string>();

  mark(genomes: number[][]): void {
    for (const genome of genomes) {
      this.keys.add(genomeKey(genome));
    }
  }

  has(genome: number[]): boolean {
    return this.keys.has(genomeKey(genome));
  }
}

/** Serializes mutating requests: at most one in flight, strictly in order. */
export class MutationGate {
  private chain: Promise<unknown> = Promise.resolve();
  private inFlight = 0;

  get busy(): boolean {
    return this.inFlight > 0;
  }

  run<T>(operation: () => Promise<T>): Promise<T> {
    const next = this.chain.then(async () => {
      this.inFlight += 1;
      try {
        return await operation();
      } finally {
        this.inFlight -= 1;
      }
    });
    this.chain = next.catch(() => undefined);
    return next;
  }
}

export interface ControlAvailability {
  canPause: boolean;
  canResume: boolean;
}

/** Conflicting transitions are disabled, not error-prone. */
export function controlState(status: RunStatus | null): ControlAvailability {
  return {
    canPause: status === "running",
    canResume: status === "paused",
  };
}

/** Periodic poll driver; a slow tick is never overlapped by the next one. */
export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private ticking = false;

  constructor(
    private readonly tick: () => Promise<void>,
    readonly intervalMs: number,
  ) {}

  async runOnce(): Promise<void> {
    if (this.ticking) return;
    this.ticking = true;
    try {
      await this.tick();
    } finally {
      this.ticking = false;
    }
  }

  start(): void {
    if (this.timer !== null) return;
    void this.runOnce();
    this.timer = setInterval(() => void this.runOnce(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

/** One full refresh of the view from the control API. */
export async function refreshView(
  api: ControlApi,
  view: RunView,
  topK: number,
): Promise<RunView> {
  try {
    const [status, history, population, pending] = await Promise.all([
      api.status(),
      api.history(),
      api.population(topK),
      api.pendingLabels(),
    ]);
    return { status, history, population, pending, connectionError: null };
  } catch (err) {
    return { ...view, connectionError: String(err instanceof Error ? err.message : err) };
  }
}
