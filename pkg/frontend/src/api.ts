/** Typed client for the run's control API. Every mutation the UI can make
 *  maps to exactly one endpoint here. */

export type RunStatus = "running" | "paused" | "stopped";

export interface BudgetInfo {
  total: number;
  spent: number;
}

export interface Metrics {
  generation: number;
  best_loss: number;
  median_loss: number;
  best_f_p: number;
  best_f_n: number;
  best_length: number;
  length_min: number;
  length_median: number;
  length_max: number;
  tokens_spent: number;
  corpus_size: number;
  labeled_relevant: number;
  labeled_irrelevant: number;
  best_query: string;
  best_query_json: string;
}

export interface StatusResponse {
  status: RunStatus;
  generation: number;
  corpus_size: number;
  labeled_relevant: number;
  labeled_irrelevant: number;
  pending_labels: number;
  budget: BudgetInfo;
  metrics: Metrics | null;
}

export interface PopulationEntry {
  loss: number | null;
  length: number;
  genome: number[];
  query: string | null;
  f_p: number | null;
  f_n: number | null;
}

export interface PendingDoc {
  id: string;
  text: string;
}

export type LabelValue = "relevant" | "irrelevant";

/** API failure; `offset` carries the parser's byte offset on 400s. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly offset?: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ControlApi {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly base: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `API unreachable: ${String(err)}`);
    }
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const message = typeof body.error === "string" ? body.error : response.statusText;
      const offset = typeof body.offset === "number" ? body.offset : undefined;
      throw new ApiError(response.status, message, offset);
    }
    return body as T;
  }

  private post<T>(path: string, payload?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
  }

  status(): Promise<StatusResponse> {
    return this.request<StatusResponse>("/status");
  }

  async population(top: number): Promise<PopulationEntry[]> {
    const body = await this.request<{ population: PopulationEntry[] }>(
      `/population?top=${top}`,
    );
    return body.population;
  }

  async history(): Promise<Metrics[]> {
    const body = await this.request<{ generations: Metrics[] }>("/history");
    return body.generations;
  }

  async pendingLabels(): Promise<PendingDoc[]> {
    const body = await this.request<{ pending: PendingDoc[] }>("/labels/pending");
    return body.pending;
  }

  pause(): Promise<void> {
    return this.post("/pause");
  }

  resume(): Promise<void> {
    return this.post("/resume");
  }

  stop(): Promise<void> {
    return this.post("/stop");
  }

  /** Returns the queued genomes, one per injected query string. */
  async inject(queries: string[]): Promise<number[][]> {
    const body = await this.post<{ queued: number[][] }>("/inject", { queries });
    return body.queued;
  }

  label(id: string, label: LabelValue): Promise<void> {
    return this.post("/labels", { id, label });
  }
}
