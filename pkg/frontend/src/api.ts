// Thin client for the /v1 API. Every error ends up as an ApiError carrying
// the server's error envelope, so callers can branch on `code` instead of
// scraping message strings.

import {
  AnalysisConfigBody,
  BlocksCollection,
  DatasetHandle,
  DatasetKind,
  ErrorEnvelope,
  GridPayload,
  JobEnvelope,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: unknown;

  constructor(status: number, envelope: ErrorEnvelope) {
    super(envelope.message);
    this.name = "ApiError";
    this.status = status;
    this.code = envelope.code;
    this.detail = envelope.detail;
  }
}

export interface PollOptions {
  initialDelayMs?: number;
  factor?: number;
  maxDelayMs?: number;
  timeoutMs?: number;
  onTick?: (job: JobEnvelope, nextDelayMs: number) => void;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class Client {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: typeof fetch = fetch.bind(globalThis),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchImpl(this.base + path, init);
    if (res.ok) return res;
    let envelope: ErrorEnvelope;
    try {
      const body = await res.json();
      if (typeof body?.code === "string" && typeof body?.message === "string") {
        envelope = body as ErrorEnvelope;
      } else {
        envelope = { code: `http_${res.status}`, message: JSON.stringify(body), detail: null };
      }
    } catch {
      envelope = { code: `http_${res.status}`, message: res.statusText, detail: null };
    }
    throw new ApiError(res.status, envelope);
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    return (await this.request(path, init)).json() as Promise<T>;
  }

  async uploadDataset(kind: DatasetKind, file: Blob, name: string): Promise<DatasetHandle> {
    const form = new FormData();
    form.append("kind", kind);
    form.append("file", file, name);
    return this.json<DatasetHandle>("/v1/datasets", { method: "POST", body: form });
  }

  async listDatasets(): Promise<DatasetHandle[]> {
    const body = await this.json<{ datasets: DatasetHandle[] }>("/v1/datasets");
    return body.datasets;
  }

  async submitAnalysis(
    config: AnalysisConfigBody,
    datasets: { dem: string; soil: string; boundary: string; yield: string[] },
  ): Promise<{ id: string; state: string }> {
    return this.json("/v1/analyses", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ config, datasets }),
    });
  }

  async getAnalysis(id: string): Promise<JobEnvelope> {
    return this.json<JobEnvelope>(`/v1/analyses/${id}`);
  }

  async getBlocks(id: string): Promise<BlocksCollection> {
    return this.json<BlocksCollection>(`/v1/analyses/${id}/blocks`);
  }

  async getGrid(id: string): Promise<GridPayload> {
    return this.json<GridPayload>(`/v1/grids/${id}`);
  }

  async health(): Promise<{ status: string; version: string }> {
    return this.json("/v1/health");
  }

  // poll until the job settles, backing off geometrically between probes
  async pollAnalysis(id: string, options: PollOptions = {}): Promise<JobEnvelope> {
    const initial = options.initialDelayMs ?? 250;
    const factor = options.factor ?? 1.6;
    const maxDelay = options.maxDelayMs ?? 4000;
    const timeout = options.timeoutMs ?? 120_000;
    const sleep = options.sleep ?? defaultSleep;

    let delay = initial;
    let waited = 0;
    for (;;) {
      const job = await this.getAnalysis(id);
      if (job.state === "done" || job.state === "failed") return job;
      if (waited >= timeout) {
        throw new ApiError(0, {
          code: "poll_timeout",
          message: `analysis ${id} still ${job.state} after ${timeout} ms`,
          detail: null,
        });
      }
      options.onTick?.(job, delay);
      await sleep(delay);
      waited += delay;
      delay = Math.min(delay * factor, maxDelay);
    }
  }
}
