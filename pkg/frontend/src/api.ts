/** Typed client for the annotation service.
 *
 * Two scheduling rules, both enforced here rather than in UI code:
 * mutating requests are dispatched strictly in call order (each waits for
 * the previous one to settle, success or failure), and starting a new
 * preview or metrics fetch aborts the one still in flight, so a stale
 * response can never overwrite a newer one.
 */

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export interface MetricsDoc {
  md_img: number;
  md_vid: number;
  frame_consistency: number;
  avg_flow_magnitude: number;
  excluded_points: number[];
}

export interface ConditionDoc {
  length: number;
  height: number;
  width: number;
  files: Record<string, string>; // name -> base64
}

export interface PreviewDoc {
  frames: string[]; // base64 PNGs, playback order
  length: number;
  height: number;
  width: number;
}

export interface SessionConfig {
  k?: number;
  length?: number;
  threshold?: number;
  power?: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class Client {
  sessionId: string | null = null;
  private chain: Promise<unknown> = Promise.resolve();
  private readAbort: AbortController | null = null;

  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(method: string, path: string, init: RequestInit = {}): Promise<T> {
    const resp = await this.fetchFn(this.base + path, { method, ...init });
    if (!resp.ok) {
      let detail = `${resp.status} ${resp.statusText}`;
      try {
        const body = (await resp.json()) as { detail?: unknown };
        if (typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(resp.status, detail);
    }
    if (resp.status === 204) return undefined as T;
    return (await resp.json()) as T;
  }

  /** Serialize a mutation behind every previously queued one. */
  private mutate<T>(fn: () => Promise<T>): Promise<T> {
    const next = this.chain.then(fn, fn);
    this.chain = next.catch(() => undefined); // a failed write must not jam the queue
    return next;
  }

  private sid(): string {
    if (this.sessionId === null) throw new ApiError(0, "no active session");
    return this.sessionId;
  }

  createSession(): Promise<string> {
    return this.mutate(async () => {
      const doc = await this.request<{ id: string }>("POST", "/session");
      this.sessionId = doc.id;
      return doc.id;
    });
  }

  uploadImage(png: Uint8Array): Promise<void> {
    return this.mutate(() =>
      this.request("POST", `/session/${this.sid()}/image`, {
        body: png as BodyInit,
        headers: { "content-type": "image/png" },
      }),
    );
  }

  putMaskRuns(doc: unknown): Promise<void> {
    return this.mutate(() =>
      this.request("PUT", `/session/${this.sid()}/mask`, {
        body: JSON.stringify(doc),
        headers: { "content-type": "application/json" },
      }),
    );
  }

  putMaskPng(png: Uint8Array): Promise<void> {
    return this.mutate(() =>
      this.request("PUT", `/session/${this.sid()}/mask`, {
        body: png as BodyInit,
        headers: { "content-type": "image/png" },
      }),
    );
  }

  putStrokes(doc: unknown): Promise<void> {
    return this.mutate(() =>
      this.request("PUT", `/session/${this.sid()}/strokes`, {
        body: JSON.stringify(doc),
        headers: { "content-type": "application/json" },
      }),
    );
  }

  putConfig(config: SessionConfig): Promise<void> {
    return this.mutate(() =>
      this.request("PUT", `/session/${this.sid()}/config`, {
        body: JSON.stringify(config),
        headers: { "content-type": "application/json" },
      }),
    );
  }

  deleteSession(): Promise<void> {
    return this.mutate(async () => {
      await this.request("DELETE", `/session/${this.sid()}`);
      this.sessionId = null;
    });
  }

  /** Abort whatever preview/metrics read is in flight and own the slot. */
  private freshReadSignal(): AbortSignal {
    this.readAbort?.abort();
    this.readAbort = new AbortController();
    return this.readAbort.signal;
  }

  getCondition(): Promise<ConditionDoc> {
    return this.request("GET", `/session/${this.sid()}/condition`);
  }

  getPreview(): Promise<PreviewDoc> {
    return this.request("GET", `/session/${this.sid()}/preview`, { signal: this.freshReadSignal() });
  }

  getMetrics(): Promise<MetricsDoc> {
    return this.request("GET", `/session/${this.sid()}/metrics`, { signal: this.freshReadSignal() });
  }

  /** Resolves when every queued mutation has settled. */
  flush(): Promise<void> {
    return this.chain.then(() => undefined);
  }
}
