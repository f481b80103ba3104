/** Typed client for the studio service JSON API. Every embedding and image
 * originates server-side; this module only moves JSON and bytes. */

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface HealthInfo {
  status: string;
  base_model_id: string;
  checkpoint_id: string;
  z_dim: number;
  step: number;
}

export interface IdentityCard {
  id: string;
  label: string;
  created_at: string;
  base_model_id: string;
  checkpoint_id: string;
  latent: number[];
  latent_seed: number | null;
  preview_job: string | null;
  preview_image?: string | null;
  preview_status?: JobStatus;
}

export interface RenderJob {
  id: string;
  kind: "preview" | "render";
  identity: string;
  prompt: string;
  seed: number;
  status: JobStatus;
  image: string | null;
  error: string | null;
  guidance?: number;
  steps?: number;
}

export interface RenderTicket {
  job: string;
  seed: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export class StudioApi {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (resp.status === 204) {
      return undefined as T;
    }
    const data = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(resp.status, (data as { detail?: string }).detail ?? resp.statusText);
    }
    return data as T;
  }

  health(): Promise<HealthInfo> {
    return this.request("GET", "/health");
  }

  sampleIdentity(opts: { label?: string; latent?: number[] } = {}): Promise<{ id: string; preview_job: string }> {
    return this.request("POST", "/identities/sample", opts);
  }

  interpolate(a: string, b: string, t: number, label?: string): Promise<{ id: string }> {
    return this.request("POST", "/identities/interpolate", { a, b, t, label });
  }

  listIdentities(): Promise<IdentityCard[]> {
    return this.request<{ identities: IdentityCard[] }>("GET", "/identities").then((d) => d.identities);
  }

  getIdentity(id: string): Promise<IdentityCard> {
    return this.request("GET", `/identities/${id}`);
  }

  deleteIdentity(id: string): Promise<void> {
    return this.request("DELETE", `/identities/${id}`);
  }

  requestRender(opts: {
    identity: string;
    prompt: string;
    seed?: number;
    guidance?: number;
    steps?: number;
  }): Promise<RenderTicket> {
    return this.request("POST", "/render", opts);
  }

  getJob(id: string): Promise<RenderJob> {
    return this.request("GET", `/jobs/${id}`);
  }

  listJobs(identity?: string): Promise<RenderJob[]> {
    const query = identity === undefined ? "" : `?identity=${encodeURIComponent(identity)}`;
    return this.request<{ jobs: RenderJob[] }>("GET", `/jobs${query}`).then((d) => d.jobs);
  }

  /** Absolute URL for a server image path such as "/images/job-0001.png". */
  imageUrl(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async imageBytes(path: string): Promise<ArrayBuffer> {
    const resp = await fetch(this.imageUrl(path));
    if (!resp.ok) {
      throw new ApiError(resp.status, `no image at ${path}`);
    }
    return resp.arrayBuffer();
  }

  /** Poll until a job leaves the queue; jobs are seconds-long, so polling
   * beats a streaming channel here. */
  async pollJob(id: string, opts: { intervalMs?: number; timeoutMs?: number } = {}): Promise<RenderJob> {
    const interval = opts.intervalMs ?? 250;
    const deadline = Date.now() + (opts.timeoutMs ?? 30_000);
    for (;;) {
      const job = await this.getJob(id);
      if (job.status === "done" || job.status === "failed") {
        return job;
      }
      if (Date.now() > deadline) {
        throw new ApiError(408, `job ${id} still ${job.status} after timeout`);
      }
      await sleep(interval);
    }
  }
}
