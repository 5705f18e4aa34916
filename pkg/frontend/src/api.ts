/**
 * Typed client for the label server.
 *
 * Every labeling decision that involves geometry (which pixels belong to a
 * clicked object) is answered by the server, never computed here, so labels
 * saved from the browser match what the batch pipeline would produce.
 */

export interface SensorInfo {
  w: number;
  h: number;
  beta_up: number;
  beta_fov: number;
  rate_hz: number;
}

export interface Meta {
  frames: number;
  sensor: SensorInfo;
  timestamps: number[];
  grow_eps: number;
}

export interface LabelLine {
  t: number;
  idx: number[];
}

export interface GrowResult {
  indices: number[];
  truncated: boolean;
}

/** Non-2xx reply. `status` carries the HTTP code (422 = clicked an empty pixel). */
export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function raise(res: Response): Promise<never> {
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body, keep the status line
  }
  throw new ApiError(res.status, message);
}

export class Client {
  constructor(
    public readonly base: string,
    private fetchFn: typeof fetch = fetch,
  ) {
    this.base = base.replace(/\/+$/, "");
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.base + path, init);
    if (!res.ok) await raise(res);
    return (await res.json()) as T;
  }

  meta(): Promise<Meta> {
    return this.json<Meta>("/meta");
  }

  label(frame: number): Promise<LabelLine> {
    return this.json<LabelLine>(`/labels/${frame}`);
  }

  async putLabel(frame: number, t: number, idx: number[]): Promise<number> {
    const out = await this.json<{ ok: boolean; count: number }>(
      `/labels/${frame}`,
      {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ t, idx }),
      },
    );
    return out.count;
  }

  grow(frame: number, u: number, v: number, eps?: number): Promise<GrowResult> {
    const body: { u: number; v: number; eps?: number } = { u, v };
    if (eps !== undefined) body.eps = eps;
    return this.json<GrowResult>(`/frames/${frame}/grow`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async foreground(frame: number): Promise<number[]> {
    const out = await this.json<{ indices: number[] }>(
      `/frames/${frame}/foreground`,
    );
    return out.indices;
  }

  intensityUrl(frame: number): string {
    return `${this.base}/frames/${frame}/intensity.png`;
  }

  /** Range grid as float32 row-major (v * w + u), little-endian on the wire. */
  async range(frame: number): Promise<Float32Array> {
    const res = await this.fetchFn(`${this.base}/frames/${frame}/range.bin`);
    if (!res.ok) await raise(res);
    return new Float32Array(await res.arrayBuffer());
  }
}
