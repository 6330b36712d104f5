/**
 * HTTP client for the synthesis service, plus a debounced preview scheduler.
 *
 * Requests that would be rejected by the server with 400/422 are caught
 * client-side first (same rules, same general wording) so a user painting on
 * a disconnected canvas still gets actionable feedback.
 */

import type { ClassesInfo, ConditionKind, SynthesizeResponse } from "./types.js";
import { bytesToBase64 } from "./png.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export interface SynthesizeRequest {
  kind: ConditionKind;
  maskPng: Uint8Array;
  styleSeed: number;
}

/** Mirrors the service's validation so failures surface without a round trip. */
export function validateRaster(raster: Uint8Array, size: number, info: ClassesInfo): void {
  if (size !== info.mask_size) {
    throw new ApiError(422, `mask must be ${info.mask_size}x${info.mask_size}, got ${size}x${size}`);
  }
  const maxLabel = info.labels.length - 1;
  for (let i = 0; i < raster.length; i++) {
    if (raster[i] > maxLabel) {
      throw new ApiError(422, `label ${raster[i]} out of range [0, ${maxLabel}]`);
    }
  }
}

export class SynthClient {
  constructor(private readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}/v1${path}`;
  }

  async getHealth(): Promise<{ status: string }> {
    const resp = await fetch(this.url("/health"));
    if (!resp.ok) throw new ApiError(resp.status, `service not ready (${resp.status})`);
    return resp.json();
  }

  async getClasses(): Promise<ClassesInfo> {
    const resp = await fetch(this.url("/classes"));
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return resp.json();
  }

  async synthesize(req: SynthesizeRequest, signal?: AbortSignal): Promise<SynthesizeResponse> {
    const resp = await fetch(this.url("/synthesize"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        mask: bytesToBase64(req.maskPng),
        kind: req.kind,
        style_seed: req.styleSeed,
      }),
      signal,
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return resp.json();
  }
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body.detail ?? body);
  } catch {
    return `request failed with status ${resp.status}`;
  }
}

type PreviewResult =
  | { ok: true; response: SynthesizeResponse }
  | { ok: false; error: Error };

/**
 * Debounces preview requests: each schedule() resets a 300 ms timer, and at
 * most one request is in flight — a newer schedule aborts the older fetch.
 * Stale results (aborted or superseded) never reach the callback.
 */
export class PreviewScheduler {
  static readonly DEBOUNCE_MS = 300;

  private timer: ReturnType<typeof setTimeout> | null = null;
  private inflight: AbortController | null = null;
  private generation = 0;

  constructor(
    private readonly client: SynthClient,
    private readonly onResult: (result: PreviewResult) => void,
  ) {}

  schedule(req: SynthesizeRequest): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire(req);
    }, PreviewScheduler.DEBOUNCE_MS);
  }

  private async fire(req: SynthesizeRequest): Promise<void> {
    if (this.inflight) this.inflight.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const gen = ++this.generation;
    try {
      const response = await this.client.synthesize(req, controller.signal);
      if (gen === this.generation && !controller.signal.aborted) {
        this.onResult({ ok: true, response });
      }
    } catch (err) {
      if (controller.signal.aborted) return; // superseded, stay quiet
      if (gen === this.generation) {
        this.onResult({ ok: false, error: err instanceof Error ? err : new Error(String(err)) });
      }
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.inflight) {
      this.inflight.abort();
      this.inflight = null;
    }
  }
}
