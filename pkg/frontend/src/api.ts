/** Typed client for the six /api/v1 endpoints. */

import type {
  ApiErrorBody,
  DeliveryResponse,
  DropzoneResponse,
  JobResponse,
  Point,
  SceneDoc,
  StateSnapshot,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody,
  ) {
    super(`${body.code} (HTTP ${status})`);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ConsoleApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  frameUrl(): string {
    // cache-busted so the <img> refreshes with each poll tick
    return `${this.baseUrl}/api/v1/frame?t=${Date.now()}`;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await resp.json();
    if (!resp.ok) throw new ApiError(resp.status, body as ApiErrorBody);
    return body as T;
  }

  getDelivery(): Promise<DeliveryResponse> {
    return this.request("/api/v1/delivery");
  }

  getState(): Promise<StateSnapshot> {
    return this.request("/api/v1/state");
  }

  getScene(): Promise<SceneDoc> {
    return this.request("/api/v1/scene");
  }

  postDropzone(destination: number, polygonMm: Point[]): Promise<DropzoneResponse> {
    return this.request("/api/v1/dropzone", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ destination, polygon_mm: polygonMm }),
    });
  }

  postJob(idempotencyKey: string, destination?: number): Promise<JobResponse> {
    const payload: Record<string, unknown> = { idempotency_key: idempotencyKey };
    if (destination !== undefined) payload.destination = destination;
    return this.request("/api/v1/job", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }
}
