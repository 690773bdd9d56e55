/** Wire types for the /api/v1 endpoints. */

export type Point = [number, number];

export interface DeliveryResponse {
  destination: number;
  drop_point_mm: { x: number; y: number };
  clearance_mm: number;
  markers_detected: number;
  computed_at: string;
}

export interface DropzoneResponse {
  destination: number;
  revision: number;
}

export interface JobResponse {
  job_id: string;
  destination: number | null;
  created: boolean;
}

export interface JobStatus {
  id: string;
  phase: "queued" | "running" | "done" | "failed";
  destination: number | null;
  detail: string | null;
  result: {
    destination: number;
    target_mm: Point | null;
    placed_mm: Point | null;
    steps: number;
    timed_out: boolean;
  } | null;
}

export interface StateSnapshot {
  pose: { x: number; y: number; heading: number };
  state: string;
  steps: number;
  sim_time_s: number;
  carrying: boolean;
  object: Point | null;
  last_event: string | null;
  destination: number | null;
  revision: number;
  job: JobStatus | null;
}

export interface TrackNode {
  pos: Point;
  kind?: string;
  destination?: number;
}

export interface SceneDoc {
  scene_version: number;
  name: string;
  track: {
    stroke_mm: number;
    nodes: Record<string, TrackNode>;
    edges: [string, string][];
  };
  drop_zones: { destination: number; polygon: Point[] }[];
  lighting: { gain: number; noise_sigma: number; vignette: number; seed: number };
  overhead_camera: { image_size: [number, number]; world_to_px: number[][] };
  revision: number;
}

/** Error body shared by every non-2xx JSON response. */
export interface ApiErrorBody {
  code: string;
  detail?: unknown;
  destinations?: number[];
  markers_detected?: number;
  destination?: number;
  job_id?: string;
}
