/** Operator console state machine (DOM-free, driven by app.ts).
 *
 * Every displayed drop point comes verbatim from the server payload; the
 * console does no geometry of record beyond input snapping and client-side
 * pre-validation of sketches.
 */

import { ApiError, ConsoleApi } from "./api.js";
import { commonDestination, snapToMm, validateZone } from "./geometry.js";
import type { DeliveryResponse, Point, StateSnapshot } from "./types.js";

export interface DropPointDisplay {
  destination: number;
  x: number;
  y: number;
  clearance_mm: number;
  markers_detected: number;
  computed_at: string;
}

/** The on-screen drop point is the API payload, field for field. */
export function displayDropPoint(d: DeliveryResponse): DropPointDisplay {
  return {
    destination: d.destination,
    x: d.drop_point_mm.x,
    y: d.drop_point_mm.y,
    clearance_mm: d.clearance_mm,
    markers_detected: d.markers_detected,
    computed_at: d.computed_at,
  };
}

export interface ConsoleState {
  connected: boolean;
  drawing: Point[];
  drawError: string | null;
  delivery: DeliveryResponse | null;
  deliveryError: string | null;
  ambiguous: number[] | null;
  chosenDestination: number | null;
  dispatchDisabled: boolean;
  busyJobId: string | null;
  jobId: string | null;
  jobPhase: string | null;
  phaseHistory: string[];
  placement: Point | null;
  snapshot: StateSnapshot | null;
}

export const POLL_INTERVAL_MS = 200; // 5 Hz

export class ConsoleController {
  readonly state: ConsoleState = {
    connected: false,
    drawing: [],
    drawError: null,
    delivery: null,
    deliveryError: null,
    ambiguous: null,
    chosenDestination: null,
    dispatchDisabled: false,
    busyJobId: null,
    jobId: null,
    jobPhase: null,
    phaseHistory: [],
    placement: null,
    snapshot: null,
  };

  constructor(
    private readonly api: ConsoleApi,
    private readonly makeKey: () => string = () =>
      `op-${Date.now()}-${Math.random().toString(36).slice(2, 10)}`,
  ) {}

  // -- zone drawing ----------------------------------------------------

  addVertex(worldMm: Point): void {
    this.state.drawing.push(snapToMm(worldMm));
    this.state.drawError = null;
  }

  undoVertex(): void {
    this.state.drawing.pop();
  }

  clearDrawing(): void {
    this.state.drawing = [];
    this.state.drawError = null;
  }

  /** Validate the sketch with the server's rules, then POST it. */
  async submitZone(): Promise<boolean> {
    const poly = this.state.drawing;
    const destination = commonDestination(poly);
    if (destination === null) {
      this.state.drawError = "all vertices must lie inside one destination square";
      return false;
    }
    const verdict = validateZone(destination, poly);
    if (verdict !== null) {
      this.state.drawError = verdict;
      return false;
    }
    try {
      await this.api.postDropzone(destination, poly);
    } catch (err) {
      this.state.drawError = describeError(err);
      return false;
    }
    this.state.drawing = [];
    this.state.drawError = null;
    await this.refreshDelivery();
    return true;
  }

  // -- delivery / ambiguity ---------------------------------------------

  async refreshDelivery(): Promise<void> {
    try {
      this.state.delivery = await this.api.getDelivery();
      this.state.deliveryError = null;
      this.state.ambiguous = null;
    } catch (err) {
      this.state.delivery = null;
      if (err instanceof ApiError && err.body.code === "AMBIGUOUS") {
        this.state.ambiguous = err.body.destinations ?? [];
        this.state.deliveryError = null;
      } else {
        this.state.ambiguous = null;
        this.state.deliveryError = describeError(err);
      }
    }
  }

  /** Operator resolves ambiguity; the choice rides along as a job override. */
  chooseDestination(destination: number): void {
    this.state.chosenDestination = destination;
  }

  // -- dispatch and live monitoring --------------------------------------

  async dispatch(): Promise<boolean> {
    const override =
      this.state.chosenDestination !== null ? this.state.chosenDestination : undefined;
    try {
      const resp = await this.api.postJob(this.makeKey(), override);
      this.state.jobId = resp.job_id;
      this.state.jobPhase = "queued";
      // seed with the phase seen just before dispatch so the rendered
      // sequence starts from idle
      this.state.phaseHistory =
        this.state.snapshot !== null ? [this.state.snapshot.state] : [];
      this.state.placement = null;
      this.state.dispatchDisabled = true;
      this.state.busyJobId = null;
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.body.code === "BUSY") {
        this.state.dispatchDisabled = true;
        this.state.busyJobId = err.body.job_id ?? null;
      } else {
        this.state.deliveryError = describeError(err);
      }
      return false;
    }
  }

  /** One 5 Hz tick: pull the snapshot and fold it into the view state. */
  async poll(): Promise<void> {
    let snap: StateSnapshot;
    try {
      snap = await this.api.getState();
    } catch {
      this.state.connected = false; // reconnect banner until the next good tick
      return;
    }
    this.state.connected = true;
    this.state.snapshot = snap;
    const history = this.state.phaseHistory;
    if (history.length === 0 || history[history.length - 1] !== snap.state) {
      history.push(snap.state);
    }
    const job = snap.job;
    if (job !== null && job.id === this.state.jobId) {
      this.state.jobPhase = job.phase;
      if (job.phase === "done" || job.phase === "failed") {
        this.state.dispatchDisabled = false;
        this.state.placement = job.result?.placed_mm ?? null;
      }
    } else if (job === null && this.state.busyJobId !== null) {
      this.state.dispatchDisabled = false;
      this.state.busyJobId = null;
    }
  }
}

export function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    const detail = err.body.detail;
    if (typeof detail === "string") return `${err.body.code}: ${detail}`;
    return err.body.code;
  }
  return err instanceof Error ? err.message : String(err);
}
