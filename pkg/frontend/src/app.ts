/** Browser wiring: canvas drawing, overlays, and the 5 Hz poll loop. */

import { ConsoleApi } from "./api.js";
import { ConsoleController, POLL_INTERVAL_MS, displayDropPoint } from "./console.js";
import { applyHomography, invert3x3 } from "./geometry.js";
import type { Point, SceneDoc } from "./types.js";

const FRAME_REFRESH_MS = 1000;

export function startApp(root: HTMLElement, baseUrl: string): void {
  const api = new ConsoleApi(baseUrl);
  const ctl = new ConsoleController(api);

  root.innerHTML = `
    <div id="banner" hidden>connection lost — retrying…</div>
    <div class="row">
      <div>
        <canvas id="view" width="1280" height="448"></canvas>
        <div>
          <button id="finish">Set drop zone</button>
          <button id="undo">Undo vertex</button>
          <button id="clear">Clear</button>
          <button id="dispatch">Dispatch job</button>
          <span id="draw-error" class="error"></span>
        </div>
        <div id="picker" hidden>
          delivery is ambiguous — choose a destination:
          <span id="picker-buttons"></span>
        </div>
      </div>
      <div>
        <canvas id="map" width="360" height="280"></canvas>
        <pre id="status"></pre>
        <pre id="drop"></pre>
      </div>
    </div>`;

  const view = root.querySelector<HTMLCanvasElement>("#view")!;
  const map = root.querySelector<HTMLCanvasElement>("#map")!;
  const banner = root.querySelector<HTMLElement>("#banner")!;
  const picker = root.querySelector<HTMLElement>("#picker")!;
  const pickerButtons = root.querySelector<HTMLElement>("#picker-buttons")!;
  const drawError = root.querySelector<HTMLElement>("#draw-error")!;
  const statusEl = root.querySelector<HTMLElement>("#status")!;
  const dropEl = root.querySelector<HTMLElement>("#drop")!;
  const dispatchBtn = root.querySelector<HTMLButtonElement>("#dispatch")!;

  let scene: SceneDoc | null = null;
  let pxToWorld: number[][] | null = null;
  const frame = new Image();
  frame.src = api.frameUrl();

  async function loadScene(): Promise<void> {
    scene = await api.getScene();
    pxToWorld = invert3x3(scene.overhead_camera.world_to_px);
    await ctl.refreshDelivery();
  }

  view.addEventListener("click", (ev) => {
    if (pxToWorld === null) return;
    const rect = view.getBoundingClientRect();
    const px: Point = [
      ((ev.clientX - rect.left) * view.width) / rect.width,
      ((ev.clientY - rect.top) * view.height) / rect.height,
    ];
    ctl.addVertex(applyHomography(pxToWorld, px));
    render();
  });

  root.querySelector("#undo")!.addEventListener("click", () => {
    ctl.undoVertex();
    render();
  });
  root.querySelector("#clear")!.addEventListener("click", () => {
    ctl.clearDrawing();
    render();
  });
  root.querySelector("#finish")!.addEventListener("click", () => {
    void ctl.submitZone().then(() => {
      void loadScene().then(render);
    });
  });
  dispatchBtn.addEventListener("click", () => {
    void ctl.dispatch().then(render);
  });

  function worldToPx(p: Point): Point {
    return applyHomography(scene!.overhead_camera.world_to_px, p);
  }

  function render(): void {
    banner.hidden = ctl.state.connected;
    drawError.textContent = ctl.state.drawError ?? "";
    dispatchBtn.disabled = ctl.state.dispatchDisabled || ctl.state.delivery === null;

    const amb = ctl.state.ambiguous;
    picker.hidden = amb === null;
    if (amb !== null && pickerButtons.childElementCount !== amb.length) {
      pickerButtons.innerHTML = "";
      for (const k of amb) {
        const b = document.createElement("button");
        b.textContent = `destination ${k}`;
        b.addEventListener("click", () => {
          ctl.chooseDestination(k);
          void ctl.dispatch().then(render);
        });
        pickerButtons.appendChild(b);
      }
    }

    const ctx = view.getContext("2d")!;
    ctx.clearRect(0, 0, view.width, view.height);
    if (frame.complete && frame.naturalWidth > 0) ctx.drawImage(frame, 0, 0);
    if (scene !== null) {
      drawOverlay(ctx);
      drawMap();
    }
    statusEl.textContent = statusText();
    dropEl.textContent = dropText();
  }

  function drawOverlay(ctx: CanvasRenderingContext2D): void {
    const poly = ctl.state.drawing;
    if (poly.length > 0) {
      ctx.strokeStyle = "#e6a817";
      ctx.lineWidth = 2;
      ctx.beginPath();
      poly.map(worldToPx).forEach(([x, y], i) =>
        i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y),
      );
      ctx.stroke();
    }
    const d = ctl.state.delivery;
    if (d !== null) {
      // the drop point and clearance are the server's numbers, untouched
      const [cx, cy] = worldToPx([d.drop_point_mm.x, d.drop_point_mm.y]);
      const [ex] = worldToPx([d.drop_point_mm.x + d.clearance_mm, d.drop_point_mm.y]);
      ctx.strokeStyle = "#2d9c3c";
      ctx.beginPath();
      ctx.arc(cx, cy, Math.abs(ex - cx), 0, 2 * Math.PI);
      ctx.stroke();
      ctx.fillStyle = "#2d9c3c";
      ctx.fillRect(cx - 2, cy - 2, 4, 4);
    }
    const placed = ctl.state.placement;
    if (placed !== null) {
      const [px, py] = worldToPx(placed);
      ctx.strokeStyle = "#c0392b";
      ctx.beginPath();
      ctx.moveTo(px - 6, py - 6);
      ctx.lineTo(px + 6, py + 6);
      ctx.moveTo(px - 6, py + 6);
      ctx.lineTo(px + 6, py - 6);
      ctx.stroke();
    }
  }

  /** Track map: the guide line lives at negative y, below the squares. */
  function drawMap(): void {
    const ctx = map.getContext("2d")!;
    const sx = 0.25;
    const toMap = ([x, y]: Point): Point => [20 + x * sx, 20 - y * sx];
    ctx.clearRect(0, 0, map.width, map.height);
    ctx.strokeStyle = "#555";
    for (const [a, b] of scene!.track.edges) {
      const [x0, y0] = toMap(scene!.track.nodes[a].pos);
      const [x1, y1] = toMap(scene!.track.nodes[b].pos);
      ctx.beginPath();
      ctx.moveTo(x0, y0);
      ctx.lineTo(x1, y1);
      ctx.stroke();
    }
    const snap = ctl.state.snapshot;
    if (snap !== null) {
      const [ax, ay] = toMap([snap.pose.x, snap.pose.y]);
      ctx.fillStyle = "#1f6fd6";
      ctx.beginPath();
      ctx.arc(ax, ay, 5, 0, 2 * Math.PI);
      ctx.fill();
      ctx.strokeStyle = "#1f6fd6";
      ctx.beginPath();
      ctx.moveTo(ax, ay);
      ctx.lineTo(
        ax + 12 * Math.cos(-snap.pose.heading),
        ay + 12 * Math.sin(-snap.pose.heading),
      );
      ctx.stroke();
    }
  }

  function statusText(): string {
    const s = ctl.state;
    const lines = [
      `phase: ${s.snapshot?.state ?? "—"}`,
      `job: ${s.jobId ?? "—"} (${s.jobPhase ?? "—"})`,
      `history: ${s.phaseHistory.join(" → ")}`,
    ];
    if (s.busyJobId !== null) lines.push(`busy with job ${s.busyJobId}`);
    if (s.deliveryError !== null) lines.push(`error: ${s.deliveryError}`);
    return lines.join("\n");
  }

  function dropText(): string {
    const d = ctl.state.delivery;
    if (d === null) return "no delivery available";
    const v = displayDropPoint(d);
    return [
      `destination: ${v.destination}`,
      `drop point (mm): ${v.x}, ${v.y}`,
      `clearance (mm): ${v.clearance_mm}`,
      `markers: ${v.markers_detected}`,
      `computed at: ${v.computed_at}`,
    ].join("\n");
  }

  void loadScene().then(render);
  setInterval(() => {
    void ctl.poll().then(render);
  }, POLL_INTERVAL_MS);
  setInterval(() => {
    frame.src = api.frameUrl();
  }, FRAME_REFRESH_MS);
}
