"""HTTP wire layer: camera frame service, edge delivery service, sim control.

Three FastAPI apps are provided:

* ``create_camera_app`` — serves overhead frames (the camera box).
* ``create_edge_app`` — computes delivery info from a remote camera.
* ``create_app`` — the combined lab server for desk testing: all six
  endpoints against one in-process scene and simulator.

All endpoints live under ``/api/v1`` and every response (success or error)
carries the ``X-AGVLab-Schema: 1`` header.  Error bodies are always JSON
with a stable ``code`` string.
"""

from __future__ import annotations

import io
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from agvlab import imaging, perception
from agvlab.navigation import NavConfig
from agvlab.simworld import (
    DropZone,
    SceneError,
    SceneSpec,
    Simulator,
    render_overhead,
)

SCHEMA_HEADER = "X-AGVLab-Schema"
SCHEMA_VERSION = "1"


def _rfc3339_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _error(status: int, code: str, **extra: Any) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, **extra})


def delivery_payload(info: perception.DeliveryInfo, computed_at: str) -> dict:
    return {
        "destination": info.destination,
        "drop_point_mm": {"x": info.drop_x_mm, "y": info.drop_y_mm},
        "clearance_mm": info.clearance_mm,
        "markers_detected": info.markers_detected,
        "computed_at": computed_at,
    }


def parse_delivery_payload(data: dict) -> perception.DeliveryInfo:
    """Inverse of :func:`delivery_payload` (timestamp is metadata, dropped)."""
    point = data["drop_point_mm"]
    extra = set(data) - {"destination", "drop_point_mm", "clearance_mm",
                         "markers_detected", "computed_at"}
    if extra:
        raise ValueError(f"unexpected delivery fields {sorted(extra)}")
    return perception.DeliveryInfo(
        destination=int(data["destination"]),
        drop_x_mm=float(point["x"]),
        drop_y_mm=float(point["y"]),
        clearance_mm=float(data["clearance_mm"]),
        markers_detected=int(data["markers_detected"]),
    )


# --- request models -------------------------------------------------------


class DropZoneRequest(BaseModel):
    destination: int = Field(ge=0, le=3)
    polygon_mm: list[tuple[float, float]] = Field(min_length=3)


class JobRequest(BaseModel):
    destination: int | None = Field(default=None, ge=0, le=3)
    idempotency_key: str = Field(min_length=1, max_length=128)


# --- lab server state -----------------------------------------------------


@dataclass
class JobRecord:
    job_id: str
    idempotency_key: str
    destination: int | None
    phase: str = "queued"          # queued | running | done | failed
    detail: str | None = None
    result: dict | None = None


@dataclass
class LabServer:
    """Shared state behind the combined app: scene, sim loop, job registry.

    The scene has a monotonically increasing ``revision``; the delivery
    response is cached per revision so repeated GETs are byte-stable until
    the next drop-zone mutation.
    """

    scene: SceneSpec | None = None
    cfg: NavConfig = field(default_factory=NavConfig)
    revision: int = 0
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)
    _delivery_cache: dict[int, dict] = field(default_factory=dict, repr=False)
    _sim: Simulator | None = field(default=None, repr=False)
    _jobs_by_key: dict[str, JobRecord] = field(default_factory=dict, repr=False)
    _active: JobRecord | None = field(default=None, repr=False)
    _worker: threading.Thread | None = field(default=None, repr=False)

    # -- frames ---------------------------------------------------------

    def frame_png(self) -> bytes:
        with self._lock:
            if self.scene is None:
                raise SceneError("no scene loaded")
            return imaging.encode_png(render_overhead(self.scene))

    # -- delivery --------------------------------------------------------

    def delivery(self, destination: int | None = None) -> dict:
        with self._lock:
            if self.scene is None:
                raise SceneError("no scene loaded")
            if destination is None and self.revision in self._delivery_cache:
                return self._delivery_cache[self.revision]
            info = perception.compute_delivery(
                render_overhead(self.scene), destination=destination)
            payload = delivery_payload(info, _rfc3339_now())
            if destination is None:
                self._delivery_cache = {self.revision: payload}
            return payload

    # -- drop zones --------------------------------------------------------

    def add_drop_zone(self, destination: int, polygon_mm) -> int:
        with self._lock:
            if self.scene is None:
                raise SceneError("no scene loaded")
            zone = DropZone(destination, np.asarray(polygon_mm, dtype=np.float64))
            SceneSpec.validate_zone(zone)
            if any(z.destination == destination for z in self.scene.drop_zones):
                raise ZoneConflict(destination)
            self.scene.set_drop_zones(self.scene.drop_zones + [zone])
            self.revision += 1
            self._delivery_cache.clear()
            return self.revision

    def clear_drop_zones(self) -> int:
        with self._lock:
            if self.scene is None:
                raise SceneError("no scene loaded")
            self.scene.set_drop_zones([])
            self.revision += 1
            self._delivery_cache.clear()
            return self.revision

    # -- jobs & state ------------------------------------------------------

    def _ensure_sim(self) -> Simulator:
        if self.scene is None:
            raise SceneError("no scene loaded")
        if self._sim is None:
            self._sim = Simulator(self.scene, self.cfg,
                                  delivery_provider=self._provider)
        return self._sim

    def _provider(self, scene: SceneSpec):
        dest = self._active.destination if self._active else None
        return perception.compute_delivery(render_overhead(scene),
                                           destination=dest)

    def submit_job(self, req: JobRequest) -> tuple[JobRecord, bool]:
        """Returns (record, created).  Duplicate keys return the original."""
        with self._lock:
            existing = self._jobs_by_key.get(req.idempotency_key)
            if existing is not None:
                return existing, False
            if self._active is not None and self._active.phase in ("queued", "running"):
                raise BusyError(self._active.job_id)
            sim = self._ensure_sim()
            record = JobRecord(uuid.uuid4().hex, req.idempotency_key, req.destination)
            self._jobs_by_key[req.idempotency_key] = record
            self._active = record
            self._worker = threading.Thread(
                target=self._run_job, args=(sim, record), daemon=True)
            self._worker.start()
            return record, True

    def _run_job(self, sim: Simulator, record: JobRecord) -> None:
        record.phase = "running"
        try:
            result = sim.run_job()
        except Exception as exc:  # surfaced through GET /state
            record.phase = "failed"
            record.detail = str(exc)
            return
        record.result = {
            "destination": result.destination,
            "target_mm": None if result.target is None else list(result.target),
            "placed_mm": None if result.placed is None else list(result.placed),
            "steps": result.steps,
            "timed_out": result.timed_out,
        }
        record.phase = "done" if result.completed else "failed"

    def state(self) -> dict:
        with self._lock:
            sim = self._ensure_sim()
            snap = sim.snapshot()
            snap["revision"] = self.revision
            if self._active is None:
                snap["job"] = None
            else:
                snap["job"] = {
                    "id": self._active.job_id,
                    "phase": self._active.phase,
                    "destination": self._active.destination,
                    "detail": self._active.detail,
                    "result": self._active.result,
                }
            return snap

    def scene_json(self) -> dict:
        with self._lock:
            if self.scene is None:
                raise SceneError("no scene loaded")
            data = self.scene.to_json()
            data["revision"] = self.revision
            return data

    def join(self, timeout: float | None = None) -> None:
        worker = self._worker
        if worker is not None:
            worker.join(timeout)


class ZoneConflict(ValueError):
    def __init__(self, destination: int):
        self.destination = destination
        super().__init__(f"destination {destination} already has a drop zone")


class BusyError(RuntimeError):
    def __init__(self, job_id: str):
        self.job_id = job_id
        super().__init__("a job is already active")


# --- app wiring -------------------------------------------------------------


def _install_common(app: FastAPI) -> None:
    @app.middleware("http")
    async def add_schema_header(request: Request, call_next):
        response = await call_next(request)
        response.headers[SCHEMA_HEADER] = SCHEMA_VERSION
        return response

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        detail = [{"loc": list(map(str, e["loc"])), "msg": e["msg"]}
                  for e in exc.errors()]
        response = _error(422, "VALIDATION", detail=detail)
        response.headers[SCHEMA_HEADER] = SCHEMA_VERSION
        return response


def _delivery_response(compute: Callable[[], dict]) -> Response:
    try:
        return JSONResponse(compute())
    except SceneError:
        return _error(503, "NO_SCENE")
    except perception.AssignmentError as exc:
        return _error(503, "MARKERS_INSUFFICIENT",
                      markers_detected=exc.markers_detected)
    except perception.NoJobError:
        return _error(404, "NO_DROP_ZONE")
    except perception.AmbiguityError as exc:
        return _error(409, "AMBIGUOUS", destinations=exc.destinations)


def create_camera_app(server: LabServer) -> FastAPI:
    """Frame service only — the 'camera box' half of the split deployment."""
    app = FastAPI(title="agvlab camera", docs_url=None, redoc_url=None)
    _install_common(app)

    @app.get("/api/v1/frame")
    def get_frame():
        try:
            png = server.frame_png()
        except SceneError:
            return _error(503, "NO_SCENE")
        seed = server.scene.lighting.seed if server.scene else 0
        return Response(png, media_type="image/png",
                        headers={"X-Scene-Seed": str(seed)})

    return app


def create_edge_app(camera_url: str,
                    fetch_frame: Callable[[], tuple[int, bytes]] | None = None
                    ) -> FastAPI:
    """Delivery service that fetches frames from a remote camera service.

    ``fetch_frame`` overrides the HTTP fetch (returns status code + body);
    the default performs a real GET against ``camera_url``.
    """
    from PIL import Image

    if fetch_frame is None:
        import httpx

        def fetch_frame() -> tuple[int, bytes]:
            try:
                resp = httpx.get(f"{camera_url.rstrip('/')}/api/v1/frame",
                                 timeout=10.0)
            except httpx.HTTPError as exc:
                raise ConnectionError(str(exc)) from exc
            return resp.status_code, resp.content

    app = FastAPI(title="agvlab edge", docs_url=None, redoc_url=None)
    _install_common(app)
    cache: dict[bytes, dict] = {}

    def compute() -> dict:
        try:
            status, body = fetch_frame()
        except (ConnectionError, OSError) as exc:
            raise CameraDown(str(exc)) from exc
        if status != 200:
            raise CameraDown(f"camera returned {status}")
        key = body
        if key in cache:
            return cache[key]
        img = np.asarray(Image.open(io.BytesIO(body)).convert("L"))
        info = perception.compute_delivery(img)
        payload = delivery_payload(info, _rfc3339_now())
        cache.clear()
        cache[key] = payload
        return payload

    @app.get("/api/v1/delivery")
    def get_delivery():
        try:
            return _delivery_response(compute)
        except CameraDown:
            return _error(502, "CAMERA_DOWN")

    return app


class CameraDown(RuntimeError):
    pass


def create_app(server: LabServer | None = None,
               scene: SceneSpec | None = None) -> FastAPI:
    """Combined lab server: camera + edge + sim control in one process."""
    if server is None:
        server = LabServer(scene=scene)
    app = FastAPI(title="agvlab", docs_url=None, redoc_url=None)
    app.state.server = server
    _install_common(app)

    @app.get("/api/v1/frame")
    def get_frame():
        try:
            png = server.frame_png()
        except SceneError:
            return _error(503, "NO_SCENE")
        seed = server.scene.lighting.seed if server.scene else 0
        return Response(png, media_type="image/png",
                        headers={"X-Scene-Seed": str(seed)})

    @app.get("/api/v1/delivery")
    def get_delivery():
        return _delivery_response(server.delivery)

    @app.post("/api/v1/dropzone", status_code=201)
    def post_dropzone(body: DropZoneRequest):
        try:
            revision = server.add_drop_zone(body.destination, body.polygon_mm)
        except SceneError as exc:
            if server.scene is None:
                return _error(503, "NO_SCENE")
            return _error(422, "INVALID_POLYGON", detail=str(exc))
        except ZoneConflict as exc:
            return _error(409, "ZONE_CONFLICT", destination=exc.destination)
        return JSONResponse(status_code=201, content={
            "destination": body.destination, "revision": revision})

    @app.post("/api/v1/job", status_code=202)
    def post_job(body: JobRequest):
        try:
            record, created = server.submit_job(body)
        except SceneError:
            return _error(503, "NO_SCENE")
        except BusyError as exc:
            return _error(409, "BUSY", job_id=exc.job_id)
        return JSONResponse(status_code=202, content={
            "job_id": record.job_id,
            "destination": record.destination,
            "created": created,
        })

    @app.get("/api/v1/state")
    def get_state():
        try:
            return JSONResponse(server.state())
        except SceneError:
            return _error(503, "NO_SCENE")

    @app.get("/api/v1/scene")
    def get_scene():
        try:
            return JSONResponse(server.scene_json())
        except SceneError:
            return _error(503, "NO_SCENE")

    return app


def run(app: FastAPI, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
