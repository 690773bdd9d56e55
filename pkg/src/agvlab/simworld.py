"""Deterministic stand-in for the physical rig.

World frame: mm, x toward the other markers along the first marker row,
y toward the second row (the origin is the far-left marker).  Destination
squares occupy x in [k*280, (k+1)*280], y in [0, 280]; the track lies at
negative y and approaches the squares from below.

The static scene is rasterized once into a 1 mm/px ground map; both cameras
sample that map through the shared warp kernel, which keeps the per-frame
cost low enough for faster-than-realtime runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import cv2
import numpy as np

from agvlab import geometry, navigation
from agvlab.geometry import DESTINATION_SIZE_MM, Homography
from agvlab.navigation import (
    Decision,
    NavConfig,
    NavEvent,
    NavPhase,
    NavState,
    RoutePlan,
    TrackGraph,
    TrackNode,
    WheelSpeeds,
    nav_step,
    plan_route,
)

BG = 220          # bare surface intensity
TRACK_INK = 30    # track / marker stroke intensity
ZONE_INK = 40     # operator drop-area paper
OUTLINE_INK = 190  # destination square outlines
MARKER_ARM_MM = 20.0
MARKER_STROKE_MM = 3.0


class SceneError(ValueError):
    pass


class UnreachableTarget(ValueError):
    pass


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float  # radians, CCW from +x


def step_diff_drive(p: Pose2D, w: WheelSpeeds, wheelbase: float, dt: float) -> Pose2D:
    """Exact circular-arc integration of differential-drive kinematics."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = (w.v_left + w.v_right) / 2.0
    omega = (w.v_right - w.v_left) / wheelbase
    if abs(omega) < 1e-9:
        return Pose2D(p.x + v * dt * math.cos(p.heading),
                      p.y + v * dt * math.sin(p.heading), p.heading)
    r = v / omega
    h2 = p.heading + omega * dt
    return Pose2D(p.x + r * (math.sin(h2) - math.sin(p.heading)),
                  p.y + r * (math.cos(p.heading) - math.cos(h2)), h2)


# --- planar two-link arm ------------------------------------------------------


@dataclass
class ArmState:
    theta1: float = 0.0
    theta2: float = 0.0
    gripper: str = "OPEN"  # OPEN | CLOSED
    l1: float = 240.0
    l2: float = 220.0

    JOINT_LIMIT = math.radians(150)


def arm_fk_2link(theta1: float, theta2: float, l1: float, l2: float) -> tuple[float, float]:
    x = l1 * math.cos(theta1) + l2 * math.cos(theta1 + theta2)
    y = l1 * math.sin(theta1) + l2 * math.sin(theta1 + theta2)
    return x, y


def arm_ik_2link(target: tuple[float, float], l1: float, l2: float) -> tuple[float, float]:
    """Elbow-down two-link inverse kinematics in the arm plane."""
    x, y = float(target[0]), float(target[1])
    d = math.hypot(x, y)
    if d > l1 + l2 + 1e-9 or d < abs(l1 - l2) - 1e-9:
        raise UnreachableTarget(f"target at {d:.1f} mm outside [{abs(l1-l2)}, {l1+l2}]")
    c2 = (x * x + y * y - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    c2 = max(-1.0, min(1.0, c2))
    theta2 = -math.acos(c2)  # elbow-down branch
    k1 = l1 + l2 * math.cos(theta2)
    k2 = l2 * math.sin(theta2)
    theta1 = math.atan2(y, x) - math.atan2(k2, k1)
    return theta1, theta2


# --- scene model --------------------------------------------------------------


@dataclass
class Lighting:
    gain: float = 1.0
    noise_sigma: float = 2.0
    vignette: float = 0.0
    seed: int = 0


@dataclass
class OverheadCamera:
    width: int = 1280
    height: int = 448
    world_to_px: Homography = field(
        default_factory=lambda: Homography(
            np.array([[1.0, 0.0, 80.0], [0.0, 1.0, 80.0], [0.0, 0.0, 1.0]])
        )
    )


@dataclass
class DropZone:
    destination: int
    polygon: np.ndarray  # (n, 2) world mm


def marker_layout(pitch: float = DESTINATION_SIZE_MM) -> np.ndarray:
    """World positions of the 10 cross-hair markers, index order (i, j)."""
    return np.array([(i * pitch, j * pitch) for j in (0, 1) for i in range(5)],
                    dtype=np.float64)


def marker_grid_indices() -> list[tuple[int, int]]:
    return [(i, j) for j in (0, 1) for i in range(5)]


def destination_square(k: int) -> np.ndarray:
    s = DESTINATION_SIZE_MM
    return np.array([(k * s, 0), ((k + 1) * s, 0), ((k + 1) * s, s), (k * s, s)],
                    dtype=np.float64)


@dataclass
class SceneSpec:
    track: TrackGraph
    drop_zones: list[DropZone] = field(default_factory=list)
    lighting: Lighting = field(default_factory=Lighting)
    camera: OverheadCamera = field(default_factory=OverheadCamera)
    stroke_mm: float = 18.0
    name: str = "scene"

    def __post_init__(self):
        self._cache: dict = {}
        self.validate()

    # -- validation ------------------------------------------------------

    def validate(self) -> None:
        g = self.track
        _ = g.source
        for k in range(4):
            g.terminal(k)
        seen = {g.source.name}
        stack = [g.source.name]
        while stack:
            for nb in g.adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if seen != set(g.nodes):
            raise SceneError(f"track not connected: unreachable {set(g.nodes) - seen}")
        for z in self.drop_zones:
            self.validate_zone(z)

    @staticmethod
    def validate_zone(zone: DropZone) -> None:
        if zone.destination not in (0, 1, 2, 3):
            raise SceneError(f"bad destination {zone.destination}")
        poly = np.asarray(zone.polygon, dtype=np.float64)
        if len(poly) < 3 or not geometry.is_simple_polygon(poly):
            raise SceneError("drop polygon must be simple with >= 3 vertices")
        square = destination_square(zone.destination)
        x0, y0 = square.min(axis=0)
        x1, y1 = square.max(axis=0)
        if not ((poly[:, 0] >= x0).all() and (poly[:, 0] <= x1).all()
                and (poly[:, 1] >= y0).all() and (poly[:, 1] <= y1).all()):
            raise SceneError(
                f"drop polygon leaves destination square {zone.destination}")

    # -- mutation --------------------------------------------------------

    def invalidate(self) -> None:
        self._cache.clear()

    def set_drop_zones(self, zones: list[DropZone]) -> None:
        for z in zones:
            self.validate_zone(z)
        self.drop_zones = list(zones)
        self.invalidate()

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "scene_version": 1,
            "name": self.name,
            "track": {
                "stroke_mm": self.stroke_mm,
                "nodes": {
                    n.name: {
                        "pos": list(n.pos),
                        "kind": n.kind,
                        **({"destination": n.destination} if n.destination is not None else {}),
                    }
                    for n in self.track.nodes.values()
                },
                "edges": [list(e) for e in self.track.edges],
            },
            "drop_zones": [
                {"destination": z.destination,
                 "polygon": [[float(x), float(y)] for x, y in z.polygon]}
                for z in self.drop_zones
            ],
            "lighting": {
                "gain": self.lighting.gain,
                "noise_sigma": self.lighting.noise_sigma,
                "vignette": self.lighting.vignette,
                "seed": self.lighting.seed,
            },
            "overhead_camera": {
                "image_size": [self.camera.width, self.camera.height],
                "world_to_px": self.camera.world_to_px.matrix.tolist(),
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "SceneSpec":
        if data.get("scene_version") != 1:
            raise SceneError(f"unsupported scene_version {data.get('scene_version')!r}")
        try:
            tr = data["track"]
            nodes = {
                name: TrackNode(name, tuple(spec["pos"]), spec["kind"],
                                spec.get("destination"))
                for name, spec in tr["nodes"].items()
            }
            graph = TrackGraph(nodes, [tuple(e) for e in tr["edges"]])
            zones = [
                DropZone(z["destination"], np.asarray(z["polygon"], dtype=np.float64))
                for z in data.get("drop_zones", [])
            ]
            light = Lighting(**data.get("lighting", {}))
            cam_spec = data.get("overhead_camera", {})
            size = cam_spec.get("image_size", [1280, 448])
            h = cam_spec.get("world_to_px")
            camera = OverheadCamera(
                int(size[0]), int(size[1]),
                Homography(np.asarray(h)) if h is not None else OverheadCamera().world_to_px,
            )
            return cls(track=graph, drop_zones=zones, lighting=light, camera=camera,
                       stroke_mm=float(tr.get("stroke_mm", 18.0)),
                       name=data.get("name", "scene"))
        except (KeyError, TypeError, IndexError) as exc:
            raise SceneError(f"malformed scene file: {exc!r}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "SceneSpec":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SceneError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_json(data)

    # -- ground-truth accessors -------------------------------------------

    def marker_world(self) -> np.ndarray:
        return marker_layout()

    def marker_px(self) -> np.ndarray:
        return self.camera.world_to_px.apply(marker_layout())

    def zone_for(self, destination: int) -> DropZone | None:
        for z in self.drop_zones:
            if z.destination == destination:
                return z
        return None

    def true_drop_point(self, destination: int) -> geometry.DropPoint:
        zone = self.zone_for(destination)
        if zone is None:
            raise SceneError(f"no drop zone in destination {destination}")
        return geometry.polylabel(zone.polygon, precision=0.1)

    # -- rasterization ------------------------------------------------------

    def _bounds(self) -> tuple[float, float, float, float]:
        xs = [n.pos[0] for n in self.track.nodes.values()] + [0, 4 * DESTINATION_SIZE_MM]
        ys = [n.pos[1] for n in self.track.nodes.values()] + [0, DESTINATION_SIZE_MM]
        m = 100.0
        return min(xs) - m, min(ys) - m, max(xs) + m, max(ys) + m

    def ground_map(self) -> tuple[np.ndarray, float, float, float]:
        """1 mm/px raster of the static scene; returns (img, x0, y0, y1)."""
        if "map" in self._cache:
            return self._cache["map"]
        x0, y0, x1, y1 = self._bounds()
        w = int(math.ceil(x1 - x0))
        h = int(math.ceil(y1 - y0))
        img = np.full((h, w), BG, dtype=np.uint8)

        def to_map(p) -> tuple[int, int]:
            return int(round(p[0] - x0)), int(round(y1 - p[1]))

        for k in range(4):
            sq = destination_square(k)
            cv2.polylines(img, [np.array([to_map(p) for p in sq])], True, OUTLINE_INK, 2)
        for a, b in self.track.edges:
            pa = to_map(self.track.nodes[a].pos)
            pb = to_map(self.track.nodes[b].pos)
            cv2.line(img, pa, pb, TRACK_INK, int(round(self.stroke_mm)))
        arm = MARKER_ARM_MM / 2
        sw = int(round(MARKER_STROKE_MM))
        for mx, my in marker_layout():
            cv2.line(img, to_map((mx - arm, my)), to_map((mx + arm, my)), TRACK_INK, sw)
            cv2.line(img, to_map((mx, my - arm)), to_map((mx, my + arm)), TRACK_INK, sw)
        for z in self.drop_zones:
            pts = np.array([to_map(p) for p in z.polygon])
            cv2.fillPoly(img, [pts], ZONE_INK)
        out = (img, x0, y0, y1)
        self._cache["map"] = out
        return out

    def _noise(self, key: str, shape: tuple[int, int], salt: int) -> np.ndarray:
        if key not in self._cache:
            rng = np.random.default_rng(self.lighting.seed * 7919 + salt)
            self._cache[key] = rng.normal(0.0, self.lighting.noise_sigma, shape)
        return self._cache[key]


# --- cameras ------------------------------------------------------------------

HORIZON_FRAC = 0.12  # top band of the onboard frame darkened as fake horizon


def render_onboard(scene: SceneSpec, pose: Pose2D, cfg: NavConfig | None = None) -> np.ndarray:
    """Orthographic ground patch ahead of the AGV (bottom row at the pose)."""
    cfg = cfg or NavConfig()
    n = cfg.frame_px
    mpp = cfg.mm_per_px
    gmap, x0, _, y1 = scene.ground_map()
    ct, st = math.cos(pose.heading), math.sin(pose.heading)
    half = (n - 1) / 2.0
    # out pixel (c, r) -> world -> map px, composed as one affine matrix
    # wx = pose.x + (n-1-r)*mpp*ct + (c-half)*mpp*st
    # wy = pose.y + (n-1-r)*mpp*st - (c-half)*mpp*ct
    a = np.array([
        [mpp * st, -mpp * ct, pose.x + (n - 1) * mpp * ct - half * mpp * st - x0],
        [mpp * ct, mpp * st, -(pose.y + (n - 1) * mpp * st + half * mpp * ct) + y1],
        [0.0, 0.0, 1.0],
    ])
    from agvlab import kernels

    base = kernels.warp_bilinear(gmap, np.ascontiguousarray(a), n, n, BG)
    f = base.astype(np.float32) * scene.lighting.gain
    band = int(n * HORIZON_FRAC)
    f[:band] *= 0.3
    f += scene._noise("onboard_noise", (n, n), salt=1)
    return np.clip(f, 0, 255).astype(np.uint8)


def render_overhead(scene: SceneSpec) -> np.ndarray:
    """Projective bird's-eye view of markers, squares, and drop shapes."""
    gmap, x0, _, y1 = scene.ground_map()
    cam = scene.camera
    world_from_px = cam.world_to_px.inverse().matrix
    # map px <- world: mx = wx - x0, my = y1 - wy
    world_to_map = np.array([[1.0, 0.0, -x0], [0.0, -1.0, y1], [0.0, 0.0, 1.0]])
    hinv = world_to_map @ world_from_px
    from agvlab import kernels

    base = kernels.warp_bilinear(gmap, np.ascontiguousarray(hinv),
                                 cam.width, cam.height, BG)
    f = base.astype(np.float32) * scene.lighting.gain
    if scene.lighting.vignette > 0:
        if "vignette" not in scene._cache:
            ys, xs = np.mgrid[0:cam.height, 0:cam.width].astype(np.float32)
            cx, cy = (cam.width - 1) / 2, (cam.height - 1) / 2
            r2 = ((xs - cx) / cx) ** 2 + ((ys - cy) / cy) ** 2
            scene._cache["vignette"] = 1.0 - scene.lighting.vignette * r2 / 2.0
        f *= scene._cache["vignette"]
    f += scene._noise("overhead_noise", (cam.height, cam.width), salt=2)
    return np.clip(f, 0, 255).astype(np.uint8)


# --- default and randomized scenes --------------------------------------------


def default_track() -> TrackGraph:
    """Two-level binary fan-out from one source to four destination terminals."""
    s = DESTINATION_SIZE_MM

    def n(name, x, y, kind="junction", dest=None):
        return TrackNode(name, (x, y), kind, dest)

    # Vertical stems are longer than the 0.5*s horizontal half-runs so the
    # controller has runway to re-centre after each turn before the next
    # junction bar enters the ROI.
    y_mid, y_j1, y_src = -300.0, -460.0, -700.0
    nodes = [
        n("S", 2 * s, y_src, "source"),
        n("J1", 2 * s, y_j1),
        n("CL", s, y_j1), n("CR", 3 * s, y_j1),
        n("J2L", s, y_mid), n("J2R", 3 * s, y_mid),
        n("CLL", 0.5 * s, y_mid), n("CLR", 1.5 * s, y_mid),
        n("CRL", 2.5 * s, y_mid), n("CRR", 3.5 * s, y_mid),
        n("T0", 0.5 * s, -0.5 * s, "terminal", 0),
        n("T1", 1.5 * s, -0.5 * s, "terminal", 1),
        n("T2", 2.5 * s, -0.5 * s, "terminal", 2),
        n("T3", 3.5 * s, -0.5 * s, "terminal", 3),
    ]
    edges = [
        ("S", "J1"), ("J1", "CL"), ("J1", "CR"),
        ("CL", "J2L"), ("CR", "J2R"),
        ("J2L", "CLL"), ("J2L", "CLR"), ("J2R", "CRL"), ("J2R", "CRR"),
        ("CLL", "T0"), ("CLR", "T1"), ("CRL", "T2"), ("CRR", "T3"),
    ]
    return TrackGraph({nd.name: nd for nd in nodes}, edges)


def default_scene(seed: int = 0, name: str = "default-fanout") -> SceneSpec:
    return SceneSpec(track=default_track(), lighting=Lighting(seed=seed), name=name)


def tilted_camera(rng: np.random.Generator, max_px: float = 40.0) -> OverheadCamera:
    """Overhead camera with a mild random projective distortion (~10 deg tilt)."""
    base = OverheadCamera()
    w, h = base.width, base.height
    corners = np.array([(0, 0), (w, 0), (w, h), (0, h)], dtype=np.float64)
    jitter = rng.uniform(-max_px, max_px, size=(4, 2))
    h0 = base.world_to_px
    warped = geometry.homography_from_points(corners, corners + jitter)
    return OverheadCamera(w, h, Homography(warped.matrix @ h0.matrix))


def random_drop_polygon(rng: np.random.Generator, destination: int,
                        margin: float = 35.0) -> np.ndarray:
    """Random convex blob or L-shape inside a destination square (world mm)."""
    s = DESTINATION_SIZE_MM
    lo, hi = margin, s - margin
    if rng.random() < 0.5:
        # convex blob: jittered radii around a centre
        cx = rng.uniform(lo + 70, hi - 70)
        cy = rng.uniform(lo + 70, hi - 70)
        nv = rng.integers(5, 9)
        angles = np.sort(rng.uniform(0, 2 * math.pi, nv))
        radii = rng.uniform(55, min(cx - lo, hi - cx, cy - lo, hi - cy), nv)
        pts = np.stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)], axis=1)
    else:
        # axis-aligned L with limb width >= 70 mm
        x0 = rng.uniform(lo, lo + 40)
        y0 = rng.uniform(lo, lo + 40)
        x1 = rng.uniform(hi - 40, hi)
        y1 = rng.uniform(hi - 40, hi)
        wx = rng.uniform(75, (x1 - x0) * 0.6)
        wy = rng.uniform(75, (y1 - y0) * 0.6)
        pts = np.array([(x0, y0), (x1, y0), (x1, y0 + wy), (x0 + wx, y0 + wy),
                        (x0 + wx, y1), (x0, y1)], dtype=np.float64)
    pts = pts + np.array([destination * s, 0.0])
    return geometry.ensure_ccw(pts)


def stage_job(scene: SceneSpec, destination: int, rng: np.random.Generator) -> None:
    """Place one random drop zone and randomize lighting for the next job."""
    for _ in range(50):
        try:
            scene.set_drop_zones(
                [DropZone(destination, random_drop_polygon(rng, destination))])
            break
        except SceneError:
            # a radial blob with near-duplicate angles can fail the
            # simplicity check; draw again
            continue
    else:
        raise SceneError("could not stage a valid drop zone")
    scene.lighting = Lighting(
        gain=float(rng.uniform(0.8, 1.2)),
        noise_sigma=float(rng.uniform(1.0, 3.0)),
        vignette=scene.lighting.vignette,
        seed=int(rng.integers(0, 2**31 - 1)),
    )
    scene.invalidate()


# --- simulation loop ----------------------------------------------------------


@dataclass
class TraceRecord:
    t: float
    pose: Pose2D
    phase: str
    error: float | None
    cmd: tuple[float, float]
    event: str | None

    def to_json(self) -> dict:
        return {
            "t": round(self.t, 4),
            "x": round(self.pose.x, 2),
            "y": round(self.pose.y, 2),
            "heading": round(self.pose.heading, 4),
            "state": self.phase,
            "error": None if self.error is None else round(self.error, 2),
            "cmd": [round(self.cmd[0], 2), round(self.cmd[1], 2)],
            "event": self.event,
        }


@dataclass
class JobResult:
    destination: int | None
    target: tuple[float, float] | None
    placed: tuple[float, float] | None
    steps: int
    timed_out: bool
    events: list[str]

    @property
    def completed(self) -> bool:
        return not self.timed_out and self.placed is not None


@dataclass
class SimTrace:
    records: list[TraceRecord]
    jobs: list[JobResult]

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_json()) + "\n")


def _perception_provider(scene: SceneSpec):
    from agvlab import perception

    return perception.compute_delivery(render_overhead(scene))


class Simulator:
    """Single-writer simulation loop; snapshots are safe between steps."""

    def __init__(self, scene: SceneSpec, cfg: NavConfig | None = None,
                 delivery_provider: Callable | None = None):
        self.scene = scene
        self.cfg = cfg or NavConfig()
        self.provider = delivery_provider or _perception_provider
        src = scene.track.source
        self.pose = Pose2D(src.pos[0], src.pos[1], self._initial_heading())
        self.nav = NavState()
        self.t = 0.0
        self.steps = 0
        self.records: list[TraceRecord] = []
        self.carrying = False
        self.object_pos: tuple[float, float] | None = None
        self.delivery = None
        self.last_event: str | None = None

    def _initial_heading(self) -> float:
        g = self.scene.track
        src = g.source
        first = g.nodes[g.adj[src.name][0]]
        return math.atan2(first.pos[1] - src.pos[1], first.pos[0] - src.pos[0])

    def step(self) -> NavEvent | None:
        frame = render_onboard(self.scene, self.pose, self.cfg)
        self.nav, cmd, event = nav_step(self.nav, frame, self.cfg)
        if event is NavEvent.PICK:
            self.carrying = True
            self.object_pos = None
        elif event is NavEvent.DROP:
            self._drop()
        elif event is NavEvent.REQUEST_DELIVERY_INFO:
            self.delivery = self.provider(self.scene)
            plan = plan_route(self.delivery.destination, self.scene.track)
            self.nav.provide_route(plan)
        self.pose = step_diff_drive(self.pose, cmd, self.cfg.wheelbase, self.cfg.dt)
        self.records.append(TraceRecord(
            self.t, self.pose, self.nav.phase.value, self.nav.last_error,
            (cmd.v_left, cmd.v_right), event.value if event else None))
        self.t += self.cfg.dt
        self.steps += 1
        self.last_event = event.value if event else self.last_event
        return event

    def _drop(self) -> None:
        if self.delivery is None or not self.carrying:
            return
        target = (self.delivery.drop_x_mm, self.delivery.drop_y_mm)
        rel = np.array(target) - np.array([self.pose.x, self.pose.y])
        ct, st = math.cos(self.pose.heading), math.sin(self.pose.heading)
        body = (ct * rel[0] + st * rel[1], -st * rel[0] + ct * rel[1])
        arm = ArmState()
        try:
            arm_ik_2link(body, arm.l1, arm.l2)
        except UnreachableTarget:
            return  # object stays on the AGV; the job will not count as placed
        self.carrying = False
        self.object_pos = target

    def run_job(self, max_steps: int = 20_000) -> JobResult:
        self.nav.start_job(self.cfg)
        self.delivery = None
        self.object_pos = None
        events: list[str] = []
        start = self.steps
        while self.steps - start < max_steps:
            ev = self.step()
            if ev is not None:
                events.append(ev.value)
            if self.nav.phase is NavPhase.DONE:
                dest = self.delivery.destination if self.delivery else None
                target = (None if self.delivery is None
                          else (self.delivery.drop_x_mm, self.delivery.drop_y_mm))
                return JobResult(dest, target, self.object_pos,
                                 self.steps - start, False, events)
        dest = self.delivery.destination if self.delivery else None
        return JobResult(dest, None, self.object_pos, self.steps - start, True, events)

    def snapshot(self) -> dict:
        return {
            "pose": {"x": self.pose.x, "y": self.pose.y, "heading": self.pose.heading},
            "state": self.nav.phase.value,
            "steps": self.steps,
            "sim_time_s": self.t,
            "carrying": self.carrying,
            "object": None if self.object_pos is None else list(self.object_pos),
            "last_event": self.last_event,
            "destination": None if self.delivery is None else self.delivery.destination,
        }


def sim_run(scene: SceneSpec, cfg: NavConfig | None = None, jobs: int = 1,
            seed: int = 0, delivery_provider: Callable | None = None,
            destinations: list[int] | None = None,
            max_steps_per_job: int = 20_000) -> SimTrace:
    """Run pick->deliver->return cycles; each job stages a fresh drop zone."""
    cfg = cfg or NavConfig()
    rng = np.random.default_rng(seed)
    sim = Simulator(scene, cfg, delivery_provider)
    results: list[JobResult] = []
    for j in range(jobs):
        dest = destinations[j] if destinations else int(rng.integers(0, 4))
        stage_job(scene, dest, rng)
        results.append(sim.run_job(max_steps_per_job))
    return SimTrace(sim.records, results)
