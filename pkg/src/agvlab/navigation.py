"""AGV decision layer: PID line following, junction handling, route planning.

The navigation state machine consumes onboard frames, runs the shared
imaging pipeline, and produces wheel commands plus pick/drop events.  It is
fed by the simulator (or a live agent) one frame at a time and never touches
world state itself.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from agvlab import imaging
from agvlab.imaging import BoundaryProfile, Morph, RoiSpec


class NavigationError(ValueError):
    pass


@dataclass(frozen=True)
class PidGains:
    kp: float = 1.0
    kd: float = 1.0
    ki: float = 0.0


@dataclass(frozen=True)
class PidState:
    prev_error: float = 0.0
    integral: float = 0.0


@dataclass(frozen=True)
class WheelSpeeds:
    v_left: float
    v_right: float


class JunctionType(enum.Enum):
    STRAIGHT = "straight"
    LEFT_BRANCH = "left_branch"
    RIGHT_BRANCH = "right_branch"
    T_JUNCTION = "t_junction"
    CROSS = "cross"
    TERMINAL = "terminal"


class Decision(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    STRAIGHT = "straight"


class TurnKind(enum.Enum):
    TURN_LEFT_90 = "left_90"
    TURN_RIGHT_90 = "right_90"
    TURN_180 = "turn_180"


class NavEvent(enum.Enum):
    PICK = "pick"
    DROP = "drop"
    REQUEST_DELIVERY_INFO = "request_delivery_info"


@dataclass
class NavConfig:
    gains: PidGains = field(default_factory=PidGains)
    k_turn: float = 0.5          # mm/s of wheel-speed split per px of steer
    base_speed: float = 100.0    # mm/s
    v_max: float = 120.0         # mm/s
    turn_speed: float = 60.0     # mm/s wheel speed during in-place turns
    wheelbase: float = 120.0     # mm
    dt: float = 1.0 / 30.0       # control period, 30 Hz loop
    frame_px: int = 300
    patch_mm: float = 240.0      # ground extent covered by the onboard frame
    roi_height_frac: float = 0.4  # bottom band of the frame, full width
    theta_side: float = 0.15
    theta_top: float = 0.10
    theta_mass: float = 0.005
    junction_debounce_mm: float = 60.0
    turn_clear_mm: float = 40.0  # straight run after a turn before PID resumes
    min_junction_mm: float = 20.0  # side-strip hits nearer than this are noise

    @property
    def mm_per_px(self) -> float:
        return self.patch_mm / self.frame_px

    def roi(self) -> RoiSpec:
        h = int(round(self.frame_px * self.roi_height_frac))
        return RoiSpec(0, self.frame_px - h, self.frame_px, h)

    @classmethod
    def from_file(cls, path) -> "NavConfig":
        """Load overrides from a ``key = value`` config file ('#' comments)."""
        cfg = cls()
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise NavigationError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (s.strip() for s in line.split("=", 1))
                if key in ("kp", "kd", "ki"):
                    cfg.gains = replace(cfg.gains, **{key: float(value)})
                elif hasattr(cfg, key) and key not in ("gains",):
                    cur = getattr(cfg, key)
                    setattr(cfg, key, type(cur)(value) if not isinstance(cur, float) else float(value))
                else:
                    raise NavigationError(f"{path}:{lineno}: unknown config key {key!r}")
        return cfg


def pid_step(gains: PidGains, state: PidState, error: float) -> tuple[float, PidState]:
    """One PID update: kp*e + kd*(e - prev) + ki*(integral + e)."""
    if not math.isfinite(error):
        raise NavigationError(f"non-finite error {error}")
    integral = state.integral + error
    steer = gains.kp * error + gains.kd * (error - state.prev_error) + gains.ki * integral
    return steer, PidState(prev_error=error, integral=integral)


def wheel_command(steer: float, base: float, k_turn: float, v_max: float = 120.0) -> WheelSpeeds:
    """Split a steer value into differential wheel speeds, clamped to +-v_max."""
    if base < 0:
        raise NavigationError("base speed must be >= 0")
    clamp = lambda v: max(-v_max, min(v_max, v))
    return WheelSpeeds(clamp(base + k_turn * steer), clamp(base - k_turn * steer))


def classify_junction(profile: BoundaryProfile, mass: float, cfg: NavConfig) -> JunctionType:
    """Total classification of an ROI boundary profile.

    Side strips drive the branch decisions; the top strip separates
    T-junctions from crossings; an all-empty ROI is a terminal.
    """
    p = profile
    if (mass <= cfg.theta_mass and p.left <= cfg.theta_mass and p.right <= cfg.theta_mass
            and p.top <= cfg.theta_mass and p.bottom <= cfg.theta_mass):
        return JunctionType.TERMINAL
    left_on = p.left > cfg.theta_side
    right_on = p.right > cfg.theta_side
    if left_on and right_on:
        return JunctionType.CROSS if p.top > cfg.theta_top else JunctionType.T_JUNCTION
    if left_on:
        return JunctionType.LEFT_BRANCH
    if right_on:
        return JunctionType.RIGHT_BRANCH
    return JunctionType.STRAIGHT


# --- track topology & route planning -----------------------------------------


@dataclass(frozen=True)
class TrackNode:
    name: str
    pos: tuple[float, float]   # world mm, y up
    kind: str                  # "source" | "junction" | "terminal"
    destination: int | None = None


@dataclass
class TrackGraph:
    """Undirected track graph; edges are straight strokes between nodes."""

    nodes: dict[str, TrackNode]
    edges: list[tuple[str, str]]

    def __post_init__(self):
        self.adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            self.adj[a].append(b)
            self.adj[b].append(a)

    @property
    def source(self) -> TrackNode:
        for n in self.nodes.values():
            if n.kind == "source":
                return n
        raise NavigationError("track has no source node")

    def terminal(self, destination: int) -> TrackNode:
        for n in self.nodes.values():
            if n.kind == "terminal" and n.destination == destination:
                return n
        raise NavigationError(f"track has no terminal for destination {destination}")

    def path(self, start: str, goal: str) -> list[str]:
        prev: dict[str, str | None] = {start: None}
        queue = [start]
        while queue:
            cur = queue.pop(0)
            if cur == goal:
                out = [cur]
                while prev[out[-1]] is not None:
                    out.append(prev[out[-1]])
                return out[::-1]
            for nb in self.adj[cur]:
                if nb not in prev:
                    prev[nb] = cur
                    queue.append(nb)
        raise NavigationError(f"no path from {start} to {goal}")


@dataclass(frozen=True)
class RoutePlan:
    destination: int
    outbound: tuple[Decision, ...]
    inbound: tuple[Decision, ...]


def _leg_decisions(graph: TrackGraph, path: list[str]) -> list[Decision]:
    decisions = []
    for i in range(1, len(path) - 1):
        prev_p = np.array(graph.nodes[path[i - 1]].pos)
        cur_p = np.array(graph.nodes[path[i]].pos)
        next_p = np.array(graph.nodes[path[i + 1]].pos)
        din = cur_p - prev_p
        dout = next_p - cur_p
        cross = din[0] * dout[1] - din[1] * dout[0]
        dot = float(din @ dout)
        if abs(cross) < 1e-9 and dot > 0:
            # straight through; only a visible junction needs a decision
            if len(graph.adj[path[i]]) >= 3:
                decisions.append(Decision.STRAIGHT)
        elif cross > 0:
            decisions.append(Decision.LEFT)
        else:
            decisions.append(Decision.RIGHT)
    return decisions


def plan_route(destination: int, graph: TrackGraph) -> RoutePlan:
    """Outbound/inbound junction decisions from the source to a destination."""
    source = graph.source
    terminal = graph.terminal(destination)
    out_path = graph.path(source.name, terminal.name)
    return RoutePlan(
        destination=destination,
        outbound=tuple(_leg_decisions(graph, out_path)),
        inbound=tuple(_leg_decisions(graph, out_path[::-1])),
    )


# --- open-loop turn scripts ---------------------------------------------------


@dataclass(frozen=True)
class ScriptEntry:
    speeds: WheelSpeeds
    duration: float  # seconds


def turn_script(kind: TurnKind, cfg: NavConfig) -> list[ScriptEntry]:
    """In-place rotation script; integrates to the nominal angle exactly.

    The duration is quantized up to a whole number of control periods and
    the wheel speed rescaled so duration = angle * wheelbase / (2 * speed)
    still holds exactly.  Ends with a zero-speed entry.
    """

    def rotation(angle: float, ccw: bool) -> ScriptEntry:
        nominal = angle * cfg.wheelbase / (2.0 * cfg.turn_speed)
        steps = max(1, math.ceil(nominal / cfg.dt - 1e-9))
        duration = steps * cfg.dt
        s = angle * cfg.wheelbase / (2.0 * duration)
        speeds = WheelSpeeds(-s, s) if ccw else WheelSpeeds(s, -s)
        return ScriptEntry(speeds, duration)

    if kind is TurnKind.TURN_LEFT_90:
        entries = [rotation(math.pi / 2, ccw=True)]
    elif kind is TurnKind.TURN_RIGHT_90:
        entries = [rotation(math.pi / 2, ccw=False)]
    else:
        quarter = rotation(math.pi / 2, ccw=True)
        entries = [quarter, quarter]
    entries.append(ScriptEntry(WheelSpeeds(0.0, 0.0), 0.0))
    return entries


# --- navigation state machine -------------------------------------------------


class NavPhase(enum.Enum):
    IDLE = "idle"
    LINE_FOLLOW = "line_follow"
    TURNING = "turning"
    AT_TERMINAL = "at_terminal"
    PICKING = "picking"
    DROPPING = "dropping"
    RETURNING = "returning"
    DONE = "done"


@dataclass
class TurnExec:
    advance_mm: float
    script: list[ScriptEntry]
    entry_index: int = 0
    time_in_entry: float = 0.0
    clear_mm: float = 0.0
    next_phase: NavPhase = NavPhase.LINE_FOLLOW


@dataclass
class NavState:
    phase: NavPhase = NavPhase.IDLE
    plan: RoutePlan | None = None
    leg: str = "outbound"
    cursor: int = 0
    pid: PidState = field(default_factory=PidState)
    debounce_mm: float = 0.0
    turn: TurnExec | None = None
    awaiting_route: bool = False
    picked: bool = False
    needs_uturn: bool = False   # facing away from the track after a return leg
    junctions_seen: int = 0
    last_error: float | None = None

    def start_job(self, cfg: NavConfig) -> None:
        """Begin a transport job from the source terminal."""
        if self.phase not in (NavPhase.IDLE, NavPhase.DONE):
            raise NavigationError(f"cannot start a job in phase {self.phase}")
        self.plan = None
        self.cursor = 0
        self.leg = "outbound"
        self.pid = PidState()
        self.awaiting_route = False
        self.picked = False
        if self.needs_uturn:
            self.turn = TurnExec(0.0, turn_script(TurnKind.TURN_180, cfg),
                                 clear_mm=0.0, next_phase=NavPhase.PICKING)
            self.phase = NavPhase.TURNING
            self.needs_uturn = False
        else:
            self.phase = NavPhase.PICKING

    def provide_route(self, plan: RoutePlan) -> None:
        if not self.awaiting_route:
            raise NavigationError("no delivery-info request is pending")
        self.plan = plan
        self.awaiting_route = False
        self.cursor = 0
        self.leg = "outbound"
        self.pid = PidState()
        self.debounce_mm = 60.0  # settle onto the line before junction logic
        self.phase = NavPhase.LINE_FOLLOW


def run_onboard_pipeline(frame: np.ndarray, cfg: NavConfig):
    """gray -> blur -> OTSU -> open (erode, dilate) -> ROI measurements."""
    blurred = imaging.gaussian_blur3(frame)
    _, bits = imaging.segment_otsu(blurred)
    bits = imaging.morph(imaging.morph(bits, Morph.ERODE), Morph.DILATE)
    roi = cfg.roi()
    error = imaging.path_error(bits, roi)
    profile = imaging.boundary_profile(bits, roi)
    mass = imaging.roi_path_fraction(bits, roi)
    return bits, error, profile, mass


def _estimate_junction_distance(bits: np.ndarray, cfg: NavConfig) -> float:
    """Distance to the junction bar, from side-strip path rows in the ROI."""
    roi = cfg.roi()
    window = roi.slice(bits)
    rows = np.concatenate([np.nonzero(window[:, 0])[0], np.nonzero(window[:, -1])[0]])
    if rows.size == 0:
        return 0.0
    mean_row = float(rows.mean()) + roi.y0
    return (cfg.frame_px - 1 - mean_row) * cfg.mm_per_px


_STOP = WheelSpeeds(0.0, 0.0)


def _decisions(state: NavState) -> tuple[Decision, ...]:
    assert state.plan is not None
    return state.plan.outbound if state.leg == "outbound" else state.plan.inbound


def nav_step(state: NavState, frame: np.ndarray, cfg: NavConfig
             ) -> tuple[NavState, WheelSpeeds, NavEvent | None]:
    """Advance the state machine by one control period."""
    if frame.shape != (cfg.frame_px, cfg.frame_px):
        raise NavigationError(
            f"expected {cfg.frame_px}x{cfg.frame_px} frame, got {frame.shape}")

    if state.phase in (NavPhase.IDLE, NavPhase.DONE):
        return state, _STOP, None

    if state.phase is NavPhase.PICKING:
        if not state.picked:
            state.picked = True
            return state, _STOP, NavEvent.PICK
        if not state.awaiting_route:
            state.awaiting_route = True
            return state, _STOP, NavEvent.REQUEST_DELIVERY_INFO
        return state, _STOP, None  # waiting for provide_route()

    if state.phase is NavPhase.TURNING:
        return _step_turning(state, cfg)

    if state.phase is NavPhase.AT_TERMINAL:
        if state.leg == "outbound":
            state.phase = NavPhase.DROPPING
            return state, _STOP, NavEvent.DROP
        state.phase = NavPhase.DONE
        state.needs_uturn = True
        return state, _STOP, None

    if state.phase is NavPhase.DROPPING:
        # object released; U-turn and run the inbound leg
        state.leg = "inbound"
        state.cursor = 0
        state.turn = TurnExec(0.0, turn_script(TurnKind.TURN_180, cfg),
                              clear_mm=0.0, next_phase=NavPhase.RETURNING)
        state.phase = NavPhase.TURNING
        return state, _STOP, None

    # LINE_FOLLOW / RETURNING
    bits, error, profile, mass = run_onboard_pipeline(frame, cfg)
    state.last_error = error
    if error is None:
        state.phase = NavPhase.AT_TERMINAL
        return state, _STOP, None

    travelled = cfg.base_speed * cfg.dt
    junction = None
    if state.debounce_mm > 0:
        state.debounce_mm = max(0.0, state.debounce_mm - travelled)
    else:
        kind = classify_junction(profile, mass, cfg)
        if kind not in (JunctionType.STRAIGHT, JunctionType.TERMINAL):
            junction = kind

    if junction is not None and state.plan is not None:
        advance = _estimate_junction_distance(bits, cfg)
        if advance < cfg.min_junction_mm:
            # A slightly skewed followed line can clip a side strip right at
            # the frame bottom; a real junction bar enters from farther up.
            junction = None
    if junction is not None and state.plan is not None:
        decisions = _decisions(state)
        state.junctions_seen += 1
        if state.cursor < len(decisions):
            decision = decisions[state.cursor]
            state.cursor += 1
        else:
            decision = Decision.STRAIGHT  # unplanned junction: keep going
        if decision is Decision.STRAIGHT:
            state.debounce_mm = advance + cfg.junction_debounce_mm
        else:
            kind = TurnKind.TURN_LEFT_90 if decision is Decision.LEFT else TurnKind.TURN_RIGHT_90
            back = NavPhase.RETURNING if state.leg == "inbound" else NavPhase.LINE_FOLLOW
            state.turn = TurnExec(advance, turn_script(kind, cfg),
                                  clear_mm=cfg.turn_clear_mm, next_phase=back)
            state.phase = NavPhase.TURNING
            return state, WheelSpeeds(cfg.base_speed, cfg.base_speed), None

    steer, state.pid = pid_step(cfg.gains, state.pid, error)
    cmd = wheel_command(steer, cfg.base_speed, cfg.k_turn, cfg.v_max)
    return state, cmd, None


def _step_turning(state: NavState, cfg: NavConfig) -> tuple[NavState, WheelSpeeds, None]:
    turn = state.turn
    assert turn is not None
    if turn.advance_mm > 0:
        turn.advance_mm -= cfg.base_speed * cfg.dt
        return state, WheelSpeeds(cfg.base_speed, cfg.base_speed), None
    while turn.entry_index < len(turn.script):
        entry = turn.script[turn.entry_index]
        if turn.time_in_entry + 1e-9 < entry.duration:
            turn.time_in_entry += cfg.dt
            return state, entry.speeds, None
        turn.entry_index += 1
        turn.time_in_entry = 0.0
    if turn.clear_mm > 0:
        turn.clear_mm -= cfg.base_speed * cfg.dt
        return state, WheelSpeeds(cfg.base_speed, cfg.base_speed), None
    state.phase = turn.next_phase
    state.turn = None
    state.pid = PidState()
    state.debounce_mm = cfg.junction_debounce_mm
    return state, _STOP, None
