"""World model: agents, tracks, scenarios and observation windows.

Everything lives in a fixed East-North ground frame in meters. Timestamps are
seconds. Tracks are nominally 10 Hz and may drop frames; gaps up to
``PlannerConfig.max_gap`` are bridged by linear interpolation.
"""

from __future__ import annotations

import bisect
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Mapping, Sequence

from .config import PlannerConfig, n_steps
from .errors import InsufficientHistoryError, ScenarioParseError, StructuralError, TimeRangeError

logger = logging.getLogger(__name__)

TIME_EPS = 1e-6


class Category(str, Enum):
    CAR = "car"
    TRUCK = "truck"
    MOTORCYCLE = "motorcycle"
    CYCLIST = "cyclist"
    PEDESTRIAN = "pedestrian"
    OTHER = "other"


# length x width, meters; used where a log carries no footprint
DEFAULT_FOOTPRINTS: dict[Category, tuple[float, float]] = {
    Category.CAR: (4.5, 2.0),
    Category.TRUCK: (8.0, 2.5),
    Category.MOTORCYCLE: (2.2, 0.8),
    Category.CYCLIST: (1.8, 0.6),
    Category.PEDESTRIAN: (0.6, 0.6),
    Category.OTHER: (4.5, 2.0),
}

CAMERA_NAMES = ("front", "front_left", "front_right")


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(theta, math.tau)
    return math.pi if a == -math.pi else a


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class AgentState:
    agent_id: str
    position: tuple[float, float]
    velocity: tuple[float, float]
    heading: float
    footprint: tuple[float, float]
    category: Category = Category.CAR

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "velocity", (float(self.velocity[0]), float(self.velocity[1])))
        object.__setattr__(self, "footprint", (float(self.footprint[0]), float(self.footprint[1])))
        if not isinstance(self.category, Category):
            object.__setattr__(self, "category", Category(self.category))
        if not _finite(*self.position, *self.velocity, self.heading, *self.footprint):
            raise ValueError(f"agent {self.agent_id}: non-finite state")
        if self.footprint[0] <= 0 or self.footprint[1] <= 0:
            raise ValueError(f"agent {self.agent_id}: footprint must be positive")
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)

    def moved(self, dt: float) -> "AgentState":
        """Constant-velocity extrapolation by ``dt`` seconds."""
        x, y = self.position
        vx, vy = self.velocity
        return AgentState(self.agent_id, (x + vx * dt, y + vy * dt), self.velocity, self.heading,
                          self.footprint, self.category)


def _interpolate(a: AgentState, b: AgentState, w: float) -> AgentState:
    (x0, y0), (x1, y1) = a.position, b.position
    (u0, v0), (u1, v1) = a.velocity, b.velocity
    dh = normalize_angle(b.heading - a.heading)
    return AgentState(
        a.agent_id,
        (x0 + w * (x1 - x0), y0 + w * (y1 - y0)),
        (u0 + w * (u1 - u0), v0 + w * (v1 - v0)),
        a.heading + w * dh,
        a.footprint,
        a.category,
    )


@dataclass(frozen=True)
class AgentTrack:
    agent_id: str
    samples: tuple[tuple[float, AgentState], ...]

    def __post_init__(self):
        samples = tuple((float(t), s) for t, s in self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise ValueError(f"track {self.agent_id} has no samples")
        for i, (t, s) in enumerate(samples):
            if s.agent_id != self.agent_id:
                raise ValueError(f"track {self.agent_id}: sample {i} belongs to {s.agent_id}")
            if not math.isfinite(t):
                raise ValueError(f"track {self.agent_id}: non-finite timestamp")
            if i and t <= samples[i - 1][0]:
                raise ValueError(f"track {self.agent_id}: timestamp {t!r} does not increase")
            if s.footprint != samples[0][1].footprint or s.category != samples[0][1].category:
                raise ValueError(f"track {self.agent_id}: footprint/category changes mid-track")

    @cached_property
    def times(self) -> list[float]:
        return [t for t, _ in self.samples]

    @property
    def start(self) -> float:
        return self.samples[0][0]

    @property
    def end(self) -> float:
        return self.samples[-1][0]

    @property
    def footprint(self) -> tuple[float, float]:
        return self.samples[0][1].footprint

    @property
    def category(self) -> Category:
        return self.samples[0][1].category

    def state_at(self, t: float, max_gap: float = 0.3) -> AgentState | None:
        """State at ``t`` from an exact sample or by interpolating across a gap
        of at most ``max_gap``; ``None`` outside the track or across bigger gaps."""
        times = self.times
        i = bisect.bisect_left(times, t - TIME_EPS)
        if i < len(times) and abs(times[i] - t) <= TIME_EPS:
            return self.samples[i][1]
        if i == 0 or i == len(times):
            return None
        t0, s0 = self.samples[i - 1]
        t1, s1 = self.samples[i]
        if t1 - t0 > max_gap + TIME_EPS:
            return None
        return _interpolate(s0, s1, (t - t0) / (t1 - t0))

    def last_sample_before(self, t: float) -> tuple[float, AgentState] | None:
        i = bisect.bisect_right(self.times, t + TIME_EPS)
        return self.samples[i - 1] if i else None

    def clipped(self, t0: float, t1: float) -> "AgentTrack | None":
        kept = [(t, s) for t, s in self.samples if t0 - TIME_EPS <= t <= t1 + TIME_EPS]
        return AgentTrack(self.agent_id, tuple(kept)) if kept else None


@dataclass(frozen=True)
class CollisionRecord:
    colliding_agent_id: str
    impact_time: float


@dataclass(frozen=True)
class CameraFrame:
    timestamp: float
    camera: str
    image_path: str


@dataclass(frozen=True)
class Environment:
    weather: str
    lighting: str
    road_layout: str

    def __post_init__(self):
        for name in ("weather", "lighting", "road_layout"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"environment.{name} must be a non-empty string")


@dataclass(frozen=True)
class Scenario:
    scene_id: str
    ego_id: str
    tracks: tuple[AgentTrack, ...]
    environment: Environment
    camera_frames: tuple[CameraFrame, ...] = ()
    collision: CollisionRecord | None = None

    def __post_init__(self):
        tracks = tuple(sorted(self.tracks, key=lambda tr: tr.agent_id))
        object.__setattr__(self, "tracks", tracks)
        object.__setattr__(self, "camera_frames",
                           tuple(sorted(self.camera_frames, key=lambda c: (c.timestamp, c.camera))))
        ids = [tr.agent_id for tr in tracks]
        if len(set(ids)) != len(ids):
            raise StructuralError(f"scene {self.scene_id}: duplicate agent ids")
        if self.ego_id not in ids:
            raise StructuralError(f"scene {self.scene_id}: ego_id {self.ego_id!r} has no track")
        for cam in self.camera_frames:
            if cam.camera not in CAMERA_NAMES:
                raise StructuralError(f"scene {self.scene_id}: unknown camera {cam.camera!r}")
        if self.collision is not None:
            c = self.collision
            if c.colliding_agent_id not in ids or c.colliding_agent_id == self.ego_id:
                raise StructuralError(f"scene {self.scene_id}: colliding agent {c.colliding_agent_id!r} not a neighbor track")
            lo, hi = self.time_span
            if not lo - TIME_EPS <= c.impact_time <= hi + TIME_EPS:
                raise StructuralError(f"scene {self.scene_id}: impact_time {c.impact_time} outside scene span")

    @cached_property
    def _by_id(self) -> dict[str, AgentTrack]:
        return {tr.agent_id: tr for tr in self.tracks}

    def track(self, agent_id: str) -> AgentTrack:
        return self._by_id[agent_id]

    @property
    def ego(self) -> AgentTrack:
        return self._by_id[self.ego_id]

    @property
    def neighbors(self) -> tuple[AgentTrack, ...]:
        return tuple(tr for tr in self.tracks if tr.agent_id != self.ego_id)

    @property
    def time_span(self) -> tuple[float, float]:
        return min(tr.start for tr in self.tracks), max(tr.end for tr in self.tracks)

    def in_preimpact_window(self, t: float, cfg: PlannerConfig) -> bool:
        if self.collision is None:
            return False
        impact = self.collision.impact_time
        return impact - cfg.preimpact_window - TIME_EPS <= t <= impact + TIME_EPS


@dataclass(frozen=True)
class ObservationWindow:
    """What the planner sees at analysis time ``time``.

    Histories are resampled on the ``rollout_dt`` grid over
    ``[time - history_horizon, time]``. A neighbor whose log stops shortly
    before ``time`` keeps its raw last sample and is treated as stale.
    """

    scene_id: str
    time: float
    ego_history: AgentTrack
    neighbor_histories: tuple[AgentTrack, ...] = ()
    camera_refs: tuple[CameraFrame, ...] = ()

    @property
    def ego_state(self) -> AgentState:
        return self.ego_history.samples[-1][1]

    def neighbor_states(self) -> dict[str, tuple[AgentState, float]]:
        """Each neighbor's state at ``time`` and how stale its anchor was (s)."""
        out = {}
        for tr in self.neighbor_histories:
            t_last, s_last = tr.samples[-1]
            lag = max(0.0, self.time - t_last)
            out[tr.agent_id] = (s_last.moved(lag) if lag > TIME_EPS else s_last, lag)
        return out


def _grid(t: float, cfg: PlannerConfig) -> list[float]:
    n = n_steps(cfg.history_horizon, cfg.rollout_dt)
    return [round(t - (n - k) * cfg.rollout_dt, 9) for k in range(n + 1)]


def extract_window(s: Scenario, t: float, cfg: PlannerConfig, radius: float | None = None) -> ObservationWindow:
    """Clip the scenario to the history window ending at ``t``.

    Neighbors farther than ``radius`` (default ``cfg.neighbor_radius``) from
    the ego at ``t`` are left out.
    """
    radius = cfg.neighbor_radius if radius is None else radius
    ego = s.ego
    if t - cfg.history_horizon < ego.start - TIME_EPS or t > ego.end + TIME_EPS:
        raise TimeRangeError(
            f"scene {s.scene_id}: t={t} needs ego history from {t - cfg.history_horizon}, "
            f"track covers [{ego.start}, {ego.end}]")
    grid = _grid(t, cfg)
    ego_samples = []
    for g in grid:
        state = ego.state_at(g, cfg.max_gap)
        if state is None:
            raise InsufficientHistoryError(f"scene {s.scene_id}: ego gap > {cfg.max_gap} s near t={g}")
        ego_samples.append((g, state))
    ego_hist = AgentTrack(s.ego_id, tuple(ego_samples))
    ego_pos = ego_samples[-1][1].position

    neighbors = []
    for tr in s.neighbors:
        now = tr.state_at(t, cfg.max_gap)
        if now is None:
            last = tr.last_sample_before(t)
            if last is None or t - last[0] > cfg.max_gap + TIME_EPS:
                continue
            now = last[1].moved(t - last[0])
        if math.dist(now.position, ego_pos) > radius:
            continue
        hist = [(g, st) for g in grid if (st := tr.state_at(g, cfg.max_gap)) is not None]
        last = tr.last_sample_before(t)
        if last is not None and (not hist or last[0] > hist[-1][0] + TIME_EPS) \
                and last[0] >= grid[0] - TIME_EPS:
            hist.append(last)
        if not hist:
            continue
        neighbors.append(AgentTrack(tr.agent_id, tuple(hist)))

    cams = tuple(c for c in s.camera_frames if grid[0] - TIME_EPS <= c.timestamp <= t + TIME_EPS)
    return ObservationWindow(s.scene_id, t, ego_hist, tuple(neighbors), cams)


def risk_window(s: Scenario, t: float, cfg: PlannerConfig) -> ObservationWindow:
    """Window over ``cfg.risk_radius``, used for labeling and planning."""
    return extract_window(s, t, cfg, cfg.risk_radius)


# ---------------------------------------------------------------------------
# canonical JSON format

_TOP_KEYS = {"scene_id", "ego_id", "tracks", "camera_frames", "environment", "collision"}
_TRACK_KEYS = {"agent_id", "category", "footprint", "samples"}
_SAMPLE_KEYS = {"t", "x", "y", "vx", "vy", "heading"}


def _check_keys(obj: Any, allowed: set[str], required: set[str], locus: str, strict: bool) -> None:
    if not isinstance(obj, dict):
        raise ScenarioParseError("expected an object", locus)
    missing = required - obj.keys()
    if missing:
        raise ScenarioParseError(f"missing key(s) {sorted(missing)}", locus)
    unknown = obj.keys() - allowed
    if unknown:
        if strict:
            raise ScenarioParseError(f"unknown key(s) {sorted(unknown)}", locus)
        logger.warning("%s: ignoring unknown key(s) %s", locus or "<root>", sorted(unknown))


def _num(obj: Mapping, key: str, locus: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioParseError(f"expected a finite number, got {value!r}", f"{locus}.{key}")
    return float(value)


def _str(obj: Mapping, key: str, locus: str) -> str:
    value = obj[key]
    if not isinstance(value, str) or not value:
        raise ScenarioParseError(f"expected a non-empty string, got {value!r}", f"{locus}.{key}")
    return value


def _parse_canonical(doc: Any, strict: bool) -> Scenario:
    _check_keys(doc, _TOP_KEYS, _TOP_KEYS - {"camera_frames", "collision"}, "", strict)
    scene_id = _str(doc, "scene_id", "scene")
    ego_id = _str(doc, "ego_id", "scene")

    env = doc["environment"]
    _check_keys(env, {"weather", "lighting", "road_layout"}, {"weather", "lighting", "road_layout"},
                "environment", strict)
    try:
        environment = Environment(env["weather"], env["lighting"], env["road_layout"])
    except ValueError as exc:
        raise ScenarioParseError(str(exc), "environment") from exc

    if not isinstance(doc["tracks"], list):
        raise ScenarioParseError("expected a list", "tracks")
    tracks, dropped = [], 0
    for i, tr in enumerate(doc["tracks"]):
        loc = f"tracks[{i}]"
        _check_keys(tr, _TRACK_KEYS, _TRACK_KEYS, loc, strict)
        agent_id = _str(tr, "agent_id", loc)
        try:
            category = Category(tr["category"])
        except ValueError:
            if strict:
                raise ScenarioParseError(f"unknown category {tr['category']!r}", f"{loc}.category") from None
            dropped += 1
            continue
        fp = tr["footprint"]
        if not (isinstance(fp, list) and len(fp) == 2):
            raise ScenarioParseError("expected [length, width]", f"{loc}.footprint")
        footprint = (_num({"l": fp[0]}, "l", f"{loc}.footprint"), _num({"w": fp[1]}, "w", f"{loc}.footprint"))
        if not isinstance(tr["samples"], list):
            raise ScenarioParseError("expected a list", f"{loc}.samples")
        samples = []
        for j, sm in enumerate(tr["samples"]):
            sloc = f"{loc}.samples[{j}]"
            _check_keys(sm, _SAMPLE_KEYS, _SAMPLE_KEYS, sloc, strict)
            t = _num(sm, "t", sloc)
            if samples and t <= samples[-1][0]:
                raise ScenarioParseError(
                    f"timestamp {t!r} does not increase (previous {samples[-1][0]!r})", f"{sloc}.t")
            try:
                state = AgentState(agent_id, (_num(sm, "x", sloc), _num(sm, "y", sloc)),
                                   (_num(sm, "vx", sloc), _num(sm, "vy", sloc)), _num(sm, "heading", sloc),
                                   footprint, category)
            except ValueError as exc:
                raise ScenarioParseError(str(exc), sloc) from exc
            samples.append((t, state))
        if not samples:
            raise ScenarioParseError("track has no samples", f"{loc}.samples")
        tracks.append(AgentTrack(agent_id, tuple(samples)))
    if dropped:
        logger.warning("scene %s: dropped %d agent(s) with unknown category", scene_id, dropped)

    cams = []
    for i, c in enumerate(doc.get("camera_frames") or []):
        loc = f"camera_frames[{i}]"
        _check_keys(c, {"t", "camera", "image_path"}, {"t", "camera", "image_path"}, loc, strict)
        cams.append(CameraFrame(_num(c, "t", loc), _str(c, "camera", loc), _str(c, "image_path", loc)))

    collision = None
    if doc.get("collision") is not None:
        c = doc["collision"]
        keys = {"colliding_agent_id", "impact_time"}
        _check_keys(c, keys, keys, "collision", strict)
        collision = CollisionRecord(_str(c, "colliding_agent_id", "collision"), _num(c, "impact_time", "collision"))

    return Scenario(scene_id, ego_id, tuple(tracks), environment, tuple(cams), collision)


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    return {
        "scene_id": s.scene_id,
        "ego_id": s.ego_id,
        "environment": {"weather": s.environment.weather, "lighting": s.environment.lighting,
                        "road_layout": s.environment.road_layout},
        "collision": None if s.collision is None else {
            "colliding_agent_id": s.collision.colliding_agent_id, "impact_time": s.collision.impact_time},
        "camera_frames": [{"t": c.timestamp, "camera": c.camera, "image_path": c.image_path}
                          for c in s.camera_frames],
        "tracks": [
            {
                "agent_id": tr.agent_id,
                "category": tr.category.value,
                "footprint": list(tr.footprint),
                "samples": [{"t": t, "x": st.position[0], "y": st.position[1], "vx": st.velocity[0],
                             "vy": st.velocity[1], "heading": st.heading} for t, st in tr.samples],
            }
            for tr in s.tracks
        ],
    }


def write_scenario(s: Scenario) -> bytes:
    """Serialize to canonical JSON; floats keep full precision."""
    return (json.dumps(scenario_to_dict(s), indent=1, sort_keys=True) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# DeepAccident-style per-frame logs (JSON lines: one header, then one line per frame)

_DA_CATEGORIES = {
    "car": Category.CAR, "van": Category.CAR, "vehicle": Category.CAR,
    "truck": Category.TRUCK, "bus": Category.TRUCK,
    "motorcycle": Category.MOTORCYCLE, "motorbike": Category.MOTORCYCLE,
    "cyclist": Category.CYCLIST, "bicycle": Category.CYCLIST,
    "pedestrian": Category.PEDESTRIAN, "walker": Category.PEDESTRIAN,
}


def _parse_deepaccident(text: str) -> Scenario:
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ScenarioParseError("empty log", "line 1")
    records = []
    for n, ln in lines:
        try:
            records.append((n, json.loads(ln)))
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(exc.msg, f"line {n}") from exc
    (hn, header), frames = records[0], records[1:]
    for key in ("scene_id", "environment"):
        if key not in header:
            raise ScenarioParseError(f"header missing {key!r}", f"line {hn}")

    per_agent: dict[str, list[tuple[float, AgentState]]] = {}
    cams: list[CameraFrame] = []
    ego_id = header.get("ego_id")
    dropped: set[str] = set()
    last_t = -math.inf
    for n, fr in frames:
        if "timestamp" not in fr or "agents" not in fr:
            raise ScenarioParseError("frame needs 'timestamp' and 'agents'", f"line {n}")
        t = float(fr["timestamp"])
        if t <= last_t:
            raise ScenarioParseError(f"timestamp {t!r} does not increase", f"line {n}")
        last_t = t
        for cam, path in sorted((fr.get("cameras") or {}).items()):
            cams.append(CameraFrame(t, cam, path))
        for k, ag in enumerate(fr["agents"]):
            loc = f"line {n}, agents[{k}]"
            try:
                aid = str(ag["id"])
                kind = str(ag.get("type", "car")).lower()
                if ag.get("is_ego"):
                    ego_id = ego_id or aid
                category = _DA_CATEGORIES.get(kind)
                if category is None:
                    dropped.add(aid)
                    continue
                default = DEFAULT_FOOTPRINTS[category]
                footprint = (float(ag.get("length", default[0])), float(ag.get("width", default[1])))
                state = AgentState(aid, (float(ag["x"]), float(ag["y"])),
                                   (float(ag.get("vx", 0.0)), float(ag.get("vy", 0.0))),
                                   float(ag.get("yaw", 0.0)), footprint, category)
            except (KeyError, TypeError, ValueError) as exc:
                raise ScenarioParseError(f"bad agent record: {exc}", loc) from exc
            per_agent.setdefault(aid, []).append((t, state))
    if dropped:
        logger.warning("scene %s: dropped %d agent(s) of unknown type", header["scene_id"], len(dropped))
    if ego_id is None:
        raise StructuralError(f"scene {header['scene_id']}: no ego agent identified")

    collision = None
    if header.get("collision"):
        c = header["collision"]
        collision = CollisionRecord(str(c["colliding_agent_id"]), float(c["impact_time"]))
    env = header["environment"]
    try:
        environment = Environment(env.get("weather", ""), env.get("lighting", ""), env.get("road_layout", ""))
    except ValueError as exc:
        raise ScenarioParseError(str(exc), f"line {hn}") from exc
    tracks = tuple(AgentTrack(aid, tuple(smp)) for aid, smp in per_agent.items())
    return Scenario(str(header["scene_id"]), str(ego_id), tracks, environment, tuple(cams), collision)


def load_scenario(source: bytes | str, format: str = "canonical", strict: bool = False) -> Scenario:
    """Decode a scenario from bytes in the named format."""
    text = source.decode("utf-8") if isinstance(source, (bytes, bytearray)) else source
    if format == "deepaccident_log":
        return _parse_deepaccident(text)
    if format != "canonical":
        raise ValueError(f"unknown scenario format {format!r}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(exc.msg, f"line {exc.lineno}") from exc
    return _parse_canonical(doc, strict)


def uniform_track(agent_id: str, times: Sequence[float], position: tuple[float, float],
                  velocity: tuple[float, float], footprint: tuple[float, float] = (4.5, 2.0),
                  category: Category = Category.CAR, heading: float | None = None,
                  t_ref: float = 0.0) -> AgentTrack:
    """Constant-velocity track; ``position`` is the location at ``t_ref``."""
    vx, vy = velocity
    if heading is None:
        heading = math.atan2(vy, vx) if (vx or vy) else 0.0
    samples = tuple(
        (t, AgentState(agent_id, (position[0] + vx * (t - t_ref), position[1] + vy * (t - t_ref)),
                       velocity, heading, footprint, category))
        for t in times)
    return AgentTrack(agent_id, samples)


def time_grid(start: float, end: float, dt: float = 0.1) -> list[float]:
    return [round(start + k * dt, 9) for k in range(n_steps(end - start, dt) + 1)]

