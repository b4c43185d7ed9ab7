"""Synthetic scenarios for tests, demos and desk-scale benchmarks.

All agents move at constant velocity unless noted, sampled at 10 Hz with
three cameras at 2 Hz.
"""

from __future__ import annotations

import math
import random
from typing import Callable, Sequence

from .risk import Trajectory, trajectories_collide
from .scenario import (AgentState, AgentTrack, CameraFrame, CollisionRecord, Environment, Scenario, time_grid,
                       uniform_track)

WEATHER = ("clear", "cloudy", "rainy", "foggy")
LIGHTING = ("daytime", "dusk", "night")
LAYOUTS = ("four-way intersection", "T-junction", "straight road")


def cameras(scene_id: str, start: float, end: float) -> tuple[CameraFrame, ...]:
    frames = []
    for t in time_grid(start, end, 0.5):
        for cam in ("front", "front_left", "front_right"):
            frames.append(CameraFrame(t, cam, f"images/{scene_id}/{cam}/{int(round(t * 1000)):06d}.jpg"))
    return tuple(frames)


def _env(rng: random.Random | None = None) -> Environment:
    if rng is None:
        return Environment("clear", "daytime", "straight road")
    return Environment(rng.choice(WEATHER), rng.choice(LIGHTING), rng.choice(LAYOUTS))


def track_from_motion(agent_id: str, times: Sequence[float], motion: Callable[[float], tuple],
                      footprint=(4.5, 2.0), category="car") -> AgentTrack:
    """``motion(t) -> (x, y, vx, vy, heading)``."""
    samples = []
    for t in times:
        x, y, vx, vy, h = motion(t)
        samples.append((t, AgentState(agent_id, (x, y), (vx, vy), h, footprint, category)))
    return AgentTrack(agent_id, tuple(samples))


def first_contact_time(a: AgentTrack, b: AgentTrack) -> float | None:
    shared = sorted(set(a.times) & set(b.times))
    if not shared:
        return None
    ta = Trajectory(tuple(shared), tuple(a.state_at(t).position for t in shared),
                    tuple(a.state_at(t).heading for t in shared), a.footprint)
    tb = Trajectory(tuple(shared), tuple(b.state_at(t).position for t in shared),
                    tuple(b.state_at(t).heading for t in shared), b.footprint)
    return trajectories_collide(ta, tb)


def lead_vehicle_scenario(future: str = "accelerate", t: float = 1.5, gap: float = 50.0, speed: float = 10.0,
                          footprint=(4.0, 2.0), scene_id: str = "lead_vehicle") -> Scenario:
    """Ego at the origin at ``t`` doing ``speed`` toward a stopped car ``gap`` m ahead.

    ``future`` shapes the logged ego motion after ``t``: ``"none"`` ends the log
    at ``t``, ``"constant"`` keeps the speed, ``"accelerate"`` speeds up at
    5 m/s^2 into the stopped car and records the collision.
    """
    end = t if future == "none" else t + 3.0
    times = time_grid(0.0, end)
    accel = 5.0 if future == "accelerate" else 0.0

    def ego_motion(ts):
        tau = ts - t
        if tau <= 0 or not accel:
            return speed * tau, 0.0, speed, 0.0, 0.0
        return speed * tau + 0.5 * accel * tau * tau, 0.0, speed + accel * tau, 0.0, 0.0

    ego = track_from_motion("ego", times, ego_motion, footprint)
    lead = uniform_track("lead", times, (gap, 0.0), (0.0, 0.0), footprint)
    collision = None
    if future == "accelerate":
        hit = first_contact_time(ego, lead)
        collision = CollisionRecord("lead", hit)
    return Scenario(scene_id, "ego", (ego, lead), _env(), cameras(scene_id, 0.0, end), collision)


def head_on_scenario(current_ttc: float = 1.0, speed: float = 10.0, t: float = 1.5,
                     footprint=(4.0, 2.0), scene_id: str = "head_on") -> Scenario:
    r_sum = math.hypot(*footprint)
    gap = r_sum + 2 * speed * current_ttc
    times = time_grid(0.0, t)
    ego = uniform_track("ego", times, (0.0, 0.0), (speed, 0.0), footprint, t_ref=t)
    other = uniform_track("oncoming", times, (gap, 0.0), (-speed, 0.0), footprint, t_ref=t)
    return Scenario(scene_id, "ego", (ego, other), _env(), cameras(scene_id, 0.0, t))


def empty_scenario(speed: float = 10.0, t: float = 1.5, duration: float | None = None,
                   scene_id: str = "empty") -> Scenario:
    end = duration if duration is not None else t
    ego = uniform_track("ego", time_grid(0.0, end), (0.0, 0.0), (speed, 0.0), t_ref=t)
    return Scenario(scene_id, "ego", (ego,), _env(), cameras(scene_id, 0.0, end))


# ---------------------------------------------------------------------------
# scene suites


def normal_scene(scene_id: str, rng: random.Random, duration: float = 8.0) -> Scenario:
    """Ego cruising with traffic that never comes close."""
    times = time_grid(0.0, duration)
    v = rng.uniform(6.0, 12.0)
    ego = uniform_track("ego", times, (0.0, 0.0), (v, 0.0))
    tracks = [ego]
    kind = rng.choice(("parallel", "leader", "opposite"))
    if kind == "parallel":
        tracks.append(uniform_track("car_1", times, (rng.uniform(-10, 10), 5.5), (v, 0.0)))
    elif kind == "leader":
        tracks.append(uniform_track("car_1", times, (rng.uniform(25, 40), 0.0), (v + rng.uniform(0, 2), 0.0)))
    else:
        tracks.append(uniform_track("car_1", times, (rng.uniform(60, 90), -5.5), (-rng.uniform(6, 10), 0.0)))
    tracks.append(uniform_track("ped_1", times, (rng.uniform(5, 40), 8.0), (0.0, 0.0), (0.6, 0.6), "pedestrian"))
    return Scenario(scene_id, "ego", tuple(tracks), _env(rng), cameras(scene_id, 0.0, duration))


def collision_scene(scene_id: str, rng: random.Random, duration: float = 8.0) -> Scenario:
    """A crossing vehicle whose path meets the ego's; the first contact is recorded."""
    times = time_grid(0.0, duration)
    v_ego = rng.uniform(8.0, 12.0)
    v_other = rng.uniform(6.0, 10.0)
    meet = round(rng.uniform(5.0, 6.5), 1)
    x_meet = v_ego * meet
    side = rng.choice((-1.0, 1.0))
    ego = uniform_track("ego", times, (x_meet, 0.0), (v_ego, 0.0), t_ref=meet)
    other = uniform_track("car_x", times, (x_meet, 0.0), (0.0, side * v_other), t_ref=meet)
    bystander = uniform_track("car_p", times, (rng.uniform(-20, -10), 5.5), (v_ego, 0.0))
    hit = first_contact_time(ego, other)
    return Scenario(scene_id, "ego", (ego, other, bystander), _env(rng), cameras(scene_id, 0.0, duration),
                    CollisionRecord("car_x", hit))


def scene_suite(n_normal: int = 6, n_collision: int = 4, seed: int = 0) -> list[Scenario]:
    rng = random.Random(seed)
    scenes = [normal_scene(f"normal_{i:02d}", rng) for i in range(n_normal)]
    scenes += [collision_scene(f"collision_{i:02d}", rng) for i in range(n_collision)]
    return scenes


# ---------------------------------------------------------------------------
# random single-frame planning cases


def random_planning_scenario(rng: random.Random, n_neighbors: int = 1, t: float = 1.5,
                             scene_id: str = "random") -> Scenario:
    """Ego at the origin at ``t`` with neighbors placed within 30 m."""
    times = time_grid(0.0, t + 3.0)
    heading = rng.uniform(-math.pi, math.pi)
    v0 = rng.uniform(0.0, 20.0)
    ego = uniform_track("ego", times, (0.0, 0.0), (v0 * math.cos(heading), v0 * math.sin(heading)),
                        heading=heading, t_ref=t)
    tracks = [ego]
    for i in range(n_neighbors):
        while True:
            r = rng.uniform(8.0, 30.0)
            bearing = rng.uniform(-math.pi, math.pi)
            pos = (r * math.cos(bearing), r * math.sin(bearing))
            if math.hypot(*pos) > 6.0:
                break
        speed = rng.uniform(0.0, 15.0)
        vh = rng.uniform(-math.pi, math.pi)
        tracks.append(uniform_track(f"n{i}", times, pos, (speed * math.cos(vh), speed * math.sin(vh)),
                                    heading=vh, t_ref=t))
    return Scenario(scene_id, "ego", tuple(tracks), _env(), cameras(scene_id, 0.0, t + 3.0))


def lead_following_scenario(rng: random.Random, t: float = 1.5, scene_id: str = "lead") -> Scenario:
    """Single lead vehicle in the ego lane at a random gap and speed."""
    times = time_grid(0.0, t + 3.0)
    v0 = rng.uniform(5.0, 20.0)
    gap = rng.uniform(10.0, 60.0)
    v_lead = rng.uniform(0.0, v0)
    ego = uniform_track("ego", times, (0.0, 0.0), (v0, 0.0), (4.0, 2.0), t_ref=t)
    lead = uniform_track("lead", times, (gap, 0.0), (v_lead, 0.0), (4.0, 2.0), heading=0.0, t_ref=t)
    return Scenario(scene_id, "ego", (ego, lead), _env(), cameras(scene_id, 0.0, t + 3.0))
