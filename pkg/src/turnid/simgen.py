"""Deterministic synthetic fleet generator.

Stands in for a proprietary test fleet: parameterized driver styles traverse
a route of straight legs and constant-radius turns, and every sensor is
derived from the resulting trajectory. Output is the exact change-event log
format the ingest module consumes, with per-sensor quantization steps
emulating change-detection storage (a value is logged only once it has
moved by at least one step).

Driver style axes and their documented ranges (spread by ``gen_fleet``):

==================  ===========  =================================
axis                range        behavioral meaning
==================  ===========  =================================
brake_onset_m       25 .. 60     distance before the apex where braking starts
peak_steer_deg      90 .. 150    steering wheel swing for the reference turn
steer_rate_dps      150 .. 360   how fast the wheel moves (slow = long entry)
gas_lag_s           0.3 .. 1.5   coast time past the apex before accelerating
cruise_mps          11 .. 15     straight-leg speed
==================  ===========  =================================

Fixed toy powertrain/kinematics maps (shared by every driver):
comfort lateral acceleration 3.0 m/s^2 caps apex speed at sqrt(3 R);
acceleration back to cruise at 2.0 m/s^2; drag 0.02 v; gas pedal scales
demanded acceleration by 1/4, brake by 1/8; rpm = 850 + 92 v;
torque = 15 a + 5; throttle = 0.08 + 0.85 gas.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import geo
from ._parallel import ordered_map
from .ingest import ChangeEvent
from .signals import COLUMNS, GPS

# kinematic constants
A_BRAKE_MAX = 8.0
A_GAS = 2.0
A_LAT_COMFORT = 3.0
V_FLOOR = 2.0
DRAG_PER_V = 0.02
GAS_ACCEL_SCALE = 4.0
BRAKE_ACCEL_SCALE = 8.0
RPM_IDLE = 850.0
RPM_PER_MPS = 92.0
TORQUE_PER_ACCEL = 15.0
TORQUE_IDLE = 5.0
THROTTLE_IDLE = 0.08
THROTTLE_GAIN = 0.85

_DS = 0.5          # fine arc-length grid step, meters
_DT = 0.1          # sensor sampling period, seconds
_GPS_EVERY = 10    # GPS fix every 10th sample (1 Hz)

# change-event quantization steps, canonical column order
QUANT_STEPS = {
    "steering_angle": 0.5,
    "steering_velocity": 1.0,
    "steering_accel": 2.0,
    "speed": 0.1,
    "heading": 0.5,
    "rpm": 20.0,
    "gas_pedal": 0.02,
    "brake_pedal": 0.02,
    "accel_forward": 0.05,
    "accel_lateral": 0.05,
    "torque": 0.5,
    "throttle": 0.02,
}

# per-sensor noise standard deviations at noise level 1.0
BASE_NOISE_STD = {
    "steering_angle": 0.8,
    "steering_velocity": 2.0,
    "steering_accel": 8.0,
    "speed": 0.08,
    "heading": 0.4,
    "rpm": 15.0,
    "gas_pedal": 0.01,
    "brake_pedal": 0.01,
    "accel_forward": 0.08,
    "accel_lateral": 0.08,
    "torque": 1.0,
    "throttle": 0.01,
}
GPS_NOISE_STD_M = 0.5

STYLE_AXES = (
    ("brake_onset_m", 25.0, 60.0),
    ("peak_steer_deg", 90.0, 150.0),
    ("steer_rate_dps", 150.0, 360.0),
    ("gas_lag_s", 0.3, 1.5),
    ("cruise_mps", 11.0, 15.0),
)


class InfeasibleRouteError(ValueError):
    """A turn cannot be taken at or above the simulator's speed floor."""


@dataclass(frozen=True)
class RouteLeg:
    kind: str                  # "straight" | "turn"
    length: float = 0.0        # straight legs, meters
    angle: float = 0.0         # turns: signed heading change, deg; |angle| in (0, 180)
    radius: float = 0.0        # turns, meters
    target: bool = False       # marks a planted ground-truth turn


@dataclass(frozen=True)
class RouteSpec:
    legs: tuple[RouteLeg, ...]
    start_lat: float = 48.0
    start_lon: float = 11.3
    heading: float = 0.0       # initial compass heading, deg

    @classmethod
    def from_dict(cls, data: dict) -> "RouteSpec":
        legs = []
        for leg in data["legs"]:
            if leg["kind"] == "straight":
                legs.append(RouteLeg("straight", length=float(leg["length"])))
            elif leg["kind"] == "turn":
                legs.append(RouteLeg("turn", angle=float(leg["angle"]),
                                     radius=float(leg["radius"]),
                                     target=bool(leg.get("target", False))))
            else:
                raise ValueError(f"unknown leg kind {leg['kind']!r}")
        return cls(legs=tuple(legs),
                   start_lat=float(data.get("start_lat", 48.0)),
                   start_lon=float(data.get("start_lon", 11.3)),
                   heading=float(data.get("heading", 0.0)))

    def to_dict(self) -> dict:
        legs = []
        for leg in self.legs:
            if leg.kind == "straight":
                legs.append({"kind": "straight", "length": leg.length})
            else:
                legs.append({"kind": "turn", "angle": leg.angle,
                             "radius": leg.radius, "target": leg.target})
        return {"legs": legs, "start_lat": self.start_lat,
                "start_lon": self.start_lon, "heading": self.heading}


@dataclass
class DriverStyle:
    brake_onset_m: float = 42.5
    peak_steer_deg: float = 120.0
    steer_rate_dps: float = 255.0
    gas_lag_s: float = 0.9
    cruise_mps: float = 13.0
    noise_mult: np.ndarray = field(default_factory=lambda: np.ones(len(COLUMNS)))
    seed: int = 0


@dataclass
class _TurnInfo:
    apex_s: float
    entry_s: float
    exit_s: float
    radius: float
    angle: float
    target: bool


@dataclass
class _CompiledRoute:
    s: np.ndarray           # fine grid node positions, (n+1,)
    gamma: np.ndarray       # nominal heading rate per cell, deg/m, (n,)
    turns: list[_TurnInfo]
    length: float


def compile_route(route: RouteSpec) -> _CompiledRoute:
    if not route.legs:
        raise ValueError("route has no legs")
    bounds = [0.0]
    turns: list[_TurnInfo] = []
    for leg in route.legs:
        if leg.kind == "straight":
            if leg.length <= 0:
                raise ValueError("straight legs need positive length")
            bounds.append(bounds[-1] + leg.length)
        elif leg.kind == "turn":
            if not 0.0 < abs(leg.angle) < 180.0:
                raise ValueError("turn angle magnitude must be in (0, 180)")
            if leg.radius <= 0:
                raise ValueError("turn radius must be positive")
            arc = math.radians(abs(leg.angle)) * leg.radius
            entry = bounds[-1]
            bounds.append(entry + arc)
            turns.append(_TurnInfo(apex_s=entry + arc / 2, entry_s=entry,
                                   exit_s=entry + arc, radius=leg.radius,
                                   angle=leg.angle, target=leg.target))
        else:
            raise ValueError(f"unknown leg kind {leg.kind!r}")
    total = bounds[-1]
    n = max(2, int(math.ceil(total / _DS)))
    s = np.linspace(0.0, total, n + 1)
    centers = 0.5 * (s[:-1] + s[1:])
    gamma = np.zeros(n)
    for leg, (a, b) in zip(route.legs, zip(bounds[:-1], bounds[1:])):
        if leg.kind == "turn":
            inside = (centers >= a) & (centers < b)
            gamma[inside] = leg.angle / (b - a)
    return _CompiledRoute(s=s, gamma=gamma, turns=turns, length=total)


def _nominal_path(route: RouteSpec, comp: _CompiledRoute):
    ds = np.diff(comp.s)
    psi = route.heading + np.concatenate([[0.0], np.cumsum(comp.gamma * ds)])
    psi_mid = psi[:-1] + 0.5 * comp.gamma * ds
    x = np.concatenate([[0.0], np.cumsum(np.sin(np.radians(psi_mid)) * ds)])
    y = np.concatenate([[0.0], np.cumsum(np.cos(np.radians(psi_mid)) * ds)])
    return psi, x, y


@dataclass(frozen=True)
class PlantedTurn:
    lat: float
    lon: float
    angle: float
    apex_s: float


def ground_truth_turns(route: RouteSpec) -> list[PlantedTurn]:
    """Apex positions and angles of the route's planted target turns."""
    comp = compile_route(route)
    _, x, y = _nominal_path(route, comp)
    planted = []
    for turn in comp.turns:
        if not turn.target:
            continue
        xa = float(np.interp(turn.apex_s, comp.s, x))
        ya = float(np.interp(turn.apex_s, comp.s, y))
        lat, lon = geo.latlon_from_xy(xa, ya, route.start_lat, route.start_lon)
        planted.append(PlantedTurn(lat=float(lat), lon=float(lon),
                                   angle=turn.angle, apex_s=turn.apex_s))
    return planted


def _speed_profile(comp: _CompiledRoute, style: DriverStyle) -> np.ndarray:
    s = comp.s
    cruise = style.cruise_mps
    v = np.full(len(s), cruise)
    for turn in comp.turns:
        v_apex = min(cruise, math.sqrt(A_LAT_COMFORT * turn.radius))
        if v_apex < V_FLOOR:
            raise InfeasibleRouteError(
                f"turn radius {turn.radius} m needs apex speed below the "
                f"{V_FLOOR} m/s floor")
        d_b = style.brake_onset_m
        a_req = max(0.0, (cruise ** 2 - v_apex ** 2) / (2 * d_b))
        if a_req > A_BRAKE_MAX:
            raise InfeasibleRouteError(
                f"brake onset {d_b} m needs {a_req:.1f} m/s^2 deceleration")
        hold_end = turn.apex_s + v_apex * style.gas_lag_s
        env = np.full(len(s), cruise)
        before = s <= turn.apex_s
        env[before] = np.sqrt(v_apex ** 2 + 2 * a_req * (turn.apex_s - s[before]))
        hold = (s > turn.apex_s) & (s <= hold_end)
        env[hold] = v_apex
        after = s > hold_end
        env[after] = np.sqrt(v_apex ** 2 + 2 * A_GAS * (s[after] - hold_end))
        v = np.minimum(v, np.clip(env, V_FLOOR, cruise))
    return v


def _smooth_curvature(comp: _CompiledRoute, style: DriverStyle) -> np.ndarray:
    # swing time scaled by a nominal mid-corner speed; a slow wheel means a
    # longer transition, i.e. the driver starts turning earlier
    swing_s = style.peak_steer_deg / style.steer_rate_dps
    width_m = 0.5 * style.cruise_mps * swing_s
    k = max(1, int(round(width_m / _DS)))
    if k % 2 == 0:
        k += 1
    if k == 1:
        return comp.gamma.copy()
    kernel = np.ones(k) / k
    return np.convolve(comp.gamma, kernel, mode="same")


def _steer_gain(comp: _CompiledRoute, style: DriverStyle) -> float:
    ref = [t for t in comp.turns if t.target] or comp.turns
    if not ref:
        return 0.0
    gamma_ref = max(math.degrees(1.0 / t.radius) for t in ref)
    return style.peak_steer_deg / gamma_ref


def simulate_session(style: DriverStyle, route: RouteSpec, seed: int, *,
                     session_id: str = "s00", driver_id: str = "d01",
                     t_start: float = 0.0, noise: float = 1.0) -> list[ChangeEvent]:
    """One traversal of the route as a change-event log.

    Byte-deterministic for a given (style, route, seed); at noise 0 the seed
    has no effect at all.
    """
    comp = compile_route(route)
    v_s = _speed_profile(comp, style)
    gamma_drv = _smooth_curvature(comp, style)
    gain = _steer_gain(comp, style)

    ds = np.diff(comp.s)
    v_mid = 0.5 * (v_s[:-1] + v_s[1:])
    t_s = np.concatenate([[0.0], np.cumsum(ds / v_mid)])
    total_t = t_s[-1]

    gamma_nodes = np.concatenate([gamma_drv, gamma_drv[-1:]])
    psi_s = route.heading + np.concatenate([[0.0], np.cumsum(gamma_drv * ds)])
    psi_mid = psi_s[:-1] + 0.5 * gamma_drv * ds
    x_s = np.concatenate([[0.0], np.cumsum(np.sin(np.radians(psi_mid)) * ds)])
    y_s = np.concatenate([[0.0], np.cumsum(np.cos(np.radians(psi_mid)) * ds)])

    n_k = int(math.floor(total_t / _DT)) + 1
    t_k = np.arange(n_k) * _DT
    s_k = np.interp(t_k, t_s, comp.s)

    speed = np.interp(s_k, comp.s, v_s)
    gamma_k = np.interp(s_k, comp.s, gamma_nodes)
    heading = np.interp(s_k, comp.s, psi_s)
    x_k = np.interp(s_k, comp.s, x_s)
    y_k = np.interp(s_k, comp.s, y_s)

    steering = gain * gamma_k
    steer_vel = np.gradient(steering, _DT)
    steer_acc = np.gradient(steer_vel, _DT)
    a_fwd = np.gradient(speed, _DT)
    a_lat = speed ** 2 * np.radians(gamma_k)
    demand = a_fwd + DRAG_PER_V * speed
    gas = np.clip(demand / GAS_ACCEL_SCALE, 0.0, 1.0)
    brake = np.clip(-demand / BRAKE_ACCEL_SCALE, 0.0, 1.0)
    rpm = RPM_IDLE + RPM_PER_MPS * speed
    torque = TORQUE_PER_ACCEL * demand + TORQUE_IDLE
    throttle = np.clip(THROTTLE_IDLE + THROTTLE_GAIN * gas, 0.0, 1.0)

    channels = {
        "steering_angle": steering,
        "steering_velocity": steer_vel,
        "steering_accel": steer_acc,
        "speed": speed,
        "heading": heading,
        "rpm": rpm,
        "gas_pedal": gas,
        "brake_pedal": brake,
        "accel_forward": a_fwd,
        "accel_lateral": a_lat,
        "torque": torque,
        "throttle": throttle,
    }

    # noise is the only seed-dependent term; draws happen even at noise 0 so
    # the log is identical across seeds in the noiseless case
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((n_k, len(COLUMNS)))
    n_gps = len(range(0, n_k, _GPS_EVERY))
    eps_gps = rng.standard_normal((n_gps, 2))

    values = np.empty((n_k, len(COLUMNS)))
    for col, name in enumerate(COLUMNS):
        sigma = BASE_NOISE_STD[name] * style.noise_mult[col] * noise
        values[:, col] = channels[name] + sigma * eps[:, col]
    heading_col = COLUMNS.index("heading")
    values[:, heading_col] = np.mod(values[:, heading_col], 360.0)
    for name in ("gas_pedal", "brake_pedal", "throttle"):
        col = COLUMNS.index(name)
        values[:, col] = np.clip(values[:, col], 0.0, 1.0)

    gx = x_k[::_GPS_EVERY] + GPS_NOISE_STD_M * noise * eps_gps[:, 0]
    gy = y_k[::_GPS_EVERY] + GPS_NOISE_STD_M * noise * eps_gps[:, 1]
    lat_g, lon_g = geo.latlon_from_xy(gx, gy, route.start_lat, route.start_lon)

    events: list[ChangeEvent] = []
    last = values[0].copy()
    for k in range(n_k):
        t = t_start + t_k[k]
        for col, name in enumerate(COLUMNS):
            val = values[k, col]
            if k == 0:
                emit = True
            elif name == "heading":
                delta = abs((val - last[col] + 180.0) % 360.0 - 180.0)
                emit = delta >= QUANT_STEPS[name]
            else:
                emit = abs(val - last[col]) >= QUANT_STEPS[name]
            if emit:
                events.append(ChangeEvent(t=float(t), session_id=session_id,
                                          driver_id=driver_id, signal=name,
                                          value=float(val)))
                last[col] = val
        if k % _GPS_EVERY == 0:
            g = k // _GPS_EVERY
            events.append(ChangeEvent(t=float(t), session_id=session_id,
                                      driver_id=driver_id, signal=GPS,
                                      lat=float(lat_g[g]), lon=float(lon_g[g])))
    return events


def make_styles(n: int, separation: float, master_seed: int,
                axes: tuple[str, ...] | None = None) -> list[DriverStyle]:
    """n styles spread over the documented ranges.

    At separation 1 the styles sit at stratified quantiles of each varied
    axis (maximally spread); at 0 they collapse to the range centers. The
    per-axis assignment of drivers to quantiles is a seeded permutation.
    ``axes`` restricts which style axes vary; the rest stay centered.
    """
    if not 0.0 <= separation <= 1.0:
        raise ValueError("separation must be in [0, 1]")
    if n < 1:
        raise ValueError("need at least one driver")
    varied = set(axes) if axes is not None else {a[0] for a in STYLE_AXES}
    unknown = varied - {a[0] for a in STYLE_AXES}
    if unknown:
        raise ValueError(f"unknown style axes: {sorted(unknown)}")
    params = {name: np.full(n, (lo + hi) / 2) for name, lo, hi in STYLE_AXES}
    for axis_i, (name, lo, hi) in enumerate(STYLE_AXES):
        if name not in varied:
            continue
        rng = np.random.default_rng([master_seed, axis_i])
        ranks = rng.permutation(n)
        u = (ranks + 0.5) / n
        params[name] = (lo + hi) / 2 + separation * (u - 0.5) * (hi - lo)
    out = []
    for i in range(n):
        out.append(DriverStyle(
            brake_onset_m=float(params["brake_onset_m"][i]),
            peak_steer_deg=float(params["peak_steer_deg"][i]),
            steer_rate_dps=float(params["steer_rate_dps"][i]),
            gas_lag_s=float(params["gas_lag_s"][i]),
            cruise_mps=float(params["cruise_mps"][i]),
            seed=int(np.random.SeedSequence([master_seed, i]).generate_state(1)[0]),
        ))
    return out


def gen_fleet(n_drivers: int, separation: float, sessions_per_driver: int,
              route: RouteSpec, master_seed: int, noise: float = 1.0,
              axes: tuple[str, ...] | None = None,
              threads: int = 1) -> tuple[list[DriverStyle], list[list[ChangeEvent]]]:
    """Simulate a fleet: n drivers, s sessions each, derived session seeds.

    Session start times are staggered by session index so chronological
    order never depends on the seed.
    """
    styles = make_styles(n_drivers, separation, master_seed, axes=axes)
    jobs = [(i, j) for i in range(n_drivers) for j in range(sessions_per_driver)]

    def run(job):
        i, j = job
        driver = f"d{i + 1:02d}"
        seed = int(np.random.SeedSequence([master_seed, i, j, 1]).generate_state(1)[0])
        return simulate_session(styles[i], route, seed,
                                session_id=f"{driver}-s{j:02d}", driver_id=driver,
                                t_start=j * 3600.0, noise=noise)

    sessions = ordered_map(run, jobs, threads=threads)
    return styles, sessions


def write_log(sessions: list[list[ChangeEvent]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for events in sessions:
            for event in events:
                fh.write(event.to_json_line())
                fh.write("\n")


@dataclass
class FleetConfig:
    drivers: int = 2
    sessions_per_driver: int = 16
    separation: float = 1.0
    noise: float = 1.0
    seed: int = 0
    axes: tuple[str, ...] | None = None
    route: RouteSpec = field(default_factory=lambda: default_route())

    @classmethod
    def from_file(cls, path: str | Path) -> "FleetConfig":
        data = json.loads(Path(path).read_text())
        cfg = cls(
            drivers=int(data.get("drivers", 2)),
            sessions_per_driver=int(data.get("sessions_per_driver", 16)),
            separation=float(data.get("separation", 1.0)),
            noise=float(data.get("noise", 1.0)),
            seed=int(data.get("seed", 0)),
            axes=tuple(data["axes"]) if data.get("axes") else None,
        )
        if "route" in data:
            cfg = replace(cfg, route=RouteSpec.from_dict(data["route"]))
        return cfg

    def to_dict(self) -> dict:
        return {"drivers": self.drivers,
                "sessions_per_driver": self.sessions_per_driver,
                "separation": self.separation, "noise": self.noise,
                "seed": self.seed,
                "axes": list(self.axes) if self.axes else None,
                "route": self.route.to_dict()}


def default_route() -> RouteSpec:
    """One planted 90 degree turn with long stable approach and exit."""
    return RouteSpec(legs=(
        RouteLeg("straight", length=150.0),
        RouteLeg("turn", angle=90.0, radius=12.0, target=True),
        RouteLeg("straight", length=260.0),
    ))
