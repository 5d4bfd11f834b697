"""Change-event log parsing, session grouping, and 10 Hz densification.

The input is JSON-Lines, one change event per line::

    {"t": 0.0, "session": "a-s00", "driver": "d01", "signal": "speed", "value": 12.4}
    {"t": 0.0, "session": "a-s00", "driver": "d01", "signal": "gps", "lat": 48.1, "lon": 11.4}

An optional header line ``{"units": {"speed": "km/h", ...}}`` may precede the
events; declared units are converted to the canonical internal units on the
way in. A sensor value is logged only when it changes, so reconstruction is
step-hold (last observation carried forward) for the sensors and linear
interpolation for the 1 Hz GPS fixes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .signals import COLUMNS, GPS, SAMPLE_PERIOD_S


class LogParseError(ValueError):
    """Malformed log input; carries the 1-based offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class MissingSignalError(ValueError):
    """A session lacks a channel required by the requested processing."""


@dataclass(frozen=True)
class ChangeEvent:
    """One raw log record: a sensor value change or a GPS fix."""

    t: float
    session_id: str
    driver_id: str
    signal: str
    value: float | None = None
    lat: float | None = None
    lon: float | None = None

    def to_json_line(self) -> str:
        if self.signal == GPS:
            rec = {"t": self.t, "session": self.session_id, "driver": self.driver_id,
                   "signal": GPS, "lat": self.lat, "lon": self.lon}
        else:
            rec = {"t": self.t, "session": self.session_id, "driver": self.driver_id,
                   "signal": self.signal, "value": self.value}
        return json.dumps(rec, separators=(",", ":"))


@dataclass
class Session:
    """One continuous driving interval by a single driver."""

    session_id: str
    driver_id: str
    # signal -> (times, values), each sorted by time
    events: dict[str, tuple[np.ndarray, np.ndarray]]
    # (times, lats, lons), sorted by time; empty arrays when no GPS was logged
    gps: tuple[np.ndarray, np.ndarray, np.ndarray]
    start: float
    end: float


@dataclass
class DenseTrace:
    """Per-signal values on a shared 0.1 s grid plus interpolated GPS."""

    session_id: str
    driver_id: str
    t0: float
    period: float
    signals: dict[str, np.ndarray]
    gps: np.ndarray  # (n, 2) lat/lon per sample

    @property
    def n(self) -> int:
        return len(self.gps)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n) * self.period

    def matrix(self) -> np.ndarray:
        """The n x 12 sensor matrix in canonical column order."""
        missing = [c for c in COLUMNS if c not in self.signals]
        if missing:
            raise MissingSignalError(f"trace lacks channels: {missing}")
        return np.column_stack([self.signals[c] for c in COLUMNS])


# -- unit handling -----------------------------------------------------------

_DIMENSION = {
    "steering_angle": "angle",
    "steering_velocity": "angular_rate",
    "steering_accel": "angular_accel",
    "speed": "speed",
    "heading": "angle",
    "rpm": "rpm",
    "gas_pedal": "fraction",
    "brake_pedal": "fraction",
    "accel_forward": "accel",
    "accel_lateral": "accel",
    "torque": "torque",
    "throttle": "fraction",
}

_UNIT_FACTORS = {
    "angle": {"deg": 1.0, "rad": math.degrees(1.0)},
    "angular_rate": {"deg/s": 1.0, "rad/s": math.degrees(1.0)},
    "angular_accel": {"deg/s^2": 1.0, "rad/s^2": math.degrees(1.0)},
    "speed": {"m/s": 1.0, "km/h": 1.0 / 3.6, "mph": 0.44704},
    "accel": {"m/s^2": 1.0, "g": 9.80665},
    "rpm": {"rpm": 1.0},
    "fraction": {"fraction": 1.0, "percent": 0.01, "%": 0.01},
    "torque": {"Nm": 1.0, "N*m": 1.0},
}


def unit_factor(signal: str, unit: str) -> float:
    """Multiplier converting a declared input unit to the internal unit."""
    dim = _DIMENSION[signal]
    try:
        return _UNIT_FACTORS[dim][unit]
    except KeyError:
        raise ValueError(f"unsupported unit {unit!r} for signal {signal!r}") from None


# -- parsing -----------------------------------------------------------------

@dataclass
class _SessionBuilder:
    session_id: str
    driver_id: str
    first_line: int
    sensor_events: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    gps_events: list[tuple[float, float, float]] = field(default_factory=list)

    def build(self) -> Session:
        events: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        t_min = math.inf
        t_max = -math.inf
        for sig, recs in self.sensor_events.items():
            recs.sort(key=lambda r: r[0])
            t = np.array([r[0] for r in recs], dtype=float)
            v = np.array([r[1] for r in recs], dtype=float)
            events[sig] = (t, v)
            t_min = min(t_min, t[0])
            t_max = max(t_max, t[-1])
        self.gps_events.sort(key=lambda r: r[0])
        if self.gps_events:
            gt = np.array([r[0] for r in self.gps_events], dtype=float)
            gla = np.array([r[1] for r in self.gps_events], dtype=float)
            glo = np.array([r[2] for r in self.gps_events], dtype=float)
            t_min = min(t_min, gt[0])
            t_max = max(t_max, gt[-1])
        else:
            gt = gla = glo = np.array([], dtype=float)
        return Session(self.session_id, self.driver_id, events, (gt, gla, glo),
                       start=t_min, end=t_max)


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def _require_number(rec: dict, key: str, lineno: int) -> float:
    val = rec.get(key)
    if not isinstance(val, (int, float)) or isinstance(val, bool) or not math.isfinite(val):
        raise LogParseError(lineno, f"field {key!r} must be a finite number")
    return float(val)


def parse_log(source: str | Path | Iterable[str]) -> list[Session]:
    """Parse a change-event log into Sessions grouped by session id.

    Events are sorted by timestamp per signal; the driver id must be
    consistent within a session. An optional ``{"units": ...}`` header may
    appear before the first event.
    """
    units: dict[str, str] = {}
    builders: dict[str, _SessionBuilder] = {}
    seen_event = False

    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogParseError(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise LogParseError(lineno, "record must be a JSON object")

        if "units" in rec and "signal" not in rec:
            if seen_event:
                raise LogParseError(lineno, "units header must precede all events")
            if not isinstance(rec["units"], dict):
                raise LogParseError(lineno, "units header must map signals to unit names")
            for sig, unit in rec["units"].items():
                if sig not in _DIMENSION:
                    raise LogParseError(lineno, f"units header names unknown signal {sig!r}")
                try:
                    unit_factor(sig, unit)
                except ValueError as exc:
                    raise LogParseError(lineno, str(exc)) from None
                units[sig] = unit
            continue

        for key in ("t", "session", "driver", "signal"):
            if key not in rec:
                raise LogParseError(lineno, f"missing field {key!r}")
        if not isinstance(rec["session"], str) or not isinstance(rec["driver"], str):
            raise LogParseError(lineno, "'session' and 'driver' must be strings")
        t = _require_number(rec, "t", lineno)
        session_id = rec["session"]
        driver_id = rec["driver"]
        signal = rec["signal"]

        builder = builders.get(session_id)
        if builder is None:
            builder = _SessionBuilder(session_id, driver_id, lineno)
            builders[session_id] = builder
        elif builder.driver_id != driver_id:
            raise LogParseError(
                lineno,
                f"session {session_id!r} has inconsistent driver ids "
                f"({builder.driver_id!r} vs {driver_id!r})")

        seen_event = True
        if signal == GPS:
            lat = _require_number(rec, "lat", lineno)
            lon = _require_number(rec, "lon", lineno)
            builder.gps_events.append((t, lat, lon))
        elif signal in _DIMENSION:
            value = _require_number(rec, "value", lineno)
            if signal in units:
                value *= unit_factor(signal, units[signal])
            builder.sensor_events.setdefault(signal, []).append((t, value))
        else:
            raise LogParseError(lineno, f"unknown signal name {signal!r}")

    sessions = [b.build() for b in builders.values()]
    sessions.sort(key=lambda s: (s.start, s.session_id))
    return sessions


# -- densification -----------------------------------------------------------

def _grid(session: Session, period: float) -> np.ndarray:
    # grid covers [start, end]: the last sample lands on or just past the
    # final event so no logged change is dropped
    n = int(math.ceil((session.end - session.start) / period - 1e-9)) + 1
    return session.start + np.arange(n) * period


def densify(session: Session, period: float = SAMPLE_PERIOD_S,
            signals: Iterable[str] | None = None) -> DenseTrace:
    """Sample each signal onto a uniform grid by step-hold reconstruction.

    Samples before a signal's first event take that first value. GPS is
    linearly interpolated onto the same grid. ``signals`` restricts which
    channels are required and reconstructed (default: all 12).
    """
    wanted = list(signals) if signals is not None else list(COLUMNS)
    missing = [s for s in wanted if s not in session.events]
    if missing:
        raise MissingSignalError(
            f"session {session.session_id!r} lacks required signals: {missing}")

    grid = _grid(session, period)
    dense: dict[str, np.ndarray] = {}
    for sig in wanted:
        t, v = session.events[sig]
        idx = np.searchsorted(t, grid, side="right") - 1
        idx = np.maximum(idx, 0)  # backfill before the first event
        dense[sig] = v[idx]

    gps = _interpolate_gps_at(session, grid)
    return DenseTrace(session.session_id, session.driver_id,
                      t0=session.start, period=period, signals=dense, gps=gps)


def _interpolate_gps_at(session: Session, times: np.ndarray) -> np.ndarray:
    gt, gla, glo = session.gps
    if len(gt) < 2:
        raise MissingSignalError(
            f"session {session.session_id!r} has fewer than 2 GPS fixes")
    lat = np.interp(times, gt, gla)  # clamps to endpoint values outside range
    lon = np.interp(times, gt, glo)
    return np.column_stack([lat, lon])


def interpolate_gps(session: Session, period: float = SAMPLE_PERIOD_S) -> np.ndarray:
    """Per-sample (lat, lon) on the uniform grid, linear between 1 Hz fixes."""
    return _interpolate_gps_at(session, _grid(session, period))
