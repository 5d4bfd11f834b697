"""Shared builders for sessions, traces, and synthetic aligned segments."""

import numpy as np
import pytest

from turnid import geo
from turnid.align import AlignedSegment
from turnid.ingest import DenseTrace, Session
from turnid.signals import COLUMNS, SAMPLE_PERIOD_S
from turnid.turndetect import RawSegment

REF_LAT, REF_LON = 48.0, 11.3


def make_session(sensor_events, gps_events, session_id="s0", driver_id="d1"):
    """Session from {signal: [(t, v), ...]} and [(t, lat, lon), ...]."""
    events = {}
    t_min, t_max = np.inf, -np.inf
    for sig, recs in sensor_events.items():
        recs = sorted(recs)
        t = np.array([r[0] for r in recs], dtype=float)
        v = np.array([r[1] for r in recs], dtype=float)
        events[sig] = (t, v)
        t_min, t_max = min(t_min, t[0]), max(t_max, t[-1])
    gps_events = sorted(gps_events)
    gt = np.array([r[0] for r in gps_events], dtype=float)
    gla = np.array([r[1] for r in gps_events], dtype=float)
    glo = np.array([r[2] for r in gps_events], dtype=float)
    if len(gt):
        t_min, t_max = min(t_min, gt[0]), max(t_max, gt[-1])
    return Session(session_id, driver_id, events, (gt, gla, glo),
                   start=float(t_min), end=float(t_max))


def straight_gps(n, spacing_m=1.0, ref=(REF_LAT, REF_LON)):
    """n GPS samples along a straight east-heading line."""
    x = np.arange(n) * spacing_m
    lat, lon = geo.latlon_from_xy(x, np.zeros(n), ref[0], ref[1])
    return np.column_stack([lat, lon])


def make_trace(heading, gps=None, session_id="s0", driver_id="d1", t0=0.0,
               extra_signals=None):
    """Detection-grade DenseTrace from a heading array."""
    heading = np.asarray(heading, dtype=float)
    if gps is None:
        gps = straight_gps(len(heading))
    signals = {"heading": heading}
    if extra_signals:
        signals.update(extra_signals)
    return DenseTrace(session_id=session_id, driver_id=driver_id, t0=t0,
                      period=SAMPLE_PERIOD_S, signals=signals, gps=np.asarray(gps))


def make_raw_segment(values, session_id="s0", driver_id="d1", site_id=1,
                     spacing_m=1.0, session_start=0.0):
    """RawSegment along a straight line; values is (n, 12) or a speed column."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        mat = np.zeros((len(values), len(COLUMNS)))
        mat[:, COLUMNS.index("speed")] = values
    else:
        mat = values
    n = len(mat)
    gps = straight_gps(n, spacing_m)
    arc = np.arange(n, dtype=float) * spacing_m
    return RawSegment(session_id=session_id, driver_id=driver_id, site_id=site_id,
                      times=np.arange(n) * SAMPLE_PERIOD_S, sensors=mat, gps=gps,
                      arc=arc, session_start=session_start)


def make_aligned(driver_id, session_id, site_id=1, k=32, offset=0.0,
                 seed=0, noise=0.05, session_start=0.0):
    """Synthetic aligned segment: a shared waveform plus a driver offset."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, k)
    base = np.stack([np.sin(2 * np.pi * (c + 1) * t) for c in range(len(COLUMNS))],
                    axis=1)
    mat = base + offset + noise * rng.standard_normal((k, len(COLUMNS)))
    locations = straight_gps(k)
    return AlignedSegment(site_id=site_id, driver_id=driver_id,
                          session_id=session_id, matrix=mat, locations=locations,
                          session_start=session_start)


@pytest.fixture
def two_driver_site():
    """16 synthetic aligned sessions, two clearly separated drivers."""
    segments = []
    for j in range(8):
        segments.append(make_aligned("dA", f"dA-s{j:02d}", offset=0.6,
                                     seed=100 + j, session_start=j * 100.0))
        segments.append(make_aligned("dB", f"dB-s{j:02d}", offset=-0.6,
                                     seed=200 + j, session_start=j * 100.0))
    return segments
