"""Turn detection, recurring-site clustering, and raw segment extraction.

A turn is a window where the unwrapped heading swings by at least 70 degrees
in under 10 seconds, after at least 5 seconds of steady heading. Detection
runs on the densified heading trace: samples whose local heading range
(over a centered 1 s window) exceeds a small threshold are "turning", and
each maximal turning run is tested against the three criteria.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import geo
from .ingest import DenseTrace
from .signals import SITE_RADIUS_M, Signal


@dataclass(frozen=True)
class TurnEvent:
    """One detected turn instance within a session."""

    session_id: str
    driver_id: str
    start_t: float
    end_t: float
    heading_change: float  # deg, signed
    lat: float             # centerpoint at mid-turn
    lon: float

    @property
    def duration(self) -> float:
        return self.end_t - self.start_t


@dataclass
class TurnSite:
    """A recurring turn location, ranked by how often it was traversed."""

    site_id: int
    lat: float
    lon: float
    events: list[TurnEvent] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.events)


@dataclass
class RawSegment:
    """The contiguous slice of a trace inside one site's analysis radius."""

    session_id: str
    driver_id: str
    site_id: int
    times: np.ndarray    # (n,)
    sensors: np.ndarray  # (n, 12), canonical column order
    gps: np.ndarray      # (n, 2)
    arc: np.ndarray      # (n,), cumulative path length in meters
    session_start: float

    @property
    def n(self) -> int:
        return len(self.times)


def detect_turns(trace: DenseTrace,
                 min_angle: float = 70.0,
                 max_duration: float = 10.0,
                 stable_time: float = 5.0,
                 stable_tol: float = 10.0,
                 move_window: float = 1.0,
                 move_tol: float = 2.0) -> list[TurnEvent]:
    """Find every window of the trace satisfying the three turn criteria.

    Heading is unwrapped first so the 0/360 seam never splits a turn. The
    returned events carry the signed net heading change and the GPS position
    at the window midpoint. Returns an empty list when nothing qualifies.
    """
    heading = trace.signals.get(Signal.HEADING.value)
    if heading is None:
        raise ValueError("trace has no heading channel")
    if trace.gps is None or len(trace.gps) != len(heading):
        raise ValueError("trace has no per-sample GPS")
    n = len(heading)
    dt = trace.period
    if n < 2:
        return []

    h = np.unwrap(np.asarray(heading, dtype=float), period=360.0)

    half = max(1, int(round(move_window / (2 * dt))))
    padded = np.pad(h, half, mode="edge")
    windows = sliding_window_view(padded, 2 * half + 1)
    local_range = windows.max(axis=1) - windows.min(axis=1)
    moving = local_range > move_tol

    events: list[TurnEvent] = []
    n_pre = int(round(stable_time / dt))
    edges = np.flatnonzero(np.diff(moving.astype(np.int8)))
    starts = [0] if moving[0] else []
    starts += [int(i) + 1 for i in edges if not moving[i]]
    ends = [int(i) for i in edges if moving[i]]
    if moving[-1]:
        ends.append(n - 1)

    for s, e in zip(starts, ends):
        net = h[e] - h[s]
        if abs(net) < min_angle:
            continue
        if (e - s) * dt >= max_duration:
            continue
        seg = h[s:e + 1]
        if net >= 0:
            reversal = float(np.max(np.maximum.accumulate(seg) - seg))
        else:
            reversal = float(np.max(seg - np.minimum.accumulate(seg)))
        if reversal > stable_tol:
            continue
        if s < n_pre:
            continue  # cannot confirm a stable approach at the trace edge
        pre = h[s - n_pre:s + 1]
        if pre.max() - pre.min() > stable_tol:
            continue
        mid = (s + e) // 2
        events.append(TurnEvent(
            session_id=trace.session_id,
            driver_id=trace.driver_id,
            start_t=trace.t0 + s * dt,
            end_t=trace.t0 + e * dt,
            heading_change=float(net),
            lat=float(trace.gps[mid, 0]),
            lon=float(trace.gps[mid, 1]),
        ))
    return events


def cluster_turn_sites(events: list[TurnEvent],
                       radius: float = SITE_RADIUS_M) -> list[TurnSite]:
    """Greedily group turn events into sites, most frequent first.

    Repeatedly picks the unassigned event whose radius neighborhood holds the
    most unassigned events (ties: earliest event), recenters the site on the
    member centroid, and keeps the members still within the radius of that
    centroid. Deterministic given the input events.
    """
    if not events:
        return []
    pending = sorted(events, key=lambda e: (e.start_t, e.session_id))
    lats = np.array([e.lat for e in pending])
    lons = np.array([e.lon for e in pending])
    alive = np.ones(len(pending), dtype=bool)
    sites: list[TurnSite] = []

    while alive.any():
        alive_idx = np.flatnonzero(alive)
        best_i = -1
        best_count = -1
        best_members: np.ndarray | None = None
        for i in alive_idx:
            d = geo.distance_m(lats[alive_idx], lons[alive_idx],
                               float(lats[i]), float(lons[i]))
            members = alive_idx[d <= radius]
            if len(members) > best_count:  # earliest event wins ties
                best_count = len(members)
                best_i = int(i)
                best_members = members
        assert best_members is not None
        center_lat = float(np.mean(lats[best_members]))
        center_lon = float(np.mean(lons[best_members]))
        d_center = geo.distance_m(lats[best_members], lons[best_members],
                                  center_lat, center_lon)
        kept = best_members[d_center <= radius]
        if len(kept) == 0:
            kept = np.array([best_i])
        sites.append(TurnSite(site_id=0, lat=center_lat, lon=center_lon,
                              events=[pending[j] for j in kept]))
        alive[kept] = False

    sites.sort(key=lambda s: (-s.count, min(e.start_t for e in s.events)))
    for rank, site in enumerate(sites, start=1):
        site.site_id = rank
    return sites


def sites_to_json(sites: list[TurnSite]) -> list[dict]:
    return [{"site": s.site_id, "lat": s.lat, "lon": s.lon, "count": s.count}
            for s in sites]


def sites_from_json(data: list[dict]) -> list[TurnSite]:
    return [TurnSite(site_id=int(d["site"]), lat=float(d["lat"]),
                     lon=float(d["lon"])) for d in data]


def _run_bounds(inside: np.ndarray, anchor: int) -> tuple[int, int]:
    s = anchor
    while s > 0 and inside[s - 1]:
        s -= 1
    e = anchor
    while e + 1 < len(inside) and inside[e + 1]:
        e += 1
    return s, e


def extract_segment(trace: DenseTrace, site: TurnSite,
                    radius: float = SITE_RADIUS_M) -> RawSegment | None:
    """Cut the contiguous in-radius run containing the closest approach.

    Returns ``None`` when the trace never enters the site radius. The
    segment carries cumulative arc length along the GPS path.
    """
    d = geo.distance_m(trace.gps[:, 0], trace.gps[:, 1], site.lat, site.lon)
    closest = int(np.argmin(d))
    if d[closest] > radius:
        return None
    inside = d <= radius
    s, e = _run_bounds(inside, closest)
    return _slice_segment(trace, site, s, e)


def extract_after_segment(trace: DenseTrace, site: TurnSite,
                          gap_m: float = 60.0,
                          length_m: float = 2 * SITE_RADIUS_M,
                          radius: float = SITE_RADIUS_M) -> RawSegment | None:
    """Cut a straightaway window starting ``gap_m`` of path past the site exit.

    Walks forward from the end of the in-radius run, accumulating arc length,
    and keeps the samples whose distance past the exit falls in
    [gap_m, gap_m + length_m]. Returns ``None`` when the trace is too short.
    """
    d = geo.distance_m(trace.gps[:, 0], trace.gps[:, 1], site.lat, site.lon)
    closest = int(np.argmin(d))
    if d[closest] > radius:
        return None
    inside = d <= radius
    _, exit_idx = _run_bounds(inside, closest)
    if exit_idx + 1 >= trace.n:
        return None
    steps = geo.step_lengths_m(trace.gps[exit_idx:, 0], trace.gps[exit_idx:, 1],
                               site.lat, site.lon)
    past = np.concatenate([[0.0], np.cumsum(steps)])
    mask = (past >= gap_m) & (past <= gap_m + length_m)
    idx = np.flatnonzero(mask)
    if len(idx) < 2:
        return None
    return _slice_segment(trace, site, exit_idx + int(idx[0]), exit_idx + int(idx[-1]))


def _slice_segment(trace: DenseTrace, site: TurnSite, s: int, e: int) -> RawSegment:
    sl = slice(s, e + 1)
    gps = trace.gps[sl].copy()
    if len(gps) > 1:
        steps = geo.step_lengths_m(gps[:, 0], gps[:, 1], site.lat, site.lon)
        arc = np.concatenate([[0.0], np.cumsum(steps)])
    else:
        arc = np.zeros(len(gps))
    return RawSegment(
        session_id=trace.session_id,
        driver_id=trace.driver_id,
        site_id=site.site_id,
        times=trace.times[sl],
        sensors=trace.matrix()[sl],
        gps=gps,
        arc=arc,
        session_start=trace.t0,
    )
