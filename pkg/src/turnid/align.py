"""Location alignment of raw segments onto a common baseline grid.

Different traversals of the same turn take different amounts of time, so
row i of a raw segment means "0.1 s later", not "the same place". Alignment
picks the traversal with the smoothest velocity as the baseline, treats its
sample positions as ground-truth locations, and estimates every other
traversal's sensors at those locations by interpolating between the two
path-adjacent samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geo
from .signals import SPEED_IDX
from .turndetect import RawSegment


@dataclass
class AlignedSegment:
    """One traversal resampled at the site's K baseline locations."""

    site_id: int
    driver_id: str
    session_id: str
    matrix: np.ndarray     # (K, 12)
    locations: np.ndarray  # (K, 2) baseline lat/lon, shared across the site
    session_start: float

    @property
    def k(self) -> int:
        return len(self.matrix)


def smoothness(segment: RawSegment) -> float:
    """Velocity roughness: sum of squared successive speed diffs over sqrt(K)."""
    v = segment.sensors[:, SPEED_IDX]
    k = len(v)
    if k < 2:
        raise ValueError("segment needs at least 2 samples")
    return float(np.sum(np.diff(v) ** 2) / math.sqrt(k))


def select_baseline(segments: list[RawSegment]) -> int:
    """Index of the smoothest segment; ties go to the earliest session."""
    if not segments:
        raise ValueError("no segments to choose a baseline from")
    best = min(range(len(segments)),
               key=lambda i: (smoothness(segments[i]),
                              segments[i].session_start,
                              segments[i].session_id))
    return best


def align_segment(segment: RawSegment, baseline: RawSegment) -> AlignedSegment:
    """Resample one traversal's sensors at the baseline's ground-truth points.

    Each baseline location is projected onto the segment's GPS polyline; the
    sensor row is the linear blend of the two bracketing samples, weighted by
    the along-path position of the projection. Locations falling before the
    first sample or past the last clamp to that endpoint sample.
    """
    if segment.site_id != baseline.site_id:
        raise ValueError("segment and baseline belong to different sites")
    if segment.n < 2:
        raise ValueError("segment shares fewer than 2 samples with the site radius")

    ref_lat = float(baseline.gps[0, 0])
    ref_lon = float(baseline.gps[0, 1])
    px, py = geo.local_xy(segment.gps[:, 0], segment.gps[:, 1], ref_lat, ref_lon)
    gx, gy = geo.local_xy(baseline.gps[:, 0], baseline.gps[:, 1], ref_lat, ref_lon)
    pts = np.column_stack([px, py])        # (n, 2)
    goals = np.column_stack([gx, gy])      # (K, 2)

    a = pts[:-1]                           # (m, 2)
    d = pts[1:] - pts[:-1]                 # (m, 2)
    len2 = np.sum(d * d, axis=1)
    safe = np.where(len2 > 0.0, len2, 1.0)

    diff = goals[:, None, :] - a[None, :, :]            # (K, m, 2)
    t = np.sum(diff * d[None, :, :], axis=2) / safe     # (K, m)
    t = np.clip(t, 0.0, 1.0)
    t[:, len2 == 0.0] = 0.0                             # stationary GPS pair
    proj = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist2 = np.sum((goals[:, None, :] - proj) ** 2, axis=2)

    nearest = np.argmin(dist2, axis=1)                  # first minimum wins
    w = t[np.arange(len(goals)), nearest]
    left = segment.sensors[nearest]
    right = segment.sensors[nearest + 1]
    matrix = (1.0 - w)[:, None] * left + w[:, None] * right

    return AlignedSegment(
        site_id=segment.site_id,
        driver_id=segment.driver_id,
        session_id=segment.session_id,
        matrix=matrix,
        locations=baseline.gps.copy(),
        session_start=segment.session_start,
    )


def align_site(segments: list[RawSegment]) -> tuple[int, list[AlignedSegment]]:
    """Align every traversal of a site against the smoothest one."""
    base_idx = select_baseline(segments)
    base = segments[base_idx]
    return base_idx, [align_segment(s, base) for s in segments]
