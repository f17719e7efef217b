"""Brute-force relation oracle used only by tests.

Containment is estimated by counting voxel-grid midpoints of the inner box
that fall inside the outer one; the between-check for next-to samples the
centroid segment densely. Everything works from exact poses, independent of
the tracking pipeline.
"""
from __future__ import annotations

import math

import numpy as np

from ..geometry import Aabb
from ..relations import RelationConfig, RelationKind, LocationRegion

VOXEL_CELL = 0.01
SEGMENT_SAMPLES = 512


def voxel_containment_fraction(inner: Aabb, outer: Aabb, cell: float = VOXEL_CELL) -> float:
    """Share of inner's volume inside outer, by midpoint counting at <= cell
    resolution per axis. Axis-aligned, so the count separates per axis."""
    frac = 1.0
    for axis in ("x", "y", "z"):
        lo = getattr(inner.min, axis)
        hi = getattr(inner.max, axis)
        ext = hi - lo
        if ext <= 0:
            raise ValueError("degenerate-box")
        n = max(1, math.ceil(ext / cell))
        centers = lo + (np.arange(n) + 0.5) * (ext / n)
        inside = (centers >= getattr(outer.min, axis)) & (centers <= getattr(outer.max, axis))
        frac *= float(inside.mean())
        if frac == 0.0:
            return 0.0
    return frac


def _gap(a: Aabb, b: Aabb) -> float:
    gx = max(0.0, a.min.x - b.max.x, b.min.x - a.max.x)
    gy = max(0.0, a.min.y - b.max.y, b.min.y - a.max.y)
    gz = max(0.0, a.min.z - b.max.z, b.min.z - a.max.z)
    return math.sqrt(gx * gx + gy * gy + gz * gz)


def _max_extent(a: Aabb, b: Aabb) -> float:
    ea, eb = a.extents(), b.extents()
    return max(ea.x, ea.y, ea.z, eb.x, eb.y, eb.z)


def oracle_in(inner: Aabb, outer: Aabb, cfg: RelationConfig) -> bool:
    return voxel_containment_fraction(inner, outer) >= cfg.in_fraction


def oracle_near(a: Aabb, b: Aabb) -> bool:
    return _gap(a, b) <= _max_extent(a, b)


def oracle_on(a: Aabb, b: Aabb, cfg: RelationConfig) -> bool:
    rise = a.min.z - b.max.z
    if rise < -1e-6 or rise > cfg.on_gap:
        return False
    ox = max(0.0, min(a.max.x, b.max.x) - max(a.min.x, b.min.x))
    oy = max(0.0, min(a.max.y, b.max.y) - max(a.min.y, b.min.y))
    ea, eb = a.extents(), b.extents()
    smaller = min(ea.x * ea.y, eb.x * eb.y)
    return ox * oy >= cfg.on_overlap * smaller


def _segment_points(a: Aabb, b: Aabb) -> np.ndarray:
    p = np.array(a.centroid().as_tuple())
    q = np.array(b.centroid().as_tuple())
    ts = np.linspace(0.0, 1.0, SEGMENT_SAMPLES + 2)[1:-1]  # open segment
    return p[None, :] + ts[:, None] * (q - p)[None, :]


def _points_inside(points: np.ndarray, box: Aabb) -> np.ndarray:
    lo = np.array(box.min.as_tuple())
    hi = np.array(box.max.as_tuple())
    return np.all((points >= lo) & (points <= hi), axis=1)


def oracle_next_to(a: Aabb, b: Aabb, others: list[Aabb]) -> bool:
    if not oracle_near(a, b):
        return False
    if not others:
        return True
    pts = _segment_points(a, b)
    return not any(_points_inside(pts, other).any() for other in others)


# -- borderline detection (the +-band exclusion rule for oracle comparisons) --


def _on_margin(a: Aabb, b: Aabb, cfg: RelationConfig) -> float:
    rise = a.min.z - b.max.z
    margin_z = min(abs(rise), abs(rise - cfg.on_gap))
    ox = max(0.0, min(a.max.x, b.max.x) - max(a.min.x, b.min.x))
    oy = max(0.0, min(a.max.y, b.max.y) - max(a.min.y, b.min.y))
    ea, eb = a.extents(), b.extents()
    smaller = min(ea.x * ea.y, eb.x * eb.y)
    margin_ratio = abs(ox * oy - cfg.on_overlap * smaller) / smaller if smaller > 0 else math.inf
    return min(margin_z, margin_ratio)


def _blocker_grazes(a: Aabb, b: Aabb, other: Aabb, band: float) -> bool:
    pts = _segment_points(a, b)
    lo = np.array(other.min.as_tuple())
    hi = np.array(other.max.as_tuple())
    outside = np.maximum(np.maximum(lo - pts, 0.0), np.maximum(pts - hi, 0.0))
    dist = np.linalg.norm(outside, axis=1)
    inside = dist == 0.0
    if inside.any():
        depth = np.minimum(pts - lo, hi - pts).min(axis=1)
        return float(depth[inside].max()) <= band
    return float(dist.min()) <= band


def borderline_kinds(a: Aabb, b: Aabb, others: list[Aabb], cfg: RelationConfig,
                     band: float = 0.01) -> set[RelationKind]:
    """Relation kinds whose truth for (a, b) sits within the exclusion band
    of a decision threshold; oracle-equivalence tests skip these. For `in`
    both the analytic and the voxel fraction vote: a pair is borderline if
    either measurement lands inside the band."""
    out: set[RelationKind] = set()
    va, vb = a.volume(), b.volume()
    if va > 0 and vb > 0:
        from ..geometry import containment_fraction

        for inner, outer in ((a, b), (b, a)):
            near_threshold = min(
                abs(containment_fraction(inner, outer) - cfg.in_fraction),
                abs(voxel_containment_fraction(inner, outer) - cfg.in_fraction),
            )
            if near_threshold <= band:
                out.add(RelationKind.IN)
    near_margin = abs(_gap(a, b) - _max_extent(a, b))
    if near_margin <= band:
        out.add(RelationKind.NEAR)
        out.add(RelationKind.NEXT_TO)
    if min(_on_margin(a, b, cfg), _on_margin(b, a, cfg)) <= band:
        out.add(RelationKind.ON)
    if oracle_near(a, b) and any(_blocker_grazes(a, b, other, band) for other in others):
        out.add(RelationKind.NEXT_TO)
    return out


def scene_relations(boxes: dict[str, Aabb], regions: list[LocationRegion],
                    cfg: RelationConfig) -> set[tuple[str, str, str]]:
    """All geometric relations in a scene of object boxes, by brute force."""
    keys: set[tuple[str, str, str]] = set()
    ids = sorted(boxes)
    for i, ia in enumerate(ids):
        for ib in ids[i + 1 :]:
            a, b = boxes[ia], boxes[ib]
            others = [boxes[k] for k in ids if k not in (ia, ib)]
            if a.volume() > 0 and oracle_in(a, b, cfg):
                keys.add((RelationKind.IN.value, ia, ib))
            if b.volume() > 0 and oracle_in(b, a, cfg):
                keys.add((RelationKind.IN.value, ib, ia))
            if oracle_on(a, b, cfg):
                keys.add((RelationKind.ON.value, ia, ib))
            if oracle_on(b, a, cfg):
                keys.add((RelationKind.ON.value, ib, ia))
            if oracle_near(a, b):
                keys.add((RelationKind.NEAR.value, ia, ib))
                keys.add((RelationKind.NEAR.value, ib, ia))
                if oracle_next_to(a, b, others):
                    keys.add((RelationKind.NEXT_TO.value, ia, ib))
                    keys.add((RelationKind.NEXT_TO.value, ib, ia))
    for oid, box in boxes.items():
        c = box.centroid()
        for region in regions:
            if region.box.contains_point(c):
                keys.add((RelationKind.IN_LOCATION.value, oid, region.name))
    return keys


def scene_borderline(boxes: dict[str, Aabb], cfg: RelationConfig,
                     band: float = 0.01) -> set[tuple[str, str, str]]:
    """Pair-kind keys (in canonical and reversed order) to exclude from
    oracle comparisons because they straddle a threshold."""
    out: set[tuple[str, str, str]] = set()
    ids = sorted(boxes)
    for i, ia in enumerate(ids):
        for ib in ids[i + 1 :]:
            others = [boxes[k] for k in ids if k not in (ia, ib)]
            for kind in borderline_kinds(boxes[ia], boxes[ib], others, cfg, band):
                out.add((kind.value, ia, ib))
                out.add((kind.value, ib, ia))
    return out
