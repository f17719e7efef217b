"""Axis-aligned geometric primitives shared by detection, relations, and the
simulator.

Everything here is pure and stateless. Closed-set conventions are used
throughout: touching boxes intersect, points on a face are contained.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_FLAT_EIGENVALUE = 1e-18


@dataclass(frozen=True)
class Vec3:
    """A point or direction in meters. z is up."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError("non-finite-vector")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def distance_to(self, other: "Vec3") -> float:
        return (self - other).norm()

    def unit(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("zero-vector")
        return self.scaled(1.0 / n)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


def vec_from(seq) -> Vec3:
    x, y, z = seq
    return Vec3(float(x), float(y), float(z))


_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box, min corner to max corner, in meters."""

    min: Vec3
    max: Vec3

    def __post_init__(self) -> None:
        if self.min.x > self.max.x or self.min.y > self.max.y or self.min.z > self.max.z:
            raise ValueError("invalid-box: min exceeds max")

    @classmethod
    def from_center_size(cls, center: Vec3, size: Vec3) -> "Aabb":
        half = size.scaled(0.5)
        return cls(center - half, center + half)

    @classmethod
    def from_base_size(cls, base_center: Vec3, size: Vec3) -> "Aabb":
        """Box resting on a point: base_center is the middle of the bottom face."""
        return cls(
            Vec3(base_center.x - size.x / 2, base_center.y - size.y / 2, base_center.z),
            Vec3(base_center.x + size.x / 2, base_center.y + size.y / 2, base_center.z + size.z),
        )

    def extents(self) -> Vec3:
        return self.max - self.min

    def volume(self) -> float:
        e = self.extents()
        return e.x * e.y * e.z

    def centroid(self) -> Vec3:
        return Vec3(
            (self.min.x + self.max.x) / 2,
            (self.min.y + self.max.y) / 2,
            (self.min.z + self.max.z) / 2,
        )

    def footprint_area(self) -> float:
        e = self.extents()
        return e.x * e.y

    def contains_point(self, p: Vec3) -> bool:
        return (
            self.min.x <= p.x <= self.max.x
            and self.min.y <= p.y <= self.max.y
            and self.min.z <= p.z <= self.max.z
        )

    def distance_to_point(self, p: Vec3) -> float:
        dx = max(self.min.x - p.x, 0.0, p.x - self.max.x)
        dy = max(self.min.y - p.y, 0.0, p.y - self.max.y)
        dz = max(self.min.z - p.z, 0.0, p.z - self.max.z)
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    def translated_to(self, new_centroid: Vec3) -> "Aabb":
        d = new_centroid - self.centroid()
        return Aabb(self.min + d, self.max + d)

    def inflated(self, r: float) -> "Aabb":
        pad = Vec3(r, r, r)
        return Aabb(self.min - pad, self.max + pad)


def intersection_volume(a: Aabb, b: Aabb) -> float:
    """Overlap volume of two boxes; zero when disjoint, symmetric."""
    ox = min(a.max.x, b.max.x) - max(a.min.x, b.min.x)
    oy = min(a.max.y, b.max.y) - max(a.min.y, b.min.y)
    oz = min(a.max.z, b.max.z) - max(a.min.z, b.min.z)
    return max(0.0, ox) * max(0.0, oy) * max(0.0, oz)


def containment_fraction(inner: Aabb, outer: Aabb) -> float:
    """Fraction of inner's volume that lies inside outer."""
    v = inner.volume()
    if v <= 0.0:
        raise ValueError("degenerate-box: inner has zero volume")
    return intersection_volume(inner, outer) / v


def box_gap_distance(a: Aabb, b: Aabb) -> float:
    """Euclidean distance between the closest points of two boxes.

    Zero when the boxes intersect or touch.
    """
    gx = max(0.0, a.min.x - b.max.x, b.min.x - a.max.x)
    gy = max(0.0, a.min.y - b.max.y, b.min.y - a.max.y)
    gz = max(0.0, a.min.z - b.max.z, b.min.z - a.max.z)
    return math.sqrt(gx * gx + gy * gy + gz * gz)


def horizontal_overlap_area(a: Aabb, b: Aabb) -> float:
    ox = min(a.max.x, b.max.x) - max(a.min.x, b.min.x)
    oy = min(a.max.y, b.max.y) - max(a.min.y, b.min.y)
    return max(0.0, ox) * max(0.0, oy)


def segment_box_interval(p: Vec3, q: Vec3, box: Aabb) -> tuple[float, float] | None:
    """Parameter interval [t0, t1] of p + t*(q-p) inside the closed box.

    Returns None when the segment misses the box. Slab test over [0, 1].
    """
    t0, t1 = 0.0, 1.0
    for axis in _AXES:
        ps = getattr(p, axis)
        qs = getattr(q, axis)
        lo = getattr(box.min, axis)
        hi = getattr(box.max, axis)
        d = qs - ps
        if d == 0.0:
            if ps < lo or ps > hi:
                return None
            continue
        ta = (lo - ps) / d
        tb = (hi - ps) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return None
    return (t0, t1)


def segment_intersects_box(p: Vec3, q: Vec3, box: Aabb) -> bool:
    """Closed segment pq against the closed box. Grazing a face counts."""
    if p == q:
        raise ValueError("degenerate-segment")
    return segment_box_interval(p, q, box) is not None


@dataclass(frozen=True)
class PointSet:
    """Non-empty bag of 3D points."""

    points: tuple[Vec3, ...]

    def __post_init__(self) -> None:
        if len(self.points) == 0:
            raise ValueError("empty-point-set")

    @classmethod
    def of(cls, points) -> "PointSet":
        return cls(tuple(points))

    def to_array(self) -> np.ndarray:
        return np.array([(p.x, p.y, p.z) for p in self.points], dtype=np.float64)

    def bounding_box(self) -> Aabb:
        arr = self.to_array()
        lo = arr.min(axis=0)
        hi = arr.max(axis=0)
        return Aabb(Vec3(*lo), Vec3(*hi))


def principal_axis(ps: PointSet) -> tuple[Vec3, float]:
    """Dominant direction of a point set by PCA.

    Returns (unit axis, confidence) where confidence is the ratio of the
    largest to the second-largest covariance eigenvalue (inf for a perfect
    line). The sign of the axis is arbitrary; callers orient it.
    """
    arr = ps.to_array()
    if arr.shape[0] < 3:
        raise ValueError("insufficient-spread: need at least 3 points")
    centered = arr - arr.mean(axis=0)
    cov = centered.T @ centered / arr.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    lam1, lam2 = float(eigvals[2]), float(eigvals[1])
    if lam1 <= _FLAT_EIGENVALUE:
        raise ValueError("insufficient-spread: points are collocated")
    confidence = math.inf if lam2 <= _FLAT_EIGENVALUE * lam1 or lam2 <= 0.0 else lam1 / lam2
    v = eigvecs[:, 2]
    n = float(np.linalg.norm(v))
    axis = Vec3(float(v[0]) / n, float(v[1]) / n, float(v[2]) / n)
    return axis, confidence


class HeightMap:
    """Grid of height-above-floor samples standing in for a depth image.

    samples is indexed [iy, ix]; cell (ix, iy) covers
    [origin.x + ix*res, origin.x + (ix+1)*res) x [origin.y + iy*res, ...).
    """

    def __init__(self, width: int, height: int, resolution: float, origin: Vec3, samples: np.ndarray):
        samples = np.asarray(samples, dtype=np.float64)
        if resolution <= 0.0:
            raise ValueError("invalid-heightmap: resolution must be positive")
        if samples.shape != (height, width):
            raise ValueError("invalid-heightmap: samples shape mismatch")
        if samples.size and samples.min() < 0.0:
            raise ValueError("invalid-heightmap: negative sample")
        self.width = width
        self.height = height
        self.resolution = resolution
        self.origin = origin
        self.samples = samples

    @classmethod
    def flat(cls, width: int, height: int, resolution: float, origin: Vec3 = Vec3(0, 0, 0), level: float = 0.0) -> "HeightMap":
        return cls(width, height, resolution, origin, np.full((height, width), level))

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin.x + (ix + 0.5) * self.resolution,
            self.origin.y + (iy + 0.5) * self.resolution,
        )

    def cell_min_corner(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin.x + ix * self.resolution, self.origin.y + iy * self.resolution)
