"""Height-map detection: people as tall floor protrusions, objects as low
bumps, arms as elongated protrusions entering from the edge of the watched
area. Hands sit at the far end of an arm; pointing comes from the arm's
principal axis.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .geometry import Aabb, HeightMap, PointSet, Vec3, principal_axis
from .stream import DetectionFrame, HandData, ObjectData, PersonData

POINTING_MIN_CONFIDENCE = 2.0


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds for the protrusion classifier.

    Heights are absolute (above the floor); with the default surface_height
    of 0.0 the watched work surface is the floor plane itself.
    """

    surface_height: float = 0.0
    min_rise: float = 0.02
    max_object_height: float = 0.6
    min_person_height: float = 1.2
    max_person_height: float = 2.2
    min_person_footprint: float = 0.05
    max_person_footprint: float = 0.6
    arm_elongation: float = 3.0
    arm_attach_radius: float = 0.8


class DetectionKind(enum.Enum):
    PERSON = "person"
    WORK_OBJECT = "object"
    ARM = "arm"
    REJECT = "reject"


@dataclass(frozen=True)
class HandObservation:
    position: Vec3
    pointing: Vec3 | None = None


@dataclass(frozen=True)
class Protrusion:
    """One connected component of cells rising above the work surface."""

    cells: tuple[tuple[int, int], ...]  # (ix, iy), row-major sorted
    points: PointSet                    # cell centers lifted to their heights
    bounding_box: Aabb
    touches_edge: bool
    max_height: float
    footprint_area: float
    resolution: float

    def elongation(self) -> float:
        e = self.bounding_box.extents()
        lo = min(e.x, e.y)
        hi = max(e.x, e.y)
        return hi / lo if lo > 0 else 1.0


def segment_protrusions(hm: HeightMap, surface_height: float, min_rise: float) -> list[Protrusion]:
    """4-connected components of cells rising more than min_rise above the
    surface, ordered by descending footprint area (ties by min grid index)."""
    if min_rise <= 0:
        raise ValueError("invalid-min-rise")
    mask = hm.samples > (surface_height + min_rise)
    if not mask.any():
        return []
    visited = np.zeros_like(mask, dtype=bool)
    comps: list[list[tuple[int, int]]] = []
    h, w = mask.shape
    for iy in range(h):
        for ix in range(w):
            if not mask[iy, ix] or visited[iy, ix]:
                continue
            comp = []
            queue = deque([(ix, iy)])
            visited[iy, ix] = True
            while queue:
                cx, cy = queue.popleft()
                comp.append((cx, cy))
                for nx, ny in ((cx - 1, cy), (cx + 1, cy), (cx, cy - 1), (cx, cy + 1)):
                    if 0 <= nx < w and 0 <= ny < h and mask[ny, nx] and not visited[ny, nx]:
                        visited[ny, nx] = True
                        queue.append((nx, ny))
            comps.append(comp)

    protrusions = [_build_protrusion(hm, comp) for comp in comps]
    protrusions.sort(key=lambda p: (-p.footprint_area, (p.cells[0][1], p.cells[0][0])))
    return protrusions


def _build_protrusion(hm: HeightMap, comp: list[tuple[int, int]]) -> Protrusion:
    cells = tuple(sorted(comp, key=lambda c: (c[1], c[0])))
    res = hm.resolution
    pts = []
    max_h = 0.0
    for ix, iy in cells:
        cx, cy = hm.cell_center(ix, iy)
        z = float(hm.samples[iy, ix])
        pts.append(Vec3(cx, cy, z))
        max_h = max(max_h, z)
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    lo = Vec3(hm.origin.x + min(xs) * res, hm.origin.y + min(ys) * res, hm.origin.z)
    hi = Vec3(hm.origin.x + (max(xs) + 1) * res, hm.origin.y + (max(ys) + 1) * res, max_h)
    touches = any(ix == 0 or iy == 0 or ix == hm.width - 1 or iy == hm.height - 1 for ix, iy in cells)
    return Protrusion(
        cells=cells,
        points=PointSet.of(pts),
        bounding_box=Aabb(lo, hi),
        touches_edge=touches,
        max_height=max_h,
        footprint_area=len(cells) * res * res,
        resolution=res,
    )


def classify_protrusion(p: Protrusion, cfg: DetectorConfig) -> DetectionKind:
    if (
        cfg.min_person_height <= p.max_height <= cfg.max_person_height
        and cfg.min_person_footprint <= p.footprint_area <= cfg.max_person_footprint
    ):
        return DetectionKind.PERSON
    if p.touches_edge and p.max_height < cfg.min_person_height and p.elongation() >= cfg.arm_elongation:
        return DetectionKind.ARM
    if 0 < p.max_height <= cfg.max_object_height:
        return DetectionKind.WORK_OBJECT
    return DetectionKind.REJECT


def _entry_cell(arm: Protrusion, hm_width: int, hm_height: int) -> tuple[int, int]:
    """The edge-touching cell the arm enters through (deterministic pick)."""
    edge_cells = [
        (ix, iy)
        for ix, iy in arm.cells
        if ix == 0 or iy == 0 or ix == hm_width - 1 or iy == hm_height - 1
    ]
    if not edge_cells:
        raise ValueError("not-an-arm: no edge contact")
    return min(edge_cells, key=lambda c: (c[1], c[0]))


def _cell_point(arm: Protrusion, cell: tuple[int, int]) -> Vec3:
    idx = arm.cells.index(cell)
    return arm.points.points[idx]


def extract_hand(arm: Protrusion, hm: HeightMap) -> HandObservation:
    """Hand = the arm cell geodesically farthest (BFS over the component)
    from the entry cell at the work-area edge."""
    if not arm.touches_edge:
        raise ValueError("not-an-arm: does not touch the work-area edge")
    entry = _entry_cell(arm, hm.width, hm.height)
    cell_set = set(arm.cells)
    dist = {entry: 0}
    queue = deque([entry])
    while queue:
        cx, cy = queue.popleft()
        for nb in ((cx - 1, cy), (cx + 1, cy), (cx, cy - 1), (cx, cy + 1)):
            if nb in cell_set and nb not in dist:
                dist[nb] = dist[(cx, cy)] + 1
                queue.append(nb)
    # unreachable cells cannot happen: the component is connected
    far = max(arm.cells, key=lambda c: (dist[c], -c[1], -c[0]))
    hand_pos = _cell_point(arm, far)
    pointing = estimate_pointing(arm, _cell_point(arm, entry), hand_pos)
    return HandObservation(position=hand_pos, pointing=pointing)


def estimate_pointing(arm: Protrusion, entry: Vec3, hand: Vec3) -> Vec3 | None:
    """Principal axis of the arm points, oriented from entry toward hand.

    Returns None when the arm has no dominant direction (confidence below
    the 2.0 eigenvalue-ratio threshold) or too few points for PCA.
    """
    try:
        axis, confidence = principal_axis(arm.points)
    except ValueError:
        return None
    if confidence < POINTING_MIN_CONFIDENCE:
        return None
    if axis.dot(hand - entry) < 0:
        axis = axis.scaled(-1.0)
    return axis


def detect_frame(hm: HeightMap, cfg: DetectorConfig, t: float, frame_id: int = 0) -> DetectionFrame:
    """Full detection pass: segment, classify, extract hands, emit one frame.

    Arms attach their hand to the nearest person within arm_attach_radius;
    an unattached arm is reported as a person with unknown body (hands only).
    Ids are per-frame (p0, p1, ... / o0, o1, ...), not persistent.
    """
    protrusions = segment_protrusions(hm, cfg.surface_height, cfg.min_rise)
    person_protrusions: list[Protrusion] = []
    object_protrusions: list[Protrusion] = []
    arm_protrusions: list[Protrusion] = []
    for p in protrusions:
        kind = classify_protrusion(p, cfg)
        if kind is DetectionKind.PERSON:
            person_protrusions.append(p)
        elif kind is DetectionKind.WORK_OBJECT:
            object_protrusions.append(p)
        elif kind is DetectionKind.ARM:
            arm_protrusions.append(p)

    person_hands: dict[int, list[HandData]] = {i: [] for i in range(len(person_protrusions))}
    loose_arms: list[HandData] = []
    for arm in arm_protrusions:
        hand = extract_hand(arm, hm)
        entry = _cell_point(arm, _entry_cell(arm, hm.width, hm.height))
        data = HandData(pos=hand.position, pointing=hand.pointing)
        best = None
        for i, pp in enumerate(person_protrusions):
            c = pp.bounding_box.centroid()
            d = math.hypot(c.x - entry.x, c.y - entry.y)  # horizontal: entry is at arm height
            if d <= cfg.arm_attach_radius and (best is None or d < best[0]):
                best = (d, i)
        if best is not None:
            person_hands[best[1]].append(data)
        else:
            loose_arms.append(data)

    persons = []
    for i, pp in enumerate(person_protrusions):
        persons.append(
            PersonData(
                id=f"p{i}",
                centroid=pp.bounding_box.centroid(),
                bbox=pp.bounding_box,
                hands=tuple(person_hands[i]),
            )
        )
    for j, hand in enumerate(loose_arms):
        # person whose body is outside the view: report the hand alone
        box = Aabb(hand.pos, hand.pos)
        persons.append(
            PersonData(id=f"p{len(person_protrusions) + j}", centroid=hand.pos, bbox=box, hands=(hand,))
        )

    objects = [
        ObjectData(id=f"o{i}", centroid=op.bounding_box.centroid(), bbox=op.bounding_box)
        for i, op in enumerate(object_protrusions)
    ]
    return DetectionFrame(frame=frame_id, t=t, persons=tuple(persons), objects=tuple(objects))
