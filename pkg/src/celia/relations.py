"""Observer-independent spatial relations evaluated per frame.

Object-object: in, on, near, next to. Object-agent: belongs (ownership
inference), last touched by. Entity-location: in. Raw relations are computed
every frame; stable relations are the ones that held for a configurable
number of consecutive frames.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .geometry import (
    Aabb,
    Vec3,
    box_gap_distance,
    containment_fraction,
    horizontal_overlap_area,
    segment_box_interval,
)
from .tracking import EntityKind, TrackedEntity, TrackState

_Z_SLACK = 1e-6


class RelationKind(enum.Enum):
    IN = "in"
    ON = "on"
    NEAR = "near"
    NEXT_TO = "next_to"
    BELONGS = "belongs"
    LAST_TOUCHED_BY = "last_touched_by"
    IN_LOCATION = "in_location"


GEOMETRIC_KINDS = frozenset(
    {RelationKind.IN, RelationKind.ON, RelationKind.NEAR, RelationKind.NEXT_TO, RelationKind.IN_LOCATION}
)


@dataclass(frozen=True)
class Relation:
    kind: RelationKind
    subject: str
    object: str
    since: float

    def key(self) -> tuple[str, str, str]:
        return (self.kind.value, self.subject, self.object)


@dataclass(frozen=True)
class LocationRegion:
    name: str
    box: Aabb

    def __post_init__(self) -> None:
        if self.box.volume() <= 0:
            raise ValueError(f"region '{self.name}' has no volume")


@dataclass(frozen=True)
class RelationConfig:
    in_fraction: float = 0.8
    on_gap: float = 0.02
    on_overlap: float = 0.5
    debounce_frames: int = 3
    own_radius: float = 1.0
    own_margin: float = 0.2
    touch_radius: float = 0.1
    enabled_kinds: frozenset[RelationKind] = GEOMETRIC_KINDS


@dataclass(frozen=True)
class RelationSet:
    """Relations true this frame (raw) and the debounced stable subset.

    streaks counts consecutive frames each raw relation has held; it is the
    debounce state carried from frame to frame.
    """

    frame_time: float
    raw: dict[tuple, Relation] = field(default_factory=dict)
    stable: dict[tuple, Relation] = field(default_factory=dict)
    streaks: dict[tuple, int] = field(default_factory=dict)

    @classmethod
    def empty(cls, t: float = 0.0) -> "RelationSet":
        return cls(frame_time=t)

    def stable_relations(self) -> list[Relation]:
        return sorted(self.stable.values(), key=lambda r: r.key())

    def raw_relations(self) -> list[Relation]:
        return sorted(self.raw.values(), key=lambda r: r.key())

    def stable_for(self, entity_id: str) -> list[Relation]:
        return [r for r in self.stable_relations() if r.subject == entity_id or r.object == entity_id]


def rel_in(o1: Aabb, o2: Aabb, in_fraction: float = 0.8) -> bool:
    """o1 is in o2 when at least the threshold share of o1's volume overlaps o2."""
    return containment_fraction(o1, o2) >= in_fraction


def rel_on(o1: Aabb, o2: Aabb, cfg: RelationConfig) -> bool:
    """o1 rests on o2: bottom of o1 at or above the top of o2, within the
    contact gap, with enough horizontal footprint overlap."""
    rise = o1.min.z - o2.max.z
    if rise < -_Z_SLACK or rise > cfg.on_gap:
        return False
    overlap = horizontal_overlap_area(o1, o2)
    smaller = min(o1.footprint_area(), o2.footprint_area())
    return overlap >= cfg.on_overlap * smaller


def rel_near(o1: Aabb, o2: Aabb) -> bool:
    """Gap between the boxes no greater than the largest of their six extents."""
    e1, e2 = o1.extents(), o2.extents()
    threshold = max(e1.x, e1.y, e1.z, e2.x, e2.y, e2.z)
    return box_gap_distance(o1, o2) <= threshold


def _blocks_open_segment(p: Vec3, q: Vec3, box: Aabb) -> bool:
    interval = segment_box_interval(p, q, box)
    if interval is None:
        return False
    t0, t1 = interval
    return t1 > 0.0 and t0 < 1.0


def rel_next_to(o1: Aabb, o2: Aabb, others: list[Aabb]) -> bool:
    """Near, with no third object crossing the open centroid-to-centroid segment."""
    if not rel_near(o1, o2):
        return False
    p, q = o1.centroid(), o2.centroid()
    if p == q:
        return True
    return not any(_blocks_open_segment(p, q, other) for other in others)


def rel_in_location(entity: TrackedEntity, region: LocationRegion) -> bool:
    return region.box.contains_point(entity.centroid)


def infer_ownership(new_track: TrackedEntity, persons: list[TrackedEntity], cfg: RelationConfig) -> str | None:
    """Owner of a newly appeared object: the unique person within own_radius
    who is at least own_margin closer than everyone else. Returns the person
    track id, or None when absent or ambiguous."""
    dists = sorted(
        (box_gap_distance(new_track.bounding_box, p.bounding_box), p.id)
        for p in persons
        if p.state is not TrackState.LOST
    )
    if not dists or dists[0][0] > cfg.own_radius:
        return None
    if len(dists) > 1 and dists[1][0] - dists[0][0] < cfg.own_margin:
        return None
    return dists[0][1]


def _person_order(pid: str) -> tuple[int, str]:
    return (len(pid), pid)


def update_last_touched(
    objects: list[TrackedEntity],
    persons: list[TrackedEntity],
    cfg: RelationConfig,
    now: float,
) -> list[Relation]:
    """LastTouchedBy for every object with a hand within touch_radius this
    frame; ties between hands broken by the smaller person id."""
    touched = []
    for obj in objects:
        touchers = sorted(
            (
                p.id
                for p in persons
                for h in p.hands
                if obj.bounding_box.distance_to_point(h.position) <= cfg.touch_radius
            ),
            key=_person_order,
        )
        if touchers:
            touched.append(Relation(RelationKind.LAST_TOUCHED_BY, obj.id, touchers[0], since=now))
    return touched


def compute_relations(
    tracks: list[TrackedEntity],
    regions: list[LocationRegion],
    prior: RelationSet | None,
    cfg: RelationConfig,
    frame_time: float,
) -> RelationSet:
    """Evaluate all enabled relation kinds over the live (not Lost) tracks.

    A relation's `since` is the start of its current consecutive raw run;
    it enters the stable set once the run reaches debounce_frames.
    """
    prior = prior or RelationSet.empty()
    enabled = cfg.enabled_kinds
    active = [tr for tr in tracks if tr.state is not TrackState.LOST]
    objects = [tr for tr in active if tr.kind is EntityKind.WORK_OBJECT]

    found: list[tuple[RelationKind, str, str]] = []
    for i, a in enumerate(objects):
        for b in objects[i + 1 :]:
            boxes_ok = a.bounding_box.volume() > 0 and b.bounding_box.volume() > 0
            if RelationKind.IN in enabled and boxes_ok:
                if rel_in(a.bounding_box, b.bounding_box, cfg.in_fraction):
                    found.append((RelationKind.IN, a.id, b.id))
                if rel_in(b.bounding_box, a.bounding_box, cfg.in_fraction):
                    found.append((RelationKind.IN, b.id, a.id))
            if RelationKind.ON in enabled:
                if rel_on(a.bounding_box, b.bounding_box, cfg):
                    found.append((RelationKind.ON, a.id, b.id))
                if rel_on(b.bounding_box, a.bounding_box, cfg):
                    found.append((RelationKind.ON, b.id, a.id))
            near = rel_near(a.bounding_box, b.bounding_box)
            if RelationKind.NEAR in enabled and near:
                found.append((RelationKind.NEAR, a.id, b.id))
                found.append((RelationKind.NEAR, b.id, a.id))
            if RelationKind.NEXT_TO in enabled and near:
                others = [
                    o.bounding_box for o in objects if o.id not in (a.id, b.id)
                ]
                if rel_next_to(a.bounding_box, b.bounding_box, others):
                    found.append((RelationKind.NEXT_TO, a.id, b.id))
                    found.append((RelationKind.NEXT_TO, b.id, a.id))
    if RelationKind.IN_LOCATION in enabled:
        for tr in active:
            for region in regions:
                if rel_in_location(tr, region):
                    found.append((RelationKind.IN_LOCATION, tr.id, region.name))

    raw: dict[tuple, Relation] = {}
    streaks: dict[tuple, int] = {}
    for kind, subj, obj in found:
        key = (kind.value, subj, obj)
        since = prior.raw[key].since if key in prior.raw else frame_time
        raw[key] = Relation(kind, subj, obj, since)
        streaks[key] = prior.streaks.get(key, 0) + 1

    stable = {key: rel for key, rel in raw.items() if streaks[key] >= cfg.debounce_frames}
    return RelationSet(frame_time=frame_time, raw=raw, stable=stable, streaks=streaks)
