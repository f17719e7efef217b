"""Frame-to-frame identity: greedy nearest-centroid association with a gate,
held-object following, and lost-track reacquisition. Single writer; ids are
never reused within a session.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .detection import HandObservation
from .geometry import Aabb, Vec3, box_gap_distance, intersection_volume
from .stream import DetectionFrame


@dataclass(frozen=True)
class TrackerConfig:
    gate: float = 0.3               # max per-frame movement for a match
    lost_grace: float = 1.0         # seconds unseen before a track goes Lost
    hold_radius: float = 0.15       # hand proximity that explains a vanished object
    reacquire_radius: float = 0.3   # distance for a Lost track to resume its id
    adopt_source_ids: bool = True   # trust wire person ids as labels (sim/replay)


class EntityKind(enum.Enum):
    PERSON = "person"
    WORK_OBJECT = "object"


class TrackState(enum.Enum):
    VISIBLE = "visible"
    HELD = "held"
    LOST = "lost"


@dataclass
class TrackedEntity:
    id: str
    kind: EntityKind
    bounding_box: Aabb
    centroid: Vec3
    first_seen: float
    last_seen: float
    state: TrackState = TrackState.VISIBLE
    held_by: str | None = None              # person track id, WorkObject only
    last_centroid: Vec3 | None = None       # set when the track goes Lost
    label: str | None = None
    source_id: str | None = None            # id the source stream used last
    hands: tuple[HandObservation, ...] = () # persons only
    seq: int = 0                            # creation order, tie-breaking


@dataclass(frozen=True)
class TrackUpdate:
    appeared: tuple[str, ...]
    updated: tuple[str, ...]
    lost: tuple[str, ...]
    frame_time: float


@dataclass(frozen=True)
class _DetInput:
    index: int
    kind: EntityKind
    centroid: Vec3
    bbox: Aabb
    source_id: str
    held_by: str | None = None
    label: str | None = None
    hands: tuple[HandObservation, ...] = ()


def associate(tracks, dets, gate: float) -> dict[str, int]:
    """Greedy nearest-centroid matching of same-kind pairs within the gate.

    tracks: entities with .id/.kind/.centroid/.seq; dets: records with
    .index/.kind/.centroid. Pairs are taken in ascending distance order,
    ties broken by (track seq, detection index); each side used at most once.
    """
    if gate <= 0:
        raise ValueError("invalid-gate")
    pairs = []
    for tr in tracks:
        for d in dets:
            if tr.kind is not d.kind:
                continue
            dist = tr.centroid.distance_to(d.centroid)
            if dist <= gate:
                pairs.append((dist, tr.seq, d.index, tr.id))
    pairs.sort()
    assigned: dict[str, int] = {}
    used_dets: set[int] = set()
    for dist, _seq, det_idx, track_id in pairs:
        if track_id in assigned or det_idx in used_dets:
            continue
        assigned[track_id] = det_idx
        used_dets.add(det_idx)
    return assigned


class Tracker:
    """Owns the track table; step() consumes one DetectionFrame at a time."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self.tracks: dict[str, TrackedEntity] = {}
        self._next_seq = 0
        self._counters = {EntityKind.PERSON: 0, EntityKind.WORK_OBJECT: 0}
        self.last_time: float | None = None

    def _new_id(self, kind: EntityKind) -> str:
        self._counters[kind] += 1
        return f"{kind.value}-{self._counters[kind]}"

    def _spawn(self, d: _DetInput, t: float) -> TrackedEntity:
        tr = TrackedEntity(
            id=self._new_id(d.kind),
            kind=d.kind,
            bounding_box=d.bbox,
            centroid=d.centroid,
            first_seen=t,
            last_seen=t,
            source_id=d.source_id,
            label=self._label_for(d, None),
            hands=d.hands,
            seq=self._next_seq,
        )
        self._next_seq += 1
        self.tracks[tr.id] = tr
        return tr

    def _label_for(self, d: _DetInput, current: str | None) -> str | None:
        if d.label is not None:
            return d.label
        if d.kind is EntityKind.PERSON and self.cfg.adopt_source_ids:
            return d.source_id
        return current

    def step(self, frame: DetectionFrame) -> TrackUpdate:
        cfg = self.cfg
        t = frame.t
        if self.last_time is not None and t <= self.last_time:
            raise ValueError("time-regression")
        self.last_time = t

        dets = [
            _DetInput(i, EntityKind.PERSON, p.centroid, p.bbox, p.id,
                      hands=tuple(HandObservation(h.pos, h.pointing) for h in p.hands))
            for i, p in enumerate(frame.persons)
        ] + [
            _DetInput(len(frame.persons) + j, EntityKind.WORK_OBJECT, o.centroid, o.bbox,
                      o.id, held_by=o.held_by, label=o.label)
            for j, o in enumerate(frame.objects)
        ]
        by_index = {d.index: d for d in dets}

        live = [tr for tr in self.tracks.values() if tr.state is not TrackState.LOST]
        assigned = associate(live, dets, cfg.gate)
        matched_dets = set(assigned.values())

        # second pass: unmatched detections may resume a Lost track
        reacquired: dict[str, int] = {}
        lost_tracks = [tr for tr in self.tracks.values() if tr.state is TrackState.LOST]
        leftovers = [d for d in dets if d.index not in matched_dets]
        pairs = []
        for tr in lost_tracks:
            anchor = tr.last_centroid or tr.centroid
            for d in leftovers:
                if tr.kind is not d.kind:
                    continue
                dist = anchor.distance_to(d.centroid)
                if dist <= cfg.reacquire_radius:
                    pairs.append((dist, tr.seq, d.index, tr.id))
        pairs.sort()
        for dist, _seq, det_idx, track_id in pairs:
            if track_id in reacquired or det_idx in matched_dets:
                continue
            reacquired[track_id] = det_idx
            matched_dets.add(det_idx)

        appeared: list[str] = []
        updated: list[str] = []
        lost: list[str] = []
        source_to_track: dict[str, str] = {}

        # update persons first so held-by references resolve within the frame
        all_matches = {**assigned, **reacquired}
        ordered = sorted(all_matches.items(), key=lambda kv: self.tracks[kv[0]].kind is not EntityKind.PERSON)
        for track_id, det_idx in ordered:
            d = by_index[det_idx]
            tr = self.tracks[track_id]
            tr.bounding_box = d.bbox
            tr.centroid = d.centroid
            tr.last_seen = t
            tr.source_id = d.source_id
            tr.label = self._label_for(d, tr.label)
            tr.last_centroid = None
            if d.kind is EntityKind.PERSON:
                tr.hands = d.hands
                tr.state = TrackState.VISIBLE
                source_to_track[d.source_id] = track_id
            else:
                holder = source_to_track.get(d.held_by) if d.held_by else None
                tr.state = TrackState.HELD if holder else TrackState.VISIBLE
                tr.held_by = holder
            updated.append(track_id)

        for d in dets:
            if d.index in matched_dets:
                continue
            tr = self._spawn(d, t)
            if d.kind is EntityKind.PERSON:
                source_to_track[d.source_id] = tr.id
            elif d.held_by and d.held_by in source_to_track:
                tr.state = TrackState.HELD
                tr.held_by = source_to_track[d.held_by]
            appeared.append(tr.id)

        # current hands, for held-object attribution
        hands = [
            (tr.id, h.position)
            for tr in self.tracks.values()
            if tr.kind is EntityKind.PERSON and tr.state is TrackState.VISIBLE and tr.last_seen == t
            for h in tr.hands
        ]

        for tr in list(self.tracks.values()):
            if tr.last_seen == t or tr.state is TrackState.LOST:
                continue
            held = None
            if tr.kind is EntityKind.WORK_OBJECT:
                for person_id, pos in hands:
                    region = Aabb(pos, pos).inflated(cfg.hold_radius)
                    if intersection_volume(tr.bounding_box, region) > 0 or box_gap_distance(tr.bounding_box, region) == 0.0:
                        held = (person_id, pos)
                        break
            if held is not None:
                person_id, pos = held
                tr.state = TrackState.HELD
                tr.held_by = person_id
                tr.bounding_box = tr.bounding_box.translated_to(pos)
                tr.centroid = pos
                tr.last_seen = t
                updated.append(tr.id)
            elif t - tr.last_seen > cfg.lost_grace:
                tr.state = TrackState.LOST
                tr.last_centroid = tr.centroid
                tr.held_by = None
                if tr.kind is EntityKind.PERSON:
                    tr.hands = ()
                lost.append(tr.id)

        return TrackUpdate(tuple(appeared), tuple(updated), tuple(lost), t)

    def snapshot(self) -> list[TrackedEntity]:
        """Immutable copy of the current track table for concurrent readers."""
        return [replace(tr) for tr in self.tracks.values()]
