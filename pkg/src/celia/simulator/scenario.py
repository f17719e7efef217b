"""Declarative scenario scripts: persons on waypoint paths, objects with
placement timelines and held intervals, timed dialog events, and a region
map. Scripts are YAML documents (see scenarios/ for commented examples) and
are fully deterministic."""
from __future__ import annotations

from dataclasses import dataclass

import yaml

from ..dialog import DialogEvent, GazeEvent, KeywordEvent, UtteranceEvent
from ..geometry import Aabb, Vec3, vec_from
from ..knowledge import Expectation
from ..relations import LocationRegion
from ..stream import DetectionFrame, HandData, ObjectData, PersonData

DEFAULT_RATE = 30.0
PERSON_HEIGHT = 1.7
PERSON_RADIUS = 0.2
HAND_REACH = 0.5
SHOULDER_HEIGHT = 1.35


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Waypoint:
    t: float
    pos: Vec3


@dataclass(frozen=True)
class Window:
    start: float
    end: float

    def contains(self, t: float) -> bool:
        return self.start <= t <= self.end


@dataclass(frozen=True)
class HeldInterval:
    start: float
    end: float
    by: str


@dataclass(frozen=True)
class Gesture:
    """A person pointing at a target during a time window."""

    start: float
    end: float
    person: str
    target: Vec3


def _lerp(a: Vec3, b: Vec3, f: float) -> Vec3:
    return Vec3(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f, a.z + (b.z - a.z) * f)


def _path_position(waypoints: tuple[Waypoint, ...], t: float) -> Vec3:
    if t <= waypoints[0].t:
        return waypoints[0].pos
    for prev, nxt in zip(waypoints, waypoints[1:]):
        if t <= nxt.t:
            span = nxt.t - prev.t
            f = 0.0 if span <= 0 else (t - prev.t) / span
            return _lerp(prev.pos, nxt.pos, f)
    return waypoints[-1].pos


@dataclass(frozen=True)
class PersonSpec:
    id: str
    waypoints: tuple[Waypoint, ...]
    presence: tuple[Window, ...]
    height: float = PERSON_HEIGHT
    radius: float = PERSON_RADIUS

    def present(self, t: float) -> bool:
        return any(w.contains(t) for w in self.presence)

    def position(self, t: float) -> Vec3:
        p = _path_position(self.waypoints, t)
        return Vec3(p.x, p.y, 0.0)

    def box(self, t: float) -> Aabb:
        p = self.position(t)
        r = self.radius
        return Aabb(Vec3(p.x - r, p.y - r, 0.0), Vec3(p.x + r, p.y + r, self.height))


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    label: str | None
    size: Vec3
    waypoints: tuple[Waypoint, ...]
    presence: tuple[Window, ...]
    held: tuple[HeldInterval, ...] = ()

    def present(self, t: float) -> bool:
        return any(w.contains(t) for w in self.presence)

    def position(self, t: float) -> Vec3:
        """Bottom-center of the box."""
        return _path_position(self.waypoints, t)

    def box(self, t: float) -> Aabb:
        return Aabb.from_base_size(self.position(t), self.size)

    def holder(self, t: float) -> str | None:
        for interval in self.held:
            if interval.start <= t <= interval.end:
                return interval.by
        return None


@dataclass(frozen=True)
class ScriptEvent:
    t: float
    kind: str  # keyword | gaze | utterance
    speaker: str | None = None
    text: str | None = None


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    duration: float
    seed: int
    rate: float
    work_area: Aabb
    regions: tuple[LocationRegion, ...]
    persons: tuple[PersonSpec, ...]
    objects: tuple[ObjectSpec, ...]
    gestures: tuple[Gesture, ...] = ()
    events: tuple[ScriptEvent, ...] = ()
    expectations: tuple[Expectation, ...] = ()

    def frame_count(self) -> int:
        return int(round(self.duration * self.rate)) + 1

    def frame_time(self, k: int) -> float:
        return round(k / self.rate, 6)


# -- script evaluation ---------------------------------------------------------


def _person_hands(script: ScenarioScript, spec: PersonSpec, t: float) -> tuple[HandData, ...]:
    hands = []
    for obj in script.objects:
        if obj.present(t) and obj.holder(t) == spec.id:
            hands.append(HandData(pos=obj.box(t).centroid()))
    for g in script.gestures:
        if g.person == spec.id and g.start <= t <= g.end:
            p = spec.position(t)
            shoulder = Vec3(p.x, p.y, SHOULDER_HEIGHT)
            direction = (g.target - shoulder).unit()
            hands.append(HandData(pos=shoulder + direction.scaled(HAND_REACH), pointing=direction))
    return tuple(hands)


def frame_at(script: ScenarioScript, k: int) -> DetectionFrame:
    """Exact-pose detection frame for frame index k (the viaFrames route)."""
    t = script.frame_time(k)
    persons = tuple(
        PersonData(
            id=spec.id,
            centroid=spec.box(t).centroid(),
            bbox=spec.box(t),
            hands=_person_hands(script, spec, t),
        )
        for spec in script.persons
        if spec.present(t)
    )
    objects = tuple(
        ObjectData(
            id=spec.id,
            centroid=spec.box(t).centroid(),
            bbox=spec.box(t),
            held_by=spec.holder(t),
            label=spec.label,
        )
        for spec in script.objects
        if spec.present(t)
    )
    return DetectionFrame(frame=k, t=t, persons=persons, objects=objects)


def dialog_events(script: ScenarioScript) -> list[DialogEvent]:
    out: list[DialogEvent] = []
    for ev in sorted(script.events, key=lambda e: e.t):
        if ev.kind == "keyword":
            out.append(KeywordEvent(t=ev.t, speaker=ev.speaker))
        elif ev.kind == "gaze":
            out.append(GazeEvent(t=ev.t, speaker=ev.speaker))
        else:
            out.append(UtteranceEvent(t=ev.t, text=ev.text or "", speaker=ev.speaker))
    return out


def object_poses(script: ScenarioScript, t: float) -> dict[str, Aabb]:
    return {o.id: o.box(t) for o in script.objects if o.present(t)}


# -- parsing -------------------------------------------------------------------


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ScenarioError(f"{where}: missing required key '{key}'")
    return doc[key]


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(unknown)}")


def _parse_box(doc, where: str) -> Aabb:
    if not isinstance(doc, dict) or "min" not in doc or "max" not in doc:
        raise ScenarioError(f"{where}: box needs min and max")
    _check_keys(doc, {"min", "max"}, where)
    try:
        return Aabb(vec_from(doc["min"]), vec_from(doc["max"]))
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{where}: {e}") from e


def _parse_windows(raw, default: Window, where: str) -> tuple[Window, ...]:
    if raw is None:
        return (default,)
    windows = []
    for i, w in enumerate(raw):
        _check_keys(w, {"from", "to"}, f"{where}.presence[{i}]")
        windows.append(Window(float(w["from"]), float(w["to"])))
    return tuple(windows)


def _parse_waypoints(raw, dims: int, where: str) -> tuple[Waypoint, ...]:
    if not raw:
        raise ScenarioError(f"{where}: needs at least one path entry")
    waypoints = []
    for i, wp in enumerate(raw):
        _check_keys(wp, {"t", "at"}, f"{where}.path[{i}]")
        at = wp["at"]
        if len(at) != dims:
            raise ScenarioError(f"{where}.path[{i}]: expected {dims} coordinates")
        pos = vec_from(at) if dims == 3 else Vec3(float(at[0]), float(at[1]), 0.0)
        waypoints.append(Waypoint(float(wp["t"]), pos))
    waypoints.sort(key=lambda w: w.t)
    return tuple(waypoints)


def parse_scenario(doc: dict, source: str = "<scenario>") -> ScenarioScript:
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: document is not a mapping")
    _check_keys(
        doc,
        {"name", "duration", "seed", "rate", "work_area", "regions", "persons",
         "objects", "gestures", "events", "expectations"},
        source,
    )
    duration = float(_require(doc, "duration", source))
    if duration <= 0:
        raise ScenarioError(f"{source}: duration must be positive")
    work_area = _parse_box(_require(doc, "work_area", source), f"{source}.work_area")

    regions = []
    for i, r in enumerate(doc.get("regions") or []):
        _check_keys(r, {"name", "box"}, f"{source}.regions[{i}]")
        regions.append(LocationRegion(str(_require(r, "name", f"{source}.regions[{i}]")),
                                      _parse_box(_require(r, "box", f"{source}.regions[{i}]"),
                                                 f"{source}.regions[{i}].box")))
    names = [r.name for r in regions]
    if len(set(names)) != len(names):
        raise ScenarioError(f"{source}: region names must be unique")

    persons = []
    for i, p in enumerate(doc.get("persons") or []):
        where = f"{source}.persons[{i}]"
        _check_keys(p, {"id", "path", "presence", "height", "radius"}, where)
        waypoints = _parse_waypoints(_require(p, "path", where), 2, where)
        persons.append(
            PersonSpec(
                id=str(_require(p, "id", where)),
                waypoints=waypoints,
                presence=_parse_windows(p.get("presence"), Window(waypoints[0].t, duration), where),
                height=float(p.get("height", PERSON_HEIGHT)),
                radius=float(p.get("radius", PERSON_RADIUS)),
            )
        )

    objects = []
    for i, o in enumerate(doc.get("objects") or []):
        where = f"{source}.objects[{i}]"
        _check_keys(o, {"id", "label", "size", "path", "presence", "held"}, where)
        waypoints = _parse_waypoints(_require(o, "path", where), 3, where)
        held = []
        for j, h in enumerate(o.get("held") or []):
            _check_keys(h, {"from", "to", "by"}, f"{where}.held[{j}]")
            held.append(HeldInterval(float(h["from"]), float(h["to"]), str(h["by"])))
        objects.append(
            ObjectSpec(
                id=str(_require(o, "id", where)),
                label=(str(o["label"]) if o.get("label") is not None else None),
                size=vec_from(_require(o, "size", where)),
                waypoints=waypoints,
                presence=_parse_windows(o.get("presence"), Window(waypoints[0].t, duration), where),
                held=tuple(held),
            )
        )

    ids = [s.id for s in persons] + [s.id for s in objects]
    if len(set(ids)) != len(ids):
        raise ScenarioError(f"{source}: person/object ids must be unique")
    person_ids = {s.id for s in persons}

    gestures = []
    for i, g in enumerate(doc.get("gestures") or []):
        where = f"{source}.gestures[{i}]"
        _check_keys(g, {"from", "to", "person", "target"}, where)
        if g.get("person") not in person_ids:
            raise ScenarioError(f"{where}: unknown person '{g.get('person')}'")
        gestures.append(Gesture(float(g["from"]), float(g["to"]), str(g["person"]), vec_from(g["target"])))

    events = []
    for i, e in enumerate(doc.get("events") or []):
        where = f"{source}.events[{i}]"
        _check_keys(e, {"t", "kind", "speaker", "text"}, where)
        kind = _require(e, "kind", where)
        if kind not in ("keyword", "gaze", "utterance"):
            raise ScenarioError(f"{where}: unknown event kind '{kind}'")
        if kind == "utterance" and not e.get("text"):
            raise ScenarioError(f"{where}: utterance needs text")
        t = float(_require(e, "t", where))
        if not (0.0 <= t <= duration):
            raise ScenarioError(f"{where}: event time outside [0, duration]")
        events.append(ScriptEvent(t=t, kind=kind, speaker=e.get("speaker"), text=e.get("text")))

    expectations = []
    for i, x in enumerate(doc.get("expectations") or []):
        where = f"{source}.expectations[{i}]"
        _check_keys(x, {"label", "region", "missing_after"}, where)
        region = str(_require(x, "region", where))
        if region not in names:
            raise ScenarioError(f"{where}: unknown region '{region}'")
        expectations.append(
            Expectation(
                id=f"exp-{i}",
                object_label=str(_require(x, "label", where)),
                region=region,
                missing_after=float(_require(x, "missing_after", where)),
            )
        )

    return ScenarioScript(
        name=str(doc.get("name", "scenario")),
        duration=duration,
        seed=int(doc.get("seed", 0)),
        rate=float(doc.get("rate", DEFAULT_RATE)),
        work_area=work_area,
        regions=tuple(regions),
        persons=tuple(persons),
        objects=tuple(objects),
        gestures=tuple(gestures),
        events=tuple(events),
        expectations=tuple(expectations),
    )


def load_scenario(path: str) -> ScenarioScript:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ScenarioError(f"{path}: {e}") from e
    return parse_scenario(doc, source=path)
