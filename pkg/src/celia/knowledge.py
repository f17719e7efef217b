"""Persistent facts: ownership, last-touched, last-known locations, and the
expectation watchlist that raises Missing/Misplaced alerts.

Ownership is append-only. The whole store serializes to one versioned JSON
document with quantized numbers, so save/load round-trips are byte-exact.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from .geometry import Vec3
from .relations import (
    Relation,
    RelationConfig,
    RelationKind,
    RelationSet,
    infer_ownership,
    update_last_touched,
)
from .tracking import EntityKind, TrackedEntity, TrackState

KB_FORMAT = "celia-kb"
KB_VERSION = 1


@dataclass(frozen=True)
class OwnershipRecord:
    object_id: str
    owner_id: str
    assigned_at: float


@dataclass
class ObjectFact:
    object_id: str
    label: str | None
    last_seen_at: float
    last_centroid: Vec3
    last_stable_relations: tuple[Relation, ...] = ()
    last_touched_by: str | None = None
    last_touched_at: float | None = None

    def display_label(self) -> str:
        return self.label if self.label else self.object_id


@dataclass
class PersonFact:
    person_id: str
    label: str | None
    last_seen_at: float
    last_centroid: Vec3

    def display_label(self) -> str:
        return self.label if self.label else self.person_id


@dataclass(frozen=True)
class Expectation:
    id: str
    object_label: str
    region: str
    missing_after: float

    def __post_init__(self) -> None:
        if self.missing_after <= 0:
            raise ValueError("missing_after must be positive")


class AlertKind(enum.Enum):
    MISSING = "missing"
    MISPLACED = "misplaced"


@dataclass(frozen=True)
class Alert:
    kind: AlertKind
    object_label: str
    region: str
    raised_at: float


def _q(x: float) -> float:
    v = round(float(x), 6)
    return 0.0 if v == 0.0 else v


def _norm_label(label: str) -> str:
    return " ".join(label.lower().replace("_", " ").split())


class KnowledgeBase:
    """Single-writer store fed by the frame pipeline; queries read snapshots."""

    def __init__(self, cfg: RelationConfig | None = None, expectations: tuple[Expectation, ...] = ()):
        self.cfg = cfg or RelationConfig()
        self.ownership: dict[str, OwnershipRecord] = {}
        self.objects: dict[str, ObjectFact] = {}
        self.persons: dict[str, PersonFact] = {}
        self.expectations: dict[str, Expectation] = {}
        self._last_in_region: dict[str, float] = {}
        self._stable_locs_by_label: dict[str, list[set[str]]] = {}
        self._active_alerts: dict[tuple[str, str], Alert] = {}
        self.alert_log: list[tuple[float, str, str, str, str]] = []  # (t, event, kind, label, region)
        self.last_time: float | None = None
        for exp in expectations:
            self.add_expectation(exp)

    def add_expectation(self, exp: Expectation) -> None:
        if exp.id in self.expectations:
            raise ValueError(f"duplicate expectation id '{exp.id}'")
        self.expectations[exp.id] = exp

    # -- frame ingestion ----------------------------------------------------

    def record_frame(self, rs: RelationSet, tracks: list[TrackedEntity], appeared: tuple[str, ...] = ()) -> None:
        t = rs.frame_time
        if self.last_time is not None and t < self.last_time:
            raise ValueError("time-regression")
        self.last_time = t

        live = [tr for tr in tracks if tr.state is not TrackState.LOST]
        live_persons = [tr for tr in live if tr.kind is EntityKind.PERSON]
        live_objects = [tr for tr in live if tr.kind is EntityKind.WORK_OBJECT]

        for tr in live_persons:
            fact = self.persons.get(tr.id)
            if fact is None:
                self.persons[tr.id] = PersonFact(tr.id, tr.label, t, tr.centroid)
            else:
                fact.label = tr.label or fact.label
                fact.last_seen_at = t
                fact.last_centroid = tr.centroid

        for tr in live_objects:
            fact = self.objects.get(tr.id)
            stable_here = tuple(
                r for r in rs.stable_relations() if r.subject == tr.id or r.object == tr.id
            )
            if fact is None:
                fact = ObjectFact(tr.id, tr.label, t, tr.centroid, stable_here)
                self.objects[tr.id] = fact
            else:
                fact.label = tr.label or fact.label
                fact.last_seen_at = t
                fact.last_centroid = tr.centroid
                fact.last_stable_relations = stable_here

        by_id = {tr.id: tr for tr in tracks}
        for new_id in appeared:
            tr = by_id.get(new_id)
            if tr is None or tr.kind is not EntityKind.WORK_OBJECT or new_id in self.ownership:
                continue
            owner = infer_ownership(tr, live_persons, self.cfg)
            if owner is not None:
                self.ownership[new_id] = OwnershipRecord(new_id, owner, t)

        for rel in update_last_touched(live_objects, live_persons, self.cfg, t):
            fact = self.objects.get(rel.subject)
            if fact is not None:
                fact.last_touched_by = rel.object
                fact.last_touched_at = t

        # watchlist bookkeeping: note when each expected label was last seen
        # stably inside its region
        stable_locs: dict[str, set[str]] = {}
        for r in rs.stable.values():
            if r.kind is RelationKind.IN_LOCATION:
                stable_locs.setdefault(r.subject, set()).add(r.object)
        self._stable_locs_by_label = {}
        for tr in live_objects:
            fact = self.objects[tr.id]
            label = _norm_label(fact.display_label())
            self._stable_locs_by_label.setdefault(label, []).append(stable_locs.get(tr.id, set()))
        for exp in self.expectations.values():
            if exp.id not in self._last_in_region:
                self._last_in_region[exp.id] = t
            for locs in self._stable_locs_by_label.get(_norm_label(exp.object_label), []):
                if exp.region in locs:
                    self._last_in_region[exp.id] = t
                    break

    # -- queries -------------------------------------------------------------

    def owner_of(self, object_id: str) -> str | None:
        record = self.ownership.get(object_id)
        return record.owner_id if record else None

    def canonical_person(self, person_id: str | None) -> str | None:
        """Earliest person id sharing this person's name.

        A person who leaves the view and returns gets a fresh track id but
        keeps their name; name continuity makes "my wallet" still work.
        """
        if person_id is None:
            return None
        fact = self.persons.get(person_id)
        if fact is None or not fact.label:
            return person_id
        wanted = _norm_label(fact.label)
        for pid, other in self.persons.items():  # insertion order = appearance order
            if other.label and _norm_label(other.label) == wanted:
                return pid
        return person_id

    def objects_of(self, person_id: str) -> list[str]:
        owner = self.canonical_person(person_id)
        return sorted(
            r.object_id
            for r in self.ownership.values()
            if self.canonical_person(r.owner_id) == owner
        )

    def locate(self, label: str, owner_id: str | None = None) -> list[ObjectFact]:
        """All object facts matching the label (and owner, when given).

        Zero hits is the not-found signal; more than one asks for
        disambiguation upstream.
        """
        wanted = _norm_label(label)
        hits = [
            fact
            for fact in self.objects.values()
            if _norm_label(fact.display_label()) == wanted
        ]
        if owner_id is not None:
            owner = self.canonical_person(owner_id)
            hits = [f for f in hits if self.canonical_person(self.owner_of(f.object_id)) == owner]
        return sorted(hits, key=lambda f: f.object_id)

    def person_by_name(self, name: str) -> PersonFact | None:
        wanted = _norm_label(name)
        for fact in sorted(self.persons.values(), key=lambda f: f.person_id):
            if _norm_label(fact.display_label()) == wanted:
                return fact
        return None

    # -- watchlist ------------------------------------------------------------

    def check_expectations(self, now: float) -> list[Alert]:
        """Recompute active alerts. Missing: the label has not been stably in
        its region for longer than missing_after. Misplaced: the label is
        stably in some other region and not the expected one. Alerts clear as
        soon as their condition clears."""
        for exp in sorted(self.expectations.values(), key=lambda e: e.id):
            last_in = self._last_in_region.get(exp.id, now)
            self._set_alert(exp, AlertKind.MISSING, now - last_in > exp.missing_after, now)
            locs_list = self._stable_locs_by_label.get(_norm_label(exp.object_label), [])
            misplaced = any(locs and exp.region not in locs for locs in locs_list)
            self._set_alert(exp, AlertKind.MISPLACED, misplaced, now)
        return self.active_alerts()

    def _set_alert(self, exp: Expectation, kind: AlertKind, condition: bool, now: float) -> None:
        key = (exp.id, kind.value)
        active = key in self._active_alerts
        if condition and not active:
            self._active_alerts[key] = Alert(kind, exp.object_label, exp.region, raised_at=now)
            self.alert_log.append((now, "raised", kind.value, exp.object_label, exp.region))
        elif not condition and active:
            del self._active_alerts[key]
            self.alert_log.append((now, "cleared", kind.value, exp.object_label, exp.region))

    def active_alerts(self) -> list[Alert]:
        return sorted(self._active_alerts.values(), key=lambda a: (a.object_label, a.kind.value))

    # -- persistence ----------------------------------------------------------

    def to_document(self) -> dict:
        def rel_doc(r: Relation) -> dict:
            return {"kind": r.kind.value, "subject": r.subject, "object": r.object, "since": _q(r.since)}

        return {
            "format": KB_FORMAT,
            "version": KB_VERSION,
            "time": _q(self.last_time) if self.last_time is not None else None,
            "ownership": [
                {"object": r.object_id, "owner": r.owner_id, "assigned_at": _q(r.assigned_at)}
                for r in sorted(self.ownership.values(), key=lambda r: r.object_id)
            ],
            "objects": [
                {
                    "id": f.object_id,
                    "label": f.label,
                    "last_seen_at": _q(f.last_seen_at),
                    "last_centroid": [_q(f.last_centroid.x), _q(f.last_centroid.y), _q(f.last_centroid.z)],
                    "relations": [rel_doc(r) for r in sorted(f.last_stable_relations, key=lambda r: r.key())],
                    "last_touched_by": f.last_touched_by,
                    "last_touched_at": _q(f.last_touched_at) if f.last_touched_at is not None else None,
                }
                for f in sorted(self.objects.values(), key=lambda f: f.object_id)
            ],
            "persons": [
                {
                    "id": f.person_id,
                    "label": f.label,
                    "last_seen_at": _q(f.last_seen_at),
                    "last_centroid": [_q(f.last_centroid.x), _q(f.last_centroid.y), _q(f.last_centroid.z)],
                }
                for f in sorted(self.persons.values(), key=lambda f: f.person_id)
            ],
            "expectations": [
                {"id": e.id, "label": e.object_label, "region": e.region, "missing_after": _q(e.missing_after)}
                for e in sorted(self.expectations.values(), key=lambda e: e.id)
            ],
            "presence": {k: _q(v) for k, v in sorted(self._last_in_region.items())},
            "alerts": {
                "active": [
                    {"kind": a.kind.value, "label": a.object_label, "region": a.region, "raised_at": _q(a.raised_at)}
                    for a in self.active_alerts()
                ],
                "log": [list(entry) for entry in self.alert_log],
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str, cfg: RelationConfig | None = None) -> "KnowledgeBase":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValueError(f"kb-load: line {e.lineno}, column {e.colno}: {e.msg}") from e
        if not isinstance(doc, dict) or doc.get("format") != KB_FORMAT:
            raise ValueError("kb-load: not a knowledge base document")
        if doc.get("version") != KB_VERSION:
            raise ValueError(f"kb-load: unsupported version {doc.get('version')!r}")
        kb = cls(cfg=cfg)
        try:
            kb.last_time = doc.get("time")
            for row in doc.get("ownership", []):
                kb.ownership[row["object"]] = OwnershipRecord(row["object"], row["owner"], row["assigned_at"])
            for row in doc.get("objects", []):
                rels = tuple(
                    Relation(RelationKind(r["kind"]), r["subject"], r["object"], r["since"])
                    for r in row.get("relations", [])
                )
                kb.objects[row["id"]] = ObjectFact(
                    object_id=row["id"],
                    label=row.get("label"),
                    last_seen_at=row["last_seen_at"],
                    last_centroid=Vec3(*row["last_centroid"]),
                    last_stable_relations=rels,
                    last_touched_by=row.get("last_touched_by"),
                    last_touched_at=row.get("last_touched_at"),
                )
            for row in doc.get("persons", []):
                kb.persons[row["id"]] = PersonFact(
                    row["id"], row.get("label"), row["last_seen_at"], Vec3(*row["last_centroid"])
                )
            for row in doc.get("expectations", []):
                kb.add_expectation(Expectation(row["id"], row["label"], row["region"], row["missing_after"]))
            kb._last_in_region = dict(doc.get("presence", {}))
            for row in doc.get("alerts", {}).get("active", []):
                alert = Alert(AlertKind(row["kind"]), row["label"], row["region"], row["raised_at"])
                exp_id = next(
                    (e.id for e in kb.expectations.values() if e.object_label == alert.object_label and e.region == alert.region),
                    alert.object_label,
                )
                kb._active_alerts[(exp_id, alert.kind.value)] = alert
            kb.alert_log = [tuple(entry) for entry in doc.get("alerts", {}).get("log", [])]
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"kb-load: malformed document: {e}") from e
        return kb

    @classmethod
    def load(cls, path: str, cfg: RelationConfig | None = None) -> "KnowledgeBase":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read(), cfg=cfg)
