"""Attention-gated dialog: the keyword or a gaze event opens a 2 second
window; an utterance inside the window (or one carrying the keyword inline)
is parsed against a small fixed grammar, grounded against the knowledge base
and live tracks, and answered from templates whose clauses only ever cite
currently-stable relations.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Callable

from .geometry import Aabb, Vec3
from .knowledge import KnowledgeBase, ObjectFact
from .relations import LocationRegion, Relation, RelationKind, RelationSet
from .stream import fmt_num
from .tracking import EntityKind, TrackedEntity, TrackState

CLARIFICATION_SENTENCE = "Sorry, I did not understand that"


@dataclass(frozen=True)
class DialogConfig:
    keyword: str = "celia"
    attention_window: float = 2.0
    mic_position: Vec3 = Vec3(0.0, 0.0, 1.0)
    pointing_max_distance: float = 0.3


class AttentionMode(enum.Enum):
    IDLE = "idle"
    ATTENDING = "attending"
    ENGAGED = "engaged"


@dataclass(frozen=True)
class AttentionState:
    mode: AttentionMode = AttentionMode.IDLE
    deadline: float | None = None
    speaker: str | None = None


# -- events -------------------------------------------------------------------


@dataclass(frozen=True)
class KeywordEvent:
    t: float
    speaker: str | None = None


@dataclass(frozen=True)
class GazeEvent:
    t: float
    speaker: str | None = None


@dataclass(frozen=True)
class UtteranceEvent:
    t: float
    text: str
    speaker: str | None = None


@dataclass(frozen=True)
class TickEvent:
    t: float


DialogEvent = KeywordEvent | GazeEvent | UtteranceEvent | TickEvent


# -- queries -------------------------------------------------------------------


class Intent(enum.Enum):
    WHERE_IS = "where_is"
    WHOSE_IS = "whose_is"
    WHAT_IS_RELATED = "what_is_related"
    ASSERT_LABEL = "assert_label"


class OwnerRef(enum.Enum):
    MY = "my"
    YOUR = "your"
    NAMED = "named"
    NONE = "none"


@dataclass(frozen=True)
class Query:
    intent: Intent
    object_label: str | None = None
    owner_ref: OwnerRef = OwnerRef.NONE
    owner_name: str | None = None
    relation_kind: RelationKind | None = None
    deictic: bool = False


class ParseError(ValueError):
    def __init__(self, text: str):
        super().__init__(f"unparsed-utterance: {text!r}")


@dataclass(frozen=True)
class Answer:
    text: str
    grounded_object: str | None = None
    relations_used: tuple[Relation, ...] = ()


_LABEL = r"[a-z0-9][a-z0-9 _-]*?"
_NAME = r"[a-z][a-z0-9 ._-]*?"
_RELATION_WORDS = {"in": RelationKind.IN, "on": RelationKind.ON, "near": RelationKind.NEAR,
                   "next to": RelationKind.NEXT_TO}

_WHERE_DEICTIC = re.compile(r"^where(?: is|'s) (?:this|that)$")
_WHERE_MY = re.compile(rf"^where(?: is|'s) (my|your) (?P<label>{_LABEL})$")
_WHERE_NAMED = re.compile(rf"^where(?: is|'s) (?P<name>{_NAME})'s (?P<label>{_LABEL})$")
_WHERE_THE = re.compile(rf"^where(?: is|'s) the (?P<label>{_LABEL})$")
_WHOSE = re.compile(rf"^whose (?P<label>{_LABEL}) is (?:this|that)$")
_WHAT = re.compile(rf"^what(?: is|'s) (?P<rel>in|on|near|next to) (?:the (?P<label>{_LABEL})|(?P<deictic>this|that))$")
_ASSERT_MY = re.compile(rf"^this is my (?P<label>{_LABEL})$")
_ASSERT_NAMED = re.compile(rf"^this is (?P<name>{_NAME})'s (?P<label>{_LABEL})$")


def normalize_utterance(text: str) -> str:
    cleaned = re.sub(r"[?!.]+$", "", text.strip().lower())
    return " ".join(cleaned.split())


def strip_keyword(text: str, keyword: str) -> tuple[str, bool]:
    """Remove a leading keyword (plus separators). Returns (rest, had_keyword)."""
    norm = normalize_utterance(text)
    kw = keyword.lower()
    if norm == kw:
        return "", True
    m = re.match(rf"^{re.escape(kw)}[\s,:]+", norm)
    if m:
        return norm[m.end():].strip(), True
    return norm, False


def parse_query(text: str, keyword: str = "celia") -> Query:
    """Parse one utterance against the fixed grammar; raises ParseError."""
    norm, _ = strip_keyword(text, keyword)
    if not norm:
        raise ParseError(text)
    if _WHERE_DEICTIC.match(norm):
        return Query(Intent.WHERE_IS, deictic=True)
    m = _WHERE_MY.match(norm)
    if m:
        ref = OwnerRef.MY if m.group(1) == "my" else OwnerRef.YOUR
        return Query(Intent.WHERE_IS, object_label=m.group("label"), owner_ref=ref)
    m = _WHERE_NAMED.match(norm)
    if m:
        return Query(Intent.WHERE_IS, object_label=m.group("label"), owner_ref=OwnerRef.NAMED,
                     owner_name=m.group("name"))
    m = _WHERE_THE.match(norm)
    if m:
        return Query(Intent.WHERE_IS, object_label=m.group("label"))
    m = _WHOSE.match(norm)
    if m:
        return Query(Intent.WHOSE_IS, object_label=m.group("label"), deictic=True)
    m = _WHAT.match(norm)
    if m:
        return Query(
            Intent.WHAT_IS_RELATED,
            object_label=m.group("label"),
            relation_kind=_RELATION_WORDS[m.group("rel")],
            deictic=m.group("deictic") is not None,
        )
    m = _ASSERT_MY.match(norm)
    if m:
        return Query(Intent.ASSERT_LABEL, object_label=m.group("label"), owner_ref=OwnerRef.MY, deictic=True)
    m = _ASSERT_NAMED.match(norm)
    if m:
        return Query(Intent.ASSERT_LABEL, object_label=m.group("label"), owner_ref=OwnerRef.NAMED,
                     owner_name=m.group("name"), deictic=True)
    raise ParseError(text)


# -- grounding ------------------------------------------------------------------


@dataclass(frozen=True)
class DialogContext:
    """Immutable view of the world at answer time."""

    tracks: list[TrackedEntity]
    stable: RelationSet
    regions: list[LocationRegion]

    def track(self, entity_id: str) -> TrackedEntity | None:
        for tr in self.tracks:
            if tr.id == entity_id:
                return tr
        return None


class GroundStatus(enum.Enum):
    FOUND = "found"
    CANDIDATES = "candidates"
    NOT_FOUND = "not_found"
    NO_POINTING = "no_pointing"


@dataclass(frozen=True)
class GroundResult:
    status: GroundStatus
    object_id: str | None = None
    candidates: tuple[str, ...] = ()


def ray_box_distance(origin: Vec3, direction: Vec3, box: Aabb, max_range: float = 20.0) -> tuple[float, float]:
    """(closest distance from the ray to the box, ray parameter at the
    closest point). The distance along t is convex, so a ternary search is
    exact enough at millimeter scale."""
    lo, hi = 0.0, max_range
    for _ in range(80):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        d1 = box.distance_to_point(origin + direction.scaled(m1))
        d2 = box.distance_to_point(origin + direction.scaled(m2))
        if d1 <= d2:
            hi = m2
        else:
            lo = m1
    t = (lo + hi) / 2
    return box.distance_to_point(origin + direction.scaled(t)), t


def ground_by_pointing(ctx: DialogContext, speaker: TrackedEntity | None, cfg: DialogConfig,
                       label: str | None = None) -> GroundResult:
    rays = []
    sources = [speaker] if speaker is not None else [
        tr for tr in ctx.tracks if tr.kind is EntityKind.PERSON and tr.state is not TrackState.LOST
    ]
    for person in sources:
        if person is None:
            continue
        for hand in person.hands:
            if hand.pointing is not None:
                rays.append((hand.position, hand.pointing))
    if not rays:
        return GroundResult(GroundStatus.NO_POINTING)
    best = None
    for tr in ctx.tracks:
        if tr.kind is not EntityKind.WORK_OBJECT or tr.state is TrackState.LOST:
            continue
        if label is not None and not _label_matches(tr, label):
            continue
        for origin, direction in rays:
            dist, t_at = ray_box_distance(origin, direction, tr.bounding_box)
            if dist <= cfg.pointing_max_distance:
                key = (round(dist, 6), round(t_at, 6), tr.id)
                if best is None or key < best:
                    best = key
    if best is None:
        return GroundResult(GroundStatus.NOT_FOUND)
    return GroundResult(GroundStatus.FOUND, object_id=best[2])


def _label_matches(tr: TrackedEntity, label: str) -> bool:
    shown = tr.label if tr.label else tr.id
    return " ".join(shown.lower().replace("_", " ").split()) == " ".join(label.lower().replace("_", " ").split())


def ground(q: Query, kb: KnowledgeBase, ctx: DialogContext, cfg: DialogConfig,
           speaker: TrackedEntity | None) -> GroundResult:
    """Map a parsed query to one tracked object."""
    if q.deictic and q.intent is not Intent.WHAT_IS_RELATED:
        held = [
            tr.id for tr in ctx.tracks
            if tr.kind is EntityKind.WORK_OBJECT and tr.state is TrackState.HELD
            and speaker is not None and tr.held_by == speaker.id
        ]
        if len(held) == 1 and q.intent is Intent.ASSERT_LABEL:
            return GroundResult(GroundStatus.FOUND, object_id=held[0])
        return ground_by_pointing(ctx, speaker, cfg, label=q.object_label if q.intent is Intent.WHOSE_IS else None)

    owner_id: str | None = None
    if q.owner_ref is OwnerRef.MY:
        if speaker is None:
            return GroundResult(GroundStatus.NOT_FOUND)
        owner_id = speaker.id
    elif q.owner_ref is OwnerRef.YOUR:
        # the assistant owns nothing
        return GroundResult(GroundStatus.NOT_FOUND)
    elif q.owner_ref is OwnerRef.NAMED:
        person = kb.person_by_name(q.owner_name or "")
        if person is None:
            return GroundResult(GroundStatus.NOT_FOUND)
        owner_id = person.person_id

    hits = kb.locate(q.object_label or "", owner_id=owner_id)
    if not hits:
        return GroundResult(GroundStatus.NOT_FOUND)
    if len(hits) > 1:
        return GroundResult(GroundStatus.CANDIDATES, candidates=tuple(f.object_id for f in hits))
    return GroundResult(GroundStatus.FOUND, object_id=hits[0].object_id)


# -- answer rendering -------------------------------------------------------------


_SALIENCE = {RelationKind.IN: 0, RelationKind.ON: 1, RelationKind.NEXT_TO: 2, RelationKind.NEAR: 3}
_PHRASE = {RelationKind.IN: "in", RelationKind.ON: "on", RelationKind.NEXT_TO: "next to",
           RelationKind.NEAR: "near"}


def person_display(kb: KnowledgeBase, person_id: str) -> str:
    fact = kb.persons.get(person_id)
    shown = fact.display_label() if fact else person_id
    return shown.replace("_", " ").title()


def _landmark_display(kb: KnowledgeBase, entity_id: str) -> str:
    fact = kb.objects.get(entity_id)
    if fact is not None:
        return fact.display_label()
    person = kb.persons.get(entity_id)
    if person is not None:
        return person.display_label().replace("_", " ").title()
    return entity_id


def _landmark_quality(kb: KnowledgeBase, entity_id: str) -> int:
    fact = kb.objects.get(entity_id)
    labeled = fact is not None and fact.label is not None
    owned = kb.owner_of(entity_id) is not None
    return 1 if (labeled or owned) else 0


def render_answer(fact: ObjectFact, kb: KnowledgeBase, ctx: DialogContext) -> Answer:
    """Describe where an object is, citing at most two stable relations.

    Clause salience: in > on > next to > near, preferring labeled or owned
    landmarks and never reusing one. An on(X, target) clause renders as
    "under the X" and always goes last. Falls back to the containing region,
    then to the last-seen summary, then to "I have not seen ...".
    """
    target = fact.object_id
    stable = ctx.stable.stable_relations()
    candidates = []
    for r in stable:
        if r.kind not in _SALIENCE:
            continue
        if r.subject == target and r.object != target:
            landmark = r.object
            under = False
        elif r.object == target and r.kind is RelationKind.ON and r.subject != target:
            landmark = r.subject
            under = True
        else:
            continue
        phrase = f"under the {_landmark_display(kb, landmark)}" if under else \
            f"{_PHRASE[r.kind]} the {_landmark_display(kb, landmark)}"
        candidates.append((
            _SALIENCE[r.kind],
            -_landmark_quality(kb, landmark),
            _landmark_display(kb, landmark),
            phrase,
            landmark,
            under,
            r,
        ))
    candidates.sort(key=lambda c: c[:4])

    chosen = []
    used_landmarks: set[str] = set()
    for cand in candidates:
        if cand[4] in used_landmarks:
            continue
        chosen.append(cand)
        used_landmarks.add(cand[4])
        if len(chosen) == 2:
            break
    if chosen:
        ordered = [c for c in chosen if not c[5]] + [c for c in chosen if c[5]]
        text = "It is " + ", ".join(c[3] for c in ordered)
        return Answer(text=text, grounded_object=target, relations_used=tuple(c[6] for c in ordered))

    # fallback 1: the smallest region stably containing it
    regions = [
        r for r in stable
        if r.kind is RelationKind.IN_LOCATION and r.subject == target
    ]
    if regions:
        by_name = {reg.name: reg for reg in ctx.regions}
        regions.sort(key=lambda r: (by_name[r.object].box.volume() if r.object in by_name else float("inf"), r.object))
        best = regions[0]
        return Answer(text=f"It is in the {best.object}", grounded_object=target, relations_used=(best,))

    # fallback 2: last-seen summary from frozen facts (no live relations cited)
    when = fmt_num(fact.last_seen_at)
    frozen = [r for r in fact.last_stable_relations if r.kind in _SALIENCE and r.subject == target]
    frozen.sort(key=lambda r: (_SALIENCE[r.kind], r.object))
    if frozen:
        return Answer(
            text=f"I last saw it at {when} s near the {_landmark_display(kb, frozen[0].object)}",
            grounded_object=target,
        )
    frozen_locs = sorted(r.object for r in fact.last_stable_relations if r.kind is RelationKind.IN_LOCATION)
    if frozen_locs:
        return Answer(
            text=f"I last saw it at {when} s near the {frozen_locs[0]}",
            grounded_object=target,
        )
    return Answer(text=f"I last saw it at {when} s", grounded_object=target)


def not_seen_answer(label: str) -> Answer:
    return Answer(text=f"I have not seen the {label}")


# -- the state machine ----------------------------------------------------------


@dataclass
class TranscriptEntry:
    t: float
    speaker: str | None
    text: str
    answer: Answer


class DialogManager:
    """Deterministic attention/query state machine driven by timed events.

    context_provider returns the DialogContext to answer against;
    label_setter(object_id, label, owner_id_or_None) applies assertions.
    """

    def __init__(
        self,
        cfg: DialogConfig,
        kb: KnowledgeBase,
        context_provider: Callable[[], DialogContext],
        label_setter: Callable[[str, str, str | None], None] | None = None,
    ):
        self.cfg = cfg
        self.kb = kb
        self.context_provider = context_provider
        self.label_setter = label_setter
        self.state = AttentionState()

    def _expire(self, now: float) -> None:
        if self.state.mode is not AttentionMode.IDLE and self.state.deadline is not None:
            if now > self.state.deadline:
                self.state = AttentionState()

    def on_event(self, ev: DialogEvent) -> Answer | None:
        self._expire(ev.t)
        if isinstance(ev, TickEvent):
            return None
        if isinstance(ev, (KeywordEvent, GazeEvent)):
            self.state = AttentionState(
                mode=AttentionMode.ATTENDING,
                deadline=ev.t + self.cfg.attention_window,
                speaker=ev.speaker or self.state.speaker,
            )
            return None
        assert isinstance(ev, UtteranceEvent)
        rest, had_keyword = strip_keyword(ev.text, self.cfg.keyword)
        if had_keyword and not rest:
            # bare keyword utterance acts as the attention trigger
            self.state = AttentionState(AttentionMode.ATTENDING, ev.t + self.cfg.attention_window,
                                        ev.speaker or self.state.speaker)
            return None
        if self.state.mode is AttentionMode.IDLE and not had_keyword:
            return None
        speaker_ref = ev.speaker or self.state.speaker
        answer, engage = self._answer(rest, speaker_ref, ev.t)
        if engage:
            self.state = AttentionState(AttentionMode.ENGAGED, ev.t + self.cfg.attention_window, speaker_ref)
        else:
            self.state = AttentionState()
        return answer

    # -- helpers -------------------------------------------------------------

    def _resolve_speaker(self, speaker_ref: str | None, ctx: DialogContext) -> TrackedEntity | None:
        persons = [tr for tr in ctx.tracks if tr.kind is EntityKind.PERSON and tr.state is not TrackState.LOST]
        if speaker_ref:
            for tr in persons:
                if speaker_ref in (tr.id, tr.source_id) or (tr.label and _label_matches(tr, speaker_ref)):
                    return tr
            return None
        if not persons:
            return None
        # fall back to whoever is closest to the microphone
        return min(persons, key=lambda tr: (tr.centroid.distance_to(self.cfg.mic_position), tr.id))

    def _answer(self, text: str, speaker_ref: str | None, now: float) -> tuple[Answer, bool]:
        try:
            q = parse_query(text, keyword=self.cfg.keyword)
        except ParseError:
            return Answer(text=CLARIFICATION_SENTENCE), False
        ctx = self.context_provider()
        speaker = self._resolve_speaker(speaker_ref, ctx)

        if q.owner_ref is OwnerRef.MY and speaker is None:
            return Answer(text="I am not sure who is asking"), False

        if q.intent is Intent.WHAT_IS_RELATED:
            return self._answer_related(q, ctx, speaker), False

        result = ground(q, self.kb, ctx, self.cfg, speaker)
        if result.status is GroundStatus.NO_POINTING:
            return Answer(text="I cannot tell what you are pointing at"), False
        if result.status is GroundStatus.CANDIDATES:
            n = len(result.candidates)
            return Answer(text=f"Which one do you mean? I can see {n} of them"), True
        if result.status is GroundStatus.NOT_FOUND:
            if q.owner_ref is OwnerRef.NAMED and self.kb.person_by_name(q.owner_name or "") is None:
                return Answer(text=f"I do not know {q.owner_name}"), False
            return not_seen_answer(q.object_label or "object"), False

        object_id = result.object_id
        assert object_id is not None

        if q.intent is Intent.WHERE_IS:
            fact = self.kb.objects.get(object_id)
            if fact is None:
                return not_seen_answer(q.object_label or object_id), False
            return render_answer(fact, self.kb, ctx), False

        if q.intent is Intent.WHOSE_IS:
            owner = self.kb.owner_of(object_id)
            shown = self.kb.objects[object_id].display_label() if object_id in self.kb.objects else object_id
            if owner is None:
                return Answer(text=f"The {shown} does not belong to anyone I know",
                              grounded_object=object_id), False
            return Answer(text=f"The {shown} belongs to {person_display(self.kb, owner)}",
                          grounded_object=object_id), False

        if q.intent is Intent.ASSERT_LABEL:
            owner_id = None
            if q.owner_ref is OwnerRef.MY and speaker is not None:
                owner_id = speaker.id
            elif q.owner_ref is OwnerRef.NAMED:
                person = self.kb.person_by_name(q.owner_name or "")
                if person is None:
                    return Answer(text=f"I do not know {q.owner_name}"), False
                owner_id = person.person_id
            if self.label_setter is not None and q.object_label:
                self.label_setter(object_id, q.object_label, owner_id)
            owner_phrase = person_display(self.kb, owner_id) + "'s" if owner_id else "the"
            return Answer(text=f"Understood, this is {owner_phrase} {q.object_label}",
                          grounded_object=object_id), False

        raise AssertionError(f"unhandled intent {q.intent}")

    def _answer_related(self, q: Query, ctx: DialogContext, speaker: TrackedEntity | None) -> Answer:
        """'what is <relation> the <landmark>': list stable relation subjects.

        The landmark may be a region name ("what is in the toolbox"), in
        which case InLocation relations are consulted instead of object-in.
        """
        kind = q.relation_kind or RelationKind.NEAR
        landmark_id: str | None = None
        landmark_shown = q.object_label or "that"
        region_names = {r.name for r in ctx.regions}
        if q.deictic:
            result = ground_by_pointing(ctx, speaker, self.cfg)
            if result.status is GroundStatus.NO_POINTING:
                return Answer(text="I cannot tell what you are pointing at")
            if result.status is not GroundStatus.FOUND:
                return Answer(text="I cannot tell what you are pointing at")
            landmark_id = result.object_id
            landmark_shown = _landmark_display(self.kb, landmark_id)
        elif q.object_label in region_names:
            landmark_id = q.object_label
            if kind is RelationKind.IN:
                kind = RelationKind.IN_LOCATION
        else:
            hits = self.kb.locate(q.object_label or "")
            if not hits:
                return not_seen_answer(landmark_shown)
            if len(hits) > 1:
                return Answer(text=f"Which one do you mean? I can see {len(hits)} of them")
            landmark_id = hits[0].object_id
            landmark_shown = hits[0].display_label()

        used = [r for r in ctx.stable.stable_relations() if r.kind is kind and r.object == landmark_id]
        phrase = _PHRASE.get(q.relation_kind or RelationKind.NEAR, "in")
        if not used:
            return Answer(text=f"I see nothing {phrase} the {landmark_shown}")
        names = sorted(_landmark_display(self.kb, r.subject) for r in used)
        if len(names) == 1:
            listing = f"The {names[0]} is"
        else:
            listing = "The " + ", the ".join(names[:-1]) + f" and the {names[-1]} are"
        return Answer(text=f"{listing} {phrase} the {landmark_shown}",
                      grounded_object=landmark_id, relations_used=tuple(used))
