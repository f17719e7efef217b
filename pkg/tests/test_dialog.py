import pytest

from celia.detection import HandObservation
from celia.dialog import (
    CLARIFICATION_SENTENCE,
    AttentionMode,
    DialogConfig,
    DialogContext,
    DialogManager,
    GazeEvent,
    Intent,
    KeywordEvent,
    OwnerRef,
    ParseError,
    TickEvent,
    UtteranceEvent,
    ground_by_pointing,
    parse_query,
    ray_box_distance,
    render_answer,
)
from celia.geometry import Vec3
from celia.knowledge import KnowledgeBase, ObjectFact, OwnershipRecord
from celia.relations import (
    LocationRegion,
    Relation,
    RelationConfig,
    RelationKind,
    RelationSet,
    compute_relations,
)
from celia.tracking import EntityKind, TrackedEntity

from conftest import box

CFG = DialogConfig()


class TestParseQuery:
    def test_paper_query(self):
        q = parse_query("Celia, where is my wallet?")
        assert q.intent is Intent.WHERE_IS
        assert q.object_label == "wallet"
        assert q.owner_ref is OwnerRef.MY

    def test_the_variant(self):
        q = parse_query("where is the coffee cup")
        assert (q.intent, q.object_label, q.owner_ref) == (Intent.WHERE_IS, "coffee cup", OwnerRef.NONE)

    def test_named_possessive(self):
        q = parse_query("where is mr jones's wallet")
        assert q.owner_ref is OwnerRef.NAMED
        assert q.owner_name == "mr jones"
        assert q.object_label == "wallet"

    def test_whose_deictic(self):
        q = parse_query("whose cup is this")
        assert (q.intent, q.object_label, q.deictic) == (Intent.WHOSE_IS, "cup", True)

    def test_what_is_related(self):
        q = parse_query("what is next to the vase?")
        assert q.intent is Intent.WHAT_IS_RELATED
        assert q.relation_kind is RelationKind.NEXT_TO
        assert q.object_label == "vase"

    def test_assert_label(self):
        q = parse_query("Celia, this is my wallet")
        assert (q.intent, q.object_label, q.owner_ref, q.deictic) == (
            Intent.ASSERT_LABEL, "wallet", OwnerRef.MY, True)

    def test_deictic_where(self):
        q = parse_query("where is this")
        assert q.intent is Intent.WHERE_IS and q.deictic

    def test_unparsed(self):
        with pytest.raises(ParseError, match="unparsed-utterance"):
            parse_query("make me a sandwich")

    def test_case_and_punctuation_insensitive(self):
        q = parse_query("CELIA, WHERE IS MY WALLET?!")
        assert q.object_label == "wallet"


def _world(with_pointing=False):
    """One person, a cup on the desk, a wallet next to a vase with
    magazines on it (the elder-care arrangement), stable relations live."""
    kb = KnowledgeBase(RelationConfig(debounce_frames=1))
    tracks = []

    def add_obj(tid, b, label):
        tracks.append(TrackedEntity(id=tid, kind=EntityKind.WORK_OBJECT, bounding_box=b,
                                    centroid=b.centroid(), first_seen=0.0, last_seen=0.0,
                                    label=label, seq=len(tracks)))

    add_obj("object-1", box(2.62, 1.22, 0, 2.78, 1.38, 0.35), "vase")
    add_obj("object-2", box(2.89, 1.255, 0, 3.01, 1.345, 0.03), "wallet")
    add_obj("object-3", box(2.94, 1.195, 0.03, 3.22, 1.405, 0.05), "magazines")
    add_obj("object-4", box(0.95, 0.45, 0, 1.05, 0.55, 0.12), "cup")
    hands = ()
    if with_pointing:
        direction = (Vec3(1.0, 0.5, 0.06) - Vec3(1.0, 1.4, 0.8)).unit()
        hands = (HandObservation(position=Vec3(1.0, 1.4, 0.8), pointing=direction),)
    tracks.append(TrackedEntity(id="person-1", kind=EntityKind.PERSON,
                                bounding_box=box(0.8, 1.2, 0, 1.2, 1.6, 1.7),
                                centroid=Vec3(1.0, 1.4, 0.85), first_seen=0.0, last_seen=0.0,
                                label="mr_jones", source_id="mr_jones", hands=hands))
    regions = [LocationRegion("work area", box(0, 0, 0, 4, 3, 2))]
    rs = compute_relations(tracks, regions, None, RelationConfig(debounce_frames=1), frame_time=0.0)
    kb.record_frame(rs, tracks, appeared=tuple(tr.id for tr in tracks))
    kb.ownership["object-2"] = OwnershipRecord("object-2", "person-1", 0.0)  # he carried it in
    ctx = DialogContext(tracks=tracks, stable=rs, regions=regions)
    return kb, ctx


def _manager(kb, ctx, label_calls=None):
    return DialogManager(
        CFG, kb,
        context_provider=lambda: ctx,
        label_setter=(lambda oid, label, owner: label_calls.append((oid, label, owner)))
        if label_calls is not None else None,
    )


class TestAttentionTiming:
    def test_keyword_then_utterance_within_window(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        assert dm.on_event(KeywordEvent(t=0.0, speaker="mr_jones")) is None
        answer = dm.on_event(UtteranceEvent(t=1.9, text="where is my wallet", speaker="mr_jones"))
        assert answer is not None
        assert dm.state.mode is AttentionMode.IDLE

    def test_utterance_after_deadline_ignored(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        dm.on_event(KeywordEvent(t=0.0))
        assert dm.on_event(UtteranceEvent(t=2.1, text="where is my wallet", speaker="mr_jones")) is None

    def test_deadline_boundary_epsilon(self):
        for offset, expect_answer in ((2.0 - 0.001, True), (2.0 + 0.001, False)):
            kb, ctx = _world()
            dm = _manager(kb, ctx)
            dm.on_event(KeywordEvent(t=10.0, speaker="mr_jones"))
            got = dm.on_event(UtteranceEvent(t=10.0 + offset, text="where is my wallet",
                                             speaker="mr_jones"))
            assert (got is not None) is expect_answer

    def test_inline_keyword_answers_from_idle(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        answer = dm.on_event(UtteranceEvent(t=5.0, text="Celia, where is my wallet?", speaker="mr_jones"))
        assert answer is not None
        assert answer.text == "It is next to the vase, under the magazines"

    def test_no_answer_from_idle_without_keyword(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        assert dm.on_event(UtteranceEvent(t=5.0, text="where is my wallet", speaker="mr_jones")) is None

    def test_gaze_opens_window(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        dm.on_event(GazeEvent(t=1.0, speaker="mr_jones"))
        assert dm.state.mode is AttentionMode.ATTENDING
        assert dm.state.deadline == pytest.approx(3.0)
        assert dm.on_event(UtteranceEvent(t=2.0, text="where is my wallet", speaker="mr_jones"))

    def test_bare_keyword_utterance_triggers_attention(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        assert dm.on_event(UtteranceEvent(t=0.0, text="Celia", speaker="mr_jones")) is None
        assert dm.state.mode is AttentionMode.ATTENDING

    def test_tick_past_deadline_resets(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        dm.on_event(KeywordEvent(t=0.0))
        dm.on_event(TickEvent(t=2.5))
        assert dm.state.mode is AttentionMode.IDLE

    def test_unparsed_gets_fixed_clarification(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        ans = dm.on_event(UtteranceEvent(t=0.0, text="Celia, make me a sandwich", speaker="mr_jones"))
        assert ans.text == CLARIFICATION_SENTENCE

    def test_determinism_over_repeats(self):
        transcripts = set()
        for _ in range(20):
            kb, ctx = _world()
            dm = _manager(kb, ctx)
            events = [
                KeywordEvent(t=0.0, speaker="mr_jones"),
                UtteranceEvent(t=1.9, text="where is my wallet", speaker="mr_jones"),
                KeywordEvent(t=10.0, speaker="mr_jones"),
                UtteranceEvent(t=12.1, text="where is my wallet", speaker="mr_jones"),
            ]
            answers = tuple(a.text for a in map(dm.on_event, events) if a is not None)
            transcripts.add(answers)
        assert len(transcripts) == 1
        assert len(next(iter(transcripts))) == 1


class TestGrounding:
    def test_pointing_selects_cup(self):
        kb, ctx = _world(with_pointing=True)
        speaker = next(tr for tr in ctx.tracks if tr.id == "person-1")
        result = ground_by_pointing(ctx, speaker, CFG)
        assert result.object_id == "object-4"

    def test_ray_box_distance_direct_hit(self):
        b = box(1, 1, 1, 2, 2, 2)
        dist, t_at = ray_box_distance(Vec3(0, 1.5, 1.5), Vec3(1, 0, 0), b)
        assert dist == pytest.approx(0.0, abs=1e-6)
        assert 1.0 <= t_at <= 2.0

    def test_ray_box_distance_miss(self):
        b = box(1, 1, 1, 2, 2, 2)
        dist, _ = ray_box_distance(Vec3(0, 3.0, 1.5), Vec3(1, 0, 0), b)
        assert dist == pytest.approx(1.0, abs=1e-3)

    def test_my_object_via_ownership(self):
        kb, ctx = _world()
        kb.ownership["object-2"] = OwnershipRecord("object-2", "person-1", 0.0)
        dm = _manager(kb, ctx)
        ans = dm.on_event(UtteranceEvent(t=0.0, text="celia, where is my wallet", speaker="mr_jones"))
        assert ans.grounded_object == "object-2"

    def test_two_matches_ask_which_one(self):
        kb, ctx = _world()
        extra = TrackedEntity(id="object-9", kind=EntityKind.WORK_OBJECT,
                              bounding_box=box(0, 0, 0, 0.1, 0.1, 0.1),
                              centroid=Vec3(0.05, 0.05, 0.05), first_seen=0.0, last_seen=0.0,
                              label="cup")
        rs2 = compute_relations(ctx.tracks + [extra], ctx.regions, None,
                                RelationConfig(debounce_frames=1), frame_time=0.0)
        kb.record_frame(rs2, ctx.tracks + [extra], appeared=("object-9",))
        dm = _manager(kb, DialogContext(ctx.tracks + [extra], rs2, ctx.regions))
        ans = dm.on_event(UtteranceEvent(t=0.1, text="celia, where is the cup", speaker="mr_jones"))
        assert "Which one" in ans.text
        assert dm.state.mode is AttentionMode.ENGAGED

    def test_clarification_round_accepts_refined_query(self):
        kb, ctx = _world()
        extra = TrackedEntity(id="object-9", kind=EntityKind.WORK_OBJECT,
                              bounding_box=box(0, 0, 0, 0.1, 0.1, 0.1),
                              centroid=Vec3(0.05, 0.05, 0.05), first_seen=0.0, last_seen=0.0,
                              label="cup")
        tracks = ctx.tracks + [extra]
        rs2 = compute_relations(tracks, ctx.regions, None, RelationConfig(debounce_frames=1), 0.0)
        kb.record_frame(rs2, tracks, appeared=("object-9",))
        kb.ownership["object-4"] = OwnershipRecord("object-4", "person-1", 0.0)
        dm = _manager(kb, DialogContext(tracks, rs2, ctx.regions))
        first = dm.on_event(UtteranceEvent(t=0.0, text="celia, where is the cup", speaker="mr_jones"))
        assert "Which one" in first.text
        # engaged: the refined query works without the keyword, within 2 s
        second = dm.on_event(UtteranceEvent(t=1.0, text="where is my cup", speaker="mr_jones"))
        assert second is not None
        assert second.grounded_object == "object-4"

    def test_unknown_label_not_seen(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        ans = dm.on_event(UtteranceEvent(t=0.0, text="celia, where is the teapot", speaker="mr_jones"))
        assert ans.text == "I have not seen the teapot"

    def test_deictic_without_pointing(self):
        kb, ctx = _world(with_pointing=False)
        dm = _manager(kb, ctx)
        ans = dm.on_event(UtteranceEvent(t=0.0, text="celia, whose cup is this", speaker="mr_jones"))
        assert "pointing" in ans.text

    def test_assert_label_sets_label_and_owner(self):
        kb, ctx = _world(with_pointing=True)
        calls = []
        dm = _manager(kb, ctx, label_calls=calls)
        ans = dm.on_event(UtteranceEvent(t=0.0, text="celia, this is my mug", speaker="mr_jones"))
        assert calls == [("object-4", "mug", "person-1")]
        assert "mug" in ans.text


class TestRenderAnswer:
    def test_paper_sentence(self):
        kb, ctx = _world()
        fact = kb.objects["object-2"]
        ans = render_answer(fact, kb, ctx)
        assert ans.text == "It is next to the vase, under the magazines"
        stable_keys = set(ctx.stable.stable)
        assert all(r.key() in stable_keys for r in ans.relations_used)

    def test_region_fallback(self):
        kb, ctx = _world()
        fact = kb.objects["object-4"]  # cup: far from everything
        ans = render_answer(fact, kb, ctx)
        assert ans.text == "It is in the work area"

    def test_last_seen_fallback(self):
        kb = KnowledgeBase(RelationConfig(debounce_frames=1))
        fact = ObjectFact(object_id="object-7", label="keys", last_seen_at=12.5,
                          last_centroid=Vec3(1, 1, 0),
                          last_stable_relations=(
                              Relation(RelationKind.NEAR, "object-7", "object-8", 10.0),))
        kb.objects["object-7"] = fact
        kb.objects["object-8"] = ObjectFact(object_id="object-8", label="bowl", last_seen_at=12.5,
                                            last_centroid=Vec3(1.2, 1, 0))
        ctx = DialogContext(tracks=[], stable=RelationSet.empty(), regions=[])
        ans = render_answer(fact, kb, ctx)
        assert ans.text == "I last saw it at 12.5 s near the bowl"
        assert ans.relations_used == ()

    def test_whose_answer(self):
        kb, ctx = _world(with_pointing=True)
        kb.ownership["object-4"] = OwnershipRecord("object-4", "person-1", 0.0)
        dm = _manager(kb, ctx)
        ans = dm.on_event(UtteranceEvent(t=0.0, text="celia, whose cup is this", speaker="mr_jones"))
        assert ans.text == "The cup belongs to Mr Jones"

    def test_what_is_on(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        ans = dm.on_event(UtteranceEvent(t=0.0, text="celia, what is on the wallet", speaker="mr_jones"))
        assert ans.text == "The magazines is on the wallet"

    def test_what_is_in_region(self):
        kb, ctx = _world()
        dm = _manager(kb, ctx)
        ans = dm.on_event(UtteranceEvent(t=0.0, text="celia, what is in the work area",
                                         speaker="mr_jones"))
        for label in ("vase", "wallet", "magazines", "cup"):
            assert label in ans.text
