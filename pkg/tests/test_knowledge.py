import pytest

from celia.knowledge import AlertKind, Expectation, KnowledgeBase
from celia.relations import (
    LocationRegion,
    RelationConfig,
    RelationKind,
    compute_relations,
)
from celia.tracking import EntityKind, TrackState, TrackedEntity

from conftest import box

CFG = RelationConfig(debounce_frames=1)


def obj(tid, b, label=None, state=TrackState.VISIBLE, seq=0):
    return TrackedEntity(id=tid, kind=EntityKind.WORK_OBJECT, bounding_box=b,
                         centroid=b.centroid(), first_seen=0.0, last_seen=0.0,
                         state=state, label=label, seq=seq)


def person(tid, b, label=None):
    return TrackedEntity(id=tid, kind=EntityKind.PERSON, bounding_box=b,
                         centroid=b.centroid(), first_seen=0.0, last_seen=0.0, label=label)


def feed(kb, tracks, t, regions=(), appeared=()):
    rs = compute_relations(tracks, list(regions), None, CFG, frame_time=t)
    kb.record_frame(rs, tracks, appeared=tuple(appeared))
    return rs


class TestOwnershipFacts:
    def test_first_frame_with_owned_object(self):
        kb = KnowledgeBase(CFG)
        w = obj("object-1", box(1, 1, 0, 1.1, 1.1, 0.05), label="wallet")
        p = person("person-1", box(1.2, 0.9, 0, 1.6, 1.3, 1.7), label="mr_jones")
        feed(kb, [w, p], 0.0, appeared=["object-1", "person-1"])
        assert kb.owner_of("object-1") == "person-1"
        assert kb.objects_of("person-1") == ["object-1"]

    def test_ownership_is_immutable(self):
        kb = KnowledgeBase(CFG)
        w = obj("object-1", box(1, 1, 0, 1.1, 1.1, 0.05))
        p1 = person("person-1", box(1.2, 0.9, 0, 1.6, 1.3, 1.7))
        feed(kb, [w, p1], 0.0, appeared=["object-1"])
        first = kb.ownership["object-1"]
        # even if the object "appears" again near someone else, the record stays
        p2 = person("person-2", box(1.15, 0.9, 0, 1.55, 1.3, 1.7))
        feed(kb, [w, p2], 1.0, appeared=["object-1"])
        assert kb.ownership["object-1"] is first

    def test_unowned_object(self):
        kb = KnowledgeBase(CFG)
        w = obj("object-1", box(1, 1, 0, 1.1, 1.1, 0.05))
        feed(kb, [w], 0.0, appeared=["object-1"])
        assert kb.owner_of("object-1") is None
        assert kb.objects_of("person-1") == []

    def test_canonical_person_links_reappearances(self):
        kb = KnowledgeBase(CFG)
        w = obj("object-1", box(1, 1, 0, 1.1, 1.1, 0.05), label="wallet")
        p1 = person("person-1", box(1.2, 0.9, 0, 1.6, 1.3, 1.7), label="mr_jones")
        feed(kb, [w, p1], 0.0, appeared=["object-1", "person-1"])
        # the same human comes back later under a fresh track id
        p2 = person("person-2", box(0.2, 0.2, 0, 0.6, 0.6, 1.7), label="mr_jones")
        feed(kb, [w, p2], 5.0, appeared=["person-2"])
        assert kb.canonical_person("person-2") == "person-1"
        assert kb.objects_of("person-2") == ["object-1"]
        assert [f.object_id for f in kb.locate("wallet", owner_id="person-2")] == ["object-1"]


class TestFacts:
    def test_lost_object_retains_last_relations(self):
        kb = KnowledgeBase(CFG)
        region = LocationRegion("desk", box(0, 0, 0, 3, 3, 1))
        a = obj("object-1", box(1, 1, 0, 1.2, 1.2, 0.1), label="cup")
        feed(kb, [a], 0.0, regions=[region], appeared=["object-1"])
        fact = kb.objects["object-1"]
        assert any(r.kind is RelationKind.IN_LOCATION for r in fact.last_stable_relations)
        # now it goes lost: facts freeze
        lost = obj("object-1", box(1, 1, 0, 1.2, 1.2, 0.1), label="cup", state=TrackState.LOST)
        feed(kb, [lost], 1.0, regions=[region])
        fact = kb.objects["object-1"]
        assert fact.last_seen_at == 0.0
        assert any(r.kind is RelationKind.IN_LOCATION for r in fact.last_stable_relations)

    def test_time_regression_rejected(self):
        kb = KnowledgeBase(CFG)
        feed(kb, [], 1.0)
        with pytest.raises(ValueError, match="time-regression"):
            feed(kb, [], 0.5)

    def test_locate_paths(self):
        kb = KnowledgeBase(CFG)
        c1 = obj("object-1", box(0, 0, 0, 0.1, 0.1, 0.1), label="cup")
        c2 = obj("object-2", box(1, 1, 0, 1.1, 1.1, 0.1), label="cup")
        feed(kb, [c1, c2], 0.0, appeared=["object-1", "object-2"])
        assert len(kb.locate("cup")) == 2
        assert kb.locate("teapot") == []
        assert [f.object_id for f in kb.locate("cup", owner_id="person-9")] == []

    def test_locate_never_contradicts_ownership(self):
        kb = KnowledgeBase(CFG)
        c1 = obj("object-1", box(0, 0, 0, 0.1, 0.1, 0.1), label="cup")
        c2 = obj("object-2", box(1, 1, 0, 1.1, 1.1, 0.1), label="cup")
        p = person("person-1", box(0.15, 0, 0, 0.55, 0.4, 1.7), label="mr_jones")
        feed(kb, [c1, c2, p], 0.0, appeared=["object-1", "object-2", "person-1"])
        for fact in kb.locate("cup", owner_id="person-1"):
            owner = kb.owner_of(fact.object_id)
            assert kb.canonical_person(owner) == kb.canonical_person("person-1")

    def test_unlabeled_objects_get_id_as_label(self):
        kb = KnowledgeBase(CFG)
        a = obj("object-3", box(0, 0, 0, 0.1, 0.1, 0.1))
        feed(kb, [a], 0.0, appeared=["object-3"])
        assert [f.object_id for f in kb.locate("object-3")] == ["object-3"]


class TestExpectations:
    REGION = LocationRegion("toolbox", box(0, 0, 0, 1, 1, 0.5))

    def _kb(self):
        return KnowledgeBase(CFG, expectations=(Expectation("e0", "wrench", "toolbox", 5.0),))

    def test_missing_raised_after_window(self):
        kb = self._kb()
        w = obj("object-1", box(0.4, 0.4, 0, 0.6, 0.6, 0.05), label="wrench")
        feed(kb, [w], 0.0, regions=[self.REGION], appeared=["object-1"])
        assert kb.check_expectations(0.0) == []
        feed(kb, [w], 1.0, regions=[self.REGION])  # still home at t=1
        # wrench gone after t=1; alarm must fire only after 5 s of absence
        gone = obj("object-1", box(0.4, 0.4, 0, 0.6, 0.6, 0.05), label="wrench", state=TrackState.LOST)
        for t in (1.5, 3.0, 5.9):
            feed(kb, [gone], t, regions=[self.REGION])
            assert kb.check_expectations(t) == []
        feed(kb, [gone], 6.1, regions=[self.REGION])
        alerts = kb.check_expectations(6.1)
        assert [a.kind for a in alerts] == [AlertKind.MISSING]

    def test_misplaced_when_stably_elsewhere(self):
        kb = self._kb()
        shelf = LocationRegion("shelf", box(2, 2, 0, 3, 3, 0.5))
        w = obj("object-1", box(2.4, 2.4, 0, 2.6, 2.6, 0.05), label="wrench")
        feed(kb, [w], 0.0, regions=[self.REGION, shelf], appeared=["object-1"])
        alerts = kb.check_expectations(0.0)
        assert AlertKind.MISPLACED in {a.kind for a in alerts}

    def test_alert_clears_on_return(self):
        kb = self._kb()
        shelf = LocationRegion("shelf", box(2, 2, 0, 3, 3, 0.5))
        w_out = obj("object-1", box(2.4, 2.4, 0, 2.6, 2.6, 0.05), label="wrench")
        feed(kb, [w_out], 0.0, regions=[self.REGION, shelf], appeared=["object-1"])
        assert kb.check_expectations(0.0) != []
        w_home = obj("object-1", box(0.4, 0.4, 0, 0.6, 0.6, 0.05), label="wrench")
        feed(kb, [w_home], 1.0, regions=[self.REGION, shelf])
        assert kb.check_expectations(1.0) == []
        assert [e[1] for e in kb.alert_log] == ["raised", "cleared"]

    def test_missing_window_checkable_against_history(self):
        kb = self._kb()
        w = obj("object-1", box(0.4, 0.4, 0, 0.6, 0.6, 0.05), label="wrench")
        feed(kb, [w], 0.0, regions=[self.REGION], appeared=["object-1"])
        gone = obj("object-1", box(0.4, 0.4, 0, 0.6, 0.6, 0.05), label="wrench", state=TrackState.LOST)
        t = 0.0
        for k in range(1, 200):
            t = k * 0.1
            feed(kb, [gone], t, regions=[self.REGION])
            kb.check_expectations(t)
        raised = [e for e in kb.alert_log if e[1] == "raised" and e[2] == "missing"]
        assert len(raised) == 1
        assert raised[0][0] > 5.0  # never inside the trailing window


class TestSnapshot:
    def _populated(self):
        kb = KnowledgeBase(CFG, expectations=(Expectation("e0", "wrench", "toolbox", 5.0),))
        region = LocationRegion("toolbox", box(0, 0, 0, 1, 1, 0.5))
        w = obj("object-1", box(0.4, 0.4, 0, 0.6, 0.6, 0.05), label="wrench")
        p = person("person-1", box(0.7, 0.4, 0, 1.1, 0.8, 1.7), label="mr_jones")
        feed(kb, [w, p], 1 / 30, regions=[region], appeared=["object-1", "person-1"])
        kb.check_expectations(1 / 30)
        return kb

    def test_round_trip_is_byte_exact(self, tmp_path):
        kb = self._populated()
        path = str(tmp_path / "kb.json")
        kb.save(path)
        kb2 = KnowledgeBase.load(path, cfg=CFG)
        assert kb2.dumps() == kb.dumps()
        assert kb2.owner_of("object-1") == kb.owner_of("object-1")

    def test_empty_kb_round_trip(self):
        kb = KnowledgeBase(CFG)
        kb2 = KnowledgeBase.loads(kb.dumps(), cfg=CFG)
        assert kb2.dumps() == kb.dumps()

    def test_truncated_document_rejected_kb_unchanged(self, tmp_path):
        kb = self._populated()
        text = kb.dumps()
        with pytest.raises(ValueError, match="kb-load"):
            KnowledgeBase.loads(text[: len(text) // 2], cfg=CFG)

    def test_wrong_format_rejected(self):
        with pytest.raises(ValueError, match="kb-load"):
            KnowledgeBase.loads('{"format": "something-else", "version": 1}')

    def test_locate_consistent_after_reload(self):
        kb = self._populated()
        kb2 = KnowledgeBase.loads(kb.dumps(), cfg=CFG)
        for label in ("wrench", "missing-thing"):
            assert [f.object_id for f in kb.locate(label)] == [f.object_id for f in kb2.locate(label)]
