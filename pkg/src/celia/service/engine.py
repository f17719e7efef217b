"""The pipeline core: frames in, tracked state + relations + knowledge out,
with the dialog manager riding on top. Deterministic: a given sequence of
frames and timed dialog events always produces the same state, transcript,
and knowledge snapshot.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable

from ..dialog import (
    Answer,
    DialogConfig,
    DialogContext,
    DialogEvent,
    DialogManager,
    TickEvent,
    UtteranceEvent,
)
from ..geometry import Aabb, Vec3
from ..knowledge import Alert, Expectation, KnowledgeBase
from ..relations import LocationRegion, RelationConfig, RelationSet, compute_relations
from ..detection import DetectorConfig
from ..stream import DetectionFrame, FrameRecorder
from ..tracking import TrackedEntity, Tracker, TrackerConfig


@dataclass(frozen=True)
class EngineConfig:
    detector: DetectorConfig = DetectorConfig()
    tracker: TrackerConfig = TrackerConfig()
    relations: RelationConfig = RelationConfig()
    dialog: DialogConfig = DialogConfig()
    regions: tuple[LocationRegion, ...] = ()
    expectations: tuple[Expectation, ...] = ()
    work_area: Aabb = Aabb(Vec3(0, 0, 0), Vec3(4, 3, 2))


@dataclass
class TranscriptEntry:
    t: float
    speaker: str | None
    text: str
    answer: Answer


@dataclass(frozen=True)
class EngineSnapshot:
    """Immutable view handed to API readers and the push channel."""

    frame: int
    time: float
    tracks: tuple[TrackedEntity, ...]
    stable: tuple
    alerts: tuple[Alert, ...]
    attention_mode: str
    attention_deadline: float | None
    transcript_len: int


class Engine:
    """Single-writer pipeline; readers consume published snapshots."""

    def __init__(self, config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self.tracker = Tracker(self.config.tracker)
        self.kb = KnowledgeBase(self.config.relations, expectations=self.config.expectations)
        self.relation_set = RelationSet.empty()
        self.regions = list(self.config.regions)
        self.dialog = DialogManager(
            self.config.dialog,
            self.kb,
            context_provider=self._dialog_context,
            label_setter=self._apply_label,
        )
        self.transcript: list[TranscriptEntry] = []
        self.frame_count = 0
        self.current_time = 0.0
        self._recorder: FrameRecorder | None = None
        self._tracks_snapshot: list[TrackedEntity] = []
        self.latest: EngineSnapshot = self._publish()

    # -- wiring ------------------------------------------------------------

    def _dialog_context(self) -> DialogContext:
        return DialogContext(tracks=self._tracks_snapshot, stable=self.relation_set, regions=self.regions)

    def _apply_label(self, object_id: str, label: str, owner_id: str | None) -> None:
        tr = self.tracker.tracks.get(object_id)
        if tr is not None:
            tr.label = label
        fact = self.kb.objects.get(object_id)
        if fact is not None:
            fact.label = label
        if owner_id is not None and object_id not in self.kb.ownership:
            from ..knowledge import OwnershipRecord

            self.kb.ownership[object_id] = OwnershipRecord(object_id, owner_id, self.current_time)

    def _publish(self) -> EngineSnapshot:
        self.latest = EngineSnapshot(
            frame=self.frame_count,
            time=self.current_time,
            tracks=tuple(self._tracks_snapshot),
            stable=tuple(self.relation_set.stable_relations()),
            alerts=tuple(self.kb.active_alerts()),
            attention_mode=self.dialog.state.mode.value,
            attention_deadline=self.dialog.state.deadline,
            transcript_len=len(self.transcript),
        )
        return self.latest

    # -- the pipeline --------------------------------------------------------

    def start_recording(self, path: str) -> None:
        if self._recorder is not None:
            raise RuntimeError("already recording")
        self._recorder = FrameRecorder(path)

    def stop_recording(self) -> int:
        if self._recorder is None:
            return 0
        n = self._recorder.count
        self._recorder.close()
        self._recorder = None
        return n

    def process_frame(self, frame: DetectionFrame) -> None:
        if self._recorder is not None:
            self._recorder.write(frame)
        update = self.tracker.step(frame)
        tracks = list(self.tracker.tracks.values())
        self.relation_set = compute_relations(
            tracks, self.regions, self.relation_set, self.config.relations, frame.t
        )
        self.kb.record_frame(self.relation_set, tracks, appeared=update.appeared)
        self.kb.check_expectations(frame.t)
        self.frame_count += 1
        self.current_time = frame.t
        self._tracks_snapshot = self.tracker.snapshot()
        self.dialog.on_event(TickEvent(frame.t))
        self._publish()

    def handle_event(self, ev: DialogEvent) -> Answer | None:
        answer = self.dialog.on_event(ev)
        if isinstance(ev, UtteranceEvent) and answer is not None:
            self.transcript.append(TranscriptEntry(ev.t, ev.speaker, ev.text, answer))
        self.current_time = max(self.current_time, ev.t)
        self._publish()
        return answer

    def run_stream(self, frames: Iterable[DetectionFrame], events: list[DialogEvent] = ()) -> None:
        """Process frames and timed dialog events merged in time order.

        Events strictly before a frame's time run first; events at exactly a
        frame's time run right after that frame.
        """
        pending = sorted(events, key=lambda e: e.t)
        i = 0
        last_t = None
        for frame in frames:
            while i < len(pending) and pending[i].t < frame.t:
                self.handle_event(pending[i])
                i += 1
            self.process_frame(frame)
            while i < len(pending) and pending[i].t <= frame.t:
                self.handle_event(pending[i])
                i += 1
            last_t = frame.t
        while i < len(pending):
            self.handle_event(pending[i])
            i += 1

    # -- convenience ------------------------------------------------------------

    def save_kb(self, path: str) -> None:
        self.kb.save(path)

    def resolve_entity(self, ref: str) -> TrackedEntity | None:
        """Find a track by id, source id, or label."""
        for tr in self._tracks_snapshot:
            if ref in (tr.id, tr.source_id) or (tr.label and tr.label.lower() == ref.lower()):
                return tr
        return None
