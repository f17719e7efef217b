"""Single pipeline worker behind the HTTP handlers.

All mutation goes through a command queue drained between frames, so request
handlers never touch engine state concurrently; reads come from the engine's
published immutable snapshot. Loading a scenario or replay resets the engine
(each run is a fresh session).
"""
from __future__ import annotations

import queue
import threading
import time
from collections import deque
from dataclasses import dataclass, replace

from ..dialog import GazeEvent, KeywordEvent, UtteranceEvent
from ..geometry import Aabb, Vec3
from ..simulator import (
    MODE_FRAMES,
    MODE_HEIGHTMAPS,
    ScenarioScript,
    dialog_events,
    frame_at,
    load_scenario,
    render_height_map,
)
from ..detection import detect_frame
from ..stream import DetectionFrame, ObjectData, PersonData, read_recording
from .config import ServiceConfig
from .engine import Engine

_IDLE_WAIT = 0.02


class SourceBusy(RuntimeError):
    pass


@dataclass
class _Item:
    t: float
    frame: DetectionFrame | None = None
    event: object | None = None


def _merge_script_items(script: ScenarioScript, mode: str, detector_cfg) -> list[_Item]:
    items: list[_Item] = []
    for k in range(script.frame_count()):
        if mode == MODE_HEIGHTMAPS:
            t = script.frame_time(k)
            hm = render_height_map(script, t)
            items.append(_Item(t=t, frame=detect_frame(hm, detector_cfg, t, frame_id=k)))
        else:
            f = frame_at(script, k)
            items.append(_Item(t=f.t, frame=f))
    for ev in dialog_events(script):
        items.append(_Item(t=ev.t, event=ev))
    # frames first at equal times
    items.sort(key=lambda it: (it.t, it.frame is None))
    return items


class _PacedItems:
    """Iterates pre-merged items, sleeping to honor the speed factor."""

    def __init__(self, items: list[_Item], speed: float):
        self.items = items
        self.speed = speed
        self.pos = 0
        self._wall_start = time.monotonic()
        self._t_start = items[0].t if items else 0.0

    def next_item(self) -> _Item | None:
        if self.pos >= len(self.items):
            return None
        item = self.items[self.pos]
        if self.speed > 0:
            target = self._wall_start + (item.t - self._t_start) / self.speed
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(min(delay, 0.1))
                if time.monotonic() < target:
                    return _Item(t=item.t)  # keep draining commands while waiting
        self.pos += 1
        return item

    def done(self) -> bool:
        return self.pos >= len(self.items)


class InteractiveScene:
    """Mutable scene that continues live after a script has played out."""

    def __init__(self, script: ScenarioScript, start_t: float, rate: float = 30.0):
        self.script = script
        self.rate = rate
        self.t = start_t
        self.frame_id = script.frame_count()
        end = script.duration
        self.persons = {
            s.id: s.box(end) for s in script.persons if s.present(end)
        }
        self.objects = {
            s.id: (s.box(end), s.label) for s in script.objects if s.present(end)
        }
        self._wall_anchor = time.monotonic()
        self._t_anchor = start_t

    def move_object(self, source_id: str, position: Vec3) -> bool:
        if source_id not in self.objects:
            return False
        box, label = self.objects[source_id]
        self.objects[source_id] = (Aabb.from_base_size(position, box.extents()), label)
        return True

    def next_frame(self) -> DetectionFrame:
        self.frame_id += 1
        target_wall = self._wall_anchor + (1.0 / self.rate) * 1  # next tick
        delay = target_wall - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        now = time.monotonic()
        self.t = self._t_anchor + (now - self._wall_anchor)
        self._wall_anchor = now
        self._t_anchor = self.t
        persons = tuple(
            PersonData(id=pid, centroid=box.centroid(), bbox=box) for pid, box in sorted(self.persons.items())
        )
        objects = tuple(
            ObjectData(id=oid, centroid=box.centroid(), bbox=box, label=label)
            for oid, (box, label) in sorted(self.objects.items())
        )
        return DetectionFrame(frame=self.frame_id, t=round(self.t, 6), persons=persons, objects=objects)


class ServiceRuntime:
    """Owns the engine, the worker thread, and the push feed."""

    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        self.engine = Engine(self.config.engine)
        self.commands: "queue.Queue[tuple]" = queue.Queue()
        self._stop = threading.Event()
        self._worker: threading.Thread | None = None
        self._paced: _PacedItems | None = None
        self._live: InteractiveScene | None = None
        self.feed: deque[tuple[int, dict]] = deque(maxlen=512)
        self._feed_seq = 0
        self._alert_log_len = 0
        self._clock_eps = 0

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        if self._worker is not None:
            return
        self._stop.clear()
        self._worker = threading.Thread(target=self._run, daemon=True, name="celia-pipeline")
        self._worker.start()
        if self.config.source.kind == "scenario":
            self.submit(lambda: self._cmd_scenario(self.config.source.path, self.config.source.mode,
                                                   self.config.source.speed, None))
        elif self.config.source.kind == "replay":
            self.submit(lambda: self._cmd_replay(self.config.source.path, self.config.source.speed))

    def stop(self) -> None:
        if self._worker is None:
            return
        self._stop.set()
        self._worker.join(timeout=10.0)
        self._worker = None
        if self.config.snapshot_path:
            self.engine.save_kb(self.config.snapshot_path)

    # -- command plumbing -----------------------------------------------------

    def submit(self, fn, timeout: float = 120.0):
        """Run fn on the pipeline thread; return its result (or raise)."""
        done = threading.Event()
        box: list = [None, None]

        def wrapped():
            try:
                box[0] = fn()
            except BaseException as e:  # propagated to the caller
                box[1] = e
            finally:
                done.set()

        self.commands.put(wrapped)
        if not done.wait(timeout):
            raise TimeoutError("pipeline command timed out")
        if box[1] is not None:
            raise box[1]
        return box[0]

    def _drain_commands(self, block: bool) -> None:
        try:
            cmd = self.commands.get(timeout=_IDLE_WAIT if block else 0.0) if block else self.commands.get_nowait()
        except queue.Empty:
            return
        cmd()
        while True:
            try:
                self.commands.get_nowait()()
            except queue.Empty:
                return

    def _run(self) -> None:
        while not self._stop.is_set():
            has_source = self._paced is not None or self._live is not None
            self._drain_commands(block=not has_source)
            if self._stop.is_set():
                break
            if self._paced is not None:
                item = self._paced.next_item()
                if item is None:
                    self._paced = None
                    self._push_feed({"type": "source", "status": "finished"})
                    continue
                if item.frame is not None:
                    self._ingest(item.frame)
                elif item.event is not None:
                    self._dialog_event(item.event)
            elif self._live is not None:
                self._ingest(self._live.next_frame())

    # -- pipeline steps ---------------------------------------------------------

    def _ingest(self, frame: DetectionFrame) -> None:
        self.engine.process_frame(frame)
        self._emit_alert_events()
        self._push_feed(None)  # state tick; payload built lazily by readers

    def _dialog_event(self, ev) -> None:
        answer = self.engine.handle_event(ev)
        if answer is not None:
            self._push_feed({
                "type": "answer",
                "t": ev.t,
                "speaker": getattr(ev, "speaker", None),
                "text": getattr(ev, "text", None),
                "answer": {"text": answer.text, "grounded_object": answer.grounded_object},
            })

    def _emit_alert_events(self) -> None:
        log = self.engine.kb.alert_log
        while self._alert_log_len < len(log):
            t, event, kind, label, region = log[self._alert_log_len]
            self._push_feed({"type": "alert", "t": t, "event": event, "kind": kind,
                             "label": label, "region": region})
            self._alert_log_len += 1

    def _push_feed(self, payload: dict | None) -> None:
        self._feed_seq += 1
        if payload is not None:
            self.feed.append((self._feed_seq, payload))

    @property
    def feed_seq(self) -> int:
        return self._feed_seq

    def feed_since(self, cursor: int) -> list[tuple[int, dict]]:
        return [(seq, payload) for seq, payload in list(self.feed) if seq > cursor]

    # -- clock ----------------------------------------------------------------

    def clock(self) -> float:
        """Event time for externally injected events: the engine's current
        time, nudged forward so successive external events stay ordered."""
        self._clock_eps += 1
        return round(self.engine.current_time + self._clock_eps * 1e-3, 6)

    def _reset_engine(self) -> None:
        self.engine = Engine(self.config.engine)
        self._alert_log_len = 0
        self._clock_eps = 0

    # -- commands (run on the pipeline thread) -----------------------------------

    def source_active(self) -> bool:
        return (self._paced is not None and not self._paced.done()) or self._live is not None

    def _cmd_scenario(self, path: str, mode: str, speed: float, record: str | None) -> dict:
        if self.source_active():
            raise SourceBusy("a scenario or replay is already running")
        script = load_scenario(path)
        self._reset_engine()
        self.engine.regions = list(script.regions)
        self.engine.kb.expectations.clear()
        for exp in script.expectations:
            self.engine.kb.add_expectation(exp)
        if record:
            self.engine.start_recording(record)
        detector_cfg = self.config.engine.detector
        interactive = mode == "interactive"
        items = _merge_script_items(script, MODE_HEIGHTMAPS if mode == "heightmaps" else MODE_FRAMES,
                                    detector_cfg)
        if speed == 0.0 or interactive:
            for item in items:
                if item.frame is not None:
                    self._ingest(item.frame)
                elif item.event is not None:
                    self._dialog_event(item.event)
            if record:
                self.engine.stop_recording()
            if interactive:
                self._live = InteractiveScene(script, start_t=self.engine.current_time)
                return {"status": "running", "name": script.name, "frames": script.frame_count()}
            return {
                "status": "completed",
                "name": script.name,
                "frames": script.frame_count(),
                "transcript": list(self.engine.transcript),
            }
        self._paced = _PacedItems(items, speed)
        return {"status": "running", "name": script.name, "frames": script.frame_count()}

    def _cmd_replay(self, path: str, speed: float) -> dict:
        if self.source_active():
            raise SourceBusy("a scenario or replay is already running")
        self._reset_engine()
        if speed == 0.0:
            started = time.perf_counter()
            n = 0
            for frame in read_recording(path):
                self._ingest(frame)
                n += 1
            elapsed = time.perf_counter() - started
            return {"status": "completed", "frames": n, "elapsed": elapsed,
                    "fps": (n / elapsed) if elapsed > 0 else float("inf")}
        frames = list(read_recording(path))
        items = [_Item(t=f.t, frame=f) for f in frames]
        self._paced = _PacedItems(items, speed)
        return {"status": "running", "frames": len(frames)}

    def _cmd_query(self, text: str, speaker: str | None, at: float | None) -> dict:
        t = at if at is not None else self.clock()
        answer = self.engine.handle_event(UtteranceEvent(t=t, text=text, speaker=speaker))
        if answer is None:
            return {"answered": False, "reason": "not-attending", "time": t}
        return {
            "answered": True,
            "time": t,
            "text": answer.text,
            "grounded_object": answer.grounded_object,
            "relations_used": list(answer.relations_used),
        }

    def _cmd_event(self, kind: str, speaker: str | None, text: str | None, at: float | None) -> dict:
        t = at if at is not None else self.clock()
        if kind == "keyword":
            ev = KeywordEvent(t=t, speaker=speaker)
        elif kind == "gaze":
            ev = GazeEvent(t=t, speaker=speaker)
        elif kind == "utterance":
            ev = UtteranceEvent(t=t, text=text or "", speaker=speaker)
        else:
            raise ValueError(f"unknown event kind '{kind}'")
        answer = self.engine.handle_event(ev)
        return {"accepted": True, "time": t, "answer": answer}

    def _cmd_move(self, ref: str, position: Vec3) -> bool:
        if self._live is None:
            raise SourceBusy("no interactive scene is running")
        track = self.engine.resolve_entity(ref)
        source_id = track.source_id if track is not None else ref
        return self._live.move_object(source_id, position)

    # -- public API used by the HTTP layer ------------------------------------

    def run_scenario(self, path: str, mode: str = "frames", speed: float = 0.0,
                     record: str | None = None) -> dict:
        return self.submit(lambda: self._cmd_scenario(path, mode, speed, record))

    def run_replay(self, path: str, speed: float = 0.0) -> dict:
        return self.submit(lambda: self._cmd_replay(path, speed))

    def query(self, text: str, speaker: str | None = None, at: float | None = None) -> dict:
        return self.submit(lambda: self._cmd_query(text, speaker, at))

    def inject_event(self, kind: str, speaker: str | None = None, text: str | None = None,
                     at: float | None = None) -> dict:
        return self.submit(lambda: self._cmd_event(kind, speaker, text, at))

    def move_entity(self, ref: str, position: Vec3) -> bool:
        return self.submit(lambda: self._cmd_move(ref, position))

    def snapshot_to(self, path: str) -> None:
        self.submit(lambda: self.engine.save_kb(path))

    def record(self, path: str | None, stop: bool) -> dict:
        def cmd():
            if stop:
                return {"recording": False, "frames_written": self.engine.stop_recording()}
            if not path:
                raise ValueError("record needs a path")
            self.engine.start_recording(path)
            return {"recording": True, "frames_written": 0}

        return self.submit(cmd)

    def transcript(self) -> list:
        return self.submit(lambda: list(self.engine.transcript))

    def object_detail(self, object_id: str) -> dict | None:
        def cmd():
            fact = self.engine.kb.objects.get(object_id)
            track = self.engine.tracker.tracks.get(object_id)
            if fact is None and track is None:
                return None
            return {
                "fact": replace(fact) if fact else None,
                "track": track,
                "owner": self.engine.kb.owner_of(object_id),
            }

        return self.submit(cmd)
