"""Wire format and transport for detection frames.

One frame per newline-terminated line of JSON with a fixed key order and
numbers trimmed to at most 6 decimal places. Frame values are quantized at
construction so decode(encode(f)) == f holds exactly and recordings are
byte-reproducible across platforms.
"""
from __future__ import annotations

import json
import math
import socket
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

from .geometry import Aabb, Vec3

DEFAULT_RATE_HZ = 30.0


class DecodeError(ValueError):
    """Raised when a wire line cannot be decoded; names the offending field."""

    def __init__(self, field_name: str, detail: str = "", line_no: int | None = None):
        self.field = field_name
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"decode error in '{field_name}'{where}" + (f": {detail}" if detail else ""))


def _q(x: float) -> float:
    v = round(float(x), 6)
    return 0.0 if v == 0.0 else v  # normalize -0.0


def _qvec(v: Vec3) -> Vec3:
    return Vec3(_q(v.x), _q(v.y), _q(v.z))


def _qbox(b: Aabb) -> Aabb:
    return Aabb(_qvec(b.min), _qvec(b.max))


def fmt_num(x: float) -> str:
    """Canonical wire rendering: up to 6 decimal places, trailing zeros trimmed."""
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite-number")
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _fmt_vec(v: Vec3) -> str:
    return f"[{fmt_num(v.x)},{fmt_num(v.y)},{fmt_num(v.z)}]"


def _fmt_box(b: Aabb) -> str:
    return f'{{"min":{_fmt_vec(b.min)},"max":{_fmt_vec(b.max)}}}'


@dataclass(frozen=True)
class HandData:
    pos: Vec3
    pointing: Vec3 | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "pos", _qvec(self.pos))
        if self.pointing is not None:
            object.__setattr__(self, "pointing", _qvec(self.pointing))


@dataclass(frozen=True)
class PersonData:
    id: str
    centroid: Vec3
    bbox: Aabb
    hands: tuple[HandData, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "centroid", _qvec(self.centroid))
        object.__setattr__(self, "bbox", _qbox(self.bbox))
        object.__setattr__(self, "hands", tuple(self.hands))


@dataclass(frozen=True)
class ObjectData:
    id: str
    centroid: Vec3
    bbox: Aabb
    held_by: str | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "centroid", _qvec(self.centroid))
        object.__setattr__(self, "bbox", _qbox(self.bbox))


@dataclass(frozen=True)
class DetectionFrame:
    """One timestamped snapshot of everyone and everything in view."""

    frame: int
    t: float
    persons: tuple[PersonData, ...] = ()
    objects: tuple[ObjectData, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", _q(self.t))
        object.__setattr__(self, "persons", tuple(self.persons))
        object.__setattr__(self, "objects", tuple(self.objects))


def encode_frame(f: DetectionFrame) -> str:
    """Serialize a frame to its canonical single-line form (no newline)."""
    parts = [f'{{"frame":{f.frame},"t":{fmt_num(f.t)},"persons":[']
    for i, p in enumerate(f.persons):
        if i:
            parts.append(",")
        hands = []
        for h in p.hands:
            hs = f'{{"pos":{_fmt_vec(h.pos)}'
            if h.pointing is not None:
                hs += f',"pointing":{_fmt_vec(h.pointing)}'
            hands.append(hs + "}")
        parts.append(
            f'{{"id":{json.dumps(p.id)},"centroid":{_fmt_vec(p.centroid)},'
            f'"bbox":{_fmt_box(p.bbox)},"hands":[{",".join(hands)}]}}'
        )
    parts.append('],"objects":[')
    for i, o in enumerate(f.objects):
        if i:
            parts.append(",")
        s = f'{{"id":{json.dumps(o.id)},"centroid":{_fmt_vec(o.centroid)},"bbox":{_fmt_box(o.bbox)}'
        if o.held_by is not None:
            s += f',"heldBy":{json.dumps(o.held_by)}'
        if o.label is not None:
            s += f',"label":{json.dumps(o.label)}'
        parts.append(s + "}")
    parts.append("]}")
    return "".join(parts)


def _need(d: dict, key: str, line_no: int | None = None):
    if key not in d:
        raise DecodeError(key, "missing", line_no)
    return d[key]


def _parse_vec(raw, field_name: str, line_no: int | None = None) -> Vec3:
    if not isinstance(raw, list) or len(raw) != 3:
        raise DecodeError(field_name, "expected [x,y,z]", line_no)
    try:
        return Vec3(float(raw[0]), float(raw[1]), float(raw[2]))
    except (TypeError, ValueError) as e:
        raise DecodeError(field_name, str(e), line_no) from e


def _parse_box(raw, line_no: int | None = None) -> Aabb:
    if not isinstance(raw, dict) or "min" not in raw or "max" not in raw:
        raise DecodeError("bbox", "expected {min, max}", line_no)
    lo = _parse_vec(raw["min"], "bbox", line_no)
    hi = _parse_vec(raw["max"], "bbox", line_no)
    try:
        return Aabb(lo, hi)
    except ValueError as e:
        raise DecodeError("bbox", str(e), line_no) from e


def decode_frame(line: str, line_no: int | None = None) -> DetectionFrame:
    """Parse one wire line. Unknown keys are ignored for forward compatibility."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as e:
        raise DecodeError("frame", f"malformed JSON: {e.msg}", line_no) from e
    if not isinstance(doc, dict):
        raise DecodeError("frame", "not an object", line_no)
    frame_id = _need(doc, "frame", line_no)
    if not isinstance(frame_id, int) or isinstance(frame_id, bool):
        raise DecodeError("frame", "must be an integer", line_no)
    t = _need(doc, "t", line_no)
    if not isinstance(t, (int, float)) or isinstance(t, bool):
        raise DecodeError("t", "must be a number", line_no)

    persons = []
    raw_persons = _need(doc, "persons", line_no)
    if not isinstance(raw_persons, list):
        raise DecodeError("persons", "must be a list", line_no)
    for rp in raw_persons:
        pid = _need(rp, "id", line_no)
        if not isinstance(pid, str):
            raise DecodeError("id", "must be a string", line_no)
        hands = []
        for rh in rp.get("hands", []):
            pos = _parse_vec(_need(rh, "pos", line_no), "pos", line_no)
            pointing = None
            if rh.get("pointing") is not None:
                pointing = _parse_vec(rh["pointing"], "pointing", line_no)
                if abs(pointing.norm() - 1.0) > 1e-3:
                    raise DecodeError("pointing", "not a unit vector", line_no)
            hands.append(HandData(pos, pointing))
        persons.append(
            PersonData(
                id=pid,
                centroid=_parse_vec(_need(rp, "centroid", line_no), "centroid", line_no),
                bbox=_parse_box(_need(rp, "bbox", line_no), line_no),
                hands=tuple(hands),
            )
        )

    objects = []
    raw_objects = _need(doc, "objects", line_no)
    if not isinstance(raw_objects, list):
        raise DecodeError("objects", "must be a list", line_no)
    for ro in raw_objects:
        oid = _need(ro, "id", line_no)
        if not isinstance(oid, str):
            raise DecodeError("id", "must be a string", line_no)
        held_by = ro.get("heldBy")
        if held_by is not None and not isinstance(held_by, str):
            raise DecodeError("heldBy", "must be a string", line_no)
        label = ro.get("label")
        if label is not None and not isinstance(label, str):
            raise DecodeError("label", "must be a string", line_no)
        objects.append(
            ObjectData(
                id=oid,
                centroid=_parse_vec(_need(ro, "centroid", line_no), "centroid", line_no),
                bbox=_parse_box(_need(ro, "bbox", line_no), line_no),
                held_by=held_by,
                label=label,
            )
        )
    return DetectionFrame(frame=frame_id, t=float(t), persons=tuple(persons), objects=tuple(objects))


# ---------------------------------------------------------------------------
# Recording and replay
# ---------------------------------------------------------------------------


class FrameRecorder:
    """Writes frames to a file in the canonical line format."""

    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8", newline="\n")
        self.count = 0

    def write(self, frame: DetectionFrame) -> None:
        self._fh.write(encode_frame(frame) + "\n")
        self.count += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "FrameRecorder":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def record(path: str, frames: Iterable[DetectionFrame]) -> int:
    with FrameRecorder(path) as rec:
        for f in frames:
            rec.write(f)
        return rec.count


def read_recording(path: str) -> Iterator[DetectionFrame]:
    """Decode a recording, enforcing strictly increasing frame ids."""
    last_id = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            f = decode_frame(line, line_no=line_no)
            if last_id is not None and f.frame <= last_id:
                raise DecodeError("frame", "frame id not increasing", line_no)
            last_id = f.frame
            yield f


def replay(path: str, speed: float = 1.0, clock: Callable[[], float] = time.monotonic,
           sleep: Callable[[float], None] = time.sleep) -> Iterator[DetectionFrame]:
    """Re-emit a recording. Inter-frame gaps are scaled by 1/speed; speed 0
    means as fast as possible (batch mode)."""
    if speed < 0:
        raise ValueError("invalid-speed")
    prev_t = None
    for f in read_recording(path):
        if speed > 0 and prev_t is not None:
            delay = (f.t - prev_t) / speed
            if delay > 0:
                sleep(delay)
        prev_t = f.t
        yield f


# ---------------------------------------------------------------------------
# Pub-sub transport: newline-delimited frames over a local TCP socket with a
# one-slot latest-wins mailbox per consumer (slow consumers observe drops,
# never unbounded buffering). Socket buffers are kept small so in-flight data
# stays bounded and stale frames are dropped at the mailbox, not queued in
# the kernel.
# ---------------------------------------------------------------------------

_SOCKET_BUFFER = 1 << 14


class _Connection:
    def __init__(self, sock: socket.socket):
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, _SOCKET_BUFFER)
        self.sock = sock
        self.cond = threading.Condition()
        self.latest: str | None = None
        self.closed = False
        self.thread = threading.Thread(target=self._run, daemon=True)
        self.thread.start()

    def offer(self, line: str) -> None:
        with self.cond:
            self.latest = line  # overwrite: latest wins
            self.cond.notify()

    def shutdown(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify()

    def _run(self) -> None:
        try:
            while True:
                with self.cond:
                    while self.latest is None and not self.closed:
                        self.cond.wait()
                    if self.latest is None and self.closed:
                        break
                    line, self.latest = self.latest, None
                self.sock.sendall(line.encode("utf-8"))
        except OSError:
            pass
        finally:
            try:
                self.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self.sock.close()


class FramePublisher:
    """Serves the frame stream to any number of subscribers."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._srv.bind((host, port))
        self._srv.listen()
        self._conns: list[_Connection] = []
        self._lock = threading.Lock()
        self._closed = False
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True)
        self._acceptor.start()

    @property
    def address(self) -> tuple[str, int]:
        return self._srv.getsockname()

    def _accept_loop(self) -> None:
        while True:
            try:
                sock, _ = self._srv.accept()
            except OSError:
                break
            with self._lock:
                if self._closed:
                    sock.close()
                    break
                self._conns.append(_Connection(sock))

    def publish(self, frame: DetectionFrame) -> None:
        line = encode_frame(frame) + "\n"
        with self._lock:
            conns = list(self._conns)
        for c in conns:
            c.offer(line)

    def publish_stream(self, frames: Iterable[DetectionFrame], rate: float = DEFAULT_RATE_HZ) -> int:
        """Publish frames paced at the given rate (Hz). Returns count."""
        if rate <= 0:
            raise ValueError("invalid-rate")
        start = time.monotonic()
        n = 0
        for f in frames:
            target = start + n / rate
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            self.publish(f)
            n += 1
        return n

    def close(self) -> None:
        with self._lock:
            self._closed = True
            conns = list(self._conns)
            self._conns.clear()
        for c in conns:
            c.shutdown()
        self._srv.close()


class FrameSubscriber:
    """Iterates frames from a publisher; ends cleanly on connection loss.

    Tracks skipped frame ids so consumers can see drop gaps.
    """

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, _SOCKET_BUFFER)
        self._sock.settimeout(connect_timeout)
        self._sock.connect((host, port))
        self._sock.settimeout(None)
        self._fh = self._sock.makefile("r", encoding="utf-8")
        self.last_frame_id: int | None = None
        self.gaps = 0

    def __iter__(self) -> Iterator[DetectionFrame]:
        return self

    def __next__(self) -> DetectionFrame:
        line = self._fh.readline()
        if not line:
            self.close()
            raise StopIteration  # end of stream
        f = decode_frame(line)
        if self.last_frame_id is not None and f.frame > self.last_frame_id + 1:
            self.gaps += f.frame - self.last_frame_id - 1
        self.last_frame_id = f.frame
        return f

    def close(self) -> None:
        try:
            self._fh.close()
        finally:
            self._sock.close()


def subscribe(host: str, port: int) -> FrameSubscriber:
    return FrameSubscriber(host, port)
