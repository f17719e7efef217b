"""Pydantic request/response models for the HTTP API."""
from __future__ import annotations

from pydantic import BaseModel, Field

from ..dialog import Answer
from ..knowledge import Alert
from ..relations import LocationRegion, Relation
from ..tracking import TrackedEntity


class BoxModel(BaseModel):
    min: list[float]
    max: list[float]


class HandModel(BaseModel):
    pos: list[float]
    pointing: list[float] | None = None


class EntityModel(BaseModel):
    id: str
    kind: str
    label: str | None = None
    state: str
    centroid: list[float]
    bbox: BoxModel
    held_by: str | None = None
    owner: str | None = None
    source_id: str | None = None
    hands: list[HandModel] = Field(default_factory=list)


class RelationModel(BaseModel):
    kind: str
    subject: str
    object: str
    since: float


class RegionModel(BaseModel):
    name: str
    box: BoxModel


class AlertModel(BaseModel):
    kind: str
    label: str
    region: str
    raised_at: float


class AttentionModel(BaseModel):
    mode: str
    deadline: float | None = None


class StateResponse(BaseModel):
    frame: int
    time: float
    entities: list[EntityModel]
    relations: list[RelationModel]
    regions: list[RegionModel]
    alerts: list[AlertModel]
    attention: AttentionModel
    transcript_len: int


class AnswerModel(BaseModel):
    text: str
    grounded_object: str | None = None
    relations_used: list[RelationModel] = Field(default_factory=list)


class TranscriptEntryModel(BaseModel):
    t: float
    speaker: str | None = None
    text: str
    answer: AnswerModel


class QueryRequest(BaseModel):
    text: str
    speaker: str | None = None
    time: float | None = None


class QueryResponse(BaseModel):
    answered: bool
    reason: str | None = None
    time: float
    text: str | None = None
    grounded_object: str | None = None
    relations_used: list[RelationModel] = Field(default_factory=list)


class EventRequest(BaseModel):
    kind: str  # keyword | gaze | utterance
    speaker: str | None = None
    text: str | None = None
    time: float | None = None


class EventResponse(BaseModel):
    accepted: bool
    time: float
    answer: AnswerModel | None = None


class ObjectDetailResponse(BaseModel):
    id: str
    label: str | None = None
    owner: str | None = None
    last_seen_at: float | None = None
    last_centroid: list[float] | None = None
    last_touched_by: str | None = None
    last_touched_at: float | None = None
    relations: list[RelationModel] = Field(default_factory=list)
    entity: EntityModel | None = None


class ScenarioRequest(BaseModel):
    path: str
    mode: str = "frames"  # frames | heightmaps | interactive
    speed: float = 0.0
    record: str | None = None


class ScenarioResponse(BaseModel):
    status: str  # completed | running
    name: str | None = None
    frames: int | None = None
    transcript: list[TranscriptEntryModel] = Field(default_factory=list)


class ReplayRequest(BaseModel):
    path: str
    speed: float = 0.0


class ReplayResponse(BaseModel):
    status: str
    frames: int | None = None
    elapsed: float | None = None
    fps: float | None = None


class RecordRequest(BaseModel):
    path: str | None = None
    stop: bool = False


class RecordResponse(BaseModel):
    recording: bool
    frames_written: int = 0


class MoveRequest(BaseModel):
    id: str
    position: list[float]


class SnapshotRequest(BaseModel):
    path: str


class HealthResponse(BaseModel):
    status: str
    time: float
    frame: int


def box_model(box) -> BoxModel:
    return BoxModel(min=[box.min.x, box.min.y, box.min.z], max=[box.max.x, box.max.y, box.max.z])


def entity_model(tr: TrackedEntity, owner: str | None) -> EntityModel:
    return EntityModel(
        id=tr.id,
        kind=tr.kind.value,
        label=tr.label,
        state=tr.state.value,
        centroid=[tr.centroid.x, tr.centroid.y, tr.centroid.z],
        bbox=box_model(tr.bounding_box),
        held_by=tr.held_by,
        owner=owner,
        source_id=tr.source_id,
        hands=[
            HandModel(
                pos=[h.position.x, h.position.y, h.position.z],
                pointing=[h.pointing.x, h.pointing.y, h.pointing.z] if h.pointing else None,
            )
            for h in tr.hands
        ],
    )


def relation_model(r: Relation) -> RelationModel:
    return RelationModel(kind=r.kind.value, subject=r.subject, object=r.object, since=r.since)


def region_model(r: LocationRegion) -> RegionModel:
    return RegionModel(name=r.name, box=box_model(r.box))


def alert_model(a: Alert) -> AlertModel:
    return AlertModel(kind=a.kind.value, label=a.object_label, region=a.region, raised_at=a.raised_at)


def answer_model(a: Answer) -> AnswerModel:
    return AnswerModel(
        text=a.text,
        grounded_object=a.grounded_object,
        relations_used=[relation_model(r) for r in a.relations_used],
    )
