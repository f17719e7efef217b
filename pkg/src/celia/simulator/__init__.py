from .oracle import (
    borderline_kinds,
    oracle_in,
    oracle_near,
    oracle_next_to,
    oracle_on,
    scene_borderline,
    scene_relations,
    voxel_containment_fraction,
)
from .render import render_height_map
from .runner import MODE_FRAMES, MODE_HEIGHTMAPS, ScenarioRun, run_scenario
from .scenario import (
    Gesture,
    HeldInterval,
    ObjectSpec,
    PersonSpec,
    ScenarioError,
    ScenarioScript,
    ScriptEvent,
    Waypoint,
    Window,
    dialog_events,
    frame_at,
    load_scenario,
    object_poses,
    parse_scenario,
)

__all__ = [
    "borderline_kinds",
    "oracle_in",
    "oracle_near",
    "oracle_next_to",
    "oracle_on",
    "scene_borderline",
    "scene_relations",
    "voxel_containment_fraction",
    "render_height_map",
    "MODE_FRAMES",
    "MODE_HEIGHTMAPS",
    "ScenarioRun",
    "run_scenario",
    "Gesture",
    "HeldInterval",
    "ObjectSpec",
    "PersonSpec",
    "ScenarioError",
    "ScenarioScript",
    "ScriptEvent",
    "Waypoint",
    "Window",
    "dialog_events",
    "frame_at",
    "load_scenario",
    "object_poses",
    "parse_scenario",
]
