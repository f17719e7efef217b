"""Materialize a scenario into frames plus dialog events, via exact poses or
via rendered height maps fed through the detector."""
from __future__ import annotations

from dataclasses import dataclass

from ..detection import DetectorConfig, detect_frame
from ..dialog import DialogEvent
from ..relations import RelationConfig
from ..stream import DetectionFrame
from .oracle import scene_relations
from .render import render_height_map
from .scenario import ScenarioScript, dialog_events, frame_at, object_poses

MODE_FRAMES = "frames"
MODE_HEIGHTMAPS = "heightmaps"


@dataclass(frozen=True)
class ScenarioRun:
    script: ScenarioScript
    frames: tuple[DetectionFrame, ...]
    events: tuple[DialogEvent, ...]

    def oracle_at(self, t: float, cfg: RelationConfig | None = None) -> set[tuple[str, str, str]]:
        cfg = cfg or RelationConfig()
        return scene_relations(object_poses(self.script, t), list(self.script.regions), cfg)


def run_scenario(
    script: ScenarioScript,
    mode: str = MODE_FRAMES,
    detector_cfg: DetectorConfig | None = None,
    resolution: float = 0.01,
) -> ScenarioRun:
    if mode not in (MODE_FRAMES, MODE_HEIGHTMAPS):
        raise ValueError(f"unknown scenario mode '{mode}'")
    frames = []
    for k in range(script.frame_count()):
        if mode == MODE_FRAMES:
            frames.append(frame_at(script, k))
        else:
            t = script.frame_time(k)
            hm = render_height_map(script, t, resolution=resolution)
            frames.append(detect_frame(hm, detector_cfg or DetectorConfig(), t, frame_id=k))
    return ScenarioRun(script=script, frames=tuple(frames), events=tuple(dialog_events(script)))
