"""Rasterize a scenario at time t into a HeightMap: person cylinders with a
head dome, object boxes, and pointing-arm slabs. Held objects are not drawn
(they travel merged with the hand, like a real depth view would see them)."""
from __future__ import annotations

import numpy as np

from ..geometry import HeightMap, Vec3
from .scenario import ScenarioScript

HEAD_RADIUS = 0.12
ARM_HALF_WIDTH = 0.04
ARM_HEIGHT = 0.85


def render_height_map(script: ScenarioScript, t: float, resolution: float = 0.01) -> HeightMap:
    if not (0.0 <= t <= script.duration):
        raise ValueError("time outside scenario duration")
    area = script.work_area
    nx = max(1, int(round((area.max.x - area.min.x) / resolution)))
    ny = max(1, int(round((area.max.y - area.min.y) / resolution)))
    samples = np.zeros((ny, nx))
    origin = Vec3(area.min.x, area.min.y, 0.0)

    xs = origin.x + (np.arange(nx) + 0.5) * resolution
    ys = origin.y + (np.arange(ny) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)

    for obj in script.objects:
        if not obj.present(t) or obj.holder(t) is not None:
            continue
        box = obj.box(t)
        mask = (gx >= box.min.x) & (gx <= box.max.x) & (gy >= box.min.y) & (gy <= box.max.y)
        np.maximum(samples, np.where(mask, box.max.z, 0.0), out=samples)

    for spec in script.persons:
        if not spec.present(t):
            continue
        p = spec.position(t)
        d2 = (gx - p.x) ** 2 + (gy - p.y) ** 2
        body = d2 <= spec.radius**2
        np.maximum(samples, np.where(body, spec.height - HEAD_RADIUS, 0.0), out=samples)
        head = d2 <= HEAD_RADIUS**2
        dome = spec.height - HEAD_RADIUS + np.sqrt(np.maximum(HEAD_RADIUS**2 - d2, 0.0))
        np.maximum(samples, np.where(head, dome, 0.0), out=samples)

    for g in script.gestures:
        if not (g.start <= t <= g.end):
            continue
        spec = next(s for s in script.persons if s.id == g.person)
        p = spec.position(t)
        start = Vec3(p.x, p.y, 0.0)
        end_xy = Vec3(g.target.x, g.target.y, 0.0)
        reach = start.distance_to(end_xy)
        steps = max(2, int(reach / (resolution * 2)) + 1)
        for i in range(steps + 1):
            f = i / steps
            cx = start.x + (end_xy.x - start.x) * f
            cy = start.y + (end_xy.y - start.y) * f
            disc = (gx - cx) ** 2 + (gy - cy) ** 2 <= ARM_HALF_WIDTH**2
            np.maximum(samples, np.where(disc, ARM_HEIGHT, 0.0), out=samples)

    return HeightMap(width=nx, height=ny, resolution=resolution, origin=origin, samples=samples)
