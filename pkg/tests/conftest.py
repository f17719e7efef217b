import numpy as np
import pytest

from celia.geometry import Aabb, Vec3
from celia.stream import DetectionFrame, HandData, ObjectData, PersonData


def box(x0, y0, z0, x1, y1, z1) -> Aabb:
    return Aabb(Vec3(x0, y0, z0), Vec3(x1, y1, z1))


def random_box(rng: np.random.RandomState, lo=0.0, hi=3.0, min_size=0.05, max_size=1.0) -> Aabb:
    base = rng.uniform(lo, hi, size=3)
    size = rng.uniform(min_size, max_size, size=3)
    return Aabb(Vec3(*base), Vec3(*(base + size)))


def random_frame(rng: np.random.RandomState, frame_id: int) -> DetectionFrame:
    def rvec():
        return Vec3(*rng.uniform(-10, 10, 3))

    def rbox():
        base = rng.uniform(-10, 10, 3)
        size = rng.uniform(0.01, 2.0, 3)
        return Aabb(Vec3(*base), Vec3(*(base + size)))

    persons = []
    for i in range(rng.randint(0, 4)):
        hands = []
        for _ in range(rng.randint(0, 3)):
            pointing = None
            if rng.rand() < 0.5:
                v = rng.normal(size=3)
                v /= np.linalg.norm(v)
                pointing = Vec3(*v)
            hands.append(HandData(pos=rvec(), pointing=pointing))
        persons.append(PersonData(id=f"p{i}", centroid=rvec(), bbox=rbox(), hands=tuple(hands)))
    objects = []
    for j in range(rng.randint(0, 6)):
        objects.append(
            ObjectData(
                id=f"o{j}",
                centroid=rvec(),
                bbox=rbox(),
                held_by="p0" if (persons and rng.rand() < 0.3) else None,
                label=rng.choice(["cup", "wallet", "wrench", None]),
            )
        )
    return DetectionFrame(frame=frame_id, t=frame_id / 30.0, persons=tuple(persons), objects=tuple(objects))


@pytest.fixture
def rng():
    return np.random.RandomState(20240817)
