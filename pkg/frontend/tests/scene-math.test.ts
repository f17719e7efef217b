import { describe, expect, it } from "vitest";

import {
  dropPosition,
  hitTest,
  scaleOf,
  screenToWorld,
  snapToGrid,
  worldToScreen,
  type Viewport,
} from "../src/scene-math.js";
import type { Entity } from "../src/types.js";

const VP: Viewport = { worldW: 4, worldH: 3, pxW: 760, pxH: 560, margin: 24 };

function entity(id: string, kind: "person" | "object", min: [number, number, number],
                max: [number, number, number], state = "visible"): Entity {
  return {
    id, kind, label: id, state: state as Entity["state"],
    centroid: [(min[0] + max[0]) / 2, (min[1] + max[1]) / 2, (min[2] + max[2]) / 2],
    bbox: { min, max },
  };
}

describe("transforms", () => {
  it("round-trips world through screen", () => {
    for (const [x, y] of [[0, 0], [2.5, 1.5], [4, 3]] as const) {
      const [px, py] = worldToScreen(VP, x, y);
      const [bx, by] = screenToWorld(VP, px, py);
      expect(bx).toBeCloseTo(x, 9);
      expect(by).toBeCloseTo(y, 9);
    }
  });

  it("flips y so world-up is screen-up", () => {
    const [, topPy] = worldToScreen(VP, 0, 3);
    const [, bottomPy] = worldToScreen(VP, 0, 0);
    expect(topPy).toBeLessThan(bottomPy);
  });

  it("uses the limiting axis for scale", () => {
    expect(scaleOf(VP)).toBeCloseTo(Math.min((760 - 48) / 4, (560 - 48) / 3));
  });
});

describe("snapToGrid", () => {
  it("snaps to centimeters", () => {
    expect(snapToGrid(1.2345)).toBeCloseTo(1.23, 10);
    expect(snapToGrid(1.2351)).toBeCloseTo(1.24, 10);
    expect(snapToGrid(0.004)).toBeCloseTo(0.0, 10);
  });
});

describe("hitTest", () => {
  const wallet = entity("wallet", "object", [2.89, 1.255, 0], [3.01, 1.345, 0.03]);
  const person = entity("p", "person", [2.8, 1.1, 0], [3.2, 1.5, 1.7]);
  const lost = entity("ghost", "object", [2.9, 1.28, 0], [3.0, 1.32, 0.02], "lost");

  it("prefers objects over persons and ignores lost tracks", () => {
    const hit = hitTest([person, wallet, lost], 2.95, 1.3);
    expect(hit?.id).toBe("wallet");
  });

  it("misses empty space", () => {
    expect(hitTest([person, wallet], 0.5, 0.5)).toBeNull();
  });

  it("smaller object wins when nested", () => {
    const tray = entity("tray", "object", [2.8, 1.2, 0], [3.2, 1.4, 0.02]);
    expect(hitTest([tray, wallet], 2.95, 1.3)?.id).toBe("wallet");
  });
});

describe("dropPosition", () => {
  const wallet = entity("wallet", "object", [2.89, 1.255, 0], [3.01, 1.345, 0.03]);

  it("snaps and keeps the entity's resting height", () => {
    const [x, y, z] = dropPosition(wallet, 1.2345, 2.5551, null);
    expect(x).toBeCloseTo(1.23, 10);
    expect(y).toBeCloseTo(2.56, 10);
    expect(z).toBe(0);
  });

  it("clamps into the bounding region", () => {
    const bounds = { name: "room", box: { min: [0, 0, 0] as [number, number, number], max: [4, 3, 2] as [number, number, number] } };
    const [x, y] = dropPosition(wallet, 99, -5, bounds);
    expect(x).toBe(4);
    expect(y).toBe(0);
  });
});
