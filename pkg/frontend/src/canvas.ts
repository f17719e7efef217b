/** Top-down scene canvas: regions, entities with height labels, relation
 * edges colored by kind, and drag-to-move that posts a scripted move to the
 * service (the pipeline stays authoritative; the local model never moves). */

import type { ApiClient } from "./api.js";
import { EDGE_COLORS, dropPosition, footprint, hitTest, screenToWorld, worldToScreen, type Viewport } from "./scene-math.js";
import type { SceneStore } from "./store.js";
import type { Entity } from "./types.js";

export class SceneCanvas {
  private ctx: CanvasRenderingContext2D;
  private dragging: Entity | null = null;
  private dragPoint: [number, number] | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private store: SceneStore,
    private api: ApiClient,
  ) {
    this.ctx = canvas.getContext("2d")!;
    store.subscribe(() => this.render());
    canvas.addEventListener("pointerdown", (ev) => this.onDown(ev));
    canvas.addEventListener("pointermove", (ev) => this.onMove(ev));
    canvas.addEventListener("pointerup", (ev) => this.onUp(ev));
    this.render();
  }

  private viewport(): Viewport {
    const region = this.store.regions[0];
    const worldW = region ? Math.max(...this.store.regions.map((r) => r.box.max[0])) : 4;
    const worldH = region ? Math.max(...this.store.regions.map((r) => r.box.max[1])) : 3;
    return { worldW, worldH, pxW: this.canvas.width, pxH: this.canvas.height, margin: 24 };
  }

  private onDown(ev: PointerEvent): void {
    const [wx, wy] = this.eventWorld(ev);
    const hit = hitTest(this.store.entities, wx, wy);
    if (hit && hit.kind === "object") {
      this.dragging = hit;
      this.dragPoint = [wx, wy];
      this.canvas.setPointerCapture(ev.pointerId);
    }
  }

  private onMove(ev: PointerEvent): void {
    if (!this.dragging) return;
    this.dragPoint = this.eventWorld(ev);
    this.render();
  }

  private onUp(ev: PointerEvent): void {
    if (!this.dragging) return;
    const [wx, wy] = this.eventWorld(ev);
    const target = dropPosition(this.dragging, wx, wy, this.store.regions[0] ?? null);
    const ref = this.dragging.source_id ?? this.dragging.id;
    this.api.moveEntity(ref, target).catch(() => undefined);
    this.dragging = null;
    this.dragPoint = null;
  }

  private eventWorld(ev: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return screenToWorld(this.viewport(), ev.clientX - rect.left, ev.clientY - rect.top);
  }

  render(): void {
    const ctx = this.ctx;
    const vp = this.viewport();
    ctx.clearRect(0, 0, vp.pxW, vp.pxH);

    ctx.font = "11px system-ui, sans-serif";
    for (const region of this.store.regions) {
      const f = footprint(region.box);
      const [x0, y0] = worldToScreen(vp, f.x, f.y + f.h);
      const [x1, y1] = worldToScreen(vp, f.x + f.w, f.y);
      ctx.strokeStyle = "#b0bec5";
      ctx.setLineDash([5, 4]);
      ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
      ctx.setLineDash([]);
      ctx.fillStyle = "#78909c";
      ctx.fillText(region.name, x0 + 4, y0 + 13);
    }

    const highlighted = new Set(
      this.store.highlighted.map((r) => `${r.kind}|${r.subject}|${r.object}`),
    );
    for (const rel of this.store.relations) {
      if (rel.kind === "in_location" || rel.kind === "near") continue; // keep the view legible
      const a = this.store.entity(rel.subject);
      const b = this.store.entity(rel.object);
      if (!a || !b) continue;
      const [ax, ay] = worldToScreen(vp, a.centroid[0], a.centroid[1]);
      const [bx, by] = worldToScreen(vp, b.centroid[0], b.centroid[1]);
      const key = `${rel.kind}|${rel.subject}|${rel.object}`;
      ctx.strokeStyle = EDGE_COLORS[rel.kind] ?? "#999";
      ctx.lineWidth = highlighted.has(key) ? 3 : 1;
      ctx.beginPath();
      ctx.moveTo(ax, ay);
      ctx.lineTo(bx, by);
      ctx.stroke();
      ctx.lineWidth = 1;
      ctx.fillStyle = ctx.strokeStyle;
      ctx.fillText(rel.kind.replace("_", " "), (ax + bx) / 2 + 3, (ay + by) / 2 - 3);
    }

    for (const e of this.store.entities) {
      if (e.state === "lost") continue;
      const f = footprint(e.bbox);
      const [x0, y0] = worldToScreen(vp, f.x, f.y + f.h);
      const [x1, y1] = worldToScreen(vp, f.x + f.w, f.y);
      const isDragged = this.dragging?.id === e.id;
      ctx.fillStyle = e.kind === "person" ? "rgba(46,125,50,0.25)" : "rgba(21,101,192,0.3)";
      ctx.strokeStyle = e.kind === "person" ? "#2e7d32" : "#1565c0";
      if (isDragged) ctx.strokeStyle = "#ff6f00";
      ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
      ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
      ctx.fillStyle = "#263238";
      const name = e.label ?? e.id;
      const owner = e.owner ? " *" : "";
      const height = e.bbox.max[2].toFixed(2);
      ctx.fillText(`${name}${owner} (${height} m)`, x0 + 2, y0 - 3);
      if (e.state === "held") {
        ctx.fillStyle = "#ff6f00";
        ctx.fillText("held", x0 + 2, y1 + 12);
      }
    }

    if (this.dragging && this.dragPoint) {
      const [gx, gy] = worldToScreen(vp, this.dragPoint[0], this.dragPoint[1]);
      ctx.strokeStyle = "#ff6f00";
      ctx.beginPath();
      ctx.arc(gx, gy, 6, 0, Math.PI * 2);
      ctx.stroke();
    }
  }
}
