/** Rendering as data: the scene compiles to a list of draw operations
 * so tests can assert on it without a canvas; drawOps paints them. */
import { REGION_RADIUS } from "./interactions.js";
import type { ConsoleViewModel } from "./viewModel.js";

export type DrawOp =
  | { op: "circle"; x: number; y: number; r: number; stroke: string; fill?: string; label?: string }
  | { op: "rect"; x: number; y: number; w: number; h: number; stroke: string; dashed?: boolean; label?: string }
  | { op: "dot"; x: number; y: number; r: number; fill: string; label?: string }
  | { op: "text"; x: number; y: number; text: string; color: string };

const COLORS = {
  region: "#4477aa",
  trayCurrent: "#aa7744",
  trayGhost: "#ccb399",
  object: "#222222",
  heldObject: "#cc3311",
};

export function renderScene(vm: ConsoleViewModel): DrawOp[] {
  const ops: DrawOp[] = [];
  const world = vm.world;
  if (world === null) return ops;
  for (const [id, c] of Object.entries(world.regions)) {
    ops.push({ op: "circle", x: c[0], y: c[1], r: REGION_RADIUS,
               stroke: COLORS.region, label: id });
  }
  const side = REGION_RADIUS * 1.6;
  for (const [id, tray] of Object.entries(world.trays)) {
    for (const [dock, pos] of Object.entries(tray.docks)) {
      const current = dock === tray.dock;
      ops.push({
        op: "rect",
        x: pos[0] - side / 2,
        y: pos[1] - side / 2,
        w: side,
        h: side,
        stroke: current ? COLORS.trayCurrent : COLORS.trayGhost,
        dashed: !current,
        label: current ? id : `${id}@${dock}`,
      });
    }
  }
  for (const [id, pos] of Object.entries(world.objects)) {
    ops.push({
      op: "dot",
      x: pos[0],
      y: pos[1],
      r: 0.04,
      fill: id === world.held ? COLORS.heldObject : COLORS.object,
      label: id,
    });
  }
  if (vm.plan.replanning) {
    ops.push({ op: "text", x: 0, y: 0, text: "replanning…", color: "#cc3311" });
  }
  return ops;
}

export interface Canvas2D {
  beginPath(): void;
  arc(x: number, y: number, r: number, a: number, b: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
  strokeStyle: string;
  fillStyle: string;
}

/** Paint draw ops through a world->pixel transform. */
export function drawOps(
  ctx: Canvas2D,
  ops: DrawOp[],
  scale: number,
  offsetX: number,
  offsetY: number,
): void {
  const px = (x: number) => x * scale + offsetX;
  const py = (y: number) => -y * scale + offsetY;
  for (const o of ops) {
    ctx.setLineDash("dashed" in o && o.dashed ? [4, 4] : []);
    if (o.op === "circle") {
      ctx.beginPath();
      ctx.strokeStyle = o.stroke;
      ctx.arc(px(o.x), py(o.y), o.r * scale, 0, 2 * Math.PI);
      ctx.stroke();
    } else if (o.op === "rect") {
      ctx.beginPath();
      ctx.strokeStyle = o.stroke;
      ctx.rect(px(o.x), py(o.y) - o.h * scale, o.w * scale, o.h * scale);
      ctx.stroke();
    } else if (o.op === "dot") {
      ctx.beginPath();
      ctx.fillStyle = o.fill;
      ctx.arc(px(o.x), py(o.y), o.r * scale, 0, 2 * Math.PI);
      ctx.fill();
    } else {
      ctx.fillStyle = o.color;
      ctx.fillText(o.text, px(o.x), py(o.y));
    }
    if ("label" in o && o.label) {
      ctx.fillStyle = "#555555";
      ctx.fillText(o.label, px(o.x), py(o.y) - 6);
    }
  }
}
