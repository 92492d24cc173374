/** Pointer interactions: hit-testing the 2D top-down workspace and
 * translating drags/buttons into intervention payloads. */
import type { InterventionPayload, Vec3, WorldSnapshot } from "./types.js";

export const REGION_RADIUS = 0.15;
export const OBJECT_HIT_RADIUS = 0.06;

export interface Point {
  x: number;
  y: number;
}

function dist2d(p: Point, v: Vec3): number {
  return Math.hypot(p.x - v[0], p.y - v[1]);
}

/** Object under the pointer, nearest first. */
export function hitTestObject(world: WorldSnapshot, p: Point): string | null {
  let best: { id: string; d: number } | null = null;
  for (const [id, pos] of Object.entries(world.objects)) {
    const d = dist2d(p, pos);
    if (d <= OBJECT_HIT_RADIUS && (best === null || d < best.d)) {
      best = { id, d };
    }
  }
  return best?.id ?? null;
}

/** Region (fixed or tray at its current dock) containing the point. */
export function regionAt(world: WorldSnapshot, p: Point): string | null {
  let best: { id: string; d: number } | null = null;
  const candidates: Array<[string, Vec3]> = Object.entries(world.regions);
  for (const [id, tray] of Object.entries(world.trays)) {
    candidates.push([id, tray.docks[tray.dock]]);
  }
  for (const [id, center] of candidates) {
    const d = dist2d(p, center);
    if (d <= REGION_RADIUS && (best === null || d < best.d)) {
      best = { id, d };
    }
  }
  return best?.id ?? null;
}

/** Drag an object marker and drop it on a region -> RelocateObject.
 * Returns null when the drop point is not over any region. */
export function dragToIntervention(
  world: WorldSnapshot,
  objectId: string,
  drop: Point,
): InterventionPayload | null {
  const region = regionAt(world, drop);
  if (region === null) return null;
  return { schema: "v1", kind: "relocate_object", obj: objectId, region };
}

export function addObjectPayload(obj: string, region: string): InterventionPayload {
  return { schema: "v1", kind: "add_object", obj, region };
}

export function removeObjectPayload(obj: string): InterventionPayload {
  return { schema: "v1", kind: "remove_object", obj };
}

/** "Provide tray" preset: a tray with one dock near each of two regions,
 * offset toward the workspace center so docks do not overlap regions. */
export function provideTrayPreset(
  world: WorldSnapshot,
  trayId: string,
  regionA: string,
  regionB: string,
  dockOffset = 0.2,
): InterventionPayload {
  const a = world.regions[regionA];
  const b = world.regions[regionB];
  if (!a || !b) throw new Error(`unknown regions ${regionA}/${regionB}`);
  const len = Math.hypot(b[0] - a[0], b[1] - a[1]) || 1;
  const ux = (b[0] - a[0]) / len;
  const uy = (b[1] - a[1]) / len;
  const docks = {
    d1: [a[0] + ux * dockOffset, a[1] + uy * dockOffset, a[2]],
    d2: [b[0] - ux * dockOffset, b[1] - uy * dockOffset, b[2]],
  };
  return { schema: "v1", kind: "add_tray", tray: trayId, docks, dock: "d1" };
}
