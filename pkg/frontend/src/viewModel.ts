/** Console view model: a pure reducer over the ordered event stream.
 * Every rendered fact comes from a server event — no client inference. */
import type {
  BTNodeJson,
  SessionMetrics,
  StreamMessage,
  TraceEvent,
  WorldSnapshot,
} from "./types.js";

export type ConnectionState = "connecting" | "live" | "reconnecting" | "closed";

export interface LogEntry {
  id: number;
  t: number;
  event: string;
  detail: string;
}

export interface PlanPanel {
  actions: string[];
  completed: string[];
  active: string[];
  cost: number | null;
  replanning: boolean;
}

export interface ConsoleViewModel {
  connection: ConnectionState;
  lastEventId: number;
  clock: number;
  scenarioName: string | null;
  formula: string | null;
  world: WorldSnapshot | null;
  bt: BTNodeJson | null;
  plan: PlanPanel;
  metrics: SessionMetrics | null;
  done: boolean;
  log: LogEntry[];
}

export function initialViewModel(): ConsoleViewModel {
  return {
    connection: "connecting",
    lastEventId: -1,
    clock: 0,
    scenarioName: null,
    formula: null,
    world: null,
    bt: null,
    plan: { actions: [], completed: [], active: [], cost: null, replanning: false },
    metrics: null,
    done: false,
    log: [],
  };
}

function detailOf(e: TraceEvent): string {
  const skip = new Set(["t", "event", "tree", "objects", "regions", "trays", "state"]);
  return Object.entries(e)
    .filter(([k]) => !skip.has(k))
    .map(([k, v]) => `${k}=${typeof v === "object" ? JSON.stringify(v) : String(v)}`)
    .join(" ");
}

const SNAPSHOT_EVENTS = new Set(["world_snapshot", "bt_snapshot", "plan_snapshot", "state_update"]);

export function applyEvent(
  vm: ConsoleViewModel,
  msg: StreamMessage,
): ConsoleViewModel {
  const e = msg.data;
  const next: ConsoleViewModel = {
    ...vm,
    lastEventId: msg.id,
    clock: e.t,
    plan: { ...vm.plan },
  };
  switch (e.event) {
    case "scenario_loaded":
      next.scenarioName = e.name as string;
      next.formula = e.formula as string;
      break;
    case "initial_plan_started":
    case "replan_started":
      next.plan.replanning = true;
      break;
    case "initial_plan_done":
    case "replan_done":
      next.plan = {
        actions: e.actions as string[],
        completed: [],
        active: [],
        cost: e.cost as number,
        replanning: false,
      };
      break;
    case "action_dispatched":
      next.plan.active = [e.action as string];
      break;
    case "action_completed":
      next.plan.active = next.plan.active.filter((a) => a !== e.action);
      next.plan.completed = [...next.plan.completed, e.action as string];
      break;
    case "plan_snapshot":
      next.plan = {
        ...next.plan,
        actions: e.actions as string[],
        completed: e.completed as string[],
        active: e.active as string[],
      };
      break;
    case "world_snapshot":
      next.world = {
        objects: e.objects as WorldSnapshot["objects"],
        regions: e.regions as WorldSnapshot["regions"],
        trays: e.trays as WorldSnapshot["trays"],
        held: (e.held as string | null) ?? null,
      };
      break;
    case "bt_snapshot":
      next.bt = e.tree as BTNodeJson;
      break;
    case "metrics":
      // terminal event: the metrics panel freezes with these values
      next.metrics = e as unknown as SessionMetrics;
      next.done = true;
      next.connection = "closed";
      break;
    default:
      break;
  }
  if (!SNAPSHOT_EVENTS.has(e.event)) {
    next.log = [...vm.log, { id: msg.id, t: e.t, event: e.event, detail: detailOf(e) }];
  }
  return next;
}

/** Gap check for the resumability contract: log ids strictly increase. */
export function logHasGaps(vm: ConsoleViewModel): boolean {
  for (let i = 1; i < vm.log.length; i++) {
    if (vm.log[i].id <= vm.log[i - 1].id) return true;
  }
  return false;
}
