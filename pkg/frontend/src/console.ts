/** Orchestrator: wires the stream into the view model and user
 * gestures into intervention commands. */
import { ServiceClient, ServiceError } from "./client.js";
import {
  dragToIntervention,
  Point,
  provideTrayPreset,
} from "./interactions.js";
import type { ConsoleViewModel } from "./viewModel.js";
import { applyEvent, initialViewModel } from "./viewModel.js";
import type { InterventionAck, InterventionPayload } from "./types.js";

export interface ConsoleCallbacks {
  onUpdate?: (vm: ConsoleViewModel) => void;
  onError?: (message: string) => void;
}

export class Console {
  vm: ConsoleViewModel = initialViewModel();

  constructor(
    private client: ServiceClient,
    private sessionId: string,
    private callbacks: ConsoleCallbacks = {},
  ) {}

  private update(vm: ConsoleViewModel): void {
    this.vm = vm;
    this.callbacks.onUpdate?.(vm);
  }

  /** Subscribe and reduce until the terminal metrics event; reconnects
   * resume from the last seen event id. */
  async connect(signal?: AbortSignal): Promise<ConsoleViewModel> {
    const stream = this.client.stream(this.sessionId, {
      lastEventId: this.vm.lastEventId,
      signal,
      onReconnect: () => this.update({ ...this.vm, connection: "reconnecting" }),
    });
    for await (const msg of stream) {
      const next = applyEvent(this.vm, msg);
      if (next.connection === "connecting" || next.connection === "reconnecting") {
        next.connection = "live";
      }
      this.update(next);
    }
    if (!this.vm.done) this.update({ ...this.vm, connection: "closed" });
    return this.vm;
  }

  async send(payload: InterventionPayload): Promise<InterventionAck | null> {
    try {
      return await this.client.intervene(this.sessionId, payload);
    } catch (err) {
      // server error text surfaced verbatim (toast hook)
      const message = err instanceof ServiceError ? err.message : String(err);
      this.callbacks.onError?.(message);
      return null;
    }
  }

  /** Drag an object marker onto a region. Returns null for drops
   * outside every region (the gesture is simply cancelled). */
  dragObject(objectId: string, drop: Point): Promise<InterventionAck | null> {
    if (this.vm.world === null) return Promise.resolve(null);
    const payload = dragToIntervention(this.vm.world, objectId, drop);
    if (payload === null) return Promise.resolve(null);
    return this.send(payload);
  }

  provideTray(
    trayId: string,
    regionA: string,
    regionB: string,
  ): Promise<InterventionAck | null> {
    if (this.vm.world === null) return Promise.resolve(null);
    return this.send(provideTrayPreset(this.vm.world, trayId, regionA, regionB));
  }

  pause(): Promise<unknown> {
    return this.client.pause(this.sessionId);
  }

  resume(): Promise<unknown> {
    return this.client.resume(this.sessionId);
  }

  setSpeed(multiplier: number): Promise<unknown> {
    return this.client.setSpeed(this.sessionId, multiplier);
  }
}
