/** Application state machine.
 *
 * All state is derived from API responses; no mask editing happens on the
 * client, so reloading a session reconstructs the identical timeline.
 * Commands round-trip one at a time (busy flag), never optimistically.
 */

import { ApiError, type ApiClient } from "./api.js";
import { strategyCommand } from "./strategies.js";
import type {
  CriticalPointDoc,
  ParseFailure,
  PreviewDoc,
  SessionExport,
  StepDoc,
  TrajectoryDoc,
} from "./types.js";

export interface OverlayState {
  stepId: number | null;
  maskUrl: string | null;
  maskBytes: Uint8Array | null;
}

export interface StoreState {
  sessionId: string | null;
  exportDoc: SessionExport | null;
  overlay: OverlayState;
  pendingStepId: number | null; // newest unaccepted step shown for review
  criticalPoints: CriticalPointDoc[];
  previews: PreviewDoc[];
  helpText: string | null;
  parseFailure: ParseFailure | null;
  errorMessage: string | null;
  strategy: { name: string; remaining: number } | null;
  trajectory: TrajectoryDoc | null;
  busy: boolean;
}

export class Store {
  readonly state: StoreState = {
    sessionId: null,
    exportDoc: null,
    overlay: { stepId: null, maskUrl: null, maskBytes: null },
    pendingStepId: null,
    criticalPoints: [],
    previews: [],
    helpText: null,
    parseFailure: null,
    errorMessage: null,
    strategy: null,
    trajectory: null,
    busy: false,
  };

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (state: StoreState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  stepById(stepId: number): StepDoc | null {
    return this.state.exportDoc?.steps.find((s) => s.id === stepId) ?? null;
  }

  private async setOverlayStep(stepId: number): Promise<void> {
    if (this.state.sessionId === null) return;
    const url = this.api.maskPngUrl(this.state.sessionId, stepId);
    const bytes = await this.api.fetchBytes(url);
    this.state.overlay = { stepId, maskUrl: url, maskBytes: bytes };
  }

  private async refreshExport(): Promise<void> {
    if (this.state.sessionId === null) return;
    this.state.exportDoc = await this.api.getSession(this.state.sessionId);
    this.state.trajectory = await this.api.trajectory(this.state.sessionId);
  }

  async loadSession(sessionId: string): Promise<void> {
    this.state.sessionId = sessionId;
    this.state.pendingStepId = null;
    this.state.criticalPoints = [];
    this.state.previews = [];
    this.state.parseFailure = null;
    this.state.errorMessage = null;
    this.state.strategy = null;
    await this.refreshExport();
    await this.setOverlayStep(this.state.exportDoc!.cursor);
    this.emit();
  }

  /** Timeline click: revert to that step and show its mask. */
  async clickStep(stepId: number): Promise<void> {
    if (this.state.sessionId === null || this.state.busy) return;
    this.state.busy = true;
    this.emit();
    try {
      await this.api.revert(this.state.sessionId, stepId);
      await this.refreshExport();
      await this.setOverlayStep(stepId);
      this.state.pendingStepId = null;
      this.state.criticalPoints = [];
      this.state.errorMessage = null;
    } catch (err) {
      this.state.errorMessage = err instanceof Error ? err.message : String(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  /** Strategy button: issue the strategy-start command verbatim. */
  async clickStrategy(label: string): Promise<void> {
    await this.sendCommand(strategyCommand(label));
  }

  async sendCommand(text: string): Promise<void> {
    if (this.state.sessionId === null || this.state.busy) return;
    this.state.busy = true;
    this.state.parseFailure = null;
    this.state.errorMessage = null;
    this.emit();
    try {
      const resp = await this.api.command(this.state.sessionId, text);
      this.state.criticalPoints = resp.critical_points ?? [];
      this.state.previews = resp.previews ?? [];
      this.state.helpText = resp.help ?? null;
      this.state.strategy =
        resp.strategy !== undefined
          ? { name: resp.strategy, remaining: resp.strategy_remaining ?? 0 }
          : this.state.strategy;
      await this.refreshExport();
      if (resp.step_id !== null && resp.step_id !== undefined) {
        this.state.pendingStepId =
          resp.step_id === this.state.exportDoc!.cursor ? null : resp.step_id;
        await this.setOverlayStep(resp.step_id);
      } else {
        await this.setOverlayStep(this.state.exportDoc!.cursor);
      }
    } catch (err) {
      if (err instanceof ApiError && err.isParseError) {
        this.state.parseFailure = { message: err.message, suggestions: err.suggestions };
      } else {
        this.state.errorMessage = err instanceof Error ? err.message : String(err);
      }
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  /** Accept the step under review (cursor moves onto it). */
  async acceptPending(): Promise<void> {
    if (this.state.sessionId === null || this.state.busy) return;
    this.state.busy = true;
    this.emit();
    try {
      await this.api.accept(this.state.sessionId);
      await this.refreshExport();
      this.state.pendingStepId = null;
      await this.setOverlayStep(this.state.exportDoc!.cursor);
    } catch (err) {
      this.state.errorMessage = err instanceof Error ? err.message : String(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  /** Reject the step under review: cursor never moved, just show it again. */
  async rejectPending(): Promise<void> {
    if (this.state.sessionId === null || this.state.exportDoc === null) return;
    this.state.pendingStepId = null;
    await this.setOverlayStep(this.state.exportDoc.cursor);
    this.emit();
  }

  async selectFinal(stepId: number): Promise<void> {
    if (this.state.sessionId === null || this.state.busy) return;
    this.state.busy = true;
    this.emit();
    try {
      await this.api.selectFinal(this.state.sessionId, stepId);
      await this.refreshExport();
    } catch (err) {
      this.state.errorMessage = err instanceof Error ? err.message : String(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  async resolveCriticalPoint(index: number, positive: boolean): Promise<void> {
    await this.sendCommand(`point ${index} ${positive ? "foreground" : "background"}`);
  }
}
