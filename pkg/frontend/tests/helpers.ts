/** Test fakes and fixture loading (node environment, no DOM). */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { ApiClient } from "../src/api.js";
import type {
  CommandResponse,
  SessionCreated,
  SessionExport,
  TrajectoryDoc,
} from "../src/types.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function fixtureSession(): SessionExport {
  return JSON.parse(readFileSync(join(FIXTURES, "session.json"), "utf-8"));
}

export function fixtureTrajectory(): TrajectoryDoc {
  return JSON.parse(readFileSync(join(FIXTURES, "trajectory.json"), "utf-8"));
}

export function fixtureMaskPng(stepId: number): Uint8Array {
  return new Uint8Array(readFileSync(join(FIXTURES, `step${stepId}.png`)));
}

export interface RecordedRequest {
  method: string;
  path: string;
  body?: unknown;
}

/** Serves the fixture session; records every request it sees. */
export class FakeApi implements ApiClient {
  requests: RecordedRequest[] = [];
  session: SessionExport = fixtureSession();
  commandResponses: CommandResponse[] = [];

  private record(method: string, path: string, body?: unknown) {
    this.requests.push({ method, path, body });
  }

  async createImage(): Promise<{ image_id: string; slices: number }> {
    this.record("POST", "/v1/images");
    return { image_id: "fixture-image", slices: 1 };
  }

  async createSession(imageId: string, slice: number, label: string): Promise<SessionCreated> {
    this.record("POST", "/v1/sessions", { image_id: imageId, slice, target_label: label });
    const step0 = this.session.steps[0];
    return {
      session_id: this.session.session,
      step: 0,
      mask_rle: step0.mask_rle,
      box: step0.box,
      tau: step0.tau,
      window: step0.window,
      detections: [],
    };
  }

  async getSession(sessionId: string): Promise<SessionExport> {
    this.record("GET", `/v1/sessions/${sessionId}`);
    return structuredClone(this.session);
  }

  async command(sessionId: string, text: string): Promise<CommandResponse> {
    this.record("POST", `/v1/sessions/${sessionId}/command`, { text });
    const canned = this.commandResponses.shift();
    if (canned) return canned;
    const cursor = this.session.steps[this.session.cursor];
    return {
      step_id: null,
      parent_id: null,
      op: "noop",
      cursor: this.session.cursor,
      final: this.session.final,
      mask_rle: cursor.mask_rle,
      box: cursor.box,
      tau: cursor.tau,
      window: cursor.window,
      margin: cursor.margin,
    };
  }

  async accept(sessionId: string): Promise<{ cursor: number }> {
    this.record("POST", `/v1/sessions/${sessionId}/accept`);
    return { cursor: this.session.cursor };
  }

  async revert(sessionId: string, to: number): Promise<{ cursor: number }> {
    this.record("POST", `/v1/sessions/${sessionId}/revert`, { to });
    this.session = { ...this.session, cursor: to };
    return { cursor: to };
  }

  async selectFinal(sessionId: string, step: number): Promise<{ final: number }> {
    this.record("POST", `/v1/sessions/${sessionId}/final`, { step });
    this.session = { ...this.session, final: step };
    return { final: step };
  }

  async trajectory(sessionId: string): Promise<TrajectoryDoc | null> {
    this.record("GET", `/v1/sessions/${sessionId}/trajectory`);
    return fixtureTrajectory();
  }

  async help(): Promise<string> {
    this.record("GET", "/v1/help");
    return "# Command grammar (fixture)";
  }

  maskPngUrl(sessionId: string, stepId: number): string {
    return `/v1/sessions/${sessionId}/steps/${stepId}/mask.png`;
  }

  slicePngUrl(imageRef: string, center: number, width: number): string {
    return `/v1/images/${imageRef}/slices/0.png?center=${center}&width=${width}`;
  }

  async fetchBytes(url: string): Promise<Uint8Array> {
    this.record("GET", url);
    const match = /steps\/(\d+)\/mask\.png$/.exec(url);
    if (!match) throw new Error(`fake api cannot serve ${url}`);
    return fixtureMaskPng(Number(match[1]));
  }
}
