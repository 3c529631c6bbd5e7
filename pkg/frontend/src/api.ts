/** REST client; the UI talks to the service exclusively through this. */

import type {
  CommandResponse,
  SessionCreated,
  SessionExport,
  TrajectoryDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
    public readonly suggestions: string[] = [],
    public readonly isParseError = false,
  ) {
    super(message);
  }
}

export interface ApiClient {
  createImage(body: Uint8Array | string): Promise<{ image_id: string; slices: number }>;
  createSession(imageId: string, slice: number, label: string): Promise<SessionCreated>;
  getSession(sessionId: string): Promise<SessionExport>;
  command(sessionId: string, text: string): Promise<CommandResponse>;
  accept(sessionId: string): Promise<{ cursor: number }>;
  revert(sessionId: string, to: number): Promise<{ cursor: number }>;
  selectFinal(sessionId: string, step: number): Promise<{ final: number }>;
  trajectory(sessionId: string): Promise<TrajectoryDoc | null>;
  help(): Promise<string>;
  maskPngUrl(sessionId: string, stepId: number): string;
  slicePngUrl(imageRef: string, center: number, width: number): string;
  fetchBytes(url: string): Promise<Uint8Array>;
}

async function jsonOrThrow(resp: Response): Promise<any> {
  if (resp.ok) {
    return resp.json();
  }
  let body: any = null;
  try {
    body = await resp.json();
  } catch {
    /* non-JSON error body */
  }
  if (body && body.parse_error) {
    throw new ApiError(resp.status, body.parse_error, body.suggestions ?? [], true);
  }
  throw new ApiError(resp.status, body?.error ?? `HTTP ${resp.status}`);
}

/** Split an image ref of the form "<image_id>#z<slice>". */
export function parseImageRef(ref: string): { imageId: string; slice: number } {
  const match = /^(.+)#z(\d+)$/.exec(ref);
  if (!match) {
    return { imageId: ref, slice: 0 };
  }
  return { imageId: match[1], slice: Number(match[2]) };
}

export class HttpApi implements ApiClient {
  constructor(private readonly base: string = "") {}

  private url(path: string): string {
    return this.base + path;
  }

  async createImage(body: Uint8Array | string) {
    const payload: BodyInit =
      typeof body === "string" ? body : new Blob([body as BlobPart]);
    const resp = await fetch(this.url("/v1/images"), { method: "POST", body: payload });
    return jsonOrThrow(resp);
  }

  async createSession(imageId: string, slice: number, label: string) {
    const resp = await fetch(this.url("/v1/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_id: imageId, slice, target_label: label }),
    });
    return jsonOrThrow(resp);
  }

  async getSession(sessionId: string) {
    return jsonOrThrow(await fetch(this.url(`/v1/sessions/${sessionId}`)));
  }

  async command(sessionId: string, text: string) {
    const resp = await fetch(this.url(`/v1/sessions/${sessionId}/command`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
    return jsonOrThrow(resp);
  }

  async accept(sessionId: string) {
    const resp = await fetch(this.url(`/v1/sessions/${sessionId}/accept`), {
      method: "POST",
    });
    return jsonOrThrow(resp);
  }

  async revert(sessionId: string, to: number) {
    const resp = await fetch(this.url(`/v1/sessions/${sessionId}/revert`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ to }),
    });
    return jsonOrThrow(resp);
  }

  async selectFinal(sessionId: string, step: number) {
    const resp = await fetch(this.url(`/v1/sessions/${sessionId}/final`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ step }),
    });
    return jsonOrThrow(resp);
  }

  async trajectory(sessionId: string) {
    const resp = await fetch(this.url(`/v1/sessions/${sessionId}/trajectory`));
    if (resp.status === 404) {
      return null; // no ground truth: evaluation mode off
    }
    return jsonOrThrow(resp);
  }

  async help() {
    const resp = await fetch(this.url("/v1/help"));
    return resp.text();
  }

  maskPngUrl(sessionId: string, stepId: number): string {
    return this.url(`/v1/sessions/${sessionId}/steps/${stepId}/mask.png`);
  }

  slicePngUrl(imageRef: string, center: number, width: number): string {
    const { imageId, slice } = parseImageRef(imageRef);
    return this.url(`/v1/images/${imageId}/slices/${slice}.png?center=${center}&width=${width}`);
  }

  async fetchBytes(url: string): Promise<Uint8Array> {
    const resp = await fetch(url);
    if (!resp.ok) {
      throw new ApiError(resp.status, `HTTP ${resp.status} for ${url}`);
    }
    return new Uint8Array(await resp.arrayBuffer());
  }
}
