import { describe, expect, it } from "vitest";

import { Store } from "../src/store.js";
import { STRATEGY_BUTTONS } from "../src/strategies.js";
import { FakeApi, fixtureMaskPng, fixtureSession } from "./helpers.js";

describe("store", () => {
  it("loads a session and shows the cursor step's mask", async () => {
    const api = new FakeApi();
    const store = new Store(api);
    await store.loadSession("fixture-session");
    const doc = fixtureSession();
    expect(store.state.exportDoc!.steps).toHaveLength(doc.steps.length);
    expect(store.state.overlay.stepId).toBe(doc.cursor);
    expect(store.state.overlay.maskBytes).toEqual(fixtureMaskPng(doc.cursor));
    expect(store.state.trajectory).not.toBeNull();
  });

  it("clicking a prior step issues revert and swaps the overlay byte-for-byte", async () => {
    const api = new FakeApi();
    const store = new Store(api);
    await store.loadSession("fixture-session");
    api.requests.length = 0;

    await store.clickStep(1);

    const revert = api.requests.find((r) => r.path.endsWith("/revert"));
    expect(revert).toBeDefined();
    expect(revert!.method).toBe("POST");
    expect(revert!.body).toEqual({ to: 1 });
    expect(store.state.overlay.stepId).toBe(1);
    expect(store.state.overlay.maskUrl).toBe(
      "/v1/sessions/fixture-session/steps/1/mask.png",
    );
    // the overlay bytes are exactly the step-1 PNG served by the API
    const served = fixtureMaskPng(1);
    expect(store.state.overlay.maskBytes).toEqual(served);
    expect(Buffer.from(store.state.overlay.maskBytes!).equals(Buffer.from(served))).toBe(true);
    // and the timeline was refreshed from the API, cursor now at 1
    expect(store.state.exportDoc!.cursor).toBe(1);
  });

  it("the four strategy buttons issue their StartStrategy commands verbatim", async () => {
    const api = new FakeApi();
    const store = new Store(api);
    await store.loadSession("fixture-session");
    api.requests.length = 0;

    for (const button of STRATEGY_BUTTONS) {
      await store.clickStrategy(button.label);
    }
    const commands = api.requests
      .filter((r) => r.path.endsWith("/command"))
      .map((r) => (r.body as { text: string }).text);
    expect(commands).toEqual([
      "start strategy wrong part",
      "start strategy oversegmented",
      "start strategy undersegmented",
      "start strategy low hu",
    ]);
  });

  it("keeps review state for a pending step and clears it on accept", async () => {
    const api = new FakeApi();
    const store = new Store(api);
    await store.loadSession("fixture-session");
    const doc = fixtureSession();
    const pending = doc.steps[3]; // unaccepted child of step 2
    api.commandResponses.push({
      step_id: pending.id,
      parent_id: pending.parent,
      op: pending.op,
      cursor: doc.cursor,
      final: doc.final,
      mask_rle: pending.mask_rle,
      box: pending.box,
      tau: pending.tau,
      window: pending.window,
      margin: pending.margin,
    });
    await store.sendCommand("click cell 5 foreground");
    expect(store.state.pendingStepId).toBe(pending.id);
    expect(store.state.overlay.stepId).toBe(pending.id);
    await store.acceptPending();
    expect(store.state.pendingStepId).toBeNull();
    expect(api.requests.some((r) => r.path.endsWith("/accept"))).toBe(true);
  });

  it("surfaces parse failures with suggestions without breaking state", async () => {
    const api = new FakeApi();
    const { ApiError } = await import("../src/api.js");
    api.command = async () => {
      throw new ApiError(400, "could not understand 'frobnicate'", ["help"], true);
    };
    const store = new Store(api);
    await store.loadSession("fixture-session");
    await store.sendCommand("frobnicate");
    expect(store.state.parseFailure).not.toBeNull();
    expect(store.state.parseFailure!.suggestions).toEqual(["help"]);
    expect(store.state.exportDoc).not.toBeNull();
  });

  it("reload reconstructs the identical timeline from the export alone", async () => {
    const api = new FakeApi();
    const store1 = new Store(api);
    await store1.loadSession("fixture-session");
    const store2 = new Store(new FakeApi());
    await store2.loadSession("fixture-session");
    expect(store2.state.exportDoc).toEqual(store1.state.exportDoc);
    expect(store2.state.overlay.maskBytes).toEqual(store1.state.overlay.maskBytes);
  });
});
