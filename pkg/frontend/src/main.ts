/** DOM bootstrap: wires the store to the static shell in index.html. */

import { HttpApi, parseImageRef } from "./api.js";
import { drawOverlay, trajectorySvg } from "./overlay.js";
import { STRATEGY_BUTTONS } from "./strategies.js";
import { Store, type StoreState } from "./store.js";
import { buildTimeline, renderTimelineHtml, timelineStepFromTarget } from "./timeline.js";

const api = new HttpApi("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function render(state: StoreState): void {
  const doc = state.exportDoc;
  el("session-meta").textContent = doc
    ? `session ${doc.session} · target: ${doc.target} · cursor step ${doc.cursor}` +
      (doc.final !== null ? ` · final step ${doc.final}` : "")
    : "no session";
  el("timeline").innerHTML = doc ? renderTimelineHtml(buildTimeline(doc)) : "";

  const reviewing = state.pendingStepId !== null;
  el("review-bar").style.display = reviewing ? "flex" : "none";
  if (reviewing) {
    el("review-label").textContent = `step ${state.pendingStepId} awaits review`;
  }

  const failure = state.parseFailure;
  const error = state.errorMessage;
  const feedback = el("feedback");
  if (failure) {
    feedback.textContent = failure.suggestions.length
      ? `${failure.message} — did you mean: ${failure.suggestions.join("; ")}`
      : failure.message;
    feedback.className = "feedback error";
  } else if (error) {
    feedback.textContent = error;
    feedback.className = "feedback error";
  } else {
    feedback.textContent = state.strategy
      ? `strategy '${state.strategy.name}': ${state.strategy.remaining} step(s) left — ` +
        `accept or reject, then send 'next'`
      : "";
    feedback.className = "feedback";
  }

  const points = el("critical-points");
  points.innerHTML = "";
  for (const p of state.criticalPoints) {
    const row = document.createElement("div");
    row.className = "critical-row";
    row.textContent = `point ${p.index} at (${p.x}, ${p.y}) `;
    for (const positive of [true, false]) {
      const btn = document.createElement("button");
      btn.textContent = positive ? "foreground" : "background";
      btn.onclick = () => void store.resolveCriticalPoint(p.index, positive);
      row.appendChild(btn);
    }
    points.appendChild(row);
  }

  const previews = el("previews");
  previews.innerHTML = "";
  for (const p of state.previews) {
    const btn = document.createElement("button");
    btn.className = "preview";
    btn.textContent = p.command;
    btn.onclick = () => void store.sendCommand(p.command);
    previews.appendChild(btn);
  }

  if (state.helpText) {
    el<HTMLPreElement>("help-panel").textContent = state.helpText;
  }

  el("chart").innerHTML = state.trajectory
    ? trajectorySvg(state.trajectory.series, doc?.final ?? null)
    : "<p class='muted'>no ground truth attached</p>";

  const step = state.overlay.stepId !== null ? store.stepById(state.overlay.stepId) : null;
  if (doc && step) {
    el("window-level").textContent =
      `window C ${step.window.center} / W ${step.window.width} · tau ${step.tau}` +
      ` · margin ${step.margin}px · showing step ${step.id}`;
    const sliceUrl = api.slicePngUrl(doc.image, step.window.center, step.window.width);
    void drawOverlay(el<HTMLCanvasElement>("viewer"), {
      sliceUrl,
      maskBytes: state.overlay.maskBytes,
      step,
      criticalPoints: state.criticalPoints,
      showGrid: el<HTMLInputElement>("grid-toggle").checked,
    });
  }
  el<HTMLButtonElement>("send").disabled = state.busy;
}

const store = new Store(api, render);

async function createSession(): Promise<void> {
  const fileInput = el<HTMLInputElement>("image-file");
  const file = fileInput.files?.[0];
  if (!file) {
    el("feedback").textContent = "choose a .nii volume or phantom scene JSON first";
    return;
  }
  const bytes = new Uint8Array(await file.arrayBuffer());
  const image = await api.createImage(bytes);
  const slice = Number(el<HTMLInputElement>("slice-input").value || "0");
  const label = el<HTMLInputElement>("label-input").value.trim();
  const created = await api.createSession(image.image_id, slice, label);
  await store.loadSession(created.session_id);
}

function wire(): void {
  const strategies = el("strategies");
  for (const button of STRATEGY_BUTTONS) {
    const node = document.createElement("button");
    node.className = "strategy";
    node.textContent = button.label;
    node.onclick = () => void store.clickStrategy(button.label);
    strategies.appendChild(node);
  }

  el("timeline").addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("[data-step-id]");
    const stepId = timelineStepFromTarget(target);
    if (stepId !== null) void store.clickStep(stepId);
  });

  const input = el<HTMLInputElement>("command-input");
  const send = () => {
    const text = input.value.trim();
    if (text) {
      void store.sendCommand(text);
      input.value = "";
    }
  };
  el("send").onclick = send;
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") send();
  });

  el("accept").onclick = () => void store.acceptPending();
  el("reject").onclick = () => void store.rejectPending();
  el("mark-final").onclick = () => {
    const shown = store.state.overlay.stepId;
    if (shown !== null) void store.selectFinal(shown);
  };
  el("create-session").onclick = () => void createSession();
  el<HTMLInputElement>("grid-toggle").onchange = () => render(store.state);

  void api.help().then((text) => {
    el<HTMLPreElement>("help-panel").textContent = text;
  });
}

wire();

// deep link: #session=<id> restores a session purely from the API
const fromHash = /#session=([\w-]+)/.exec(location.hash);
if (fromHash) {
  void store.loadSession(fromHash[1]);
}

export { store, parseImageRef };
