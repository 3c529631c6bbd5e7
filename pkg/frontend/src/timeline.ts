/** Step-history tree model and its HTML rendering.
 *
 * Derived purely from the session export, so a reload rebuilds the
 * identical timeline. Star markers flag places where a non-latest step
 * was adapted: both the adapted parent and the resulting step carry one.
 * The selected final step gets the big marker; the cursor row is
 * highlighted.
 */

import type { SessionExport, StepDoc } from "./types.js";

export interface TimelineNode {
  step: StepDoc;
  children: TimelineNode[];
  star: boolean;
  isFinal: boolean;
  isCursor: boolean;
}

export function buildTimeline(doc: SessionExport): TimelineNode[] {
  const nodes = new Map<number, TimelineNode>();
  for (const step of doc.steps) {
    nodes.set(step.id, {
      step,
      children: [],
      star: false,
      isFinal: doc.final === step.id,
      isCursor: doc.cursor === step.id,
    });
  }
  const roots: TimelineNode[] = [];
  for (const step of doc.steps) {
    const node = nodes.get(step.id)!;
    if (step.parent === null) {
      roots.push(node);
    } else {
      nodes.get(step.parent)!.children.push(node);
    }
  }
  // a step whose parent is not the immediately preceding step adapted a
  // non-latest step: star it and the step it adapted
  for (const step of doc.steps) {
    if (step.parent !== null && step.parent !== step.id - 1) {
      nodes.get(step.id)!.star = true;
      nodes.get(step.parent)!.star = true;
    }
  }
  for (const node of nodes.values()) {
    node.children.sort((a, b) => a.step.id - b.step.id);
  }
  return roots;
}

function describe(step: StepDoc): string {
  const op = step.op.replace(/_/g, " ");
  if (step.op === "set_threshold") {
    return `${op} ${step.tau}`;
  }
  if (step.op === "set_window") {
    return `${op} ${step.window.center}/${step.window.width}`;
  }
  return op;
}

function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderTimelineHtml(roots: TimelineNode[]): string {
  const renderNode = (node: TimelineNode): string => {
    const classes = ["step"];
    if (node.isCursor) classes.push("cursor");
    if (node.isFinal) classes.push("final");
    if (node.star) classes.push("star");
    if (node.step.accepted) classes.push("accepted");
    const dice =
      node.step.dice !== undefined ? ` · dice ${node.step.dice.toFixed(3)}` : "";
    const markers =
      (node.star ? '<span class="marker-star" title="adapted off the latest path">★</span>' : "") +
      (node.isFinal ? '<span class="marker-final" title="selected final mask">◉</span>' : "");
    const label = `step ${node.step.id} · ${escapeHtml(describe(node.step))}${dice}`;
    const children = node.children.length
      ? `<ul>${node.children.map(renderNode).join("")}</ul>`
      : "";
    return (
      `<li><button type="button" class="${classes.join(" ")}" ` +
      `data-step-id="${node.step.id}">${markers}${label}</button>${children}</li>`
    );
  };
  return `<ul class="timeline">${roots.map(renderNode).join("")}</ul>`;
}

/** Resolve a click inside the timeline to a step id, or null. */
export function timelineStepFromTarget(target: { getAttribute(name: string): string | null } | null): number | null {
  if (!target) return null;
  const raw = target.getAttribute("data-step-id");
  if (raw === null) return null;
  const id = Number(raw);
  return Number.isInteger(id) ? id : null;
}
