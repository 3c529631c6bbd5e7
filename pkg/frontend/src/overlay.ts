/** Canvas rendering: CT slice, semi-transparent mask overlay, click grid,
 * and numbered critical-point markers. Browser-only module.
 */

import { cropRegion, gridCellCenters, type Box } from "./geometry.js";
import type { CriticalPointDoc, StepDoc } from "./types.js";

const SCALE = 6; // display pixels per image pixel

async function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`failed to load ${url}`));
    img.src = url;
  });
}

async function maskImageFromBytes(bytes: Uint8Array): Promise<HTMLImageElement> {
  const blob = new Blob([bytes as BlobPart], { type: "image/png" });
  const url = URL.createObjectURL(blob);
  try {
    return await loadImage(url);
  } finally {
    setTimeout(() => URL.revokeObjectURL(url), 0);
  }
}

export interface OverlayInputs {
  sliceUrl: string;
  maskBytes: Uint8Array | null;
  step: StepDoc | null;
  criticalPoints: CriticalPointDoc[];
  showGrid: boolean;
}

export async function drawOverlay(
  canvas: HTMLCanvasElement,
  inputs: OverlayInputs,
): Promise<void> {
  const slice = await loadImage(inputs.sliceUrl);
  canvas.width = slice.naturalWidth * SCALE;
  canvas.height = slice.naturalHeight * SCALE;
  const ctx = canvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(slice, 0, 0, canvas.width, canvas.height);

  if (inputs.maskBytes) {
    const mask = await maskImageFromBytes(inputs.maskBytes);
    // tint the 0/255 mask red and blend it over the slice
    const tint = document.createElement("canvas");
    tint.width = mask.naturalWidth;
    tint.height = mask.naturalHeight;
    const tctx = tint.getContext("2d")!;
    tctx.drawImage(mask, 0, 0);
    tctx.globalCompositeOperation = "multiply";
    tctx.fillStyle = "#ff4040";
    tctx.fillRect(0, 0, tint.width, tint.height);
    tctx.globalCompositeOperation = "destination-in";
    tctx.drawImage(mask, 0, 0);
    ctx.globalAlpha = 0.45;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(tint, 0, 0, canvas.width, canvas.height);
    ctx.globalAlpha = 1.0;
  }

  const step = inputs.step;
  if (!step) return;
  const [x0, y0, x1, y1] = step.box;
  ctx.strokeStyle = "#30c5ff";
  ctx.lineWidth = 2;
  ctx.strokeRect(x0 * SCALE, y0 * SCALE, (x1 - x0) * SCALE, (y1 - y0) * SCALE);

  const imgW = step.mask_rle.width;
  const imgH = step.mask_rle.height;
  const crop = cropRegion({ x0, y0, x1, y1 } as Box, step.margin, imgW, imgH);
  if (crop && step.margin > 0) {
    ctx.setLineDash([6, 4]);
    ctx.strokeStyle = "#ffd24d";
    ctx.strokeRect(
      crop.x0 * SCALE, crop.y0 * SCALE,
      (crop.x1 - crop.x0) * SCALE, (crop.y1 - crop.y0) * SCALE,
    );
    ctx.setLineDash([]);
  }

  if (inputs.showGrid && crop) {
    ctx.strokeStyle = "rgba(255, 255, 255, 0.5)";
    ctx.lineWidth = 1;
    const w = crop.x1 - crop.x0;
    const h = crop.y1 - crop.y0;
    for (let k = 1; k < 4; k++) {
      const gx = (crop.x0 + (k * w) / 4) * SCALE;
      ctx.beginPath();
      ctx.moveTo(gx, crop.y0 * SCALE);
      ctx.lineTo(gx, crop.y1 * SCALE);
      ctx.stroke();
      const gy = (crop.y0 + (k * h) / 4) * SCALE;
      ctx.beginPath();
      ctx.moveTo(crop.x0 * SCALE, gy);
      ctx.lineTo(crop.x1 * SCALE, gy);
      ctx.stroke();
    }
    ctx.fillStyle = "rgba(255, 255, 255, 0.85)";
    ctx.font = "11px sans-serif";
    for (const cell of gridCellCenters(crop)) {
      ctx.fillText(String(cell.cell), cell.x * SCALE + 3, cell.y * SCALE - 3);
      ctx.fillRect(cell.x * SCALE - 1, cell.y * SCALE - 1, 3, 3);
    }
  }

  ctx.font = "bold 13px sans-serif";
  for (const point of inputs.criticalPoints) {
    ctx.fillStyle = "#ffef5e";
    ctx.beginPath();
    ctx.arc(point.x * SCALE, point.y * SCALE, 8, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#222";
    ctx.fillText(String(point.index), point.x * SCALE - 4, point.y * SCALE + 4);
  }

  for (const click of step.clicks) {
    ctx.fillStyle = click.positive ? "#39d353" : "#f85149";
    ctx.beginPath();
    ctx.arc(click.x * SCALE, click.y * SCALE, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

/** Simple SVG polyline for the Dice-over-steps chart (evaluation mode). */
export function trajectorySvg(series: { step: number; dice: number }[],
                              finalStep: number | null): string {
  if (!series.length) return "";
  const w = 320;
  const h = 120;
  const pad = 24;
  const n = series.length;
  const x = (i: number) => pad + (n === 1 ? 0 : (i * (w - 2 * pad)) / (n - 1));
  const y = (d: number) => h - pad - d * (h - 2 * pad);
  const points = series.map((p, i) => `${x(i)},${y(p.dice)}`).join(" ");
  const circles = series
    .map((p, i) => {
      const big = p.step === finalStep;
      return `<circle cx="${x(i)}" cy="${y(p.dice)}" r="${big ? 7 : 3}"` +
        ` class="${big ? "final-point" : "point"}"><title>step ${p.step}: ` +
        `${p.dice.toFixed(3)}</title></circle>`;
    })
    .join("");
  return (
    `<svg viewBox="0 0 ${w} ${h}" class="trajectory">` +
    `<line x1="${pad}" y1="${h - pad}" x2="${w - pad}" y2="${h - pad}" class="axis"/>` +
    `<line x1="${pad}" y1="${pad}" x2="${pad}" y2="${h - pad}" class="axis"/>` +
    `<polyline points="${points}" fill="none" class="line"/>${circles}</svg>`
  );
}
