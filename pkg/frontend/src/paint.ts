import { createWriteStream, mkdirSync } from "fs";
import * as path from "path";
import * as PImage from "pureimage";
import { FigureModel, Panel, Series } from "./model";

const PANEL_WIDTH = 440;
const PANEL_HEIGHT = 360;
const MARGIN = { left: 62, right: 16, top: 34, bottom: 46 };
const FONT_FAMILY = "FigureSans";
const FONT_PATH = path.join(__dirname, "..", "assets", "DejaVuSans.ttf");

const PALETTE = [
  "#c0392b",
  "#2471a3",
  "#1e8449",
  "#9a7d0a",
  "#7d3c98",
  "#148f77",
  "#b9770e",
  "#515a5a",
];

let fontReady = false;

function ensureFont(): void {
  if (!fontReady) {
    PImage.registerFont(FONT_PATH, FONT_FAMILY).loadSync();
    fontReady = true;
  }
}

interface Extent {
  lo: number;
  hi: number;
}

function seriesExtentX(series: Series): Extent {
  return { lo: Math.min(...series.x), hi: Math.max(...series.x) };
}

function seriesExtentY(series: Series): Extent {
  if (series.kind === "histogram") return { lo: 0, hi: Math.max(...series.y) };
  return { lo: Math.min(...series.y), hi: Math.max(...series.y) };
}

function combine(extents: Extent[]): Extent {
  let lo = Infinity;
  let hi = -Infinity;
  for (const e of extents) {
    lo = Math.min(lo, e.lo);
    hi = Math.max(hi, e.hi);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return { lo, hi };
}

function pad(extent: Extent, frac: number): Extent {
  const span = extent.hi - extent.lo;
  return { lo: extent.lo - frac * span, hi: extent.hi + frac * span };
}

/** Round tick positions covering [lo, hi]: 1/2/5 times a power of ten. */
export function niceTicks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  const rawStep = span / Math.max(1, count - 1);
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const residual = rawStep / power;
  const step = (residual >= 5 ? 10 : residual >= 2 ? 5 : residual >= 1 ? 2 : 1) * power;
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) ticks.push(v);
  return ticks;
}

function formatTick(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 10000 || abs < 0.001) return v.toExponential(1);
  const text = v.toPrecision(4);
  return text.includes(".") ? text.replace(/\.?0+$/, "") : text;
}

type Ctx = ReturnType<PImage.Bitmap["getContext"]>;

function drawPanel(ctx: Ctx, panel: Panel, x0: number): void {
  const left = x0 + MARGIN.left;
  const right = x0 + PANEL_WIDTH - MARGIN.right;
  const top = MARGIN.top;
  const bottom = PANEL_HEIGHT - MARGIN.bottom;

  const xExt = panel.xLim
    ? { lo: panel.xLim[0], hi: panel.xLim[1] }
    : pad(combine(panel.series.map(seriesExtentX)), 0.02);
  const yExt = panel.yLim
    ? { lo: panel.yLim[0], hi: panel.yLim[1] }
    : pad(combine(panel.series.map(seriesExtentY)), 0.06);

  const sx = (v: number) => left + ((v - xExt.lo) / (xExt.hi - xExt.lo)) * (right - left);
  const sy = (v: number) => bottom - ((v - yExt.lo) / (yExt.hi - yExt.lo)) * (bottom - top);

  ctx.strokeStyle = "#202020";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(left, top);
  ctx.lineTo(left, bottom);
  ctx.lineTo(right, bottom);
  ctx.stroke();

  ctx.fillStyle = "#202020";
  ctx.font = `11pt ${FONT_FAMILY}`;
  for (const t of niceTicks(xExt.lo, xExt.hi)) {
    const px = sx(t);
    ctx.beginPath();
    ctx.moveTo(px, bottom);
    ctx.lineTo(px, bottom + 4);
    ctx.stroke();
    const label = formatTick(t);
    ctx.fillText(label, px - 3.2 * label.length, bottom + 18);
  }
  for (const t of niceTicks(yExt.lo, yExt.hi)) {
    const py = sy(t);
    ctx.beginPath();
    ctx.moveTo(left - 4, py);
    ctx.lineTo(left, py);
    ctx.stroke();
    const label = formatTick(t);
    ctx.fillText(label, left - 8 - 6.5 * label.length, py + 4);
  }

  ctx.font = `12pt ${FONT_FAMILY}`;
  ctx.fillText(panel.title, x0 + PANEL_WIDTH / 2 - 3.5 * panel.title.length, top - 12);
  ctx.fillText(
    panel.xLabel,
    x0 + MARGIN.left + (right - left) / 2 - 3.5 * panel.xLabel.length,
    PANEL_HEIGHT - 10,
  );
  ctx.fillText(panel.yLabel, x0 + 6, top - 12);

  panel.series.forEach((series, si) => {
    const color = PALETTE[si % PALETTE.length]!;
    if (series.kind === "histogram") {
      ctx.fillStyle = color;
      for (let b = 0; b < series.y.length; b++) {
        const px = sx(series.x[b]!);
        const pw = sx(series.x[b + 1]!) - px;
        const py = sy(series.y[b]!);
        ctx.fillRect(px + 0.5, py, Math.max(1, pw - 1), bottom - py);
      }
    } else if (series.kind === "scatter") {
      ctx.fillStyle = color;
      for (let i = 0; i < series.x.length; i++) {
        ctx.fillRect(sx(series.x[i]!) - 1, sy(series.y[i]!) - 1, 2, 2);
      }
    } else {
      ctx.strokeStyle = color;
      ctx.lineWidth = 1.6;
      ctx.beginPath();
      ctx.moveTo(sx(series.x[0]!), sy(series.y[0]!));
      for (let i = 1; i < series.x.length; i++) {
        ctx.lineTo(sx(series.x[i]!), sy(series.y[i]!));
      }
      ctx.stroke();
    }
  });

  // legend: worth drawing only when series are distinguishable by label
  if (panel.series.length > 1) {
    ctx.font = `10pt ${FONT_FAMILY}`;
    panel.series.forEach((series, si) => {
      const ly = top + 10 + 16 * si;
      ctx.fillStyle = PALETTE[si % PALETTE.length]!;
      ctx.fillRect(right - 150, ly - 7, 18, 8);
      ctx.fillStyle = "#202020";
      ctx.fillText(series.label, right - 126, ly);
    });
  }
}

/** Rasterize the model and write it as a PNG. */
export async function paint(model: FigureModel, outPath: string): Promise<void> {
  ensureFont();
  const width = PANEL_WIDTH * model.panels.length;
  const img = PImage.make(width, PANEL_HEIGHT);
  const ctx = img.getContext("2d");
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, width, PANEL_HEIGHT);
  model.panels.forEach((panel, pi) => drawPanel(ctx, panel, pi * PANEL_WIDTH));

  mkdirSync(path.dirname(path.resolve(outPath)), { recursive: true });
  const stream = createWriteStream(outPath);
  await PImage.encodePNGToStream(img, stream);
}
