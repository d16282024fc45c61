/**
 * Log-log convergence figure: geometry model and SVG serialization.
 *
 * `buildFigure` is a pure function of the parsed rows; re-building from the
 * same CSV yields a deep-equal model. Rows with error = 0 (self
 * comparisons) cannot appear on a log axis and are skipped with a warning.
 */

import { ErrorRow } from "./csv.js";

export interface FigureOptions {
  guideSlopes: number[];
  title?: string;
  xLabel?: string;
  yLabel?: string;
  width?: number;
  height?: number;
}

export interface Point {
  x: number; // data coordinates
  y: number;
  px: number; // pixel coordinates
  py: number;
  errLow?: number; // pixel y of error-bar ends, when std_error > 0
  errHigh?: number;
}

export interface GuideLine {
  slope: number;
  label: string;
  x0: number;
  y0: number;
  x1: number;
  y1: number; // pixel endpoints
}

export interface Tick {
  pos: number; // pixel position
  label: string;
}

export interface FigureModel {
  width: number;
  height: number;
  margin: { left: number; right: number; top: number; bottom: number };
  points: Point[];
  guides: GuideLine[];
  xTicks: Tick[];
  yTicks: Tick[];
  xLabel: string;
  yLabel: string;
  title: string;
  skipped: number;
}

const DEFAULTS = { width: 640, height: 480 };
const MARGIN = { left: 70, right: 20, top: 30, bottom: 50 };

function decadesBetween(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let k = Math.ceil(Math.log10(lo) - 1e-9); 10 ** k <= hi * (1 + 1e-9); k++) {
    ticks.push(10 ** k);
  }
  return ticks;
}

function formatPow10(value: number): string {
  const k = Math.round(Math.log10(value));
  return Math.abs(k) <= 2 ? String(value) : `1e${k}`;
}

export function buildFigure(
  rows: ErrorRow[],
  options: FigureOptions,
  warn: (message: string) => void = console.warn,
): FigureModel {
  const usable = rows.filter((r) => r.error > 0 && r.paramValue > 0);
  const skipped = rows.length - usable.length;
  if (skipped > 0) {
    warn(`skipping ${skipped} row(s) with zero error or parameter (log scale)`);
  }
  if (usable.length === 0) throw new Error("no plottable rows (all errors are zero?)");

  const width = options.width ?? DEFAULTS.width;
  const height = options.height ?? DEFAULTS.height;
  const margin = MARGIN;

  const xs = usable.map((r) => r.paramValue);
  const yLow = usable.map((r) => Math.max(r.error - r.stdError, r.error * 1e-3));
  const yHigh = usable.map((r) => r.error + r.stdError);
  const xMin = Math.min(...xs) / 1.3;
  const xMax = Math.max(...xs) * 1.3;
  const yMin = Math.min(...yLow, ...usable.map((r) => r.error)) / 2.5;
  const yMax = Math.max(...yHigh) * 2.5;

  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const toPx = (x: number) =>
    margin.left + ((Math.log10(x) - Math.log10(xMin)) / (Math.log10(xMax) - Math.log10(xMin))) * plotW;
  const toPy = (y: number) =>
    margin.top + plotH - ((Math.log10(y) - Math.log10(yMin)) / (Math.log10(yMax) - Math.log10(yMin))) * plotH;

  const points: Point[] = usable.map((r, i) => {
    const p: Point = { x: r.paramValue, y: r.error, px: toPx(r.paramValue), py: toPy(r.error) };
    if (r.stdError > 0) {
      p.errLow = toPy(yLow[i]);
      p.errHigh = toPy(yHigh[i]);
    }
    return p;
  });

  // anchor each guide line below the finest (smallest-parameter) point
  const finest = usable.reduce((a, b) => (a.paramValue < b.paramValue ? a : b));
  const guides: GuideLine[] = options.guideSlopes.map((slope) => {
    const anchorY = finest.error * 0.55;
    const yAt = (x: number) => anchorY * (x / finest.paramValue) ** slope;
    return {
      slope,
      label: `slope ${slope}`,
      x0: toPx(xMin * 1.05),
      y0: toPy(yAt(xMin * 1.05)),
      x1: toPx(xMax / 1.05),
      y1: toPy(yAt(xMax / 1.05)),
    };
  });

  const kind = usable[0].paramKind;
  return {
    width,
    height,
    margin,
    points,
    guides,
    xTicks: decadesBetween(xMin, xMax).map((v) => ({ pos: toPx(v), label: formatPow10(v) })),
    yTicks: decadesBetween(yMin, yMax).map((v) => ({ pos: toPy(v), label: formatPow10(v) })),
    xLabel: options.xLabel ?? (kind === "h" ? "h" : "tau"),
    yLabel: options.yLabel ?? "strong error",
    title: options.title ?? "",
    skipped,
  };
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function figureToSvg(model: FigureModel): string {
  const { width, height, margin } = model;
  const right = width - margin.right;
  const bottom = height - margin.bottom;
  const parts: string[] = [];

  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
  );

  for (const t of model.xTicks) {
    parts.push(
      `<line x1="${t.pos.toFixed(2)}" y1="${margin.top}" x2="${t.pos.toFixed(2)}" y2="${bottom}" stroke="#dddddd"/>`,
      `<text x="${t.pos.toFixed(2)}" y="${bottom + 18}" text-anchor="middle" font-size="12">${esc(t.label)}</text>`,
    );
  }
  for (const t of model.yTicks) {
    parts.push(
      `<line x1="${margin.left}" y1="${t.pos.toFixed(2)}" x2="${right}" y2="${t.pos.toFixed(2)}" stroke="#dddddd"/>`,
      `<text x="${margin.left - 8}" y="${(t.pos + 4).toFixed(2)}" text-anchor="end" font-size="12">${esc(t.label)}</text>`,
    );
  }
  parts.push(
    `<rect x="${margin.left}" y="${margin.top}" width="${right - margin.left}" height="${bottom - margin.top}" fill="none" stroke="black"/>`,
  );

  for (const g of model.guides) {
    parts.push(
      `<line class="guide" x1="${g.x0.toFixed(2)}" y1="${g.y0.toFixed(2)}" x2="${g.x1.toFixed(2)}" y2="${g.y1.toFixed(2)}" stroke="#888888" stroke-dasharray="6 4"/>`,
      `<text x="${(g.x1 - 4).toFixed(2)}" y="${(g.y1 - 6).toFixed(2)}" text-anchor="end" font-size="12" fill="#555555">${esc(g.label)}</text>`,
    );
  }

  const path = model.points
    .map((p, i) => `${i === 0 ? "M" : "L"}${p.px.toFixed(2)} ${p.py.toFixed(2)}`)
    .join(" ");
  parts.push(`<path d="${path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>`);

  for (const p of model.points) {
    if (p.errLow !== undefined && p.errHigh !== undefined) {
      parts.push(
        `<line class="errorbar" x1="${p.px.toFixed(2)}" y1="${p.errLow.toFixed(2)}" x2="${p.px.toFixed(2)}" y2="${p.errHigh.toFixed(2)}" stroke="green" stroke-width="1.5"/>`,
        `<line class="errorbar" x1="${(p.px - 4).toFixed(2)}" y1="${p.errLow.toFixed(2)}" x2="${(p.px + 4).toFixed(2)}" y2="${p.errLow.toFixed(2)}" stroke="green"/>`,
        `<line class="errorbar" x1="${(p.px - 4).toFixed(2)}" y1="${p.errHigh.toFixed(2)}" x2="${(p.px + 4).toFixed(2)}" y2="${p.errHigh.toFixed(2)}" stroke="green"/>`,
      );
    }
    parts.push(`<circle cx="${p.px.toFixed(2)}" cy="${p.py.toFixed(2)}" r="3.5" fill="#1f77b4"/>`);
  }

  const midX = (margin.left + right) / 2;
  parts.push(
    `<text x="${midX}" y="${height - 12}" text-anchor="middle" font-size="14">${esc(model.xLabel)}</text>`,
    `<text transform="rotate(-90 16 ${(margin.top + bottom) / 2})" x="16" y="${(margin.top + bottom) / 2}" text-anchor="middle" font-size="14">${esc(model.yLabel)}</text>`,
  );
  if (model.title) {
    parts.push(`<text x="${midX}" y="20" text-anchor="middle" font-size="15">${esc(model.title)}</text>`);
  }
  parts.push("</svg>");
  return parts.join("\n");
}
