// The three plot kinds over the solver's CSV artifacts.

import { CsvDocument, SchemaError, SummaryRow, column } from "./csv.js";
import { Svg, colormap, linearScale, logScale, sig } from "./svg.js";

export class EmptyDataError extends Error {}

const W = 640;
const H = 440;
const MARGIN = { left: 70, right: 20, top: 40, bottom: 50 };

function frame(svg: Svg, title: string, xLabel: string, yLabel: string) {
  svg.text(W / 2, 20, title, 13, "middle");
  svg.text(W / 2, H - 12, xLabel, 11, "middle");
  svg.raw(
    `<text x="16" y="${H / 2}" font-family="Helvetica, Arial, sans-serif" font-size="11" ` +
      `text-anchor="middle" fill="#222" transform="rotate(-90 16 ${H / 2})">${yLabel}</text>`
  );
  svg.line(MARGIN.left, H - MARGIN.bottom, W - MARGIN.right, H - MARGIN.bottom, "#222");
  svg.line(MARGIN.left, MARGIN.top, MARGIN.left, H - MARGIN.bottom, "#222");
}

function plotArea() {
  return {
    x0: MARGIN.left,
    x1: W - MARGIN.right,
    y0: H - MARGIN.bottom,
    y1: MARGIN.top,
  };
}

// ---------------------------------------------------------------------------

export function renderDecay(doc: CsvDocument, summary: SummaryRow[] | null): string {
  if (doc.schema !== "decay/v1") {
    throw new SchemaError(`decay plot needs decay/v1, got ${doc.schema}`);
  }
  const R = column(doc, "R");
  const value = column(doc, "value");
  const censored = column(doc, "censored");
  const quantity = doc.meta["quantity"] ?? "quantity";
  const pos = value.filter((v) => v > 0);
  if (R.length === 0 || pos.length === 0) {
    throw new EmptyDataError(`no positive measurements for ${quantity}`);
  }

  const { x0, x1, y0, y1 } = plotArea();
  const xs = linearScale(Math.min(...R), Math.max(...R), x0, x1);
  const lo = Math.min(...pos);
  const hi = Math.max(...pos);
  const ys = logScale(lo / 2, hi * 2, y0, y1);

  const svg = new Svg(W, H);
  frame(svg, `decay sweep: ${quantity}`, "R", "measured sup (log)");
  for (const t of xs.ticks) {
    svg.line(xs(t), y0, xs(t), y0 + 4, "#222");
    svg.text(xs(t), y0 + 16, xs.label(t), 10, "middle");
  }
  for (const t of ys.ticks) {
    svg.line(x0 - 4, ys(t), x0, ys(t), "#222");
    svg.text(x0 - 7, ys(t) + 3, ys.label(t), 10, "end");
    svg.line(x0, ys(t), x1, ys(t), "#eee");
  }

  const fit = summary?.find((s) => s.quantity === quantity) ?? null;
  if (fit && fit.model !== "none") {
    const pts: Array<[number, number]> = [];
    const rMin = Math.min(...R);
    const rMax = Math.max(...R);
    for (let k = 0; k <= 100; k++) {
      const r = rMin + ((rMax - rMin) * k) / 100;
      const v = fit.model === "exponential" ? fit.C * Math.exp(-fit.c * r) : fit.C / r;
      if (v >= lo / 2 && v <= hi * 2) {
        pts.push([xs(r), ys(v)]);
      }
    }
    svg.polyline(pts, "#d62728", 1.5);
    const legend =
      fit.model === "exponential"
        ? `fit: C·exp(-cR), C=${sig(fit.C)}, c=${sig(fit.c)}`
        : `fit: C/R, C=${sig(fit.C)}`;
    svg.text(x1 - 4, y1 + 14, legend, 11, "end", "#d62728");
  }

  R.forEach((r, i) => {
    if (value[i] <= 0) {
      return;
    }
    if (censored[i]) {
      svg.circle(xs(r), ys(value[i]), 3.2, "white", "#1f77b4");
    } else {
      svg.circle(xs(r), ys(value[i]), 3.2, "#1f77b4");
    }
  });
  svg.text(x0 + 4, y1 + 14, "hollow = censored below the floor", 10, "start", "#666");
  return svg.render();
}

// ---------------------------------------------------------------------------

export function renderWkb(doc: CsvDocument): string {
  if (doc.schema !== "wkb/v1") {
    throw new SchemaError(`wkb plot needs wkb/v1, got ${doc.schema}`);
  }
  const R = column(doc, "R");
  const disc = column(doc, "discrepancy");
  const pos = disc.map((v, i) => [R[i], v] as [number, number]).filter(([, v]) => v > 0);
  if (pos.length === 0) {
    throw new EmptyDataError("all discrepancies are zero");
  }

  const { x0, x1, y0, y1 } = plotArea();
  const xs = logScale(Math.min(...R), Math.max(...R), x0, x1);
  const lo = Math.min(...pos.map(([, v]) => v));
  const hi = Math.max(...pos.map(([, v]) => v));
  const ys = logScale(lo / 2, hi * 2, y0, y1);

  const svg = new Svg(W, H);
  frame(svg, "WKB discrepancy |beta/R - 2*alpha|", "R (log)", "discrepancy (log)");
  for (const t of xs.ticks) {
    svg.line(xs(t), y0, xs(t), y0 + 4, "#222");
    svg.text(xs(t), y0 + 16, xs.label(t), 10, "middle");
  }
  for (const t of ys.ticks) {
    svg.line(x0 - 4, ys(t), x0, ys(t), "#222");
    svg.text(x0 - 7, ys(t) + 3, ys.label(t), 10, "end");
    svg.line(x0, ys(t), x1, ys(t), "#eee");
  }

  // reference slopes anchored at the first positive point
  const [rA, vA] = pos[0];
  const recip: Array<[number, number]> = [];
  for (const [r] of pos) {
    const v = (vA * rA) / r;
    if (v >= lo / 2 && v <= hi * 2) {
      recip.push([xs(r), ys(v)]);
    }
  }
  svg.polyline(recip, "#2ca02c", 1, "5,3");
  svg.text(x1 - 4, y1 + 14, "green ~ 1/R", 10, "end", "#2ca02c");
  if (pos.length >= 2) {
    const [rB, vB] = pos[pos.length - 1];
    const c = Math.log(vA / vB) / (rB - rA || 1);
    const expo: Array<[number, number]> = [];
    for (let k = 0; k <= 100; k++) {
      const r = rA + ((rB - rA) * k) / 100;
      const v = vA * Math.exp(-c * (r - rA));
      if (v >= lo / 2 && v <= hi * 2) {
        expo.push([xs(r), ys(v)]);
      }
    }
    svg.polyline(expo, "#9467bd", 1, "2,3");
    svg.text(x1 - 4, y1 + 28, `violet ~ exp(-cR), c=${sig(c, 2)}`, 10, "end", "#9467bd");
  }

  for (const [r, v] of pos) {
    svg.circle(xs(r), ys(v), 3.2, "#1f77b4");
  }
  return svg.render();
}

// ---------------------------------------------------------------------------

export function renderHeatmap(doc: CsvDocument): string {
  if (doc.schema !== "heatmap/v1") {
    throw new SchemaError(`heatmap plot needs heatmap/v1, got ${doc.schema}`);
  }
  const x = column(doc, "x");
  const y = column(doc, "y");
  const v = column(doc, "value");
  if (v.length === 0) {
    throw new EmptyDataError("empty tensor grid");
  }
  const xsu = Array.from(new Set(x)).sort((a, b) => a - b);
  const ysu = Array.from(new Set(y)).sort((a, b) => a - b);
  const lo = Math.min(...v);
  const hi = Math.max(...v);
  const span = hi - lo || 1;

  const { x0, x1, y0, y1 } = plotArea();
  const cw = (x1 - x0 - 50) / xsu.length;
  const ch = (y0 - y1) / ysu.length;
  const xi = new Map(xsu.map((val, i) => [val, i]));
  const yi = new Map(ysu.map((val, i) => [val, i]));

  const component = doc.meta["component"] ?? "value";
  const svg = new Svg(W, H);
  svg.text(W / 2, 20, `tensor heatmap: ${component} (R=${doc.meta["R"] ?? "?"})`, 13, "middle");
  for (let k = 0; k < v.length; k++) {
    const i = xi.get(x[k])!;
    const j = yi.get(y[k])!;
    svg.rect(x0 + i * cw, y0 - (j + 1) * ch, cw + 0.5, ch + 0.5, colormap((v[k] - lo) / span));
  }
  // colorbar
  const cbx = x1 - 30;
  for (let k = 0; k < 64; k++) {
    const t = k / 63;
    svg.rect(cbx, y0 - ((k + 1) * (y0 - y1)) / 64, 16, (y0 - y1) / 64 + 0.5, colormap(t));
  }
  svg.text(cbx + 20, y0 + 3, sig(lo), 9);
  svg.text(cbx + 20, y1 + 8, sig(hi), 9);
  svg.text((x0 + x1 - 50) / 2, H - 12, "x", 11, "middle");
  return svg.render();
}
