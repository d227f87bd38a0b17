// Deterministic SVG assembly: fixed styles, fixed number formatting,
// no timestamps, so re-rendering the same inputs is byte-identical.

export const FONT = "font-family=\"Helvetica, Arial, sans-serif\"";

export function fmt(v: number): string {
  if (!Number.isFinite(v)) {
    return "0";
  }
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export function sig(v: number, digits = 3): string {
  if (v === 0) {
    return "0";
  }
  return v.toPrecision(digits).replace(/\.?0+e/, "e").replace(/\.?0+$/, "");
}

export class Svg {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}">`
    );
    this.parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = "") {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"${d}/>`
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, width = 1.5, dash = "") {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    const coords = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${coords}" fill="none" stroke="${stroke}" stroke-width="${width}"${d}/>`
    );
  }

  circle(x: number, y: number, r: number, fill: string, stroke = "none") {
    this.parts.push(
      `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}" stroke="${stroke}"/>`
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string) {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`
    );
  }

  text(x: number, y: number, content: string, size = 11, anchor = "start", fill = "#222") {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" ${FONT} font-size="${size}" ` +
        `text-anchor="${anchor}" fill="${fill}">${escapeXml(content)}</text>`
    );
  }

  raw(fragment: string) {
    this.parts.push(fragment);
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// ---------------------------------------------------------------------------
// scales and ticks

export interface Scale {
  (v: number): number;
  ticks: number[];
  label: (v: number) => string;
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  const f = ((v: number) => outLo + ((v - lo) / span) * (outHi - outLo)) as Scale;
  f.ticks = niceTicks(lo, hi, 6);
  f.label = (v) => sig(v, 3);
  return f;
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const span = lhi - llo || 1;
  const f = ((v: number) => outLo + ((Math.log10(v) - llo) / span) * (outHi - outLo)) as Scale;
  const ticks: number[] = [];
  for (let p = Math.ceil(llo); p <= Math.floor(lhi); p++) {
    ticks.push(Math.pow(10, p));
  }
  f.ticks = ticks.length >= 2 ? ticks : [lo, hi];
  f.label = (v) => {
    const p = Math.log10(v);
    return Number.isInteger(p) ? `1e${p}` : sig(v, 2);
  };
  return f;
}

export function niceTicks(lo: number, hi: number, count: number): number[] {
  const rough = (hi - lo) / Math.max(count, 1) || 1;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= rough) ?? rough;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * step; v += step) {
    out.push(Math.abs(v) < 1e-12 * step ? 0 : v);
  }
  return out;
}

// fixed 32-stop colormap (dark blue -> yellow), deterministic
const STOPS: Array<[number, number, number]> = [];
for (let i = 0; i < 32; i++) {
  const t = i / 31;
  STOPS.push([
    Math.round(68 + t * (253 - 68) * t),
    Math.round(1 + t * 230),
    Math.round(84 + (1 - t) * 50 - t * 48),
  ]);
}

export function colormap(t: number): string {
  const c = STOPS[Math.max(0, Math.min(31, Math.round(t * 31)))];
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}
