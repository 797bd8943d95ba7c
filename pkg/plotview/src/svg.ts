/** Minimal SVG scene builder: data-space scales, axes, polylines, markers. */

export interface Extent {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

export function extentOf(xs: number[], ys: number[], pad = 0.08): Extent {
  let xMin = Math.min(...xs);
  let xMax = Math.max(...xs);
  let yMin = Math.min(...ys);
  let yMax = Math.max(...ys);
  const dx = (xMax - xMin) || 1;
  const dy = (yMax - yMin) || 1;
  return {
    xMin: xMin - pad * dx,
    xMax: xMax + pad * dx,
    yMin: yMin - pad * dy,
    yMax: yMax + pad * dy,
  };
}

export function mergeExtents(a: Extent, b: Extent): Extent {
  return {
    xMin: Math.min(a.xMin, b.xMin),
    xMax: Math.max(a.xMax, b.xMax),
    yMin: Math.min(a.yMin, b.yMin),
    yMax: Math.max(a.yMax, b.yMax),
  };
}

function ticks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  const raw = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= count + 1) ?? mag * 10;
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12 * Math.abs(span); v += step) {
    out.push(Math.abs(v) < 1e-12 * Math.abs(span) ? 0 : v);
  }
  return out;
}

function fmtTick(v: number): string {
  if (v === 0) return '0';
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Number(v.toPrecision(4)));
}

export class Scene {
  readonly width: number;
  readonly height: number;
  private readonly margin = { left: 58, right: 16, top: 34, bottom: 44 };
  private body: string[] = [];
  private ext: Extent;
  private logY: boolean;

  constructor(width: number, height: number, ext: Extent, logY = false) {
    this.width = width;
    this.height = height;
    this.logY = logY;
    this.ext = ext;
  }

  sx(x: number): number {
    const { left, right } = this.margin;
    const w = this.width - left - right;
    return left + ((x - this.ext.xMin) / (this.ext.xMax - this.ext.xMin)) * w;
  }

  sy(y: number): number {
    const { top, bottom } = this.margin;
    const h = this.height - top - bottom;
    const v = this.logY ? Math.log10(y) : y;
    const lo = this.logY ? Math.log10(this.ext.yMin) : this.ext.yMin;
    const hi = this.logY ? Math.log10(this.ext.yMax) : this.ext.yMax;
    return top + h - ((v - lo) / (hi - lo)) * h;
  }

  polyline(xs: number[], ys: number[], stroke: string, opts: { width?: number; dash?: string; opacity?: number } = {}) {
    const pts = xs.map((x, i) => `${this.sx(x).toFixed(2)},${this.sy(ys[i]).toFixed(2)}`).join(' ');
    const dash = opts.dash ? ` stroke-dasharray="${opts.dash}"` : '';
    const opacity = opts.opacity !== undefined ? ` stroke-opacity="${opts.opacity}"` : '';
    this.body.push(
      `<polyline fill="none" stroke="${stroke}" stroke-width="${opts.width ?? 1.5}"${dash}${opacity} points="${pts}"/>`,
    );
  }

  hline(y: number, stroke: string, dash = '6,4') {
    this.body.push(
      `<line x1="${this.sx(this.ext.xMin).toFixed(2)}" y1="${this.sy(y).toFixed(2)}" ` +
        `x2="${this.sx(this.ext.xMax).toFixed(2)}" y2="${this.sy(y).toFixed(2)}" ` +
        `stroke="${stroke}" stroke-width="1.2" stroke-dasharray="${dash}"/>`,
    );
  }

  /** Heading arrow at a data-space point; length in pixels. */
  arrow(x: number, y: number, angle: number, lengthPx: number, stroke: string) {
    const x0 = this.sx(x);
    const y0 = this.sy(y);
    const x1 = x0 + lengthPx * Math.cos(angle);
    const y1 = y0 - lengthPx * Math.sin(angle); // screen y grows downward
    const headAngle = 0.5;
    const head = lengthPx * 0.35;
    const hx1 = x1 - head * Math.cos(angle - headAngle);
    const hy1 = y1 + head * Math.sin(angle - headAngle);
    const hx2 = x1 - head * Math.cos(angle + headAngle);
    const hy2 = y1 + head * Math.sin(angle + headAngle);
    this.body.push(
      `<g stroke="${stroke}" stroke-width="1.4" fill="none">` +
        `<line x1="${x0.toFixed(2)}" y1="${y0.toFixed(2)}" x2="${x1.toFixed(2)}" y2="${y1.toFixed(2)}"/>` +
        `<polyline points="${hx1.toFixed(2)},${hy1.toFixed(2)} ${x1.toFixed(2)},${y1.toFixed(2)} ${hx2.toFixed(2)},${hy2.toFixed(2)}"/>` +
        `</g>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string) {
    this.body.push(`<circle cx="${this.sx(x).toFixed(2)}" cy="${this.sy(y).toFixed(2)}" r="${r}" fill="${fill}"/>`);
  }

  label(text: string, x: number, y: number, anchor = 'start', size = 12) {
    this.body.push(
      `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-family="sans-serif" font-size="${size}" text-anchor="${anchor}">${text}</text>`,
    );
  }

  axes(xLabel: string, yLabel: string, title: string) {
    const { left, right, top, bottom } = this.margin;
    const x0 = left;
    const x1 = this.width - right;
    const y0 = this.height - bottom;
    const y1 = top;
    const frame = `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#222" stroke-width="1"/>`;
    const parts: string[] = [frame];
    for (const t of ticks(this.ext.xMin, this.ext.xMax)) {
      const px = this.sx(t);
      parts.push(`<line x1="${px.toFixed(2)}" y1="${y0}" x2="${px.toFixed(2)}" y2="${y0 + 4}" stroke="#222"/>`);
      parts.push(
        `<text x="${px.toFixed(2)}" y="${y0 + 17}" font-family="sans-serif" font-size="10" text-anchor="middle">${fmtTick(t)}</text>`,
      );
    }
    const yTicks = this.logY
      ? logTicks(this.ext.yMin, this.ext.yMax)
      : ticks(this.ext.yMin, this.ext.yMax);
    for (const t of yTicks) {
      const py = this.sy(t);
      parts.push(`<line x1="${x0 - 4}" y1="${py.toFixed(2)}" x2="${x0}" y2="${py.toFixed(2)}" stroke="#222"/>`);
      parts.push(
        `<text x="${x0 - 7}" y="${(py + 3).toFixed(2)}" font-family="sans-serif" font-size="10" text-anchor="end">${fmtTick(t)}</text>`,
      );
    }
    parts.push(
      `<text x="${(x0 + x1) / 2}" y="${this.height - 8}" font-family="sans-serif" font-size="12" text-anchor="middle">${xLabel}</text>`,
    );
    parts.push(
      `<text x="14" y="${(y0 + y1) / 2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 ${(y0 + y1) / 2})">${yLabel}</text>`,
    );
    parts.push(
      `<text x="${(x0 + x1) / 2}" y="20" font-family="sans-serif" font-size="13" font-weight="bold" text-anchor="middle">${title}</text>`,
    );
    this.body.unshift(...parts);
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">` +
      `<rect width="100%" height="100%" fill="white"/>` +
      this.body.join('') +
      `</svg>`
    );
  }
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  const e0 = Math.ceil(Math.log10(lo));
  const e1 = Math.floor(Math.log10(hi));
  for (let e = e0; e <= e1; e++) {
    out.push(Math.pow(10, e));
  }
  return out.length >= 2 ? out : [lo, hi];
}

/** Blue shade ramp from light (early snapshot) to dark (late). */
export function blueShade(frac: number): string {
  const c = Math.round(210 - 160 * frac);
  return `rgb(${c.toFixed(0)},${(c + 20).toFixed(0)},255)`;
}
