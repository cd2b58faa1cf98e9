/** Minimal deterministic SVG plotting: linear/log scales, axes with ticks,
 * polylines, error bars, dashed overlays.  Pure string building, no DOM. */

export interface Scale {
  (v: number): number;
  ticks(): number[];
  domain: [number, number];
}

const fmt = (v: number): string => {
  // fixed formatting keeps output byte-stable
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) {
    return String(Number(v.toFixed(4)));
  }
  return v.toExponential(2);
};

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const f = ((v: number) => r0 + ((v - d0) / (d1 - d0 || 1)) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.ticks = () => {
    const step = (d1 - d0) / 5;
    return Array.from({ length: 6 }, (_, i) => d0 + i * step);
  };
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  if (d0 <= 0 || d1 <= 0) {
    throw new Error(`log scale needs a positive domain, got [${d0}, ${d1}]`);
  }
  const [l0, l1] = [Math.log10(d0), Math.log10(d1)];
  const [r0, r1] = range;
  const f = ((v: number) => r0 + ((Math.log10(v) - l0) / (l1 - l0 || 1)) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.ticks = () => {
    const out: number[] = [];
    for (let e = Math.ceil(l0 - 1e-9); e <= Math.floor(l1 + 1e-9); e++) {
      out.push(Number(`1e${e}`)); // exact decade doubles (10 ** -4 is not 1e-4)
    }
    return out.length >= 2 ? out : [d0, d1];
  };
  return f;
}

export interface Series {
  label: string;
  x: number[];
  y: number[];
  yerr?: number[];
  color: string;
  dashed?: boolean;
  dots?: boolean;
}

export interface PanelSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  xLog: boolean;
  yLog: boolean;
  series: Series[];
  /** horizontal dashed guide lines (e.g. analytic overlays) */
  hLines?: { y: number; color: string; label: string }[];
}

export const PALETTE = ["#1f6fb4", "#d95f02", "#2a9d4e", "#7b3294",
  "#c51b7d", "#5e6a71", "#8c564b"];

const W = 460;
const H = 360;
const MARGIN = { left: 64, right: 16, top: 30, bottom: 46 };

function panelBody(spec: PanelSpec, x0: number): string {
  const inner = {
    x: x0 + MARGIN.left,
    y: MARGIN.top,
    w: W - MARGIN.left - MARGIN.right,
    h: H - MARGIN.top - MARGIN.bottom,
  };
  const xsAll = spec.series.flatMap((s) => s.x);
  let ysAll = spec.series.flatMap((s) => s.y)
    .concat((spec.hLines ?? []).map((l) => l.y));
  if (spec.yLog) ysAll = ysAll.filter((v) => v > 0);
  if (xsAll.length === 0 || ysAll.length === 0) {
    throw new Error(`panel '${spec.title}': nothing to plot`);
  }
  const pad = (lo: number, hi: number, log: boolean): [number, number] =>
    log ? [lo / 1.5, hi * 1.5] : [lo - 0.05 * (hi - lo || 1), hi + 0.05 * (hi - lo || 1)];
  const xd = pad(Math.min(...xsAll), Math.max(...xsAll), spec.xLog);
  const yd = pad(Math.min(...ysAll), Math.max(...ysAll), spec.yLog);
  const sx = spec.xLog ? logScale(xd, [inner.x, inner.x + inner.w])
    : linearScale(xd, [inner.x, inner.x + inner.w]);
  const sy = spec.yLog ? logScale(yd, [inner.y + inner.h, inner.y])
    : linearScale(yd, [inner.y + inner.h, inner.y]);

  const parts: string[] = [];
  parts.push(`<g class="panel" data-title="${spec.title}">`);
  parts.push(`<rect x="${inner.x}" y="${inner.y}" width="${inner.w}" height="${inner.h}" fill="none" stroke="#333" stroke-width="1"/>`);
  parts.push(`<text x="${inner.x + inner.w / 2}" y="${MARGIN.top - 10}" text-anchor="middle" font-size="13" font-weight="bold">${spec.title}</text>`);

  for (const t of sx.ticks()) {
    const px = sx(t);
    parts.push(`<line x1="${fmt(px)}" y1="${inner.y + inner.h}" x2="${fmt(px)}" y2="${inner.y + inner.h + 5}" stroke="#333"/>`);
    parts.push(`<text x="${fmt(px)}" y="${inner.y + inner.h + 18}" text-anchor="middle" font-size="10">${fmt(t)}</text>`);
  }
  for (const t of sy.ticks()) {
    const py = sy(t);
    parts.push(`<line x1="${inner.x - 5}" y1="${fmt(py)}" x2="${inner.x}" y2="${fmt(py)}" stroke="#333"/>`);
    parts.push(`<text x="${inner.x - 8}" y="${fmt(py + 3)}" text-anchor="end" font-size="10">${fmt(t)}</text>`);
  }
  parts.push(`<text x="${inner.x + inner.w / 2}" y="${H - 8}" text-anchor="middle" font-size="12">${spec.xLabel}</text>`);
  parts.push(`<text x="${x0 + 16}" y="${inner.y + inner.h / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 ${x0 + 16} ${inner.y + inner.h / 2})">${spec.yLabel}</text>`);

  for (const line of spec.hLines ?? []) {
    if (spec.yLog && line.y <= 0) continue;
    const py = sy(line.y);
    parts.push(`<line class="overlay" x1="${inner.x}" y1="${fmt(py)}" x2="${inner.x + inner.w}" y2="${fmt(py)}" stroke="${line.color}" stroke-dasharray="6 4" stroke-width="1.5"><title>${line.label}</title></line>`);
  }

  spec.series.forEach((s, k) => {
    const pts = s.x.map((xv, i) => ({ xv, yv: s.y[i], err: s.yerr?.[i] ?? 0 }))
      .filter((p) => !spec.yLog || p.yv > 0)
      .sort((a, b) => a.xv - b.xv);
    if (pts.length === 0) return;
    const path = pts.map((p, i) => `${i === 0 ? "M" : "L"}${fmt(sx(p.xv))},${fmt(sy(p.yv))}`).join(" ");
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    if (!s.dots || pts.length > 1) {
      parts.push(`<path class="series" data-label="${s.label}" d="${path}" fill="none" stroke="${s.color}" stroke-width="1.8"${dash}/>`);
    }
    for (const p of pts) {
      if (p.err > 0) {
        const lo = spec.yLog ? Math.max(p.yv - p.err, p.yv * 1e-3) : p.yv - p.err;
        parts.push(`<line class="errbar" x1="${fmt(sx(p.xv))}" y1="${fmt(sy(lo))}" x2="${fmt(sx(p.xv))}" y2="${fmt(sy(p.yv + p.err))}" stroke="${s.color}" stroke-width="1"/>`);
      }
      parts.push(`<circle cx="${fmt(sx(p.xv))}" cy="${fmt(sy(p.yv))}" r="2.5" fill="${s.color}"/>`);
    }
    parts.push(`<text x="${inner.x + inner.w - 6}" y="${inner.y + 14 + 13 * k}" text-anchor="end" font-size="10" fill="${s.color}">${s.label}</text>`);
  });
  parts.push("</g>");
  return parts.join("\n");
}

/** Assemble one or more panels side by side into a complete SVG document. */
export function renderSvg(panels: PanelSpec[]): string {
  const width = W * panels.length;
  const body = panels.map((p, i) => panelBody(p, i * W)).join("\n");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${H}" viewBox="0 0 ${width} ${H}" font-family="Helvetica, Arial, sans-serif">
<rect width="${width}" height="${H}" fill="white"/>
${body}
</svg>
`;
}
