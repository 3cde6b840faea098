import { Figure, Series } from "./series.js";

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { left: 64, right: 160, top: 40, bottom: 48 };

const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

interface Scale {
  lo: number;
  hi: number;
  toPx: (v: number) => number;
}

function makeScale(values: number[], pxLo: number, pxHi: number): Scale {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = 0.04 * (hi - lo);
  lo -= pad;
  hi += pad;
  return {
    lo,
    hi,
    toPx: (v) => pxLo + ((v - lo) / (hi - lo)) * (pxHi - pxLo),
  };
}

function ticks(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const mult = [1, 2, 5, 10].find((m) => span / (step * m) <= n) ?? 10;
  const s = step * mult;
  const out: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

function fmt(v: number): string {
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e5 || a < 1e-3)) return v.toExponential(1);
  return String(Number(v.toPrecision(6)));
}

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function polyline(s: Series, sx: Scale, sy: Scale, color: string): string {
  const pts = s.x
    .map((xv, i) => `${sx.toPx(xv).toFixed(2)},${sy.toPx(s.y[i]).toFixed(2)}`)
    .join(" ");
  const markers = s.x
    .map(
      (xv, i) =>
        `<circle cx="${sx.toPx(xv).toFixed(2)}" cy="${sy
          .toPx(s.y[i])
          .toFixed(2)}" r="2.5" fill="${color}"/>`,
    )
    .join("");
  return (
    `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"/>` +
    markers
  );
}

export function renderSvg(fig: Figure): string {
  if (fig.series.length === 0) {
    throw new Error("nothing to plot: no series were built from the input");
  }
  const xs = fig.series.flatMap((s) => s.x);
  const ys = fig.series.flatMap((s) => s.y);
  const sx = makeScale(xs, MARGIN.left, WIDTH - MARGIN.right);
  const sy = makeScale(ys, HEIGHT - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="22" ` +
      `text-anchor="middle" font-size="14">${esc(fig.title)}</text>`,
  );

  for (const t of ticks(sx.lo, sx.hi)) {
    const px = sx.toPx(t);
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top}" x2="${px}" y2="${
        HEIGHT - MARGIN.bottom
      }" stroke="#ddd"/>`,
      `<text x="${px}" y="${HEIGHT - MARGIN.bottom + 16}" ` +
        `text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(sy.lo, sy.hi)) {
    const py = sy.toPx(t);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py}" x2="${
        WIDTH - MARGIN.right
      }" y2="${py}" stroke="#ddd"/>`,
      `<text x="${MARGIN.left - 6}" y="${py + 4}" text-anchor="end">${fmt(
        t,
      )}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${
      WIDTH - MARGIN.left - MARGIN.right
    }" height="${HEIGHT - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#333"/>`,
  );
  parts.push(
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${
      HEIGHT - 10
    }" text-anchor="middle">${esc(fig.xlabel)}</text>`,
    `<text x="16" y="${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2}" ` +
      `text-anchor="middle" transform="rotate(-90 16 ${
        (MARGIN.top + HEIGHT - MARGIN.bottom) / 2
      })">${esc(fig.ylabel)}</text>`,
  );

  fig.series.forEach((s, i) => {
    parts.push(polyline(s, sx, sy, PALETTE[i % PALETTE.length]));
  });

  const legendX = WIDTH - MARGIN.right + 12;
  fig.series.forEach((s, i) => {
    const y = MARGIN.top + 8 + i * 18;
    const color = PALETTE[i % PALETTE.length];
    parts.push(
      `<line x1="${legendX}" y1="${y}" x2="${legendX + 18}" y2="${y}" ` +
        `stroke="${color}" stroke-width="2"/>`,
      `<text x="${legendX + 24}" y="${y + 4}">${esc(s.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}
