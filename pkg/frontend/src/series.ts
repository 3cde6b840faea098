import { Row, num } from "./csv.js";

export type Kind = "convergence" | "netpower" | "admission";

export const KINDS: Kind[] = ["convergence", "netpower", "admission"];

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

export interface Figure {
  title: string;
  xlabel: string;
  ylabel: string;
  series: Series[];
}

function groupBy(rows: Row[], key: (r: Row) => string): Map<string, Row[]> {
  const out = new Map<string, Row[]>();
  for (const r of rows) {
    const k = key(r);
    const bucket = out.get(k);
    if (bucket) bucket.push(r);
    else out.set(k, [r]);
  }
  return out;
}

function sortedByX(pairs: [number, number][]): Series["x" | "y"][] {
  pairs.sort((a, b) => a[0] - b[0]);
  return [pairs.map((p) => p[0]), pairs.map((p) => p[1])];
}

/** Mean of a metric per x value within each group. */
function meanSeries(
  rows: Row[],
  label: (r: Row) => string,
  xField: string,
  yField: string,
): Series[] {
  const series: Series[] = [];
  for (const [name, group] of groupBy(rows, label)) {
    const byX = groupBy(group, (r) => r[xField]);
    const pairs: [number, number][] = [];
    for (const [xv, cell] of byX) {
      const ys = cell.map((r) => num(r, yField));
      pairs.push([Number(xv), ys.reduce((a, b) => a + b, 0) / ys.length]);
    }
    const [x, y] = sortedByX(pairs);
    series.push({ label: name, x, y });
  }
  series.sort((a, b) => a.label.localeCompare(b.label));
  return series;
}

/** Drop rows whose metric did not come out finite (infeasible cells). */
function finiteOnly(rows: Row[], field: string): Row[] {
  return rows.filter((r) => Number.isFinite(Number(r[field])));
}

function algoLabel(r: Row): string {
  return r.algorithm === "ir2a" ? `${r.algorithm} (p=${r.p})` : r.algorithm;
}

export function buildFigure(kind: Kind, rows: Row[]): Figure {
  if (kind === "convergence") {
    const series: Series[] = [];
    for (const [name, group] of groupBy(
      rows,
      (r) => `seed ${r.seed}, ${r.init_label}`,
    )) {
      const pairs: [number, number][] = group.map((r) => [
        num(r, "iteration"),
        num(r, "objective"),
      ]);
      const [x, y] = sortedByX(pairs);
      series.push({ label: name, x, y });
    }
    series.sort((a, b) => a.label.localeCompare(b.label));
    return {
      title: "Objective trace per run",
      xlabel: "iteration",
      ylabel: "objective",
      series,
    };
  }
  if (kind === "netpower") {
    const series = meanSeries(
      finiteOnly(rows, "network_w"),
      algoLabel,
      "sinr_db",
      "network_w",
    );
    return {
      title: "Mean network power vs target SINR",
      xlabel: "target SINR (dB)",
      ylabel: "network power (W)",
      series,
    };
  }
  if (kind === "admission") {
    const series = meanSeries(
      finiteOnly(rows, "admitted"),
      algoLabel,
      "sinr_db",
      "admitted",
    );
    return {
      title: "Mean admitted users vs target SINR",
      xlabel: "target SINR (dB)",
      ylabel: "admitted users",
      series,
    };
  }
  throw new Error(`unknown kind '${kind}'`);
}
