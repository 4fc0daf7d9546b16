/** Readers for the metrics CSV and the sweep points/report artifacts. */
import { readFileSync } from "node:fs";

export const METRICS_COLUMNS = [
  "t", "trace_dist", "hs_dist", "trace_re", "trace_im",
  "herm_defect", "min_eig", "mass", "l1_norm", "w11_eps",
] as const;

export type MetricsTable = Record<(typeof METRICS_COLUMNS)[number], number[]>;

export function readMetrics(path: string): MetricsTable {
  const lines = readFileSync(path, "utf-8").trim().split(/\r?\n/);
  if (lines[0] !== METRICS_COLUMNS.join(",")) {
    throw new Error(`${path}: unexpected metrics header ${lines[0]}`);
  }
  const out = Object.fromEntries(METRICS_COLUMNS.map((c) => [c, [] as number[]])) as MetricsTable;
  for (const line of lines.slice(1)) {
    const parts = line.split(",");
    if (parts.length !== METRICS_COLUMNS.length) {
      throw new Error(`${path}: malformed row ${line}`);
    }
    METRICS_COLUMNS.forEach((c, i) => out[c].push(Number(parts[i])));
  }
  return out;
}

export interface SweepPoint {
  kind: string;
  h: number;
  gamma: number;
  nPoints: number;
  traceDist: number;
}

export function readSweepPoints(path: string): SweepPoint[] {
  const lines = readFileSync(path, "utf-8").trim().split(/\r?\n/);
  if (lines[0] !== "kind,h,gamma,n_points,trace_dist") {
    throw new Error(`${path}: unexpected points header ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const [kind, h, gamma, n, d] = line.split(",");
    return { kind, h: Number(h), gamma: Number(gamma), nPoints: Number(n), traceDist: Number(d) };
  });
}

export interface SweepReport {
  h_sweep?: { slope?: number; intercept?: number; r_squared?: number } | null;
}

export function readSweepReport(path: string): SweepReport {
  return JSON.parse(readFileSync(path, "utf-8")) as SweepReport;
}
