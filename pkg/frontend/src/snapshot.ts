/**
 * Reader for the binary snapshot format:
 * 8-byte magic "LFPSNP01", u64le header length, UTF-8 JSON header
 * {kind, h, gamma, t, grid: {n, L}, dtype, layout}, then the payload:
 * fields as f64le, operators as interleaved re/im f64le, row-major with the
 * position index major.
 */
import { readFileSync } from "node:fs";

export interface SnapshotHeader {
  kind: "field" | "operator";
  h: number;
  gamma: number;
  t: number;
  grid: { n: number; L: number };
  dtype: "f64le" | "c128le";
  layout: "row-major";
}

export interface FieldSnapshot {
  header: SnapshotHeader;
  /** values[i][j] = a(x_i, xi_j); for operators this is the real part */
  values: Float64Array[];
  imag?: Float64Array[];
}

const MAGIC = "LFPSNP01";

export function readSnapshot(path: string): FieldSnapshot {
  const buf = readFileSync(path);
  if (buf.length < 16 || buf.toString("latin1", 0, 8) !== MAGIC) {
    throw new Error(`${path}: not an LFPSNP01 snapshot`);
  }
  const headerLen = Number(buf.readBigUInt64LE(8));
  const header = JSON.parse(buf.toString("utf-8", 16, 16 + headerLen)) as SnapshotHeader;
  const n = header.grid.n;
  const payload = buf.subarray(16 + headerLen);
  const values: Float64Array[] = [];
  if (header.dtype === "f64le") {
    if (payload.length !== n * n * 8) {
      throw new Error(`${path}: payload size ${payload.length} != ${n * n * 8}`);
    }
    for (let i = 0; i < n; i++) {
      const row = new Float64Array(n);
      for (let j = 0; j < n; j++) row[j] = payload.readDoubleLE((i * n + j) * 8);
      values.push(row);
    }
    return { header, values };
  }
  if (header.dtype === "c128le") {
    if (payload.length !== n * n * 16) {
      throw new Error(`${path}: payload size ${payload.length} != ${n * n * 16}`);
    }
    const imag: Float64Array[] = [];
    for (let i = 0; i < n; i++) {
      const re = new Float64Array(n);
      const im = new Float64Array(n);
      for (let j = 0; j < n; j++) {
        re[j] = payload.readDoubleLE((i * n + j) * 16);
        im[j] = payload.readDoubleLE((i * n + j) * 16 + 8);
      }
      values.push(re);
      imag.push(im);
    }
    return { header, values, imag };
  }
  throw new Error(`${path}: unknown dtype ${(header as { dtype: string }).dtype}`);
}

/** x nodes: -L + i * 2L/n; xi nodes: (pi h / L) * (k - n/2). */
export function gridAxes(header: SnapshotHeader): { x: number[]; xi: number[] } {
  const { n, L } = header.grid;
  const dx = (2 * L) / n;
  const dxi = (Math.PI * header.h) / L;
  const x: number[] = [];
  const xi: number[] = [];
  for (let i = 0; i < n; i++) {
    x.push(-L + i * dx);
    xi.push(dxi * (i - n / 2));
  }
  return { x, xi };
}

export function assertConsistentPair(a: SnapshotHeader, b: SnapshotHeader): void {
  const close = (u: number, v: number) => Math.abs(u - v) <= 1e-12 * Math.max(1, Math.abs(u));
  if (!close(a.h, b.h) || !close(a.gamma, b.gamma) || !close(a.t, b.t)
      || a.grid.n !== b.grid.n || !close(a.grid.L, b.grid.L)) {
    throw new Error(
      `snapshot pair mismatch: (h,gamma,t,grid) = (${a.h},${a.gamma},${a.t},${a.grid.n}) vs `
      + `(${b.h},${b.gamma},${b.t},${b.grid.n})`,
    );
  }
}
