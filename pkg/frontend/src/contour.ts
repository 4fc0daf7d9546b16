/** Contour machinery: level selection, bilinear sampling, marching squares. */

export interface Field {
  values: Float64Array[]; // [i][j], i = x index, j = xi index
  x: number[];
  xi: number[];
}

export function fieldMax(values: Float64Array[]): number {
  let m = -Infinity;
  for (const row of values) for (const v of row) if (v > m) m = v;
  return m;
}

/** Default level set: `count` levels spanning [5%, 95%] of the field's own max. */
export function defaultLevels(values: Float64Array[], count = 8): number[] {
  const m = fieldMax(values);
  const levels: number[] = [];
  for (let k = 0; k < count; k++) {
    levels.push(m * (0.05 + (0.9 * k) / (count - 1)));
  }
  return levels;
}

/** Bilinear sample at fractional grid coordinates (clamped). */
export function sampleBilinear(values: Float64Array[], fi: number, fj: number): number {
  const n = values.length;
  const i0 = Math.max(0, Math.min(n - 2, Math.floor(fi)));
  const j0 = Math.max(0, Math.min(n - 2, Math.floor(fj)));
  const di = Math.max(0, Math.min(1, fi - i0));
  const dj = Math.max(0, Math.min(1, fj - j0));
  return (
    values[i0][j0] * (1 - di) * (1 - dj)
    + values[i0 + 1][j0] * di * (1 - dj)
    + values[i0][j0 + 1] * (1 - di) * dj
    + values[i0 + 1][j0 + 1] * di * dj
  );
}

export type Segment = [number, number, number, number]; // i0, j0, i1, j1 in grid coords

/** Marching squares isoline segments for one level, in grid coordinates. */
export function isolineSegments(values: Float64Array[], level: number): Segment[] {
  const n = values.length;
  const segs: Segment[] = [];
  const interp = (va: number, vb: number): number => {
    const d = vb - va;
    return Math.abs(d) < 1e-300 ? 0.5 : (level - va) / d;
  };
  for (let i = 0; i < n - 1; i++) {
    for (let j = 0; j < n - 1; j++) {
      const v00 = values[i][j];
      const v10 = values[i + 1][j];
      const v01 = values[i][j + 1];
      const v11 = values[i + 1][j + 1];
      let idx = 0;
      if (v00 > level) idx |= 1;
      if (v10 > level) idx |= 2;
      if (v11 > level) idx |= 4;
      if (v01 > level) idx |= 8;
      if (idx === 0 || idx === 15) continue;
      // edge midpoints with linear interpolation
      const bottom: [number, number] = [i + interp(v00, v10), j];
      const right: [number, number] = [i + 1, j + interp(v10, v11)];
      const top: [number, number] = [i + interp(v01, v11), j + 1];
      const left: [number, number] = [i, j + interp(v00, v01)];
      const add = (a: [number, number], b: [number, number]) =>
        segs.push([a[0], a[1], b[0], b[1]]);
      switch (idx) {
        case 1: case 14: add(left, bottom); break;
        case 2: case 13: add(bottom, right); break;
        case 3: case 12: add(left, right); break;
        case 4: case 11: add(right, top); break;
        case 6: case 9: add(bottom, top); break;
        case 7: case 8: add(left, top); break;
        case 5: add(left, bottom); add(right, top); break;
        case 10: add(bottom, right); add(left, top); break;
      }
    }
  }
  return segs;
}
