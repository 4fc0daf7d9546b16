/** Minimal deterministic software canvas: RGBA buffer, lines, fills, 5x7 text. */

export type RGB = [number, number, number];

export class Raster {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8ClampedArray;

  constructor(width: number, height: number, background: RGB = [255, 255, 255]) {
    this.width = width;
    this.height = height;
    this.data = new Uint8ClampedArray(width * height * 4);
    for (let i = 0; i < width * height; i++) {
      this.data[4 * i] = background[0];
      this.data[4 * i + 1] = background[1];
      this.data[4 * i + 2] = background[2];
      this.data[4 * i + 3] = 255;
    }
  }

  set(x: number, y: number, c: RGB): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = 4 * (y * this.width + x);
    this.data[i] = c[0];
    this.data[i + 1] = c[1];
    this.data[i + 2] = c[2];
    this.data[i + 3] = 255;
  }

  fillRect(x0: number, y0: number, w: number, h: number, c: RGB): void {
    for (let y = y0; y < y0 + h; y++) for (let x = x0; x < x0 + w; x++) this.set(x, y, c);
  }

  /** Integer Bresenham line. */
  line(x0: number, y0: number, x1: number, y1: number, c: RGB): void {
    x0 = Math.round(x0); y0 = Math.round(y0); x1 = Math.round(x1); y1 = Math.round(y1);
    const dx = Math.abs(x1 - x0);
    const dy = -Math.abs(y1 - y0);
    const sx = x0 < x1 ? 1 : -1;
    const sy = y0 < y1 ? 1 : -1;
    let err = dx + dy;
    for (;;) {
      this.set(x0, y0, c);
      if (x0 === x1 && y0 === y1) break;
      const e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  disc(cx: number, cy: number, r: number, c: RGB): void {
    for (let y = -r; y <= r; y++) for (let x = -r; x <= r; x++) {
      if (x * x + y * y <= r * r) this.set(Math.round(cx) + x, Math.round(cy) + y, c);
    }
  }

  text(x: number, y: number, s: string, c: RGB, scale = 1): void {
    let cx = x;
    for (const ch of s) {
      const glyph = FONT[ch] ?? FONT["?"];
      for (let row = 0; row < 7; row++) {
        const bits = glyph[row];
        for (let col = 0; col < 5; col++) {
          if (bits & (1 << (4 - col))) {
            for (let sy = 0; sy < scale; sy++) for (let sx = 0; sx < scale; sx++) {
              this.set(cx + col * scale + sx, y + row * scale + sy, c);
            }
          }
        }
      }
      cx += 6 * scale;
    }
  }
}

export function textWidth(s: string, scale = 1): number {
  return s.length * 6 * scale;
}

const G = (rows: string[]): number[] => rows.map((r) => parseInt(r.replace(/\./g, "0").replace(/#/g, "1"), 2));

/** 5x7 bitmap font for the characters the figure annotations use. */
export const FONT: Record<string, number[]> = {
  " ": G(["00000", "00000", "00000", "00000", "00000", "00000", "00000"]),
  "?": G(["01110", "10001", "00010", "00100", "00100", "00000", "00100"]),
  "0": G(["01110", "10001", "10011", "10101", "11001", "10001", "01110"]),
  "1": G(["00100", "01100", "00100", "00100", "00100", "00100", "01110"]),
  "2": G(["01110", "10001", "00001", "00010", "00100", "01000", "11111"]),
  "3": G(["11111", "00010", "00100", "00010", "00001", "10001", "01110"]),
  "4": G(["00010", "00110", "01010", "10010", "11111", "00010", "00010"]),
  "5": G(["11111", "10000", "11110", "00001", "00001", "10001", "01110"]),
  "6": G(["00110", "01000", "10000", "11110", "10001", "10001", "01110"]),
  "7": G(["11111", "00001", "00010", "00100", "01000", "01000", "01000"]),
  "8": G(["01110", "10001", "10001", "01110", "10001", "10001", "01110"]),
  "9": G(["01110", "10001", "10001", "01111", "00001", "00010", "01100"]),
  ".": G(["00000", "00000", "00000", "00000", "00000", "01100", "01100"]),
  ",": G(["00000", "00000", "00000", "00000", "01100", "00100", "01000"]),
  "-": G(["00000", "00000", "00000", "11111", "00000", "00000", "00000"]),
  "+": G(["00000", "00100", "00100", "11111", "00100", "00100", "00000"]),
  "=": G(["00000", "00000", "11111", "00000", "11111", "00000", "00000"]),
  "(": G(["00010", "00100", "01000", "01000", "01000", "00100", "00010"]),
  ")": G(["01000", "00100", "00010", "00010", "00010", "00100", "01000"]),
  "/": G(["00001", "00001", "00010", "00100", "01000", "10000", "10000"]),
  ":": G(["00000", "01100", "01100", "00000", "01100", "01100", "00000"]),
  "^": G(["00100", "01010", "10001", "00000", "00000", "00000", "00000"]),
  "_": G(["00000", "00000", "00000", "00000", "00000", "00000", "11111"]),
  a: G(["00000", "00000", "01110", "00001", "01111", "10001", "01111"]),
  b: G(["10000", "10000", "11110", "10001", "10001", "10001", "11110"]),
  c: G(["00000", "00000", "01110", "10000", "10000", "10001", "01110"]),
  d: G(["00001", "00001", "01111", "10001", "10001", "10001", "01111"]),
  e: G(["00000", "00000", "01110", "10001", "11111", "10000", "01110"]),
  f: G(["00110", "01001", "01000", "11100", "01000", "01000", "01000"]),
  g: G(["00000", "01111", "10001", "10001", "01111", "00001", "01110"]),
  h: G(["10000", "10000", "11110", "10001", "10001", "10001", "10001"]),
  i: G(["00100", "00000", "01100", "00100", "00100", "00100", "01110"]),
  j: G(["00010", "00000", "00110", "00010", "00010", "10010", "01100"]),
  k: G(["10000", "10000", "10010", "10100", "11000", "10100", "10010"]),
  l: G(["01100", "00100", "00100", "00100", "00100", "00100", "01110"]),
  m: G(["00000", "00000", "11010", "10101", "10101", "10101", "10101"]),
  n: G(["00000", "00000", "11110", "10001", "10001", "10001", "10001"]),
  o: G(["00000", "00000", "01110", "10001", "10001", "10001", "01110"]),
  p: G(["00000", "11110", "10001", "10001", "11110", "10000", "10000"]),
  q: G(["00000", "01111", "10001", "10001", "01111", "00001", "00001"]),
  r: G(["00000", "00000", "10110", "11001", "10000", "10000", "10000"]),
  s: G(["00000", "00000", "01111", "10000", "01110", "00001", "11110"]),
  t: G(["01000", "01000", "11100", "01000", "01000", "01001", "00110"]),
  u: G(["00000", "00000", "10001", "10001", "10001", "10011", "01101"]),
  v: G(["00000", "00000", "10001", "10001", "10001", "01010", "00100"]),
  w: G(["00000", "00000", "10101", "10101", "10101", "10101", "01010"]),
  x: G(["00000", "00000", "10001", "01010", "00100", "01010", "10001"]),
  y: G(["00000", "10001", "10001", "01111", "00001", "10001", "01110"]),
  z: G(["00000", "00000", "11111", "00010", "00100", "01000", "11111"]),
  F: G(["11111", "10000", "10000", "11110", "10000", "10000", "10000"]),
  L: G(["10000", "10000", "10000", "10000", "10000", "10000", "11111"]),
  P: G(["11110", "10001", "10001", "11110", "10000", "10000", "10000"]),
  R: G(["11110", "10001", "10001", "11110", "10100", "10010", "10001"]),
  W: G(["10001", "10001", "10001", "10101", "10101", "10101", "01010"]),
};
