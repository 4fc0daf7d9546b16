/** The three figure kinds: contour-pair, distance-curve, scaling. */

import { defaultLevels, fieldMax, isolineSegments, sampleBilinear } from "./contour.js";
import { MetricsTable, SweepPoint, readMetrics, readSweepPoints, readSweepReport } from "./metrics.js";
import { encodePng } from "./png.js";
import { RGB, Raster, textWidth } from "./raster.js";
import { Svg } from "./svg.js";
import { assertConsistentPair, gridAxes, readSnapshot } from "./snapshot.js";

export interface FigureOutput {
  svg: string;
  png: Buffer;
}

const INK: RGB = [17, 17, 17];
const GRID_LINE: RGB = [200, 200, 205];

function rampColor(t: number): RGB {
  const c0: RGB = [237, 243, 252];
  const c1: RGB = [18, 60, 140];
  return [
    Math.round(c0[0] + (c1[0] - c0[0]) * t),
    Math.round(c0[1] + (c1[1] - c0[1]) * t),
    Math.round(c0[2] + (c1[2] - c0[2]) * t),
  ];
}

function rampHex(t: number): string {
  const [r, g, b] = rampColor(t);
  const h = (v: number) => v.toString(16).padStart(2, "0");
  return `#${h(r)}${h(g)}${h(b)}`;
}

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const step = (hi - lo) / (n - 1);
  const ticks: number[] = [];
  for (let i = 0; i < n; i++) ticks.push(lo + i * step);
  return ticks;
}

const sig = (v: number) => {
  const s = Number(v.toPrecision(3));
  return Object.is(s, -0) ? "0" : String(s);
};

// ---------------------------------------------------------------------------
// contour pair

interface Panel {
  title: string;
  values: Float64Array[];
  x: number[];
  xi: number[];
}

function drawPanelPng(r: Raster, panel: Panel, px: number, py: number, size: number): void {
  const n = panel.values.length;
  const levels = defaultLevels(panel.values);
  for (let yy = 0; yy < size; yy++) {
    for (let xx = 0; xx < size; xx++) {
      const fi = ((xx + 0.5) / size) * (n - 1);
      const fj = (1 - (yy + 0.5) / size) * (n - 1);
      const v = sampleBilinear(panel.values, fi, fj);
      let band = -1;
      for (let k = 0; k < levels.length; k++) if (v >= levels[k]) band = k;
      if (band >= 0) r.set(px + xx, py + yy, rampColor(band / (levels.length - 1)));
    }
  }
  r.line(px, py, px + size, py, INK);
  r.line(px, py + size, px + size, py + size, INK);
  r.line(px, py, px, py + size, INK);
  r.line(px + size, py, px + size, py + size, INK);
  r.text(px + Math.floor((size - textWidth(panel.title)) / 2), py - 12, panel.title, INK);
  r.text(px + Math.floor(size / 2) - 3, py + size + 18, "x", INK);
  r.text(px - 24, py + Math.floor(size / 2) - 4, "xi", INK);
  // corner coordinate labels
  r.text(px - 2, py + size + 8, sig(panel.x[0]), INK);
  r.text(px + size - 18, py + size + 8, sig(panel.x[panel.x.length - 1]), INK);
  r.text(px - 28, py + size - 4, sig(panel.xi[0]), INK);
  r.text(px - 28, py + 4, sig(panel.xi[panel.xi.length - 1]), INK);
}

function drawPanelSvg(svg: Svg, panel: Panel, px: number, py: number, size: number): void {
  const n = panel.values.length;
  const levels = defaultLevels(panel.values);
  const toX = (fi: number) => px + (fi / (n - 1)) * size;
  const toY = (fj: number) => py + (1 - fj / (n - 1)) * size;
  levels.forEach((level, k) => {
    const segs = isolineSegments(panel.values, level);
    if (segs.length === 0) return;
    const d = segs
      .map((s) => `M${toX(s[0]).toFixed(2)} ${toY(s[1]).toFixed(2)}L${toX(s[2]).toFixed(2)} ${toY(s[3]).toFixed(2)}`)
      .join("");
    svg.path(d, rampHex(k / (levels.length - 1)), 1.2);
  });
  svg.rect(px, py, size, size, "#111111");
  svg.text(px + size / 2, py - 8, panel.title, 13, "middle");
  svg.text(px + size / 2, py + size + 26, "x", 12, "middle");
  svg.text(px - 24, py + size / 2, "ξ", 12, "middle");
  svg.text(px, py + size + 13, sig(panel.x[0]), 10, "middle");
  svg.text(px + size, py + size + 13, sig(panel.x[panel.x.length - 1]), 10, "middle");
  svg.text(px - 10, py + size + 3, sig(panel.xi[0]), 10, "end");
  svg.text(px - 10, py + 7, sig(panel.xi[panel.xi.length - 1]), 10, "end");
}

export function renderContourPair(pathA: string, pathB: string): FigureOutput {
  const a = readSnapshot(pathA);
  const b = readSnapshot(pathB);
  if (a.header.kind !== "field" || b.header.kind !== "field") {
    throw new Error("contour-pair expects two field snapshots");
  }
  assertConsistentPair(a.header, b.header);
  const axesA = gridAxes(a.header);
  const axesB = gridAxes(b.header);
  const panels: Panel[] = [
    { title: "Fokker-Planck", values: a.values, x: axesA.x, xi: axesA.xi },
    { title: "Lindblad (Wigner symbol)", values: b.values, x: axesB.x, xi: axesB.xi },
  ];
  const size = 360;
  const margin = 64;
  const gap = 56;
  const width = margin * 2 + size * 2 + gap;
  const height = margin * 2 + size;
  const note = `h=${a.header.h}  gamma=${a.header.gamma}  t=${a.header.t}`;

  const raster = new Raster(width, height);
  panels.forEach((p, i) => drawPanelPng(raster, p, margin + i * (size + gap), margin, size));
  raster.text(Math.floor((width - textWidth(note)) / 2), height - 22, note, INK);

  const svg = new Svg(width, height);
  panels.forEach((p, i) => drawPanelSvg(svg, p, margin + i * (size + gap), margin, size));
  svg.text(width / 2, height - 18, note, 12, "middle");

  return { svg: svg.render(), png: encodePng(width, height, raster.data) };
}

// ---------------------------------------------------------------------------
// distance curve

export function renderDistanceCurve(metricsPath: string): FigureOutput {
  const m: MetricsTable = readMetrics(metricsPath);
  const ts = m.t;
  const ds = m.trace_dist;
  const width = 640;
  const height = 420;
  const ml = 76;
  const mr = 24;
  const mt = 36;
  const mb = 56;
  const plotW = width - ml - mr;
  const plotH = height - mt - mb;
  const tLo = Math.min(...ts);
  const tHi = Math.max(...ts) || 1;
  const dHi = Math.max(...ds, 1e-300) * 1.08;
  const X = (t: number) => ml + ((t - tLo) / (tHi - tLo || 1)) * plotW;
  const Y = (d: number) => mt + plotH - (d / dHi) * plotH;

  const raster = new Raster(width, height);
  const svg = new Svg(width, height);
  const title = "trace distance vs time";
  raster.text(Math.floor((width - textWidth(title)) / 2), 12, title, INK);
  svg.text(width / 2, 20, title, 13, "middle");

  for (const tick of niceTicks(tLo, tHi)) {
    raster.line(X(tick), mt + plotH, X(tick), mt + plotH + 4, INK);
    raster.text(Math.round(X(tick)) - 8, mt + plotH + 8, sig(tick), INK);
    svg.line(X(tick), mt + plotH, X(tick), mt + plotH + 4, "#111111");
    svg.text(X(tick), mt + plotH + 16, sig(tick), 10, "middle");
  }
  for (const tick of niceTicks(0, dHi)) {
    raster.line(ml - 4, Y(tick), ml, Y(tick), INK);
    raster.line(ml, Y(tick), ml + plotW, Y(tick), GRID_LINE);
    raster.text(4, Math.round(Y(tick)) - 3, sig(tick), INK);
    svg.line(ml - 4, Y(tick), ml, Y(tick), "#111111");
    svg.line(ml, Y(tick), ml + plotW, Y(tick), "#c8c8cd");
    svg.text(ml - 8, Y(tick) + 3, sig(tick), 10, "end");
  }
  raster.fillRect(ml, mt + plotH, plotW, 1, INK);
  raster.fillRect(ml, mt, 1, plotH, INK);
  svg.line(ml, mt + plotH, ml + plotW, mt + plotH, "#111111");
  svg.line(ml, mt, ml, mt + plotH, "#111111");
  raster.text(ml + Math.floor(plotW / 2) - 3, height - 14, "t", INK);
  svg.text(ml + plotW / 2, height - 10, "t", 12, "middle");

  let d = "";
  for (let i = 0; i < ts.length; i++) {
    const px = X(ts[i]);
    const py = Y(ds[i]);
    d += (i === 0 ? "M" : "L") + px.toFixed(2) + " " + py.toFixed(2);
    if (i > 0) raster.line(X(ts[i - 1]), Y(ds[i - 1]), px, py, [18, 60, 140]);
    raster.disc(px, py, 2, [18, 60, 140]);
    svg.circle(px, py, 2.4, "#123c8c");
  }
  svg.path(d, "#123c8c", 1.6);
  return { svg: svg.render(), png: encodePng(width, height, raster.data) };
}

// ---------------------------------------------------------------------------
// scaling figure

export function renderScaling(pointsPath: string, reportPath: string): FigureOutput {
  const points: SweepPoint[] = readSweepPoints(pointsPath).filter((p) => p.kind === "h");
  if (points.length < 2) throw new Error("scaling figure needs at least two h points");
  const report = readSweepReport(reportPath);
  const fit = report.h_sweep;
  if (!fit || typeof fit.slope !== "number" || typeof fit.intercept !== "number") {
    throw new Error("sweep report has no fitted h-slope");
  }
  const lx = points.map((p) => Math.log10(p.h));
  const ly = points.map((p) => Math.log10(p.traceDist));
  const width = 640;
  const height = 420;
  const ml = 84;
  const mr = 24;
  const mt = 36;
  const mb = 56;
  const plotW = width - ml - mr;
  const plotH = height - mt - mb;
  const xLo = Math.min(...lx) - 0.1;
  const xHi = Math.max(...lx) + 0.1;
  const yLo = Math.min(...ly) - 0.2;
  const yHi = Math.max(...ly) + 0.2;
  const X = (v: number) => ml + ((v - xLo) / (xHi - xLo)) * plotW;
  const Y = (v: number) => mt + plotH - ((v - yLo) / (yHi - yLo)) * plotH;

  const raster = new Raster(width, height);
  const svg = new Svg(width, height);
  const title = "trace distance vs h (log-log)";
  raster.text(Math.floor((width - textWidth(title)) / 2), 12, title, INK);
  svg.text(width / 2, 20, title, 13, "middle");

  for (const tick of niceTicks(xLo, xHi)) {
    raster.line(X(tick), mt + plotH, X(tick), mt + plotH + 4, INK);
    raster.text(Math.round(X(tick)) - 14, mt + plotH + 8, sig(tick), INK);
    svg.line(X(tick), mt + plotH, X(tick), mt + plotH + 4, "#111111");
    svg.text(X(tick), mt + plotH + 16, sig(tick), 10, "middle");
  }
  for (const tick of niceTicks(yLo, yHi)) {
    raster.line(ml - 4, Y(tick), ml, Y(tick), INK);
    raster.line(ml, Y(tick), ml + plotW, Y(tick), GRID_LINE);
    raster.text(4, Math.round(Y(tick)) - 3, sig(tick), INK);
    svg.line(ml - 4, Y(tick), ml, Y(tick), "#111111");
    svg.line(ml, Y(tick), ml + plotW, Y(tick), "#c8c8cd");
    svg.text(ml - 8, Y(tick) + 3, sig(tick), 10, "end");
  }
  raster.fillRect(ml, mt + plotH, plotW, 1, INK);
  raster.fillRect(ml, mt, 1, plotH, INK);
  svg.line(ml, mt + plotH, ml + plotW, mt + plotH, "#111111");
  svg.line(ml, mt, ml, mt + plotH, "#111111");
  raster.text(ml + Math.floor(plotW / 2) - 24, height - 14, "log10(h)", INK);
  svg.text(ml + plotW / 2, height - 10, "log10 h", 12, "middle");

  // fitted line: ln(d) = slope ln(h) + intercept  =>  log10 d = slope log10 h + intercept/ln 10
  const b10 = fit.intercept / Math.LN10;
  const yAt = (x: number) => fit.slope! * x + b10;
  raster.line(X(xLo), Y(yAt(xLo)), X(xHi), Y(yAt(xHi)), [180, 60, 30]);
  svg.line(X(xLo), Y(yAt(xLo)), X(xHi), Y(yAt(xHi)), "#b43c1e", 1.5);

  for (let i = 0; i < lx.length; i++) {
    raster.disc(X(lx[i]), Y(ly[i]), 3, [18, 60, 140]);
    svg.circle(X(lx[i]), Y(ly[i]), 3, "#123c8c");
  }

  const slopeNote = `slope = ${fit.slope.toFixed(8)}`;
  const r2 = typeof fit.r_squared === "number" ? `  R^2 = ${fit.r_squared.toFixed(4)}` : "";
  raster.text(ml + 12, mt + 8, slopeNote + r2, INK);
  svg.text(ml + 12, mt + 16, slopeNote + r2, 12);
  return { svg: svg.render(), png: encodePng(width, height, raster.data) };
}
