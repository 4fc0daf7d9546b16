#!/usr/bin/env node
/**
 * lfplab-render: render simulation artifacts into SVG + PNG figures.
 *
 * Usage:
 *   lfplab-render render --kind contour-pair   --in field.snap --in wigner.snap --out fig
 *   lfplab-render render --kind distance-curve --in metrics.csv --out fig
 *   lfplab-render render --kind scaling        --in points.csv --in report.json --out fig
 *
 * Writes <out>.svg and <out>.png; output bytes depend only on the inputs.
 */
import { writeFileSync } from "node:fs";

import { FigureOutput, renderContourPair, renderDistanceCurve, renderScaling } from "./figures.js";

interface Args {
  kind: string;
  inputs: string[];
  out: string;
}

export function parseArgs(argv: string[]): Args {
  if (argv[0] !== "render") {
    throw new Error("expected the 'render' subcommand");
  }
  let kind = "";
  const inputs: string[] = [];
  let out = "";
  for (let i = 1; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--kind") kind = argv[++i] ?? "";
    else if (a === "--in") inputs.push(argv[++i] ?? "");
    else if (a === "--out") out = argv[++i] ?? "";
    else throw new Error(`unknown argument ${a}`);
  }
  if (!kind || !out || inputs.length === 0) {
    throw new Error("render requires --kind, --out and at least one --in");
  }
  return { kind, inputs, out };
}

export function renderFigure(args: Args): FigureOutput {
  switch (args.kind) {
    case "contour-pair":
      if (args.inputs.length !== 2) throw new Error("contour-pair needs two --in snapshots");
      return renderContourPair(args.inputs[0], args.inputs[1]);
    case "distance-curve":
      if (args.inputs.length !== 1) throw new Error("distance-curve needs one --in metrics.csv");
      return renderDistanceCurve(args.inputs[0]);
    case "scaling":
      if (args.inputs.length !== 2) throw new Error("scaling needs --in points.csv --in report.json");
      return renderScaling(args.inputs[0], args.inputs[1]);
    default:
      throw new Error(`unknown figure kind ${args.kind}`);
  }
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const fig = renderFigure(args);
    writeFileSync(`${args.out}.svg`, fig.svg, "utf-8");
    writeFileSync(`${args.out}.png`, fig.png);
    console.log(`wrote ${args.out}.svg and ${args.out}.png`);
    return 0;
  } catch (err) {
    console.error(`lfplab-render: ${(err as Error).message}`);
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
