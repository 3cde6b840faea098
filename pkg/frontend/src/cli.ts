#!/usr/bin/env node
import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { parseCsv } from "./csv.js";
import { buildFigure, Kind, KINDS } from "./series.js";
import { renderSvg } from "./svg.js";

function parseArgs(argv: string[]) {
  return yargs(argv)
    .usage("plot --kind <kind> --in <csv> --out <svg>")
    .option("kind", {
      choices: KINDS,
      demandOption: true,
      describe: "which figure to draw",
    })
    .option("in", {
      type: "string",
      demandOption: true,
      describe: "input CSV produced by the experiment runner",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output SVG path",
    })
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new Error(msg);
    })
    .parseSync();
}

/** Returns the exit code; writes the SVG only on success. */
export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
  } catch (e) {
    console.error((e as Error).message);
    return 2;
  }

  let text: string;
  try {
    text = readFileSync(args.in, "utf-8");
  } catch (e) {
    console.error(`cannot read ${args.in}: ${(e as Error).message}`);
    return 1;
  }
  let svg: string;
  try {
    const rows = parseCsv(text);
    svg = renderSvg(buildFigure(args.kind as Kind, rows));
  } catch (e) {
    console.error(`plot failed: ${(e as Error).message}`);
    return 1;
  }
  writeFileSync(args.out, svg, "utf-8");
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("/plot")) {
  process.exit(main(hideBin(process.argv)));
}
