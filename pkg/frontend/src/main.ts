#!/usr/bin/env node
// render --kind decay|wkb|heatmap --in <csv...> --out <img.svg> [--summary <csv>]
//
// Exit codes: 0 ok, 2 schema mismatch / usage, 3 empty data.

import { readFileSync, writeFileSync } from "node:fs";
import { SchemaError, loadCsv, parseSummary } from "./csv.js";
import { EmptyDataError, renderDecay, renderHeatmap, renderWkb } from "./plots.js";

interface Args {
  kind: string;
  inputs: string[];
  out: string;
  summary: string | null;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { kind: "", inputs: [], out: "", summary: null };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--kind":
        args.kind = argv[++i];
        break;
      case "--in":
        while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
          args.inputs.push(argv[++i]);
        }
        break;
      case "--out":
        args.out = argv[++i];
        break;
      case "--summary":
        args.summary = argv[++i];
        break;
      default:
        throw new SchemaError(`unknown argument ${argv[i]}`);
    }
  }
  if (!args.kind || args.inputs.length === 0 || !args.out) {
    throw new SchemaError("usage: render --kind decay|wkb|heatmap --in <csv...> --out <svg>");
  }
  return args;
}

export function renderJob(args: Args): string {
  const doc = loadCsv(args.inputs[0]);
  switch (args.kind) {
    case "decay": {
      const summary = args.summary ? parseSummary(readFileSync(args.summary, "utf-8")) : null;
      return renderDecay(doc, summary);
    }
    case "wkb":
      return renderWkb(doc);
    case "heatmap":
      return renderHeatmap(doc);
    default:
      throw new SchemaError(`unknown plot kind ${args.kind}`);
  }
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const svg = renderJob(args);
    writeFileSync(args.out, svg);
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof EmptyDataError) {
      console.error(`empty data: ${(err as Error).message}`);
      return 3;
    }
    if (err instanceof SchemaError || (err as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`error: ${(err as Error).message}`);
      return 2;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("main.js")) {
  process.exit(main(process.argv.slice(2)));
}
