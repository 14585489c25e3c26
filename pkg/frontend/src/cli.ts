#!/usr/bin/env tsx
// Figure regeneration CLI.
//
// Usage:
//   tsx src/cli.ts series --input "runs/M4_t*/metrics.csv:M=4" [--input ...] \
//       --x round --y test_acc --out out/series.svg
//   tsx src/cli.ts norm-prediction --input "...:M=4" --input "...:M=16" \
//       --reference M=4 --out out/norm.svg
//   tsx src/cli.ts box --input "box/M4.summary.json:M=4" [--input ...] --out out/box.svg
//   tsx src/cli.ts heatmap --grid grid/grid_summary.json \
//       --metric final_test_acc --out out/heatmap.svg
//
// An --input argument is "<glob-or-path>:<label>" (label after the last colon).

import { MetricsField } from "./csv.js";
import { expandGlob } from "./glob.js";
import { LabeledRuns, plotBoxes, plotHeatmap, plotNormPrediction, plotSeries } from "./plots.js";

interface Args {
  positional: string[];
  options: Map<string, string[]>;
}

function parseArgs(argv: string[]): Args {
  const positional: string[] = [];
  const options = new Map<string, string[]>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const name = arg.slice(2);
      const value = argv[++i];
      if (value === undefined) throw new Error(`missing value for --${name}`);
      options.set(name, [...(options.get(name) ?? []), value]);
    } else {
      positional.push(arg);
    }
  }
  return { positional, options };
}

function single(args: Args, name: string, fallback?: string): string {
  const values = args.options.get(name);
  if (!values) {
    if (fallback !== undefined) return fallback;
    throw new Error(`--${name} is required`);
  }
  if (values.length !== 1) throw new Error(`--${name} given more than once`);
  return values[0];
}

function splitLabel(spec: string): { pattern: string; label: string } {
  const idx = spec.lastIndexOf(":");
  if (idx <= 0 || idx === spec.length - 1) {
    throw new Error(`--input must be "<path-or-glob>:<label>", got '${spec}'`);
  }
  return { pattern: spec.slice(0, idx), label: spec.slice(idx + 1) };
}

function labeledRuns(args: Args): LabeledRuns[] {
  const inputs = args.options.get("input");
  if (!inputs || inputs.length === 0) throw new Error("at least one --input is required");
  return inputs.map((spec) => {
    const { pattern, label } = splitLabel(spec);
    const csvPaths = expandGlob(pattern);
    if (csvPaths.length === 0) throw new Error(`no files match '${pattern}'`);
    return { label, csvPaths };
  });
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  const command = args.positional[0];
  try {
    if (command === "series") {
      const data = plotSeries(labeledRuns(args),
                              single(args, "x", "round") as MetricsField,
                              single(args, "y") as MetricsField,
                              single(args, "out"));
      console.log(`wrote ${single(args, "out")} (${data.length} labels)`);
    } else if (command === "norm-prediction") {
      const data = plotNormPrediction(labeledRuns(args), single(args, "reference"),
                                      single(args, "out"));
      console.log(`wrote ${single(args, "out")} (${data.length} labels)`);
    } else if (command === "box") {
      const inputs = (args.options.get("input") ?? []).map((spec) => {
        const { pattern, label } = splitLabel(spec);
        const paths = expandGlob(pattern);
        if (paths.length !== 1) {
          throw new Error(`box input '${pattern}' must match exactly one file, got ${paths.length}`);
        }
        return { label, path: paths[0] };
      });
      const data = plotBoxes(inputs, single(args, "out"));
      console.log(`wrote ${single(args, "out")} (${data.length} boxes)`);
    } else if (command === "heatmap") {
      plotHeatmap(single(args, "grid"), single(args, "metric", "final_test_acc"),
                  single(args, "out"));
      console.log(`wrote ${single(args, "out")}`);
    } else {
      console.error("usage: cli.ts <series|norm-prediction|box|heatmap> ...");
      return 2;
    }
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.ts")) {
  process.exit(main(process.argv.slice(2)));
}
