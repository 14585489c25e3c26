/** Metrics CSV parsing (the schema written by the simulator CLI). */

import { readFileSync } from "fs";

export const CSV_COLUMNS = [
  "round", "cohort_size", "train_loss", "train_acc", "test_loss", "test_acc",
  "pg_norm", "pg_norm_predicted", "cosine_avg", "clip_fraction", "clip_level",
  "lr_server", "examples_round", "examples_cum", "runtime_round", "runtime_cum",
  "failure",
] as const;

export type MetricsField = (typeof CSV_COLUMNS)[number];

export type MetricsRow = Record<MetricsField, number | null>;

export function parseMetricsCsv(text: string, source = "<csv>"): MetricsRow[] {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0 || lines[0] !== CSV_COLUMNS.join(",")) {
    throw new Error(`${source}: unexpected CSV header`);
  }
  const rows: MetricsRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== CSV_COLUMNS.length) {
      throw new Error(`${source}: line ${i + 1}: expected ${CSV_COLUMNS.length} fields`);
    }
    const row = {} as MetricsRow;
    CSV_COLUMNS.forEach((name, j) => {
      if (cells[j] === "") {
        row[name] = null;
      } else {
        const value = Number(cells[j]);
        if (Number.isNaN(value)) {
          throw new Error(`${source}: line ${i + 1}: bad number in '${name}'`);
        }
        row[name] = value;
      }
    });
    rows.push(row);
  }
  return rows;
}

export function readMetricsCsv(path: string): MetricsRow[] {
  return parseMetricsCsv(readFileSync(path, "utf-8"), path);
}

export interface RunSummary {
  per_client_test_accuracy: number[];
  per_client_train_accuracy: number[];
  final: Record<string, number | null>;
  [key: string]: unknown;
}

export function readSummaryJson(path: string): RunSummary {
  return JSON.parse(readFileSync(path, "utf-8")) as RunSummary;
}

export interface GridCell {
  local_steps: number | null;
  cohort_size: number | null;
  runs: string[];
  final_test_acc: (number | null)[];
  final_test_acc_mean: number | null;
  rounds_to_threshold: Record<string, (number | null)[]>;
  rounds_to_threshold_median: Record<string, number | null>;
}

export interface GridSummary {
  local_steps_axis: (number | null)[];
  cohort_sizes_axis: (number | null)[];
  trials: number;
  thresholds: string[];
  cells: GridCell[];
}

export function readGridSummary(path: string): GridSummary {
  return JSON.parse(readFileSync(path, "utf-8")) as GridSummary;
}
