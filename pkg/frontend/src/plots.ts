/**
 * The four figure families regenerated from run artifacts:
 *
 *   series          - per-label mean line with a +/-1 std band across trials
 *   norm-prediction - measured update-norm curves plus dashed inverse-sqrt
 *                     predictions derived from a reference label
 *   box             - per-client accuracy percentiles (5/25/50/75/95) per run
 *   heatmap         - local-steps x cohort-size grid of sweep outcomes
 *
 * Every number that appears in a figure is computed here from the input
 * files; rendering adds no numbers.
 */

import { mkdirSync, writeFileSync } from "fs";
import { dirname } from "path";

import { MetricsField, MetricsRow, readGridSummary, readMetricsCsv, readSummaryJson } from "./csv.js";
import { boxLevels, mean, populationStd, predictedNorm } from "./stats.js";
import { MARGIN, PALETTE, SvgBuilder, extent, fmtTick, linearScale, plotArea } from "./svg.js";

export interface LabeledRuns {
  label: string;
  csvPaths: string[];
}

export interface SeriesData {
  label: string;
  x: number[];
  mean: number[];
  std: number[];
}

function alignedColumn(runs: MetricsRow[][], xField: MetricsField, yField: MetricsField,
                       label: string): { x: number[]; values: number[][] } {
  const perTrial = runs.map((rows) =>
    rows
      .filter((r) => r[yField] !== null && r[xField] !== null)
      .map((r) => [r[xField] as number, r[yField] as number] as const),
  );
  const x = perTrial[0].map(([xv]) => xv);
  perTrial.forEach((pairs, i) => {
    if (pairs.length !== x.length || pairs.some(([xv], j) => xv !== x[j])) {
      throw new Error(`label '${label}': trial ${i} has a different ${xField} grid`);
    }
  });
  const values = x.map((_, j) => perTrial.map((pairs) => pairs[j][1]));
  return { x, values };
}

export function buildSeries(bundle: LabeledRuns[], xField: MetricsField,
                            yField: MetricsField): SeriesData[] {
  if (bundle.length === 0) throw new Error("empty bundle");
  return bundle.map(({ label, csvPaths }) => {
    if (csvPaths.length === 0) throw new Error(`label '${label}' has no trials`);
    const runs = csvPaths.map(readMetricsCsv);
    const { x, values } = alignedColumn(runs, xField, yField, label);
    return {
      label,
      x,
      mean: values.map(mean),
      std: values.map(populationStd),
    };
  });
}

function writeSvg(outPath: string, markup: string): void {
  mkdirSync(dirname(outPath), { recursive: true });
  writeFileSync(outPath, markup);
}

export function renderSeries(data: SeriesData[], xField: string, yField: string): string {
  const area = plotArea();
  const xs = data.flatMap((d) => d.x);
  const ys = data.flatMap((d) => d.mean.flatMap((m, i) => [m - d.std[i], m + d.std[i]]));
  const xScale = linearScale(extent(xs), area.x);
  const yScale = linearScale(extent(ys), area.y);
  const svg = new SvgBuilder();
  data.forEach((d, i) => {
    const color = PALETTE[i % PALETTE.length];
    const upper = d.x.map((xv, j) => [xScale(xv), yScale(d.mean[j] + d.std[j])] as [number, number]);
    const lower = d.x.map((xv, j) => [xScale(xv), yScale(d.mean[j] - d.std[j])] as [number, number]);
    svg.polygon([...upper, ...lower.reverse()], color, 0.18);
    svg.path(d.x.map((xv, j) => [xScale(xv), yScale(d.mean[j])]), color, 2);
  });
  svg.axes(xScale, yScale, xField, yField);
  svg.legend(data.map((d, i) => ({ label: d.label, color: PALETTE[i % PALETTE.length] })));
  return svg.finish();
}

export function plotSeries(bundle: LabeledRuns[], xField: MetricsField, yField: MetricsField,
                           outPath: string): SeriesData[] {
  const data = buildSeries(bundle, xField, yField);
  writeSvg(outPath, renderSeries(data, xField, yField));
  return data;
}

export interface NormPredictionData {
  label: string;
  x: number[];
  actual: number[];
  cohortSize: number[];
  /** inverse-sqrt prediction from the reference label; null for the reference itself */
  predicted: number[] | null;
}

export function buildNormPrediction(bundle: LabeledRuns[],
                                    referenceLabel: string): NormPredictionData[] {
  const series = bundle.map(({ label, csvPaths }) => {
    const runs = csvPaths.map(readMetricsCsv);
    const norm = alignedColumn(runs, "round", "pg_norm", label);
    const cohort = alignedColumn(runs, "round", "cohort_size", label);
    return {
      label,
      x: norm.x,
      actual: norm.values.map(mean),
      cohortSize: cohort.values.map((vals) => {
        if (vals.some((v) => v !== vals[0])) {
          throw new Error(`label '${label}': trials disagree on cohort size`);
        }
        return vals[0];
      }),
    };
  });
  const reference = series.find((s) => s.label === referenceLabel);
  if (!reference) throw new Error(`reference label '${referenceLabel}' not in bundle`);
  return series.map((s) => {
    if (s.label === referenceLabel) return { ...s, predicted: null };
    if (s.x.length !== reference.x.length || s.x.some((xv, i) => xv !== reference.x[i])) {
      throw new Error(`label '${s.label}': round grid differs from the reference`);
    }
    const predicted = s.x.map((_, i) =>
      predictedNorm(reference.actual[i], reference.cohortSize[i], s.cohortSize[i]));
    return { ...s, predicted };
  });
}

export function renderNormPrediction(data: NormPredictionData[]): string {
  const area = plotArea();
  const xs = data.flatMap((d) => d.x);
  const ys = data.flatMap((d) => [...d.actual, ...(d.predicted ?? [])]);
  const xScale = linearScale(extent(xs), area.x);
  const yScale = linearScale(extent(ys), area.y);
  const svg = new SvgBuilder();
  const legend: Array<{ label: string; color: string; dash?: string }> = [];
  data.forEach((d, i) => {
    const color = PALETTE[i % PALETTE.length];
    svg.path(d.x.map((xv, j) => [xScale(xv), yScale(d.actual[j])]), color, 2);
    legend.push({ label: d.label, color });
    if (d.predicted) {
      svg.path(d.x.map((xv, j) => [xScale(xv), yScale(d.predicted![j])]), color, 1.5, "6,4");
      legend.push({ label: `${d.label} predicted`, color, dash: "6,4" });
    }
  });
  svg.axes(xScale, yScale, "round", "pg_norm");
  svg.legend(legend);
  return svg.finish();
}

export function plotNormPrediction(bundle: LabeledRuns[], referenceLabel: string,
                                   outPath: string): NormPredictionData[] {
  const data = buildNormPrediction(bundle, referenceLabel);
  writeSvg(outPath, renderNormPrediction(data));
  return data;
}

export interface BoxData {
  label: string;
  levels: Record<number, number>;
}

export function buildBoxes(inputs: Array<{ label: string; path: string }>): BoxData[] {
  if (inputs.length === 0) throw new Error("no box inputs");
  return inputs.map(({ label, path }) => {
    const summary = readSummaryJson(path);
    const accuracies = summary.per_client_test_accuracy.length > 0
      ? summary.per_client_test_accuracy
      : summary.per_client_train_accuracy;
    if (!accuracies || accuracies.length === 0) {
      throw new Error(`${path}: no per-client accuracies`);
    }
    return { label, levels: boxLevels(accuracies) };
  });
}

export function renderBoxes(data: BoxData[]): string {
  const area = plotArea();
  const ys = data.flatMap((d) => Object.values(d.levels));
  const yScale = linearScale(extent(ys), area.y);
  const svg = new SvgBuilder();
  const slot = (area.x[1] - area.x[0]) / data.length;
  data.forEach((d, i) => {
    const cx = area.x[0] + slot * (i + 0.5);
    const half = Math.min(34, slot * 0.3);
    const y = (p: number) => yScale(d.levels[p]);
    svg.line(cx, y(5), cx, y(25), "#222");
    svg.line(cx, y(75), cx, y(95), "#222");
    svg.line(cx - half * 0.6, y(5), cx + half * 0.6, y(5), "#222");
    svg.line(cx - half * 0.6, y(95), cx + half * 0.6, y(95), "#222");
    svg.rect(cx - half, Math.min(y(25), y(75)), 2 * half, Math.abs(y(25) - y(75)),
             "#9ecae1", "#222");
    svg.line(cx - half, y(50), cx + half, y(50), "#d62728", 2);
    svg.text(cx, area.y[0] + 18, d.label);
  });
  const yTicks = linearScale(extent(ys), area.y);
  svg.axes(linearScale([0, data.length], area.x), yTicks, "", "per-client accuracy");
  return svg.finish();
}

export function plotBoxes(inputs: Array<{ label: string; path: string }>,
                          outPath: string): BoxData[] {
  const data = buildBoxes(inputs);
  writeSvg(outPath, renderBoxes(data));
  return data;
}

export interface HeatmapCellView {
  localSteps: number | null;
  cohortSize: number | null;
  value: number | null;
}

export interface HeatmapData {
  metric: string;
  stepsAxis: (number | null)[];
  cohortAxis: (number | null)[];
  cells: HeatmapCellView[];
}

export function buildHeatmap(gridPath: string, metric: string): HeatmapData {
  const grid = readGridSummary(gridPath);
  const cells = grid.cells.map((cell) => {
    let value: number | null;
    if (metric === "final_test_acc") {
      value = cell.final_test_acc_mean;
    } else if (metric.startsWith("rounds_to_threshold:")) {
      const key = metric.split(":")[1];
      if (!(key in cell.rounds_to_threshold_median)) {
        throw new Error(`grid has no threshold '${key}' (has ${Object.keys(cell.rounds_to_threshold_median)})`);
      }
      value = cell.rounds_to_threshold_median[key];
    } else {
      throw new Error(`unknown heatmap metric '${metric}'`);
    }
    return { localSteps: cell.local_steps, cohortSize: cell.cohort_size, value };
  });
  return {
    metric,
    stepsAxis: grid.local_steps_axis,
    cohortAxis: grid.cohort_sizes_axis,
    cells,
  };
}

function heatColor(value: number, lo: number, hi: number): string {
  const t = hi === lo ? 0.5 : (value - lo) / (hi - lo);
  const r = Math.round(40 + 215 * t);
  const b = Math.round(255 - 215 * t);
  return `rgb(${r},80,${b})`;
}

export function renderHeatmap(data: HeatmapData): string {
  const area = plotArea();
  const cols = data.stepsAxis.length;
  const rows = data.cohortAxis.length;
  const cellW = (area.x[1] - area.x[0]) / cols;
  const cellH = (area.y[0] - area.y[1]) / rows;
  const finite = data.cells.filter((c) => c.value !== null).map((c) => c.value as number);
  const [lo, hi] = finite.length > 0 ? [Math.min(...finite), Math.max(...finite)] : [0, 1];
  const svg = new SvgBuilder();
  const axisName = (v: number | null) => (v === null ? "base" : fmtTick(v));
  for (const cell of data.cells) {
    const col = data.stepsAxis.indexOf(cell.localSteps);
    const row = data.cohortAxis.indexOf(cell.cohortSize);
    const x = area.x[0] + col * cellW;
    // larger cohorts toward the top, mirroring the sweep presentation
    const y = area.y[0] - (row + 1) * cellH;
    if (cell.value === null) {
      svg.rect(x, y, cellW, cellH, "#cccccc", "#222");
      svg.text(x + cellW / 2, y + cellH / 2 + 4, "none");
    } else {
      svg.rect(x, y, cellW, cellH, heatColor(cell.value, lo, hi), "#222");
      svg.text(x + cellW / 2, y + cellH / 2 + 4, fmtTick(cell.value), "middle", "#fff");
    }
  }
  data.stepsAxis.forEach((v, i) => {
    svg.text(area.x[0] + (i + 0.5) * cellW, area.y[0] + 18, axisName(v));
  });
  data.cohortAxis.forEach((v, i) => {
    svg.text(area.x[0] - 10, area.y[0] - (i + 0.5) * cellH + 4, axisName(v), "end");
  });
  svg.text((area.x[0] + area.x[1]) / 2, 420 - 8, "local steps");
  svg.raw(`<text x="16" y="${(area.y[0] + area.y[1]) / 2}" text-anchor="middle" fill="#222" ` +
          `transform="rotate(-90 16 ${(area.y[0] + area.y[1]) / 2})">cohort size</text>`);
  svg.text((area.x[0] + area.x[1]) / 2, MARGIN.top - 10, data.metric);
  return svg.finish();
}

export function plotHeatmap(gridPath: string, metric: string, outPath: string): HeatmapData {
  const data = buildHeatmap(gridPath, metric);
  writeSvg(outPath, renderHeatmap(data));
  return data;
}
