/** Aggregation used by the plots: trial bands, percentiles, norm prediction. */

export function mean(values: number[]): number {
  if (values.length === 0) throw new Error("mean of empty list");
  return values.reduce((a, b) => a + b, 0) / values.length;
}

/** Population standard deviation (bands collapse onto the line for 1 trial). */
export function populationStd(values: number[]): number {
  const m = mean(values);
  return Math.sqrt(mean(values.map((v) => (v - m) ** 2)));
}

/** Linear-interpolation percentile: value at fractional rank (n-1)*p/100. */
export function percentile(sortedValues: number[], p: number): number {
  if (sortedValues.length === 0) throw new Error("percentile of empty list");
  const rank = ((sortedValues.length - 1) * p) / 100;
  const lo = Math.floor(rank);
  const hi = Math.ceil(rank);
  if (lo === hi) return sortedValues[lo];
  return sortedValues[lo] + (sortedValues[hi] - sortedValues[lo]) * (rank - lo);
}

export const BOX_PERCENTILES = [5, 25, 50, 75, 95] as const;

export function boxLevels(values: number[]): Record<number, number> {
  const sorted = [...values].sort((a, b) => a - b);
  const out: Record<number, number> = {};
  for (const p of BOX_PERCENTILES) out[p] = percentile(sorted, p);
  return out;
}

/** Inverse-square-root rule: norm expected at `cohort` given a reference. */
export function predictedNorm(normRef: number, cohortRef: number, cohort: number): number {
  if (normRef <= 0 || cohortRef < 1 || cohort < 1) {
    throw new Error("predictedNorm requires positive arguments");
  }
  return normRef * Math.sqrt(cohortRef / cohort);
}
