// Fixed five-bin quantile color ramp so treated and control choropleths
// stay visually comparable across runs.

export const RAMP = ["#fee8c8", "#fdbb84", "#fc8d59", "#e34a33", "#b30000"];
export const ZERO_COLOR = "#f2f0ee";
export const BINS = RAMP.length;

/** Quantile break points (upper edges) for the positive values. */
export function quantileBreaks(values: number[], bins = BINS): number[] {
  const positive = values.filter((v) => v > 0).sort((a, b) => a - b);
  if (positive.length === 0) return [];
  const breaks: number[] = [];
  for (let i = 1; i <= bins; i++) {
    const idx = Math.min(positive.length - 1, Math.ceil((i * positive.length) / bins) - 1);
    breaks.push(positive[idx]);
  }
  return breaks;
}

export function binFor(value: number, breaks: number[]): number {
  if (value <= 0 || breaks.length === 0) return -1;
  for (let i = 0; i < breaks.length; i++) {
    if (value <= breaks[i]) return i;
  }
  return breaks.length - 1;
}

export function colorFor(value: number, breaks: number[]): string {
  const bin = binFor(value, breaks);
  return bin < 0 ? ZERO_COLOR : RAMP[bin];
}

/** Symmetric blue/red ramp for delta layers (negative = less crime). */
export function deltaColor(delta: number, maxAbs: number): string {
  if (maxAbs <= 0 || delta === 0) return ZERO_COLOR;
  const t = Math.max(-1, Math.min(1, delta / maxAbs));
  return t < 0
    ? `rgba(33, 102, 172, ${Math.abs(t).toFixed(3)})`
    : `rgba(178, 24, 43, ${Math.abs(t).toFixed(3)})`;
}
