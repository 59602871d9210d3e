export interface HeatCell {
  token: string;
  weight: number;
  /** Display intensity, normalized so the strongest weight renders at 1. */
  intensity: number;
}

/**
 * Map a served attention row onto per-source-token intensities.
 *
 * Returns null when the response carries no usable trace, which hides the
 * heatmap panel.  Intensities are proportional to the weights, so their
 * ordering always matches the weight ordering.
 */
export function renderAttention(
  source: string[],
  trace: number[] | null | undefined,
): HeatCell[] | null {
  if (!trace || trace.length !== source.length || trace.length === 0) {
    return null;
  }
  const max = Math.max(...trace);
  return source.map((token, index) => ({
    token,
    weight: trace[index],
    intensity: max > 0 ? trace[index] / max : 0,
  }));
}
