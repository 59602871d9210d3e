import type { EpisodeLog } from "./types.js";

/**
 * Keystroke accounting shared with the evaluation backend: characters are
 * revealed left to right, a suggestion equal to the word costs one extra
 * acceptance keystroke, and never matching costs the full word length.
 */
export function episodeKeystrokes(
  top1: (typed: string) => string | null,
  gold: string,
): number {
  for (let prefixLen = 1; prefixLen < gold.length; prefixLen += 1) {
    if (top1(gold.slice(0, prefixLen)) === gold) {
      return prefixLen + 1;
    }
  }
  return gold.length;
}

/** Replay a logged episode through the counting rule. */
export function replayEpisode(episode: EpisodeLog): number {
  return episodeKeystrokes(
    (typed) => episode.suggestions[String(typed.length)] ?? null,
    episode.gold,
  );
}

export function histogram(counts: number[]): Record<number, number> {
  const out: Record<number, number> = {};
  for (const count of counts) {
    out[count] = (out[count] ?? 0) + 1;
  }
  for (const key of Object.keys(out)) {
    out[Number(key)] = out[Number(key)] / counts.length;
  }
  return out;
}
