import { histogram, replayEpisode } from "./keystrokes.js";
import type { EpisodeLog } from "./types.js";

export interface SessionSummary {
  words: number;
  totalKeystrokes: number;
  averageKeystrokes: number;
  /** keystroke count -> proportion of words */
  histogram: Record<number, number>;
}

/** Aggregate the per-word keystroke history with the shared counting rule. */
export function sessionSummary(episodes: EpisodeLog[]): SessionSummary {
  if (episodes.length === 0) {
    throw new Error("summary needs at least one completed word");
  }
  const counts = episodes.map((episode) => episode.keystrokes);
  const total = counts.reduce((a, b) => a + b, 0);
  return {
    words: episodes.length,
    totalKeystrokes: total,
    averageKeystrokes: total / counts.length,
    histogram: histogram(counts),
  };
}

/** Recount a log with the simulator rule; equals the UI counts on UI-driven logs. */
export function recountFromLog(episodes: EpisodeLog[]): number[] {
  return episodes.map(replayEpisode);
}
