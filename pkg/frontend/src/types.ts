/** Wire types mirrored from the suggestion service JSON API. */

export interface CandidateScore {
  word: string;
  baseline_prob: number;
  baseline_rank: number;
  energy: number | null;
  final_rank: number;
}

export interface SuggestionResponse {
  chosen: string;
  candidates: CandidateScore[];
  trace: number[] | null;
}

export interface SuggestRequestBody {
  source: string[];
  left_ctx: string[];
  right_ctx: string[];
  typed: string;
  k?: number;
}

export interface HealthResponse {
  status: string;
  model_kinds: string[];
  vocab_sizes: { source: number; target: number };
}

/** One completed word in a session, exported for offline keystroke analysis. */
export interface EpisodeLog {
  source: string[];
  left_ctx: string[];
  right_ctx: string[];
  gold: string;
  /** Top suggestion shown at each typed-prefix length (null = none shown). */
  suggestions: Record<string, string | null>;
  keystrokes: number;
  accepted: boolean;
}

export type Mode = "rerank" | "baseline-only";
