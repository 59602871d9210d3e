import { SuggestClient } from "./client.js";
import type {
  CandidateScore,
  EpisodeLog,
  Mode,
  SuggestionResponse,
} from "./types.js";

export type KeyInput =
  | { kind: "char"; char: string }
  | { kind: "accept" }
  | { kind: "backspace" };

export interface SessionCounters {
  chars: number;
  accepts: number;
}

export interface SessionOptions {
  source: string[];
  client: SuggestClient;
  rightContext?: string[];
  mode?: Mode;
  k?: number;
  onUpdate?: () => void;
}

/**
 * State machine behind the typing workbench.
 *
 * The typed buffer is always a prefix of every displayed candidate (the
 * service enforces the prefix constraint), responses are applied only when
 * they still match the buffer, and a completed word — accepted or fully
 * typed — is appended to the committed context and logged as an episode.
 */
export class Session {
  readonly source: string[];
  readonly rightContext: string[];
  mode: Mode;
  typed = "";
  committed: string[] = [];
  suggestions: CandidateScore[] = [];
  trace: number[] | null = null;
  counters: SessionCounters = { chars: 0, accepts: 0 };
  episodes: EpisodeLog[] = [];
  /** Set when the service is unreachable; typing is never blocked. */
  stale = false;

  private readonly client: SuggestClient;
  private readonly k?: number;
  private readonly onUpdate: () => void;
  private seenSuggestions: Record<string, string | null> = {};

  constructor(options: SessionOptions) {
    this.source = options.source;
    this.rightContext = options.rightContext ?? [];
    this.client = options.client;
    this.mode = options.mode ?? "rerank";
    this.k = options.k;
    this.onUpdate = options.onUpdate ?? (() => undefined);
  }

  onKeystroke(input: KeyInput): void {
    if (input.kind === "char") {
      if (input.char === " ") {
        this.commitTypedWord();
        return;
      }
      this.typed += input.char;
      this.counters.chars += 1;
      this.query();
    } else if (input.kind === "backspace") {
      if (this.typed.length === 0) {
        return; // nothing to erase, no request either
      }
      this.typed = this.typed.slice(0, -1);
      if (this.typed.length > 0) {
        this.query();
      } else {
        this.client.cancel();
        this.suggestions = [];
        this.trace = null;
      }
    } else {
      this.acceptTop();
    }
    this.onUpdate();
  }

  topSuggestion(): string | null {
    return this.suggestions.length > 0 ? this.suggestions[0].word : null;
  }

  /** JSON-lines export consumable by the offline keystroke simulator. */
  exportLog(): string {
    return this.episodes.map((episode) => JSON.stringify(episode)).join("\n");
  }

  private query(): void {
    const typedAtIssue = this.typed;
    this.client.request(
      {
        source: this.source,
        left_ctx: [...this.committed],
        right_ctx: this.rightContext,
        typed: typedAtIssue,
        ...(this.k !== undefined ? { k: this.k } : {}),
      },
      (response, error) => {
        if (this.typed !== typedAtIssue) {
          return; // superseded by further typing
        }
        if (error !== undefined) {
          this.stale = true;
          this.onUpdate();
          return;
        }
        this.stale = false;
        this.applyResponse(typedAtIssue, response);
        this.onUpdate();
      },
    );
  }

  private applyResponse(typed: string, response: SuggestionResponse | null): void {
    if (response === null || response.candidates.length === 0) {
      this.suggestions = [];
      this.trace = null;
      this.seenSuggestions[String(typed.length)] = null;
      return;
    }
    const ordered = [...response.candidates].sort((a, b) => a.final_rank - b.final_rank);
    this.suggestions =
      this.mode === "rerank"
        ? ordered
        : [...response.candidates].sort((a, b) => a.baseline_rank - b.baseline_rank);
    this.trace = response.trace;
    this.seenSuggestions[String(typed.length)] = this.suggestions[0].word;
  }

  private acceptTop(): void {
    const word = this.topSuggestion();
    if (word === null) {
      return;
    }
    this.finishWord(word, this.typed.length + 1, true);
    this.counters.accepts += 1;
  }

  private commitTypedWord(): void {
    if (this.typed.length === 0) {
      return;
    }
    this.finishWord(this.typed, this.typed.length, false);
  }

  private finishWord(word: string, keystrokes: number, accepted: boolean): void {
    this.episodes.push({
      source: [...this.source],
      left_ctx: [...this.committed],
      right_ctx: [...this.rightContext],
      gold: word,
      suggestions: { ...this.seenSuggestions },
      keystrokes,
      accepted,
    });
    this.committed.push(word);
    this.typed = "";
    this.seenSuggestions = {};
    this.suggestions = [];
    this.trace = null;
    this.client.cancel();
  }
}
