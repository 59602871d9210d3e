import type { SuggestRequestBody, SuggestionResponse } from "./types.js";

/** Transport resolves with a response, null for a no-candidate reply, or rejects. */
export type SuggestTransport = (
  body: SuggestRequestBody,
) => Promise<SuggestionResponse | null>;

export type SuggestCallback = (
  response: SuggestionResponse | null,
  error?: unknown,
) => void;

/**
 * Debounced latest-wins request funnel.
 *
 * Keystrokes arriving within the debounce window collapse into a single
 * request for the newest buffer; responses for superseded requests are
 * dropped so the UI never renders stale candidates.
 */
export class SuggestClient {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private seq = 0;
  private issued = 0;

  constructor(
    private readonly transport: SuggestTransport,
    private readonly debounceMs: number = 50,
  ) {}

  /** Number of requests actually handed to the transport. */
  get issuedCount(): number {
    return this.issued;
  }

  request(body: SuggestRequestBody, callback: SuggestCallback): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    const mine = ++this.seq;
    this.timer = setTimeout(() => {
      this.timer = null;
      this.issued += 1;
      this.transport(body).then(
        (response) => {
          if (mine === this.seq) callback(response);
        },
        (error) => {
          if (mine === this.seq) callback(null, error);
        },
      );
    }, this.debounceMs);
  }

  /** Drop the pending request and ignore any in-flight response. */
  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.seq += 1;
  }
}

/** fetch-based transport for the real service; 400 no-candidate maps to null. */
export function httpTransport(baseUrl: string): SuggestTransport {
  return async (body) => {
    const response = await fetch(`${baseUrl}/suggest`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (response.status === 400) {
      const payload = await response.json().catch(() => ({}));
      if (payload && payload.error === "no-candidate") return null;
      throw new Error(`bad request: ${JSON.stringify(payload)}`);
    }
    if (!response.ok) {
      throw new Error(`service error ${response.status}`);
    }
    return (await response.json()) as SuggestionResponse;
  };
}
