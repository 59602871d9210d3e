import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import type { EpisodeLog } from "../src/types.js";
import { replayEpisode } from "../src/keystrokes.js";
import { driveScriptedSession } from "./helpers/scripted.js";

const logPath = fileURLToPath(new URL("../fixtures/session_log.jsonl", import.meta.url));

describe("committed session-log fixture", () => {
  it("matches a fresh scripted session byte for byte", async () => {
    const committed = readFileSync(logPath, "utf-8");
    const session = await driveScriptedSession();
    expect(session.exportLog() + "\n").toBe(committed);
  });

  it("replays to its own recorded counts", () => {
    const lines = readFileSync(logPath, "utf-8").trim().split("\n");
    const episodes = lines.map((line) => JSON.parse(line) as EpisodeLog);
    expect(episodes.length).toBeGreaterThan(0);
    for (const episode of episodes) {
      expect(replayEpisode(episode)).toBe(episode.keystrokes);
    }
  });
});
