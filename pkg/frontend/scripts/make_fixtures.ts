/**
 * Regenerate the committed test fixtures:
 *   fixtures/session_log.jsonl     — episodes exported by the scripted session
 *   fixtures/golden_responses.json — 20 deterministic suggestion responses
 *
 * The session log is cross-checked by the backend's keystroke simulator, so
 * regenerate it only alongside intentional protocol changes.
 */
import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { fileURLToPath } from "node:url";

import { driveScriptedSession, SCRIPT_SOURCE } from "../tests/helpers/scripted.js";
import type { CandidateScore } from "../src/types.js";

const fixturesDir = fileURLToPath(new URL("../fixtures/", import.meta.url));

function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function goldenResponses(): unknown[] {
  const rand = mulberry32(20240811);
  const cases = [] as unknown[];
  for (let i = 0; i < 20; i += 1) {
    const length = 4 + Math.floor(rand() * 5);
    const source = Array.from({ length }, (_, p) => `s${i}_${p}`);
    const raw = source.map(() => 0.05 + rand());
    const total = raw.reduce((a, b) => a + b, 0);
    const trace = raw.map((w) => w / total);
    const words = ["alpha", "altern", "alloy"].map((w) => `${w}${i}`);
    const candidates: CandidateScore[] = words.map((word, rank) => ({
      word,
      baseline_prob: 0.5 / (rank + 1),
      baseline_rank: rank + 1,
      energy: 0.6 / (rank + 1),
      final_rank: rank + 1,
    }));
    cases.push({ source, response: { chosen: words[0], candidates, trace } });
  }
  return cases;
}

async function main(): Promise<void> {
  mkdirSync(fixturesDir, { recursive: true });
  const session = await driveScriptedSession();
  writeFileSync(`${fixturesDir}/session_log.jsonl`, session.exportLog() + "\n");
  writeFileSync(
    `${fixturesDir}/golden_responses.json`,
    JSON.stringify(goldenResponses(), null, 2) + "\n",
  );
  console.log(
    `wrote ${session.episodes.length} episodes (source: ${SCRIPT_SOURCE.join(" ")}) and 20 golden responses to ${dirname(fixturesDir)}`,
  );
}

main();
