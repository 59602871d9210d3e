import { renderAttention } from "./attention.js";
import { httpTransport, SuggestClient } from "./client.js";
import { Session } from "./session.js";
import { sessionSummary } from "./summary.js";
import type { Mode } from "./types.js";

const serviceUrl =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8077";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let session: Session | null = null;

function redraw(): void {
  if (!session) return;
  el("committed").textContent = session.committed.join(" ");
  el("buffer").textContent = session.typed;
  el("banner").style.display = session.stale ? "block" : "none";

  const list = el("suggestions");
  list.innerHTML = "";
  session.suggestions.forEach((candidate, index) => {
    const item = document.createElement("li");
    const energy = candidate.energy === null ? "" : ` S=${candidate.energy.toFixed(3)}`;
    item.textContent = `${candidate.word}  (p=${candidate.baseline_prob.toFixed(3)}${energy})`;
    if (index === 0) item.classList.add("top");
    list.appendChild(item);
  });

  const heatmap = el("heatmap");
  heatmap.innerHTML = "";
  const cells = renderAttention(session.source, session.trace);
  heatmap.style.display = cells ? "block" : "none";
  if (cells) {
    for (const cell of cells) {
      const span = document.createElement("span");
      span.textContent = cell.token;
      span.className = "heat";
      span.style.backgroundColor = `rgba(214, 80, 40, ${cell.intensity.toFixed(3)})`;
      span.title = cell.weight.toFixed(4);
      heatmap.appendChild(span);
    }
  }

  const summaryNode = el("summary");
  if (session.episodes.length > 0) {
    const summary = sessionSummary(session.episodes);
    const bars = Object.entries(summary.histogram)
      .map(([k, v]) => `${k}: ${(v * 100).toFixed(0)}%`)
      .join("  ");
    summaryNode.textContent =
      `${summary.words} words, ${summary.totalKeystrokes} keystrokes ` +
      `(avg ${summary.averageKeystrokes.toFixed(2)})  |  ${bars}`;
  } else {
    summaryNode.textContent = "no completed words yet";
  }
}

function startSession(): void {
  const tokens = (el<HTMLInputElement>("source-input").value || "").trim().split(/\s+/);
  if (tokens.length === 0 || tokens[0] === "") return;
  const mode = el<HTMLSelectElement>("mode").value as Mode;
  session = new Session({
    source: tokens,
    client: new SuggestClient(httpTransport(serviceUrl), 50),
    mode,
    onUpdate: redraw,
  });
  el<HTMLInputElement>("typing").value = "";
  el<HTMLInputElement>("typing").focus();
  redraw();
}

function wire(): void {
  el("start").addEventListener("click", startSession);
  el<HTMLSelectElement>("mode").addEventListener("change", () => {
    if (session) session.mode = el<HTMLSelectElement>("mode").value as Mode;
  });
  el("export").addEventListener("click", () => {
    if (!session || session.episodes.length === 0) return;
    const blob = new Blob([session.exportLog() + "\n"], { type: "application/jsonl" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "session_log.jsonl";
    link.click();
  });
  const typing = el<HTMLInputElement>("typing");
  typing.addEventListener("keydown", (event) => {
    if (!session) return;
    if (event.key === "Tab" || event.key === "Enter") {
      event.preventDefault();
      session.onKeystroke({ kind: "accept" });
    } else if (event.key === "Backspace") {
      session.onKeystroke({ kind: "backspace" });
    } else if (event.key.length === 1) {
      session.onKeystroke({ kind: "char", char: event.key });
    } else {
      return;
    }
    event.preventDefault();
    typing.value = session.typed;
  });
  fetch(`${serviceUrl}/health`)
    .then((r) => r.json())
    .then((h) => {
      el("health").textContent = `service ok: ${h.model_kinds.join(" + ")}`;
    })
    .catch(() => {
      el("health").textContent = "service unreachable";
    });
}

wire();
