/** DOM entry point: binds an AnnotatorSession to the static page. */

import { createApi } from "./api.js";
import { AnnotatorSession } from "./session.js";
import type { SessionState } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(state: SessionState): void {
  const card = el("card");
  const done = el("done");
  const banner = el("banner");
  const progress = el("progress");

  progress.textContent = `${state.progress.rated} rated, ${state.progress.remaining} remaining`;
  banner.hidden = state.message === null;
  if (state.message !== null) {
    el("banner-text").textContent = state.message;
  }

  done.hidden = state.phase !== "done";
  card.hidden = state.phase === "done" || state.item === null;
  if (state.item === null) return;

  el("label").textContent = state.item.candidateLabel;
  el("top-words").textContent = state.item.topWords.join(", ");
  el("titles").innerHTML = "";
  for (const title of state.item.titles) {
    const li = document.createElement("li");
    li.textContent = title;
    el("titles").appendChild(li);
  }
  const truthRow = el("truth-row");
  truthRow.hidden = state.item.groundTruth === null;
  if (state.item.groundTruth !== null) {
    el("truth").textContent = state.item.groundTruth;
  }

  const buttons = el("scores");
  buttons.innerHTML = "";
  for (let score = 1; score <= state.item.scale; score++) {
    const button = document.createElement("button");
    button.textContent = String(score);
    button.className = score === state.selectedScore ? "score selected" : "score";
    button.addEventListener("click", () => {
      session.selectScore(score);
    });
    buttons.appendChild(button);
  }

  const submit = el<HTMLButtonElement>("submit");
  submit.disabled = !session.canSubmit();
  submit.textContent = state.phase === "submitting" ? "Submitting..." : "Submit (Enter)";
}

const params = new URLSearchParams(window.location.search);
const raterId = params.get("rater") ?? window.prompt("rater id:") ?? "anonymous";
const baseUrl = params.get("server") ?? window.location.origin;

const session = new AnnotatorSession(createApi(baseUrl), raterId);
session.subscribe(render);

el("submit").addEventListener("click", () => {
  void session.submit();
});
el("banner-retry").addEventListener("click", () => {
  void session.retry();
});

window.addEventListener("keydown", (event) => {
  if (event.target instanceof HTMLInputElement || event.target instanceof HTMLTextAreaElement) {
    return;
  }
  if (event.key === "Enter" || /^[0-9]$/.test(event.key) || event.key.toLowerCase() === "n") {
    event.preventDefault();
    void session.handleKey(event.key);
  }
});

void session.start();
