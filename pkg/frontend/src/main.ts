/** DOM wiring: binds a SessionMachine to the rating page. */

import { EvalApiClient } from "./api.js";
import {
  QUALITY_QUESTION,
  REPRESENTATIVENESS_QUESTION,
  ScoreField,
  SessionMachine,
  SessionView,
} from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderScoreRow(
  container: HTMLElement,
  field: ScoreField,
  selected: number | null,
  focused: boolean,
  machine: SessionMachine
): void {
  container.innerHTML = "";
  container.classList.toggle("focused", focused);
  for (let value = 1; value <= 5; value += 1) {
    const button = document.createElement("button");
    button.type = "button";
    button.textContent = String(value);
    button.className = selected === value ? "score selected" : "score";
    button.addEventListener("click", () => {
      machine.focusField(field);
      machine.setScore(field, value);
    });
    container.appendChild(button);
  }
}

export function mount(machine: SessionMachine): void {
  el<HTMLElement>("quality-question").textContent = QUALITY_QUESTION;
  el<HTMLElement>("repr-question").textContent = REPRESENTATIVENESS_QUESTION;

  const render = (view: SessionView): void => {
    el<HTMLElement>("rating-panel").hidden = view.phase === "complete";
    el<HTMLElement>("complete-panel").hidden = view.phase !== "complete";
    el<HTMLElement>("progress").textContent =
      view.total > 0 ? `${view.position} of ${view.total}` : "";
    el<HTMLElement>("descriptor").textContent = view.descriptor ?? "";
    const img = el<HTMLImageElement>("texture-image");
    if (view.imageUrl) img.src = view.imageUrl;
    renderScoreRow(
      el("quality-scores"),
      "quality",
      view.quality,
      view.focusedField === "quality",
      machine
    );
    renderScoreRow(
      el("repr-scores"),
      "representativeness",
      view.representativeness,
      view.focusedField === "representativeness",
      machine
    );
    const submit = el<HTMLButtonElement>("submit");
    submit.disabled = !machine.canSubmit;
    submit.textContent =
      view.phase === "submitting" ? "Submitting…" : "Submit rating";
    const error = el<HTMLElement>("error");
    error.hidden = view.error === null;
    error.textContent = view.error ?? "";
    el<HTMLButtonElement>("retry").hidden = !view.canRetry;
  };

  machine.subscribe(render);

  el<HTMLButtonElement>("submit").addEventListener("click", () => {
    void machine.submit();
  });
  el<HTMLButtonElement>("retry").addEventListener("click", () => {
    void machine.retry();
  });
  el<HTMLTextAreaElement>("comment").addEventListener("input", (event) => {
    machine.setComment((event.target as HTMLTextAreaElement).value);
  });
  document.addEventListener("keydown", (event) => {
    const target = event.target as HTMLElement | null;
    if (target && target.tagName === "TEXTAREA") return;
    if (event.key === "Tab") event.preventDefault();
    machine.pressKey(event.key);
  });

  render(machine.getView());
  void machine.loadNext();
}

declare global {
  interface Window {
    startEvalUi?: (baseUrl: string, sessionId: string) => void;
  }
}

if (typeof window !== "undefined") {
  window.startEvalUi = (baseUrl: string, sessionId: string) => {
    mount(new SessionMachine(new EvalApiClient(baseUrl), sessionId));
  };
}
