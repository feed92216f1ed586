import { FeedbackClient } from "./api.js";
import { DEMO_SEEKERS, Session } from "./session.js";
import { feedbackViewHtml } from "./view.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

export function mount(baseUrl: string): void {
  const seekerSelect = byId<HTMLSelectElement>("seeker-select");
  const seekerInput = byId<HTMLTextAreaElement>("seeker-input");
  const draftInput = byId<HTMLTextAreaElement>("draft-input");
  const submitButton = byId<HTMLButtonElement>("submit");
  const errorBox = byId<HTMLDivElement>("error");
  const feedbackBox = byId<HTMLDivElement>("feedback");
  const historyBox = byId<HTMLDivElement>("history");

  for (const post of DEMO_SEEKERS) {
    const option = document.createElement("option");
    option.value = post;
    option.textContent = post;
    seekerSelect.appendChild(option);
  }
  seekerInput.value = DEMO_SEEKERS[0];
  seekerSelect.addEventListener("change", () => {
    seekerInput.value = seekerSelect.value;
    session = new Session(seekerInput.value, client);
    redraw();
  });

  const client = new FeedbackClient(baseUrl);
  let session = new Session(seekerInput.value, client);

  function redraw(): void {
    submitButton.disabled = session.pending;
    errorBox.textContent = session.error ?? "";
    const latest = session.latest;
    feedbackBox.innerHTML = latest ? feedbackViewHtml(latest) : "";
    historyBox.innerHTML = session.history
      .map(
        (rev, i) =>
          `<div class="revision">#${i + 1} (score ${rev.report.total_score}): ${rev.response}</div>`,
      )
      .join("");
  }

  submitButton.addEventListener("click", async () => {
    session.draft = draftInput.value;
    redraw();
    await session.submitDraft();
    redraw();
  });

  redraw();
}
