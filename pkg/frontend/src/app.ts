import { ApiClient, ApiError } from "./api.js";
import { TaskView } from "./task.js";
import { SurveyView } from "./survey.js";

// Placeholder instructions; operators should replace this with their own
// IRB-approved consent and briefing copy before running real workers.
const BRIEFING = [
  "You will review a set of images and answer four questions about each.",
  "Some images may be blurred. Depending on your assignment you may have a tool to reveal parts of an image; use it as much or as little as you need to decide.",
  "Some images may contain adult or graphic content. You can stop at any time by closing this page.",
];

export class App {
  private api: ApiClient;

  constructor(
    private root: HTMLElement,
    base = "",
  ) {
    this.api = new ApiClient(base);
  }

  start(): void {
    this.root.replaceChildren(this.joinScreen());
  }

  private joinScreen(): HTMLElement {
    const section = document.createElement("section");
    section.className = "join-screen";

    const h1 = document.createElement("h1");
    h1.textContent = "Image moderation tasks";
    section.appendChild(h1);

    for (const line of BRIEFING) {
      const p = document.createElement("p");
      p.textContent = line;
      section.appendChild(p);
    }

    const form = document.createElement("form");
    const workerInput = document.createElement("input");
    workerInput.placeholder = "Worker ID";
    workerInput.required = true;
    form.appendChild(workerInput);

    const stageSelect = document.createElement("select");
    for (let stageId = 1; stageId <= 6; stageId++) {
      const option = document.createElement("option");
      option.value = String(stageId);
      option.textContent = `Assignment ${stageId}`;
      stageSelect.appendChild(option);
    }
    form.appendChild(stageSelect);

    const button = document.createElement("button");
    button.type = "submit";
    button.textContent = "Begin";
    form.appendChild(button);

    const error = document.createElement("div");
    error.className = "error-banner";
    error.hidden = true;
    form.appendChild(error);

    form.addEventListener("submit", (e) => {
      e.preventDefault();
      const workerId = workerInput.value.trim();
      if (!workerId) return;
      button.disabled = true;
      this.api
        .createSession(workerId, Number(stageSelect.value))
        .then(() => this.nextTask())
        .catch((err) => {
          button.disabled = false;
          error.textContent =
            err instanceof ApiError ? err.detail : "could not reach the server";
          error.hidden = false;
        });
    });

    section.appendChild(form);
    return section;
  }

  private nextTask(): void {
    this.api
      .nextTask()
      .then((task) => {
        if (task === null) {
          this.showSurvey();
          return;
        }
        const view = new TaskView(this.api, task, () => this.nextTask());
        this.root.replaceChildren(view.element);
      })
      .catch(() => this.fatal("lost the session; reload to start again"));
  }

  private showSurvey(): void {
    const view = new SurveyView(this.api, () => this.finished());
    this.root.replaceChildren(view.element);
  }

  private finished(): void {
    const section = document.createElement("section");
    section.className = "done-screen";
    const h1 = document.createElement("h1");
    h1.textContent = "All done";
    section.appendChild(h1);
    const p = document.createElement("p");
    p.textContent = "Your answers were recorded. Thank you. You can close this page.";
    section.appendChild(p);
    this.root.replaceChildren(section);
  }

  private fatal(message: string): void {
    const p = document.createElement("p");
    p.className = "error-banner";
    p.textContent = message;
    this.root.replaceChildren(p);
  }
}
