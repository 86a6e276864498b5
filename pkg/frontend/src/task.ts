import type { ApiClient, Task } from "./api.js";
import { ApiError } from "./api.js";
import { ClickReveal, HoverReveal, SliderControl, UrlPool } from "./reveal.js";
import { type AnswerDraft, ModerationForm, draftToResponse } from "./form.js";

const TOOL_HINTS: Record<string, string> = {
  none: "",
  click: "Click the image to permanently reveal a region.",
  hover: "Hold the pointer over the image to reveal a region; it re-blurs when you move away.",
  slider: "Drag the slider to adjust the blur strength.",
};

/**
 * One moderation task: the stage-governed image area plus the question form.
 *
 * The view requests the full image at exactly the stage sigma, never below
 * it; clearer pixels only ever arrive through the reveal tool the stage
 * provides, and every blob URL is revoked when the task is over.
 */
export class TaskView {
  readonly element: HTMLElement;

  private pool = new UrlPool();
  private form: ModerationForm;
  private img: HTMLImageElement;

  constructor(
    private api: ApiClient,
    private task: Task,
    private onDone: () => void,
  ) {
    this.element = document.createElement("section");
    this.element.className = "task-view";

    const progress = document.createElement("p");
    progress.className = "progress";
    progress.textContent = `Image ${task.index + 1} of ${task.task_count}`;
    this.element.appendChild(progress);

    const layer = document.createElement("div");
    layer.className = "image-layer";
    layer.style.width = `${task.width}px`;
    layer.style.height = `${task.height}px`;
    this.img = document.createElement("img");
    this.img.className = "task-image";
    this.img.draggable = false;
    layer.appendChild(this.img);
    this.element.appendChild(layer);

    const hint = TOOL_HINTS[task.stage.reveal_tool];
    if (hint) {
      const p = document.createElement("p");
      p.className = "tool-hint";
      p.textContent = hint;
      this.element.appendChild(p);
    }

    this.form = new ModerationForm((draft) => void this.submit(draft));
    this.element.appendChild(this.form.element);

    void this.loadImage(layer);
  }

  private async loadImage(layer: HTMLElement): Promise<void> {
    const stage = this.task.stage;
    const blob = await this.api.fetchRendition(this.task.image_id, stage.sigma);
    const baseUrl = this.pool.adopt(blob);
    this.img.src = baseUrl;

    if (stage.reveal_tool === "click") {
      new ClickReveal(this.api, this.task, layer, this.pool).attach();
    } else if (stage.reveal_tool === "hover") {
      new HoverReveal(this.api, this.task, layer, this.pool).attach();
    } else if (stage.reveal_tool === "slider") {
      const wrap = document.createElement("label");
      wrap.className = "slider-wrap";
      wrap.appendChild(document.createTextNode("Blur strength "));
      const input = document.createElement("input");
      input.type = "range";
      input.className = "sigma-slider";
      wrap.appendChild(input);
      this.element.insertBefore(wrap, this.form.element);
      new SliderControl(
        this.api,
        this.task,
        this.img,
        input,
        this.pool,
        stage.slider_levels ?? [stage.sigma],
        stage.sigma,
        baseUrl,
      ).attach();
    }
  }

  private async submit(draft: AnswerDraft): Promise<void> {
    this.form.setBusy(true);
    try {
      await this.api.postResponse(draftToResponse(draft, this.task.image_id));
    } catch (err) {
      this.form.setBusy(false);
      const message = err instanceof ApiError ? err.detail : "submission failed, try again";
      this.form.showError(message);
      return;
    }
    this.destroy();
    this.onDone();
  }

  // No unblurred pixels survive the task: every object URL dies here.
  destroy(): void {
    this.pool.releaseAll();
    this.element.remove();
  }
}
