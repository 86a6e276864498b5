import type { ResponseBody } from "./api.js";

export const CATEGORIES = [
  { value: "sex_nudity", label: "Sex and nudity" },
  { value: "graphic", label: "Graphic content" },
  { value: "safe", label: "Safe for general audiences" },
  { value: "other", label: "Other" },
];

export interface AnswerDraft {
  q1: string | null;
  q1OtherText: string;
  q2Realistic: boolean | null;
  q3Approve: boolean | null;
  q4Rationale: string;
}

export function emptyDraft(): AnswerDraft {
  return { q1: null, q1OtherText: "", q2Realistic: null, q3Approve: null, q4Rationale: "" };
}

// Q4 is optional; "other" is only complete once the text box says what it is.
export function draftComplete(d: AnswerDraft): boolean {
  if (d.q1 === null || d.q2Realistic === null || d.q3Approve === null) return false;
  if (d.q1 === "other" && d.q1OtherText.trim() === "") return false;
  return true;
}

export function draftToResponse(d: AnswerDraft, imageId: string): ResponseBody {
  const body: ResponseBody = {
    image_id: imageId,
    q1_category: d.q1 ?? "",
    q2_realistic: d.q2Realistic === true,
    q3_approve: d.q3Approve === true,
    q4_rationale: d.q4Rationale,
  };
  if (d.q1 === "other") body.q1_other_text = d.q1OtherText.trim();
  return body;
}

function radioRow(
  name: string,
  value: string,
  label: string,
  onPick: (value: string) => void,
): HTMLLabelElement {
  const wrap = document.createElement("label");
  wrap.className = "choice";
  const input = document.createElement("input");
  input.type = "radio";
  input.name = name;
  input.value = value;
  input.addEventListener("change", () => onPick(value));
  wrap.appendChild(input);
  wrap.appendChild(document.createTextNode(" " + label));
  return wrap;
}

export class ModerationForm {
  readonly element: HTMLFormElement;
  draft = emptyDraft();

  private submitButton: HTMLButtonElement;
  private otherText: HTMLInputElement;
  private banner: HTMLDivElement;

  constructor(private onSubmit: (draft: AnswerDraft) => void) {
    this.element = document.createElement("form");
    this.element.className = "moderation-form";
    this.element.noValidate = true;

    const q1 = this.fieldset("q1", "Which category best describes this image?");
    for (const cat of CATEGORIES) {
      q1.appendChild(
        radioRow("q1", cat.value, cat.label, (value) => {
          this.draft.q1 = value;
          this.otherText.hidden = value !== "other";
          this.refresh();
        }),
      );
    }
    this.otherText = document.createElement("input");
    this.otherText.type = "text";
    this.otherText.name = "q1_other_text";
    this.otherText.placeholder = "Describe the category";
    this.otherText.hidden = true;
    this.otherText.addEventListener("input", () => {
      this.draft.q1OtherText = this.otherText.value;
      this.refresh();
    });
    q1.appendChild(this.otherText);

    const q2 = this.fieldset("q2", "Is this image realistic or synthetic?");
    q2.appendChild(
      radioRow("q2", "realistic", "Realistic (photographic)", () => {
        this.draft.q2Realistic = true;
        this.refresh();
      }),
    );
    q2.appendChild(
      radioRow("q2", "synthetic", "Synthetic (rendered, drawn, or generated)", () => {
        this.draft.q2Realistic = false;
        this.refresh();
      }),
    );

    const q3 = this.fieldset("q3", "Would you approve this image to be posted?");
    q3.appendChild(
      radioRow("q3", "yes", "Approve", () => {
        this.draft.q3Approve = true;
        this.refresh();
      }),
    );
    q3.appendChild(
      radioRow("q3", "no", "Reject", () => {
        this.draft.q3Approve = false;
        this.refresh();
      }),
    );

    const q4 = this.fieldset("q4", "Why? (optional)");
    const rationale = document.createElement("textarea");
    rationale.name = "q4_rationale";
    rationale.rows = 2;
    rationale.addEventListener("input", () => {
      this.draft.q4Rationale = rationale.value;
    });
    q4.appendChild(rationale);

    this.banner = document.createElement("div");
    this.banner.className = "error-banner";
    this.banner.hidden = true;
    this.element.appendChild(this.banner);

    this.submitButton = document.createElement("button");
    this.submitButton.type = "submit";
    this.submitButton.textContent = "Submit answers";
    this.submitButton.disabled = true;
    this.element.appendChild(this.submitButton);

    this.element.addEventListener("submit", (e) => {
      e.preventDefault();
      if (!draftComplete(this.draft)) return;
      this.banner.hidden = true;
      this.onSubmit(this.draft);
    });
  }

  private fieldset(id: string, legendText: string): HTMLFieldSetElement {
    const fs = document.createElement("fieldset");
    fs.dataset.question = id;
    const legend = document.createElement("legend");
    legend.textContent = legendText;
    fs.appendChild(legend);
    this.element.appendChild(fs);
    return fs;
  }

  private refresh(): void {
    this.submitButton.disabled = !draftComplete(this.draft);
  }

  // Server rejections (400/409) surface here; the entered answers stay put.
  showError(message: string): void {
    this.banner.textContent = message;
    this.banner.hidden = false;
  }

  setBusy(busy: boolean): void {
    this.submitButton.disabled = busy || !draftComplete(this.draft);
  }
}
