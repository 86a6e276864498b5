import type { ApiClient, InstrumentDef, Instruments } from "./api.js";
import { ApiError } from "./api.js";

const INSTRUMENT_ORDER = [
  "spane",
  "panas",
  "exhaustion",
  "tam_peou",
  "tam_pu",
] as const;

function scaleValues(def: InstrumentDef): number[] {
  const [lo, hi] = def.scale;
  const values = [];
  for (let v = lo; v <= hi; v++) values.push(v);
  return values;
}

/** Post-task questionnaire rendered from the server's instrument file. */
export class SurveyView {
  readonly element: HTMLElement;

  private answers = new Map<string, number>();
  private demographics = new Map<string, string>();
  private banner: HTMLDivElement;
  private defs: Instruments | null = null;

  constructor(
    private api: ApiClient,
    private onDone: () => void,
  ) {
    this.element = document.createElement("section");
    this.element.className = "survey-view";
    this.banner = document.createElement("div");
    this.banner.className = "error-banner";
    this.banner.hidden = true;
    void this.build();
  }

  private async build(): Promise<void> {
    const defs = await this.api.instruments();
    this.defs = defs;

    const heading = document.createElement("h2");
    heading.textContent = "Almost done: a short survey about your experience";
    this.element.appendChild(heading);

    // Field ids and option lists come from the server so both ends agree.
    const demo = document.createElement("fieldset");
    demo.dataset.section = "demographics";
    const legend = document.createElement("legend");
    legend.textContent = "About you";
    demo.appendChild(legend);
    for (const field of defs.demographics.fields) {
      const row = document.createElement("label");
      row.className = "demo-row";
      row.dataset.field = field.id;
      row.appendChild(document.createTextNode(field.label + " "));
      const select = document.createElement("select");
      const blank = document.createElement("option");
      blank.value = "";
      blank.textContent = "Select...";
      select.appendChild(blank);
      for (const option of field.options) {
        const el = document.createElement("option");
        el.value = option;
        el.textContent = option;
        select.appendChild(el);
      }
      select.addEventListener("change", () => {
        if (select.value) this.demographics.set(field.id, select.value);
        else this.demographics.delete(field.id);
        row.classList.remove("missing");
      });
      row.appendChild(select);
      demo.appendChild(row);
    }
    this.element.appendChild(demo);

    for (const name of INSTRUMENT_ORDER) {
      this.element.appendChild(this.renderInstrument(name, defs[name]));
    }

    this.element.appendChild(this.banner);
    const submit = document.createElement("button");
    submit.type = "button";
    submit.textContent = "Submit survey";
    submit.addEventListener("click", () => void this.submit());
    this.element.appendChild(submit);
  }

  private renderInstrument(name: string, def: InstrumentDef): HTMLFieldSetElement {
    const fs = document.createElement("fieldset");
    fs.dataset.section = name;
    const legend = document.createElement("legend");
    legend.textContent = def.framing;
    fs.appendChild(legend);

    const anchors = document.createElement("p");
    anchors.className = "anchors";
    anchors.textContent = Object.entries(def.anchors)
      .map(([value, text]) => `${value} = ${text}`)
      .join(", ");
    fs.appendChild(anchors);

    for (const item of def.items) {
      const row = document.createElement("div");
      row.className = "item-row";
      row.dataset.item = item.id;
      const label = document.createElement("span");
      label.textContent = item.text;
      row.appendChild(label);
      for (const value of scaleValues(def)) {
        const choice = document.createElement("label");
        choice.className = "scale-choice";
        const input = document.createElement("input");
        input.type = "radio";
        input.name = item.id;
        input.value = String(value);
        input.addEventListener("change", () => {
          this.answers.set(item.id, value);
          row.classList.remove("missing");
        });
        choice.appendChild(input);
        choice.appendChild(document.createTextNode(String(value)));
        row.appendChild(choice);
      }
      fs.appendChild(row);
    }
    return fs;
  }

  // Missing rows get flagged in place; nothing is posted until all are in.
  private findGaps(): Element[] {
    const gaps: Element[] = [];
    for (const row of this.element.querySelectorAll(".demo-row")) {
      const field = (row as HTMLElement).dataset.field ?? "";
      if (!this.demographics.has(field)) gaps.push(row);
    }
    for (const row of this.element.querySelectorAll(".item-row")) {
      const id = (row as HTMLElement).dataset.item ?? "";
      if (!this.answers.has(id)) gaps.push(row);
    }
    return gaps;
  }

  private async submit(): Promise<void> {
    const gaps = this.findGaps();
    if (gaps.length > 0) {
      for (const row of gaps) row.classList.add("missing");
      this.banner.textContent = `${gaps.length} unanswered item(s) highlighted above`;
      this.banner.hidden = false;
      gaps[0].scrollIntoView?.({ block: "center" });
      return;
    }

    const defs = this.defs;
    if (!defs) return;
    const body: Record<string, unknown> = {
      demographics: Object.fromEntries(this.demographics),
    };
    for (const name of INSTRUMENT_ORDER) {
      body[`${name}_items`] = defs[name].items.map((item) => this.answers.get(item.id));
    }

    try {
      await this.api.postSurvey(body);
    } catch (err) {
      this.banner.textContent =
        err instanceof ApiError ? err.detail : "submission failed, try again";
      this.banner.hidden = false;
      return;
    }
    this.element.remove();
    this.onDone();
  }
}
