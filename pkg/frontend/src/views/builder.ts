// Scenario builder: compose interventions, validate inline, preview the
// exact launch JSON, and submit treated + control runs.

import type { ApiClient } from "../api";
import { ApiError } from "../api";
import {
  DraftInjection, ScenarioDraft, applyPreset, draftToPlan, emptyDraft,
  launchBody, validateDraft,
} from "../scenario";
import type { StoredScenario } from "../types";

export interface LaunchedPair {
  treatedId: string;
  controlId: string;
  draft: ScenarioDraft;
}

export interface BuilderOptions {
  cityConfig?: Record<string, unknown>;
  onLaunched?: (pair: LaunchedPair) => void;
}

export class BuilderView {
  readonly root: HTMLElement;
  draft: ScenarioDraft;
  presets: StoredScenario[] = [];

  private doc: Document;

  constructor(
    doc: Document,
    private api: ApiClient,
    private options: BuilderOptions = {},
  ) {
    this.doc = doc;
    this.draft = emptyDraft();
    this.root = doc.createElement("section");
    this.root.className = "builder";
    this.render();
  }

  async loadPresets(): Promise<void> {
    this.presets = await this.api.listScenarios();
    this.render();
  }

  usePreset(id: string): void {
    const preset = this.presets.find((p) => p.id === id);
    if (!preset) return;
    this.draft = applyPreset(this.draft, preset);
    this.render();
  }

  addInjection(injection: Partial<DraftInjection> = {}): void {
    this.draft.injections.push({
      text: injection.text ?? "",
      startStep: injection.startStep ?? 1,
      endStep: injection.endStep ?? this.draft.steps,
    });
    this.render();
  }

  removeInjection(index: number): void {
    this.draft.injections.splice(index, 1);
    this.render();
  }

  previewJson(): string {
    return JSON.stringify(launchBody(this.draft, this.options.cityConfig), null, 2);
  }

  canLaunch(): boolean {
    return validateDraft(this.draft).length === 0;
  }

  /** Submit the treated run (with the plan) and its same-seed control. */
  async launchPair(): Promise<LaunchedPair> {
    const body = launchBody(this.draft, this.options.cityConfig);
    const treated = await this.api.submitRun(
      body.config, body.scenario ?? undefined);
    const control = await this.api.submitRun(body.config);
    const pair = { treatedId: treated.run_id, controlId: control.run_id,
                   draft: this.draft };
    this.options.onLaunched?.(pair);
    return pair;
  }

  render(): void {
    const doc = this.doc;
    const issues = validateDraft(this.draft);
    const issueFor = (field: string) =>
      issues.find((i) => i.field === field)?.message ?? "";
    this.root.innerHTML = "";

    const heading = doc.createElement("h2");
    heading.textContent = "Scenario builder";
    this.root.appendChild(heading);

    // presets from the server's scenario store
    const presetRow = doc.createElement("div");
    presetRow.className = "preset-row";
    for (const preset of this.presets) {
      const button = doc.createElement("button");
      button.textContent = `preset: ${preset.name}`;
      button.dataset.presetId = preset.id;
      button.addEventListener("click", () => this.usePreset(preset.id));
      presetRow.appendChild(button);
    }
    this.root.appendChild(presetRow);

    const form = doc.createElement("div");
    form.className = "draft-form";
    form.appendChild(this.numberField("steps", this.draft.steps, (v) => {
      this.draft.steps = v;
    }, issueFor("steps")));
    form.appendChild(this.numberField("seed", this.draft.seed, (v) => {
      this.draft.seed = v;
    }, ""));
    form.appendChild(this.engineField());

    this.draft.injections.forEach((injection, i) => {
      form.appendChild(this.injectionRow(injection, i, issueFor(`injections.${i}.text`),
                                         issueFor(`injections.${i}.range`)));
    });

    const addInjection = doc.createElement("button");
    addInjection.textContent = "add context injection";
    addInjection.dataset.action = "add-injection";
    addInjection.addEventListener("click", () => this.addInjection());
    form.appendChild(addInjection);

    form.appendChild(this.toggleField("hotspot policing", "hotspotPolicing",
                                      this.draft.hotspotPolicing, (v) => {
                                        this.draft.hotspotPolicing = v;
                                      }));
    form.appendChild(this.toggleField("offender removal", "offenderRemoval",
                                      this.draft.offenderRemoval, (v) => {
                                        this.draft.offenderRemoval = v;
                                      }));
    if (this.draft.offenderRemoval) {
      form.appendChild(this.numberField("offenderK", this.draft.offenderK, (v) => {
        this.draft.offenderK = v;
      }, issueFor("offenderK")));
    }
    this.root.appendChild(form);

    const preview = doc.createElement("pre");
    preview.className = "plan-preview";
    preview.textContent = this.previewJson();
    this.root.appendChild(preview);

    const launch = doc.createElement("button");
    launch.textContent = "launch treated + control";
    launch.className = "launch";
    launch.disabled = !this.canLaunch();
    launch.addEventListener("click", () => {
      void this.launchPair().catch((err) => this.showServerError(err));
    });
    this.root.appendChild(launch);

    const serverError = doc.createElement("p");
    serverError.className = "server-error";
    this.root.appendChild(serverError);
  }

  showServerError(err: unknown): void {
    const box = this.root.querySelector(".server-error");
    if (box) {
      // server messages verbatim; nothing is rephrased client-side
      box.textContent = err instanceof ApiError ? err.message : String(err);
    }
  }

  private numberField(name: string, value: number, set: (v: number) => void,
                      issue: string): HTMLElement {
    const wrap = this.doc.createElement("label");
    wrap.className = `field field-${name}`;
    wrap.textContent = `${name} `;
    const input = this.doc.createElement("input");
    input.type = "number";
    input.value = String(value);
    input.name = name;
    input.addEventListener("change", () => {
      set(Number(input.value));
      this.render();
    });
    wrap.appendChild(input);
    if (issue) {
      const msg = this.doc.createElement("span");
      msg.className = "inline-error";
      msg.textContent = issue;
      wrap.appendChild(msg);
    }
    return wrap;
  }

  private engineField(): HTMLElement {
    const wrap = this.doc.createElement("label");
    wrap.className = "field field-engine";
    wrap.textContent = "engine ";
    const select = this.doc.createElement("select");
    select.name = "engine";
    for (const name of ["routine", "random", "hotspot", "burglary"]) {
      const option = this.doc.createElement("option");
      option.value = name;
      option.textContent = name;
      option.selected = name === this.draft.engine;
      select.appendChild(option);
    }
    select.addEventListener("change", () => {
      this.draft.engine = select.value;
      this.render();
    });
    wrap.appendChild(select);
    return wrap;
  }

  private toggleField(label: string, name: string, value: boolean,
                      set: (v: boolean) => void): HTMLElement {
    const wrap = this.doc.createElement("label");
    wrap.className = `field field-${name}`;
    const input = this.doc.createElement("input");
    input.type = "checkbox";
    input.checked = value;
    input.name = name;
    input.addEventListener("change", () => {
      set(input.checked);
      this.render();
    });
    wrap.appendChild(input);
    wrap.appendChild(this.doc.createTextNode(` ${label}`));
    return wrap;
  }

  private injectionRow(injection: DraftInjection, index: number,
                       textIssue: string, rangeIssue: string): HTMLElement {
    const row = this.doc.createElement("div");
    row.className = "injection-row";
    const text = this.doc.createElement("textarea");
    text.value = injection.text;
    text.placeholder = "context text injected into decision prompts";
    text.addEventListener("change", () => {
      injection.text = text.value;
      this.render();
    });
    row.appendChild(text);
    for (const [key, valueOf] of [
      ["startStep", () => injection.startStep],
      ["endStep", () => injection.endStep],
    ] as const) {
      const input = this.doc.createElement("input");
      input.type = "number";
      input.value = String(valueOf());
      input.name = `${key}-${index}`;
      input.addEventListener("change", () => {
        injection[key] = Number(input.value);
        this.render();
      });
      row.appendChild(input);
    }
    for (const issue of [textIssue, rangeIssue]) {
      if (issue) {
        const msg = this.doc.createElement("span");
        msg.className = "inline-error";
        msg.textContent = issue;
        row.appendChild(msg);
      }
    }
    const remove = this.doc.createElement("button");
    remove.textContent = "remove";
    remove.addEventListener("click", () => this.removeInjection(index));
    row.appendChild(remove);
    return row;
  }
}

export { draftToPlan };
