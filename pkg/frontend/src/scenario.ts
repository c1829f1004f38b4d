// Scenario draft model: mirrors the server's plan invariants client-side
// so obviously-broken drafts never reach POST, and builds the exact JSON
// the launch request will carry.

import type { Intervention, ScenarioPlan } from "./types";

export interface DraftInjection {
  text: string;
  startStep: number;
  endStep: number;
}

export interface ScenarioDraft {
  name: string;
  steps: number;
  seed: number;
  engine: string;
  injections: DraftInjection[];
  hotspotPolicing: boolean;
  offenderRemoval: boolean;
  offenderK: number;
}

export interface DraftIssue {
  field: string;
  message: string;
}

export function emptyDraft(steps = 50): ScenarioDraft {
  return {
    name: "scenario",
    steps,
    seed: 7,
    engine: "routine",
    injections: [],
    hotspotPolicing: false,
    offenderRemoval: false,
    offenderK: 10,
  };
}

export function validateDraft(draft: ScenarioDraft): DraftIssue[] {
  const issues: DraftIssue[] = [];
  if (!draft.name.trim()) {
    issues.push({ field: "name", message: "name must be non-empty" });
  }
  if (draft.steps < 1) {
    issues.push({ field: "steps", message: "steps must be >= 1" });
  }
  draft.injections.forEach((inj, i) => {
    if (!inj.text.trim()) {
      issues.push({ field: `injections.${i}.text`, message: "context text must be non-empty" });
    }
    if (inj.startStep < 1 || inj.endStep < inj.startStep) {
      issues.push({
        field: `injections.${i}.range`,
        message: "step range must satisfy 1 <= start <= end",
      });
    }
    if (inj.endStep > draft.steps) {
      issues.push({
        field: `injections.${i}.range`,
        message: `range ends at ${inj.endStep}, beyond the run's ${draft.steps} steps`,
      });
    }
  });
  if (draft.offenderRemoval && draft.offenderK < 1) {
    issues.push({ field: "offenderK", message: "k must be >= 1" });
  }
  return issues;
}

export function draftToPlan(draft: ScenarioDraft): ScenarioPlan | null {
  const interventions: Intervention[] = [];
  for (const inj of draft.injections) {
    interventions.push({
      kind: "context_injection",
      start_step: inj.startStep,
      end_step: inj.endStep,
      params: { text: inj.text },
    });
  }
  if (draft.hotspotPolicing) {
    interventions.push({
      kind: "hotspot_policing",
      start_step: 1,
      end_step: draft.steps,
      params: {},
    });
  }
  if (draft.offenderRemoval) {
    interventions.push({
      kind: "offender_removal",
      start_step: 1,
      end_step: draft.steps,
      params: { k: draft.offenderK },
    });
  }
  if (interventions.length === 0) return null;
  return { name: draft.name, interventions };
}

/** Apply a stored plan (e.g. the shipped Dallas preset) onto a draft. */
export function applyPreset(draft: ScenarioDraft, plan: ScenarioPlan): ScenarioDraft {
  const next: ScenarioDraft = {
    ...draft,
    name: plan.name,
    injections: [],
    hotspotPolicing: false,
    offenderRemoval: false,
  };
  for (const intervention of plan.interventions) {
    if (intervention.kind === "context_injection") {
      next.injections.push({
        text: String(intervention.params.text ?? ""),
        startStep: intervention.start_step,
        endStep: Math.min(intervention.end_step, next.steps),
      });
    } else if (intervention.kind === "hotspot_policing") {
      next.hotspotPolicing = true;
    } else {
      next.offenderRemoval = true;
      next.offenderK = Number(intervention.params.k ?? 10);
    }
  }
  return next;
}

/** The exact POST body for a treated run launched from this draft. */
export function launchBody(draft: ScenarioDraft, cityConfig?: Record<string, unknown>):
  { config: Record<string, unknown>; scenario?: ScenarioPlan } {
  const config: Record<string, unknown> = {
    ...(cityConfig ?? {}),
    steps: draft.steps,
    seed: draft.seed,
    engine: draft.engine,
  };
  const plan = draftToPlan(draft);
  return plan ? { config, scenario: plan } : { config };
}
