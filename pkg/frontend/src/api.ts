// Thin typed client over the run service. Server validation errors are
// surfaced verbatim so the UI can show exactly what the service said.

import type {
  CityCells, CompareResponse, EvaluationReport, FieldError, HeatmapCollection,
  RunRecord, ScenarioPlan, StoredScenario,
} from "./types";

export class ApiError extends Error {
  status: number;
  fieldErrors: FieldError[];

  constructor(status: number, message: string, fieldErrors: FieldError[] = []) {
    super(message);
    this.status = status;
    this.fieldErrors = fieldErrors;
  }
}

async function parseError(res: Response): Promise<ApiError> {
  let message = `${res.status} ${res.statusText}`;
  let fields: FieldError[] = [];
  try {
    const body = await res.json();
    if (Array.isArray(body.errors)) {
      fields = body.errors as FieldError[];
      message = fields.map((e) => `${e.field}: ${e.message}`).join("; ");
    } else if (typeof body.detail === "string") {
      message = body.detail;
    }
  } catch {
    // keep the status line
  }
  return new ApiError(res.status, message, fields);
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      headers: { Accept: "application/json" },
    });
    if (!res.ok) throw await parseError(res);
    return res.json() as Promise<T>;
  }

  async submitRun(config: Record<string, unknown>, scenario?: ScenarioPlan):
    Promise<{ run_id: string }> {
    const body: Record<string, unknown> = { config };
    if (scenario) body.scenario = scenario;
    const res = await fetch(this.baseUrl + "/runs", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await parseError(res);
    return res.json();
  }

  getRun(runId: string): Promise<RunRecord> {
    return this.get(`/runs/${runId}`);
  }

  listRuns(): Promise<RunRecord[]> {
    return this.get("/runs");
  }

  getHeatmap(runId: string): Promise<HeatmapCollection> {
    return this.get(`/runs/${runId}/heatmap`);
  }

  getMetrics(runId: string, against: string, alpha: number, ks: string):
    Promise<EvaluationReport> {
    const q = new URLSearchParams({ against, alpha: String(alpha), k: ks });
    return this.get(`/runs/${runId}/metrics?${q}`);
  }

  compare(treatedId: string, controlId: string): Promise<CompareResponse> {
    return this.get(`/runs/${treatedId}/compare/${controlId}`);
  }

  cityCells(): Promise<CityCells> {
    return this.get("/city/cells");
  }

  listScenarios(): Promise<StoredScenario[]> {
    return this.get("/scenarios");
  }

  async saveScenario(plan: ScenarioPlan): Promise<StoredScenario> {
    const res = await fetch(this.baseUrl + "/scenarios", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(plan),
    });
    if (!res.ok) throw await parseError(res);
    return res.json();
  }
}
