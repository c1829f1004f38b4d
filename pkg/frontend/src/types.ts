// Server payload shapes (the API is the single source of truth for all
// numbers shown in the UI).

export type RunStatus = "queued" | "running" | "done" | "failed" | "incomplete";

export interface RunRecord {
  run_id: string;
  status: RunStatus;
  config: Record<string, unknown>;
  output_ref: string;
  created_at: string;
  finished_at: string | null;
  error: string | null;
  total_events: number | null;
}

export interface Intervention {
  kind: "context_injection" | "hotspot_policing" | "offender_removal";
  start_step: number;
  end_step: number;
  params: Record<string, unknown>;
}

export interface ScenarioPlan {
  name: string;
  interventions: Intervention[];
}

export interface StoredScenario extends ScenarioPlan {
  id: string;
}

export interface EvaluationReport {
  hr: Record<string, number>;
  jsd: number;
  rmse: number;
  hotspot_crime_ratio: number;
  alpha: number;
  nhc?: number;
  mean_distance_km?: number;
}

export interface HeatmapFeature {
  type: "Feature";
  properties: { cell_id: string; count: number; share: number };
  geometry:
    | { type: "Polygon"; coordinates: number[][][] }
    | { type: "Point"; coordinates: number[] };
}

export interface HeatmapCollection {
  type: "FeatureCollection";
  features: HeatmapFeature[];
}

export interface CompareCell {
  cell_id: string;
  count_a: number;
  count_b: number;
  share_a: number;
  share_b: number;
}

export interface CompareSide {
  run_id: string;
  total: number;
  hotspot_crime_ratio: number | null;
  per_step_counts: number[];
}

export interface CompareResponse {
  run_a: CompareSide;
  run_b: CompareSide;
  delta: { total: number; hotspot_crime_ratio: number | null };
  cells: CompareCell[];
}

export interface CityCell {
  cell_id: string;
  centroid: [number, number];
  boundary: [number, number][] | null;
  features: {
    population: number;
    average_income: number;
    poverty_ratio: number;
    housing_value: number;
    poi_count: number;
    safety_score: number;
    semantic_description: string;
  };
}

export interface CityCells {
  name: string;
  metadata: Record<string, string>;
  cells: CityCell[];
}

export interface FieldError {
  field: string;
  message: string;
}
