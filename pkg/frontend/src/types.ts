// Wire types for the mixlr evaluation service (snake_case JSON).

export interface PanelResponse {
  markers: string[];
  housekeeping: string[];
  threshold_rfu: number;
  fluids: string[];
  replicate_totals: number[];
}

export interface MarkerCount {
  detected: number;
  total: number;
}

export interface EvaluateRequest {
  interest: string[];
  markers: Record<string, MarkerCount>;
  background_overrides?: Record<string, number>;
  model_id?: string;
  cap?: number;
}

export interface ContributionEntry {
  marker: string;
  fraction: number;
  coefficient: number;
  contribution: number;
}

export interface CaseReportWire {
  interest: string[];
  log10_lr: number;
  lr: number;
  capped_lr: number;
  cap: number;
  verbal: string;
  intercept: number;
  contributions: ContributionEntry[];
  n_over_2: {
    per_fluid: Record<string, string>;
    combined: string | null;
  };
  background_levels: Record<string, number>;
  model_id: string;
}

export interface ModelSummary {
  variant_id: string;
  strategy: string;
  dichotomized: boolean;
  interest: string[];
  backgrounds: Record<string, number>;
  training_seed: number;
  coefficients: {
    intercept: number;
    per_marker: Record<string, number>;
  };
}

export interface EvaluateResponse {
  report: CaseReportWire;
  model: ModelSummary;
  server_version: string;
}

export interface ModelsResponse {
  models: ModelSummary[];
}

export interface ErrorBody {
  error: {
    code: string;
    message: string;
  };
}
