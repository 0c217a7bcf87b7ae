// View-model for one evaluation: exactly what the screen shows, derived
// verbatim from the server response. The UI never computes an LR itself;
// the waterfall sum is recomputed only as a display-consistency check.

import type { EvaluateResponse } from "./types.js";
import { buildWaterfall, WaterfallView } from "./waterfall.js";

export interface EvaluationView {
  log10Lr: number;
  log10LrDisplay: string;
  cappedLrDisplay: string;
  verbal: string;
  waterfall: WaterfallView;
  nOverTwo: { fluid: string; verdict: string }[];
  nOverTwoCombined: string | null;
  modelId: string;
  backgrounds: Record<string, number>;
  serverVersion: string;
}

export function formatLog10(value: number): string {
  return value.toFixed(2);
}

export function formatLr(value: number): string {
  if (value >= 100) return value.toFixed(0);
  if (value >= 1) return value.toFixed(1);
  return value.toPrecision(2);
}

export function buildEvaluationView(response: EvaluateResponse): EvaluationView {
  const report = response.report;
  return {
    log10Lr: report.log10_lr,
    log10LrDisplay: formatLog10(report.log10_lr),
    cappedLrDisplay: formatLr(report.capped_lr),
    verbal: report.verbal,
    waterfall: buildWaterfall(report),
    nOverTwo: Object.entries(report.n_over_2.per_fluid).map(
      ([fluid, verdict]) => ({ fluid, verdict })),
    nOverTwoCombined: report.n_over_2.combined,
    modelId: report.model_id,
    backgrounds: report.background_levels,
    serverVersion: response.server_version,
  };
}

export interface HistoryEntry {
  label: string;
  view: EvaluationView;
}

export class SessionHistory {
  private readonly entries: HistoryEntry[] = [];

  add(label: string, view: EvaluationView): void {
    this.entries.push({ label, view });
  }

  list(): readonly HistoryEntry[] {
    return this.entries;
  }

  clear(): void {
    this.entries.length = 0;
  }
}
