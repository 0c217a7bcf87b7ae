// Contribution waterfall: the intercept plus one signed segment per marker
// whose term is non-zero, walking from 0 to the headline log10 LR.

import type { CaseReportWire } from "./types.js";

export interface WaterfallSegment {
  label: string;
  value: number;
  start: number;
  end: number;
  sign: "positive" | "negative";
  detail: string;
}

export interface WaterfallView {
  segments: WaterfallSegment[];
  sum: number;
  headline: number;
  consistent: boolean;
}

export const DISPLAY_TOLERANCE = 0.01;

export function buildWaterfall(report: CaseReportWire): WaterfallView {
  const segments: WaterfallSegment[] = [];
  let level = 0;
  const push = (label: string, value: number, detail: string) => {
    segments.push({
      label,
      value,
      start: level,
      end: level + value,
      sign: value >= 0 ? "positive" : "negative",
      detail,
    });
    level += value;
  };
  push("intercept", report.intercept, "model intercept");
  for (const entry of report.contributions) {
    if (entry.contribution === 0) continue; // zero terms stay hidden
    push(entry.marker, entry.contribution,
      `${entry.coefficient.toFixed(2)} x ${entry.fraction.toFixed(2)}`);
  }
  return {
    segments,
    sum: level,
    headline: report.log10_lr,
    consistent: Math.abs(level - report.log10_lr) <= DISPLAY_TOLERANCE,
  };
}
