// Case entry form state: replicate detection counts, fluids of interest,
// background assumptions, and the share-link encoding of all of it.

import type { EvaluateRequest, PanelResponse } from "./types.js";

export const BACKGROUND_PRESETS = [0, 0.5, 0.9, 1] as const;

// The service defaults: every fluid at 0.5 except penile skin at 0.
export function defaultBackgrounds(fluids: string[]): Record<string, number> {
  const levels: Record<string, number> = {};
  for (const fluid of fluids) {
    levels[fluid] = fluid === "skin_penile" ? 0 : 0.5;
  }
  return levels;
}

export interface CaseFormState {
  detected: Record<string, number>;
  total: number;
  interest: string[];
  backgrounds: Record<string, number>;
  modelId: string | null;
}

export function newFormState(panel: PanelResponse): CaseFormState {
  const detected: Record<string, number> = {};
  for (const marker of panel.markers) {
    detected[marker] = 0;
  }
  return {
    detected,
    total: 4,
    interest: [],
    backgrounds: defaultBackgrounds(panel.fluids),
    modelId: null,
  };
}

export interface FormError {
  field: string;
  message: string;
}

export function validateForm(state: CaseFormState, panel: PanelResponse): FormError[] {
  const errors: FormError[] = [];
  if (!panel.replicate_totals.includes(state.total)) {
    errors.push({ field: "total", message: `replicate total must be one of ${panel.replicate_totals.join(", ")}` });
  }
  for (const marker of panel.markers) {
    const count = state.detected[marker];
    if (count === undefined) {
      errors.push({ field: marker, message: "missing marker entry" });
    } else if (!Number.isInteger(count) || count < 0 || count > state.total) {
      errors.push({ field: marker, message: `detected count must be 0-${state.total}` });
    }
  }
  if (state.interest.length === 0) {
    errors.push({ field: "interest", message: "select at least one fluid of interest" });
  }
  for (const fluid of state.interest) {
    if (!panel.fluids.includes(fluid)) {
      errors.push({ field: "interest", message: `unknown fluid ${fluid}` });
    }
  }
  for (const [fluid, level] of Object.entries(state.backgrounds)) {
    if (level < 0 || level > 1) {
      errors.push({ field: `background:${fluid}`, message: "level must be in [0, 1]" });
    }
  }
  return errors;
}

export function buildRequest(state: CaseFormState, panel: PanelResponse): EvaluateRequest {
  const markers: EvaluateRequest["markers"] = {};
  for (const marker of panel.markers) {
    markers[marker] = { detected: state.detected[marker] ?? 0, total: state.total };
  }
  const defaults = defaultBackgrounds(panel.fluids);
  const overrides: Record<string, number> = {};
  for (const fluid of panel.fluids) {
    const level = state.backgrounds[fluid];
    if (level !== undefined && level !== defaults[fluid]) {
      overrides[fluid] = level;
    }
  }
  const request: EvaluateRequest = {
    interest: [...state.interest].sort(),
    markers,
  };
  if (Object.keys(overrides).length > 0) {
    request.background_overrides = overrides;
  }
  if (state.modelId) {
    request.model_id = state.modelId;
  }
  return request;
}

// Share links hold the whole form in URL parameters:
//   ?t=4&m=HBB:3,ALAS2:4&i=menstrual_secretion,vaginal_mucosa&bg=skin_penile:1
// Only markers with detections and backgrounds away from their defaults are
// written, so encode(decode(q)) is stable.
export function encodeShareLink(state: CaseFormState, panel: PanelResponse): string {
  const params = new URLSearchParams();
  params.set("t", String(state.total));
  const parts = panel.markers
    .filter((m) => (state.detected[m] ?? 0) > 0)
    .map((m) => `${m}:${state.detected[m]}`);
  if (parts.length > 0) {
    params.set("m", parts.join(","));
  }
  if (state.interest.length > 0) {
    params.set("i", [...state.interest].sort().join(","));
  }
  const defaults = defaultBackgrounds(panel.fluids);
  const bg = panel.fluids
    .filter((f) => state.backgrounds[f] !== undefined && state.backgrounds[f] !== defaults[f])
    .map((f) => `${f}:${state.backgrounds[f]}`);
  if (bg.length > 0) {
    params.set("bg", bg.join(","));
  }
  if (state.modelId) {
    params.set("model", state.modelId);
  }
  return params.toString();
}

export function decodeShareLink(query: string, panel: PanelResponse): CaseFormState {
  const params = new URLSearchParams(query);
  const state = newFormState(panel);
  const total = Number(params.get("t") ?? "4");
  if (panel.replicate_totals.includes(total)) {
    state.total = total;
  }
  for (const part of (params.get("m") ?? "").split(",")) {
    if (!part) continue;
    const [marker, raw] = part.split(":");
    const count = Number(raw);
    if (marker && panel.markers.includes(marker) && Number.isInteger(count)) {
      state.detected[marker] = Math.min(Math.max(count, 0), state.total);
    }
  }
  const interest = params.get("i");
  if (interest) {
    state.interest = interest.split(",").filter((f) => panel.fluids.includes(f)).sort();
  }
  for (const part of (params.get("bg") ?? "").split(",")) {
    if (!part) continue;
    const [fluid, raw] = part.split(":");
    const level = Number(raw);
    if (fluid && panel.fluids.includes(fluid) && level >= 0 && level <= 1) {
      state.backgrounds[fluid] = level;
    }
  }
  state.modelId = params.get("model");
  return state;
}
