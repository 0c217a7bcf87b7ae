// Acceptance: the worked case entered in the form displays exactly what the
// server serves, and the penile-background toggle reproduces the published
// what-if value. Responses are replayed verbatim from the service's own
// test fixtures (kept in sync by the backend test suite).

import { describe, expect, it, vi } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { ApiClient } from "../src/api.js";
import { buildRequest, newFormState } from "../src/form.js";
import type { EvaluateResponse, PanelResponse } from "../src/types.js";
import { SessionHistory, buildEvaluationView } from "../src/view.js";

function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(__dirname, "fixtures", name), "utf-8")) as T;
}

const panel = fixture<PanelResponse>("panel_response.json");
const case3Response = fixture<EvaluateResponse>("case3_response.json");
const penileResponse = fixture<EvaluateResponse>("case3_penile_response.json");

const CASE_3_COUNTS: Record<string, number> = {
  HBB: 4, ALAS2: 4, CD93: 4, MUC4: 2, MMP10: 1, MMP7: 2, MMP11: 2,
};

function case3Form() {
  const form = newFormState(panel);
  for (const [marker, count] of Object.entries(CASE_3_COUNTS)) {
    form.detected[marker] = count;
  }
  form.interest = ["menstrual_secretion", "vaginal_mucosa"];
  return form;
}

function replayClient() {
  const fetchFn = vi.fn(async (_url: string, init?: RequestInit) => {
    const body = JSON.parse(String(init?.body ?? "{}"));
    const penile = body.background_overrides?.skin_penile === 1;
    const payload = penile ? penileResponse : case3Response;
    return new Response(JSON.stringify(payload), { status: 200 });
  });
  return { client: new ApiClient("", fetchFn as unknown as typeof fetch), fetchFn };
}

describe("worked case round trip", () => {
  it("displays the served log10 LR within display rounding", async () => {
    const { client } = replayClient();
    const response = await client.evaluate(buildRequest(case3Form(), panel));
    const view = buildEvaluationView(response);
    const displayed = Number(view.log10LrDisplay);
    expect(Math.abs(displayed - response.report.log10_lr)).toBeLessThanOrEqual(0.01);
    expect(response.report.log10_lr).toBeCloseTo(1.5, 1);
    expect(view.verbal).toBe("moderate support for H1");
    expect(view.nOverTwoCombined).toBe("no_reliable_statement");
  });

  it("reproduces the penile what-if and keeps both in history", async () => {
    const { client, fetchFn } = replayClient();
    const history = new SessionHistory();

    const form = case3Form();
    const first = buildEvaluationView(
      await client.evaluate(buildRequest(form, panel)));
    history.add("defaults", first);

    form.backgrounds["skin_penile"] = 1;
    const request = buildRequest(form, panel);
    expect(request.background_overrides).toEqual({ skin_penile: 1 });
    const second = buildEvaluationView(await client.evaluate(request));
    history.add("skin_penile=1", second);

    // Displayed value equals the served one at display rounding, and the
    // served value matches the published what-if within its tolerance.
    expect(Math.abs(Number(second.log10LrDisplay) - penileResponse.report.log10_lr))
      .toBeLessThanOrEqual(0.01);
    expect(Math.abs(penileResponse.report.log10_lr - 0.8)).toBeLessThanOrEqual(0.05);
    expect(second.modelId).not.toBe(first.modelId);
    expect(history.list().map((e) => e.view.log10LrDisplay)).toEqual([
      first.log10LrDisplay, second.log10LrDisplay]);
    expect(fetchFn).toHaveBeenCalledTimes(2);
  });

  it("keeps the waterfall consistent with the headline for both variants", () => {
    for (const response of [case3Response, penileResponse]) {
      const view = buildEvaluationView(response);
      expect(view.waterfall.consistent).toBe(true);
      expect(Math.abs(view.waterfall.sum - view.log10Lr)).toBeLessThanOrEqual(0.01);
    }
  });

  it("clearing all detections yields the intercept-only evaluation", () => {
    // With every fraction at zero only the intercept segment remains.
    const blank = {
      ...case3Response.report,
      log10_lr: case3Response.report.intercept,
      contributions: case3Response.report.contributions.map((c) => ({
        ...c, fraction: 0, contribution: 0,
      })),
    };
    const view = buildEvaluationView({ ...case3Response, report: blank });
    expect(view.waterfall.segments).toHaveLength(1);
    expect(view.waterfall.sum).toBeCloseTo(case3Response.report.intercept, 12);
  });
});
