// DOM wiring for the case evaluation board: build the form from the panel
// endpoint, submit cases, render the LR dial, waterfall and history.

import { ApiClient, ApiError } from "./api.js";
import {
  BACKGROUND_PRESETS,
  CaseFormState,
  buildRequest,
  decodeShareLink,
  encodeShareLink,
  newFormState,
  validateForm,
} from "./form.js";
import type { PanelResponse } from "./types.js";
import { SessionHistory, buildEvaluationView, EvaluationView } from "./view.js";

const api = new ApiClient("");
const history = new SessionHistory();

let panel: PanelResponse;
let form: CaseFormState;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderForm(): void {
  const markersDiv = el<HTMLDivElement>("markers");
  markersDiv.innerHTML = "";
  for (const marker of panel.markers) {
    const row = document.createElement("div");
    row.className = "marker-row";
    const label = document.createElement("label");
    label.textContent = marker;
    label.htmlFor = `marker-${marker}`;
    const select = document.createElement("select");
    select.id = `marker-${marker}`;
    for (let k = 0; k <= form.total; k++) {
      const option = document.createElement("option");
      option.value = String(k);
      option.textContent = `${k}/${form.total}`;
      select.appendChild(option);
    }
    select.value = String(form.detected[marker] ?? 0);
    select.addEventListener("change", () => {
      form.detected[marker] = Number(select.value);
      syncShareLink();
    });
    row.append(label, select);
    markersDiv.appendChild(row);
  }

  const totalSelect = el<HTMLSelectElement>("total");
  totalSelect.innerHTML = "";
  for (const total of panel.replicate_totals) {
    const option = document.createElement("option");
    option.value = String(total);
    option.textContent = `${total} replicates`;
    totalSelect.appendChild(option);
  }
  totalSelect.value = String(form.total);
  totalSelect.addEventListener("change", () => {
    form.total = Number(totalSelect.value);
    for (const marker of panel.markers) {
      form.detected[marker] = Math.min(form.detected[marker] ?? 0, form.total);
    }
    renderForm();
    syncShareLink();
  });

  const interestDiv = el<HTMLDivElement>("interest");
  interestDiv.innerHTML = "";
  for (const fluid of panel.fluids) {
    const label = document.createElement("label");
    label.className = "choice";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.value = fluid;
    box.checked = form.interest.includes(fluid);
    box.addEventListener("change", () => {
      form.interest = box.checked
        ? [...form.interest, fluid].sort()
        : form.interest.filter((f) => f !== fluid);
      syncShareLink();
    });
    label.append(box, document.createTextNode(fluid.replace(/_/g, " ")));
    interestDiv.appendChild(label);
  }

  const bgDiv = el<HTMLDivElement>("backgrounds");
  bgDiv.innerHTML = "";
  for (const fluid of panel.fluids) {
    const row = document.createElement("div");
    row.className = "bg-row";
    const name = document.createElement("span");
    name.textContent = fluid.replace(/_/g, " ");
    const group = document.createElement("span");
    group.className = "bg-presets";
    for (const preset of BACKGROUND_PRESETS) {
      const button = document.createElement("button");
      button.type = "button";
      button.textContent = String(preset);
      button.className = form.backgrounds[fluid] === preset ? "preset active" : "preset";
      button.addEventListener("click", () => {
        form.backgrounds[fluid] = preset;
        renderForm();
        syncShareLink();
      });
      group.appendChild(button);
    }
    row.append(name, group);
    bgDiv.appendChild(row);
  }
}

function syncShareLink(): void {
  const query = encodeShareLink(form, panel);
  window.history.replaceState(null, "", query ? `?${query}` : location.pathname);
  el<HTMLAnchorElement>("share-link").href = `?${query}`;
}

function showBanner(message: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
}

function showFieldErrors(errors: { field: string; message: string }[]): void {
  const box = el<HTMLDivElement>("form-errors");
  box.innerHTML = "";
  for (const err of errors) {
    const item = document.createElement("div");
    item.className = "field-error";
    item.textContent = `${err.field}: ${err.message}`;
    box.appendChild(item);
  }
}

export function renderWaterfall(view: EvaluationView): void {
  const host = el<HTMLDivElement>("waterfall");
  host.innerHTML = "";
  const { segments, sum, consistent } = view.waterfall;
  const span = Math.max(1, ...segments.map((s) => Math.max(Math.abs(s.start), Math.abs(s.end))));
  for (const segment of segments) {
    const row = document.createElement("div");
    row.className = `wf-row ${segment.sign}`;
    const label = document.createElement("span");
    label.className = "wf-label";
    label.textContent = segment.label;
    label.title = segment.detail;
    const bar = document.createElement("span");
    bar.className = "wf-bar";
    const lo = Math.min(segment.start, segment.end);
    const width = Math.abs(segment.value);
    bar.style.marginLeft = `${(50 + (lo / span) * 48).toFixed(2)}%`;
    bar.style.width = `${Math.max(0.5, (width / span) * 48).toFixed(2)}%`;
    const value = document.createElement("span");
    value.className = "wf-value";
    value.textContent = segment.value.toFixed(2);
    row.append(label, bar, value);
    host.appendChild(row);
  }
  const note = document.createElement("div");
  note.className = "wf-sum";
  note.textContent = `sum ${sum.toFixed(2)}${consistent ? "" : " (inconsistent with headline!)"}`;
  host.appendChild(note);
}

export function renderResult(view: EvaluationView): void {
  el<HTMLDivElement>("dial").textContent = view.log10LrDisplay;
  el<HTMLDivElement>("capped").textContent = `LR (capped): ${view.cappedLrDisplay}`;
  el<HTMLDivElement>("verbal").textContent = view.verbal;
  const chips = el<HTMLDivElement>("n-over-2");
  chips.innerHTML = "";
  for (const { fluid, verdict } of view.nOverTwo) {
    const chip = document.createElement("span");
    chip.className = `chip ${verdict}`;
    chip.textContent = `${fluid.replace(/_/g, " ")}: ${verdict.replace(/_/g, " ")}`;
    chips.appendChild(chip);
  }
  if (view.nOverTwoCombined) {
    const chip = document.createElement("span");
    chip.className = `chip combined ${view.nOverTwoCombined}`;
    chip.textContent = `combined: ${view.nOverTwoCombined.replace(/_/g, " ")}`;
    chips.appendChild(chip);
  }
  renderWaterfall(view);
  el<HTMLDivElement>("result").style.display = "block";
  el<HTMLDivElement>("model-info").textContent =
    `model ${view.modelId} | server ${view.serverVersion}`;
}

function renderHistory(): void {
  const body = el<HTMLTableSectionElement>("history-body");
  body.innerHTML = "";
  for (const entry of history.list()) {
    const row = document.createElement("tr");
    const cells = [
      entry.label,
      entry.view.log10LrDisplay,
      entry.view.cappedLrDisplay,
      entry.view.verbal,
    ];
    for (const text of cells) {
      const cell = document.createElement("td");
      cell.textContent = text;
      row.appendChild(cell);
    }
    body.appendChild(row);
  }
}

async function submit(): Promise<void> {
  showBanner(null);
  const errors = validateForm(form, panel);
  showFieldErrors(errors);
  if (errors.length > 0) return;
  const request = buildRequest(form, panel);
  try {
    const response = await api.evaluate(request);
    const view = buildEvaluationView(response);
    const overrides = Object.entries(request.background_overrides ?? {})
      .map(([f, p]) => `${f}=${p}`).join(" ");
    history.add(`${view.log10LrDisplay} ${overrides || "defaults"}`, view);
    renderResult(view);
    renderHistory();
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") {
      return; // replaced by a newer submission
    }
    if (err instanceof ApiError && err.kind === "field") {
      showFieldErrors([{ field: err.code, message: err.message }]);
    } else if (err instanceof ApiError) {
      showBanner(`server error (${err.code}): ${err.message}`);
    } else {
      showBanner(String(err));
    }
  }
}

async function start(): Promise<void> {
  panel = await api.panel();
  form = location.search
    ? decodeShareLink(location.search.slice(1), panel)
    : newFormState(panel);
  renderForm();
  syncShareLink();
  el<HTMLButtonElement>("submit").addEventListener("click", () => {
    void submit();
  });
  el<HTMLButtonElement>("clear").addEventListener("click", () => {
    form = newFormState(panel);
    renderForm();
    syncShareLink();
  });
}

if (typeof document !== "undefined" && document.getElementById("submit")) {
  void start().catch((err) => showBanner(String(err)));
}
