/**
 * Pure HTML renderers. Values are printed with String(value), never
 * rounded, so what the subject sees is exactly what the API sent;
 * styling is left to the stylesheet.
 */
import type { ParameterView, ReportView, TrialView } from "./model.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function parameterRows(params: ParameterView[]): string {
  return params
    .map(
      (p) => `<tr>
  <td class="param-name">${escapeHtml(p.name)}</td>
  <td class="param-value">${String(p.value)}${p.unit ? " " + p.unit : ""}</td>
  <td class="param-range">${String(p.lower)} to ${String(p.upper)}</td>
</tr>`,
    )
    .join("\n");
}

function parameterTable(caption: string, params: ParameterView[]): string {
  return `<table class="params">
<caption>${escapeHtml(caption)}</caption>
<thead><tr><th>parameter</th><th>value</th><th>range</th></tr></thead>
<tbody>
${parameterRows(params)}
</tbody>
</table>`;
}

export function renderTrial(view: TrialView): string {
  const previous =
    view.previous === null
      ? `<p class="first-trial">First candidate: walk with it until you could compare it against another.</p>`
      : parameterTable("Previous candidate (second)", view.previous);
  return `<section class="trial" data-testid="trial">
<h2>Trial ${view.index}</h2>
${parameterTable("Current candidate (first)", view.current)}
${previous}
</section>`;
}

const BAR_CELL = 12; // histogram bar width per visit, in pixels

function histogram(name: string, visits: number[]): string {
  const bars = visits
    .map(
      (count, bin) => `<div class="bar" data-bin="${bin}" title="${count} visits"
  style="height:${count * BAR_CELL}px"></div>`,
    )
    .join("\n");
  return `<figure class="histogram" data-testid="histogram">
<figcaption>${escapeHtml(name)}</figcaption>
<div class="bars">
${bars}
</div>
</figure>`;
}

export function renderReport(view: ReportView): string {
  const aMax =
    view.aMax === null
      ? "<p>No best action was computed.</p>"
      : parameterTable("Best action found", view.aMax);
  const history = view.trials
    .map(
      (t) => `<tr>
  <td>${t.index}</td>
  <td>${t.action.map((v) => String(v)).join(", ")}</td>
  <td>${escapeHtml(t.preference)}</td>
  <td>${escapeHtml(t.coactive)}</td>
</tr>`,
    )
    .join("\n");
  return `<section class="report" data-testid="report">
<h2>Session report</h2>
${aMax}
<p class="accuracy">Validation: the best action was preferred in
${view.preferred} of ${view.scored} comparisons.</p>
<div class="histograms">
${view.histograms.map((h) => histogram(h.name, h.visits)).join("\n")}
</div>
<table class="history">
<caption>Trial history</caption>
<thead><tr><th>trial</th><th>action</th><th>preference</th><th>suggestion</th></tr></thead>
<tbody>
${history}
</tbody>
</table>
</section>`;
}

export function renderError(status: number, detail: string): string {
  let advice: string;
  if (status === 409) {
    advice = "This answer was already recorded; the pending trial was reloaded.";
  } else if (status === 410) {
    advice = "This session is finished; see the report below.";
  } else if (status === 404) {
    advice = "Unknown session. Check the link or start a new session.";
  } else {
    advice = "Unexpected server response; try again.";
  }
  return `<p class="error" data-status="${status}">${escapeHtml(advice)}
<span class="detail">${escapeHtml(detail)}</span></p>`;
}
