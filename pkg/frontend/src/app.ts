/**
 * DOM wiring. All state lives in SessionFlow; this file renders the
 * current FlowState into #screen and forwards button clicks. Controls
 * are disabled whenever a request is in flight, which together with the
 * client-side guard keeps exactly one request on the wire.
 */
import { ApiError, SessionApi } from "./api.js";
import { SessionFlow, type FlowState } from "./flow.js";
import type { CoactiveForm, PreferenceChoice } from "./model.js";
import { renderError, renderReport, renderTrial } from "./render.js";

const screen = document.getElementById("screen") as HTMLElement;

function coactiveControls(names: string[]): string {
  const options = names
    .map((name, i) => `<option value="${i}">${name}</option>`)
    .join("");
  return `<fieldset class="coactive" data-testid="coactive-form">
<legend><label><input type="checkbox" id="co-enable"> I would rather try a change</label></legend>
<label>parameter <select id="co-dim" disabled>${options}</select></label>
<label><input type="radio" name="co-dir" value="higher" checked disabled> higher</label>
<label><input type="radio" name="co-dir" value="lower" disabled> lower</label>
<label>by <input type="number" id="co-mag" step="any" min="0" value="0.01" disabled></label>
</fieldset>`;
}

function readCoactive(): CoactiveForm | null {
  const enabled = (document.getElementById("co-enable") as HTMLInputElement).checked;
  if (!enabled) {
    return null;
  }
  const dim = Number((document.getElementById("co-dim") as HTMLSelectElement).value);
  const direction = (
    document.querySelector('input[name="co-dir"]:checked') as HTMLInputElement
  ).value as "higher" | "lower";
  const magnitude = Number((document.getElementById("co-mag") as HTMLInputElement).value);
  return { dim, direction, magnitude };
}

function show(state: FlowState, flow: SessionFlow, names: string[]): void {
  if (state.kind === "report") {
    screen.innerHTML = renderReport(state.view);
    return;
  }
  const notice = state.recovered
    ? renderError(state.recovered.status, state.recovered.detail)
    : "";
  screen.innerHTML = `${notice}
${renderTrial(state.view)}
<div class="answers">
<button data-choice="first">First feels better</button>
<button data-choice="second">Second feels better</button>
<button data-choice="none">No preference</button>
</div>
${coactiveControls(names)}`;

  const enable = document.getElementById("co-enable") as HTMLInputElement;
  enable.addEventListener("change", () => {
    for (const el of screen.querySelectorAll<HTMLInputElement>(
      ".coactive select, .coactive input:not(#co-enable)",
    )) {
      el.disabled = !enable.checked;
    }
  });

  for (const button of screen.querySelectorAll<HTMLButtonElement>("[data-choice]")) {
    button.addEventListener("click", () => {
      void answer(button.dataset.choice as PreferenceChoice, flow, names);
    });
  }
}

async function answer(
  choice: PreferenceChoice,
  flow: SessionFlow,
  names: string[],
): Promise<void> {
  const buttons = screen.querySelectorAll<HTMLButtonElement>("button");
  for (const b of buttons) {
    b.disabled = true;
  }
  try {
    show(await flow.submit(choice, readCoactive()), flow, names);
  } catch (err) {
    const status = err instanceof ApiError ? err.status : 0;
    screen.insertAdjacentHTML(
      "afterbegin",
      renderError(status, err instanceof Error ? err.message : String(err)),
    );
    for (const b of buttons) {
      b.disabled = false;
    }
  }
}

function setup(): void {
  screen.innerHTML = `<form id="create" class="setup">
<h2>Start a session</h2>
<label>server <input id="base-url" value="" placeholder="http://127.0.0.1:8000"></label>
<label>preset <select id="preset"><option value="exoskeleton">exoskeleton</option></select></label>
<label>seed (blank = random) <input id="seed" type="number" step="1"></label>
<button type="submit">Begin</button>
</form>`;
  const form = document.getElementById("create") as HTMLFormElement;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const baseUrl = (document.getElementById("base-url") as HTMLInputElement).value;
    const preset = (document.getElementById("preset") as HTMLSelectElement).value;
    const seedRaw = (document.getElementById("seed") as HTMLInputElement).value;
    const flow = new SessionFlow(new SessionApi(baseUrl));
    const body: { preset: string; seed?: number } = { preset };
    if (seedRaw !== "") {
      body.seed = Number(seedRaw);
    }
    flow
      .start(body)
      .then((state) => {
        const names =
          state.kind === "trial" ? state.view.current.map((p) => p.name) : [];
        show(state, flow, names);
      })
      .catch((err) => {
        const status = err instanceof ApiError ? err.status : 0;
        screen.insertAdjacentHTML(
          "afterbegin",
          renderError(status, err instanceof Error ? err.message : String(err)),
        );
      });
  });
}

setup();
