/**
 * DOM bootstrap: wires the static form to the api client, state, and
 * renderers. All dynamic markup goes through renderSession so the page
 * content is a pure function of ConsoleState.
 */

import { ConsoleApi } from "./api.js";
import { renderSession } from "./render.js";
import { ConsoleState } from "./state.js";
import type { ActionName, PolicyName, RecommendRequest } from "./types.js";
import { buildObservation } from "./validate.js";

const params = new URLSearchParams(window.location.search);
const api = new ConsoleApi(params.get("api") ?? "http://127.0.0.1:8000");
const state = new ConsoleState();

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) throw new Error(`missing element #${id}`);
  return found as T;
}

const view = element<HTMLDivElement>("view");
const controls = element<HTMLFieldSetElement>("controls");
const inlineError = element<HTMLDivElement>("inline-error");
const actionSelect = element<HTMLSelectElement>("action");
const clinicalFields = element<HTMLDivElement>("clinical-fields");
const dsaFields = element<HTMLDivElement>("dsa-fields");

function rerender(): void {
  view.innerHTML = renderSession(state);
  controls.disabled = state.inFlight || state.session === null;
}

function showInlineError(message: string | null): void {
  inlineError.textContent = message ?? "";
  inlineError.hidden = message === null;
}

function syncObservationFields(): void {
  const isDsa = actionSelect.value === "DSA";
  clinicalFields.hidden = isDsa;
  dsaFields.hidden = !isDsa;
}

function recommendRequest(): RecommendRequest {
  const request: RecommendRequest = {
    policy: element<HTMLSelectElement>("policy").value as PolicyName,
    seed: Number(element<HTMLInputElement>("seed").value || "0"),
  };
  const depth = element<HTMLInputElement>("max-depth").value.trim();
  if (depth !== "") {
    request.solver_overrides = { max_depth: Number(depth) };
  }
  return request;
}

async function openSession(): Promise<void> {
  try {
    const session = await api.createSession();
    state.applySession(session);
  } catch (error) {
    state.applyError(error);
  }
  rerender();
}

async function commitStep(): Promise<void> {
  if (state.session === null) return;
  const action = actionSelect.value as ActionName;
  const result = buildObservation(
    action,
    {
      ct: element<HTMLSelectElement>("ct").value,
      siriraj: element<HTMLInputElement>("siriraj").value,
    },
    {
      pred_ane: element<HTMLInputElement>("pred-ane").checked,
      pred_avm: element<HTMLInputElement>("pred-avm").checked,
      pred_occ: element<HTMLInputElement>("pred-occ").checked,
    },
  );
  if (result.error !== undefined) {
    showInlineError(result.error);
    return;
  }
  showInlineError(null);
  if (!state.beginMutation()) return;
  rerender();
  try {
    const sessionId = state.session.session_id;
    const step = await api.step(sessionId, action, result.observation!);
    state.applyStep(action, result.observation!, step);
    state.applyRecommend(await api.recommend(sessionId, recommendRequest()));
  } catch (error) {
    state.applyError(error);
  } finally {
    state.endMutation();
  }
  rerender();
}

/** Read-only what-if: refreshes the panel without touching the session. */
async function refreshRecommendation(): Promise<void> {
  if (state.session === null) return;
  try {
    const payload = await api.recommend(
      state.session.session_id,
      recommendRequest(),
    );
    state.applyRecommend(payload);
  } catch (error) {
    state.applyError(error);
  }
  rerender();
}

element<HTMLButtonElement>("new-session").addEventListener("click", () => {
  void openSession();
});
element<HTMLButtonElement>("commit").addEventListener("click", () => {
  void commitStep();
});
element<HTMLButtonElement>("recommend").addEventListener("click", () => {
  void refreshRecommendation();
});
actionSelect.addEventListener("change", syncObservationFields);
view.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  if (target.classList.contains("banner-dismiss")) {
    state.dismissBanner();
    rerender();
  }
});

syncObservationFields();
rerender();
