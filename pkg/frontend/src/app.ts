/** Console wiring: input box, result pane, entity browser, fragment routing. */

import { fetchEntity, fetchTsv, runQuery } from "./api.js";
import { backReferencesOf, parseQueryResponse } from "./model.js";
import {
  ViewState,
  backReferenceQuery,
  decodeState,
  encodeState,
  makeSequencer,
  tsvBlobParts,
} from "./queries.js";
import { RenderHooks, renderDetail, renderResult } from "./render.js";

const input = document.getElementById("query") as HTMLInputElement;
const submit = document.getElementById("submit") as HTMLButtonElement;
const banner = document.getElementById("banner") as HTMLElement;
const errorLine = document.getElementById("error") as HTMLElement;
const pane = document.getElementById("pane") as HTMLElement;

const sequencer = makeSequencer();
let lastTableQuery: string | null = null;
let applyingFragment = false;

const hooks: RenderHooks = {
  openEntity(id: number) {
    void show({ view: "entity", id });
  },
  downloadTsv() {
    if (lastTableQuery === null) return;
    const query = lastTableQuery;
    void fetchTsv(query).then((payload) => {
      const blob = new Blob(tsvBlobParts(payload), {
        type: "text/tab-separated-values",
      });
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = "result.tsv";
      link.click();
      URL.revokeObjectURL(link.href);
    });
  },
};

function clearMessages() {
  banner.hidden = true;
  errorLine.hidden = true;
}

function showBanner(message: string) {
  banner.textContent = message;
  banner.hidden = false;
}

function showSyntaxError(message: string, position: number | undefined) {
  if (position !== undefined) {
    const caret = " ".repeat(position) + "^";
    errorLine.textContent = `${message}\n${input.value}\n${caret}`;
  } else {
    errorLine.textContent = message;
  }
  errorLine.hidden = false;
}

async function showQuery(query: string) {
  const ticket = sequencer.begin();
  clearMessages();
  let outcome;
  try {
    outcome = await runQuery(query);
  } catch (failure) {
    if (sequencer.isCurrent(ticket)) {
      showBanner(`request failed: ${String(failure)}`);
    }
    return;
  }
  if (!sequencer.isCurrent(ticket)) return; // superseded meanwhile
  if (!outcome.ok) {
    if (outcome.status === 403 || outcome.status === 401) {
      showBanner("access denied — log in on the server first");
    } else {
      showSyntaxError(outcome.error.message, outcome.error.position);
    }
    return;
  }
  lastTableQuery = outcome.result.kind === "table" ? query : null;
  pane.replaceChildren(renderResult(outcome.result, hooks));
}

async function showEntity(id: number) {
  const ticket = sequencer.begin();
  clearMessages();
  try {
    const outcome = await fetchEntity(id);
    if (!sequencer.isCurrent(ticket)) return;
    if (!outcome.ok) {
      if (outcome.status === 403 || outcome.status === 401) {
        showBanner("access denied — log in on the server first");
      } else {
        showBanner(outcome.error.message);
      }
      return;
    }
    const card = outcome.entity;
    let backRefs: typeof outcome.entity[] = [];
    const referrers = await runQuery(backReferenceQuery(card.name));
    if (!sequencer.isCurrent(ticket)) return;
    if (referrers.ok && referrers.result.kind === "entities") {
      backRefs = backReferencesOf(referrers.result.entities, card.id);
    }
    pane.replaceChildren(renderDetail(card, backRefs, hooks));
  } catch (failure) {
    if (sequencer.isCurrent(ticket)) showBanner(`request failed: ${String(failure)}`);
  }
}

async function show(state: ViewState) {
  if (!applyingFragment) {
    history.pushState(null, "", encodeState(state));
  }
  if (state.view === "query") {
    input.value = state.query;
    await showQuery(state.query);
  } else {
    await showEntity(state.id);
  }
}

function applyFragment() {
  const state = decodeState(location.hash);
  if (state === null) return;
  applyingFragment = true;
  void show(state).finally(() => {
    applyingFragment = false;
  });
}

submit.addEventListener("click", () => {
  const query = input.value.trim();
  if (query) void show({ view: "query", query });
});
input.addEventListener("keydown", (event) => {
  if (event.key === "Enter") submit.click();
});
window.addEventListener("hashchange", applyFragment);
window.addEventListener("popstate", applyFragment);

applyFragment();

// re-exported for tests of the module wiring
export { parseQueryResponse };
