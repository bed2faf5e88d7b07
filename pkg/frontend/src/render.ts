/** DOM construction for the three result shapes and the entity detail view. */

import {
  EntityCard,
  QueryView,
  formatProperty,
  isReferenceValued,
  sortRows,
} from "./model.js";

export interface RenderHooks {
  openEntity(id: number): void;
  downloadTsv(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function entityLink(id: number, label: string, hooks: RenderHooks): HTMLElement {
  const link = el("a", "entity-link", label);
  link.setAttribute("href", `#e=${id}`);
  link.addEventListener("click", (event) => {
    event.preventDefault();
    hooks.openEntity(id);
  });
  return link;
}

function propertyRow(card: EntityCard, hooks: RenderHooks): HTMLElement {
  const list = el("dl", "properties");
  for (const p of card.properties) {
    list.append(el("dt", undefined, p.name ?? `#${p.ref}`));
    const dd = el("dd");
    if (isReferenceValued(p) && p.values !== null) {
      p.values.forEach((s, index) => {
        if (index > 0) dd.append(", ");
        dd.append(entityLink(Number(s.value), s.value, hooks));
      });
    } else {
      dd.textContent = formatProperty(p);
    }
    list.append(dd);
  }
  return list;
}

export function renderCard(card: EntityCard, hooks: RenderHooks): HTMLElement {
  const box = el("article", "card");
  const head = el("header");
  head.append(entityLink(card.id, card.name, hooks));
  head.append(el("span", "kind", card.kind));
  box.append(head);
  if (card.description) box.append(el("p", "description", card.description));
  if (card.parents.length > 0) {
    const parents = el("p", "parents", "is a: ");
    card.parents.forEach((parent, index) => {
      if (index > 0) parents.append(", ");
      parents.append(entityLink(parent.id, parent.name ?? String(parent.id), hooks));
    });
    box.append(parents);
  }
  if (card.properties.length > 0) box.append(propertyRow(card, hooks));
  if (card.file) {
    box.append(el("p", "file", `${card.file.path} (${card.file.size} bytes)`));
  }
  return box;
}

export function renderResult(view: QueryView, hooks: RenderHooks): HTMLElement {
  const out = el("section", "result");
  for (const warning of view.warnings) {
    out.append(el("p", "warning", warning));
  }
  if (view.kind === "count") {
    out.append(el("p", "count", String(view.count)));
    return out;
  }
  if (view.kind === "entities") {
    if (view.entities.length === 0) {
      out.append(el("p", "empty", "nothing matched"));
      return out;
    }
    for (const card of view.entities) out.append(renderCard(card, hooks));
    return out;
  }

  const download = el("button", "download", "download TSV");
  download.addEventListener("click", () => hooks.downloadTsv());
  out.append(download);

  const table = el("table");
  const headRow = el("tr");
  let rows = view.rows;
  let sortedBy = -1;
  let descending = false;
  const body = el("tbody");

  const fillBody = () => {
    body.replaceChildren();
    for (const row of rows) {
      const tr = el("tr");
      row.forEach((cell, column) => {
        const td = el("td");
        // the id column links into the entity browser
        if (column === 0 && view.columns[0] === "id" && /^\d+$/.test(cell)) {
          td.append(entityLink(Number(cell), cell, hooks));
        } else {
          td.textContent = cell;
        }
        tr.append(td);
      });
      body.append(tr);
    }
  };

  view.columns.forEach((name, column) => {
    const th = el("th", undefined, name);
    th.addEventListener("click", () => {
      descending = sortedBy === column ? !descending : false;
      sortedBy = column;
      rows = sortRows(view.rows, column, descending);
      fillBody();
    });
    headRow.append(th);
  });
  fillBody();
  const thead = el("thead");
  thead.append(headRow);
  table.append(thead, body);
  out.append(table);
  return out;
}

export function renderDetail(
  card: EntityCard,
  backRefs: EntityCard[],
  hooks: RenderHooks
): HTMLElement {
  const out = el("section", "detail");
  out.append(renderCard(card, hooks));
  const heading = el("h2", undefined, "referenced by");
  out.append(heading);
  if (backRefs.length === 0) {
    out.append(el("p", "empty", "no incoming references"));
  } else {
    for (const ref of backRefs) out.append(renderCard(ref, hooks));
  }
  return out;
}
