/** Typed views over the server's XML responses. */

import { XmlElement, childrenNamed, firstChild } from "./xml.js";

export interface ScalarView {
  value: string;
  unit?: string;
}

export interface PropertyView {
  ref: number;
  name?: string;
  type?: string;
  importance: string;
  /** null means the stored value is Null; lists carry one entry per item */
  values: ScalarView[] | null;
  unit?: string;
}

export interface ParentLink {
  id: number;
  name?: string;
}

export interface EntityCard {
  id: number;
  kind: string;
  name: string;
  description?: string;
  parents: ParentLink[];
  properties: PropertyView[];
  file?: { path: string; size: number; checksum: string };
}

export type QueryView =
  | { kind: "count"; count: number; warnings: string[] }
  | { kind: "entities"; entities: EntityCard[]; warnings: string[] }
  | { kind: "table"; columns: string[]; rows: string[][]; warnings: string[] };

export interface ServerError {
  message: string;
  position?: number;
}

function parseProperty(el: XmlElement): PropertyView {
  const items = childrenNamed(el, "Item");
  let values: ScalarView[] | null = null;
  if (items.length > 0) {
    values = items.map((item) => ({
      value: item.attrs.value ?? "",
      unit: item.attrs.unit,
    }));
  } else if (el.attrs.value !== undefined) {
    values = [{ value: el.attrs.value, unit: el.attrs.unit }];
  }
  return {
    ref: Number(el.attrs.ref),
    name: el.attrs.name,
    type: el.attrs.type,
    importance: el.attrs.importance ?? "",
    values,
    unit: el.attrs.unit,
  };
}

export function parseEntity(el: XmlElement): EntityCard {
  if (el.tag !== "Entity") throw new Error(`expected <Entity>, got <${el.tag}>`);
  const fileEl = firstChild(el, "File");
  return {
    id: Number(el.attrs.id),
    kind: el.attrs.kind,
    name: el.attrs.name,
    description: el.attrs.description,
    parents: childrenNamed(el, "Parent").map((p) => ({
      id: Number(p.attrs.id),
      name: p.attrs.name,
    })),
    properties: childrenNamed(el, "Property").map(parseProperty),
    file: fileEl
      ? {
          path: fileEl.attrs.path,
          size: Number(fileEl.attrs.size),
          checksum: fileEl.attrs.checksum,
        }
      : undefined,
  };
}

export function parseQueryResponse(root: XmlElement): QueryView {
  if (root.tag === "Error") throw new Error(root.text);
  if (root.tag !== "Response") throw new Error(`unexpected <${root.tag}> response`);
  const warnings = childrenNamed(root, "Warning").map((w) => w.text);
  const count = firstChild(root, "Count");
  if (count) {
    return { kind: "count", count: Number(count.text), warnings };
  }
  const table = firstChild(root, "Table");
  if (table) {
    const header = firstChild(table, "Header");
    return {
      kind: "table",
      columns: header ? childrenNamed(header, "Column").map((c) => c.attrs.name) : [],
      rows: childrenNamed(table, "Row").map((row) =>
        childrenNamed(row, "Cell").map((cell) => cell.text)
      ),
      warnings,
    };
  }
  return {
    kind: "entities",
    entities: childrenNamed(root, "Entity").map(parseEntity),
    warnings,
  };
}

export function parseServerError(root: XmlElement): ServerError {
  const position = root.attrs.position;
  return {
    message: root.text,
    position: position === undefined ? undefined : Number(position),
  };
}

/** Display text for one property, e.g. "22.5 °C" or "a, b, c". */
export function formatProperty(p: PropertyView): string {
  if (p.values === null) return "—";
  return p.values
    .map((s) => (s.unit ? `${s.value} ${s.unit}` : s.value))
    .join(", ");
}

export function isReferenceValued(p: PropertyView): boolean {
  return p.type !== undefined && p.type.replace("ListOf:", "") === "Reference";
}

/**
 * Exact back-references: of the entities returned by the (name-based)
 * server query, keep those holding a reference property whose value is
 * the target id.
 */
export function backReferencesOf(cards: EntityCard[], targetId: number): EntityCard[] {
  const wanted = String(targetId);
  return cards.filter((card) =>
    card.properties.some(
      (p) =>
        isReferenceValued(p) &&
        p.values !== null &&
        p.values.some((s) => s.value === wanted)
    )
  );
}

/** Stable sort of table rows by one column; numeric when both cells parse. */
export function sortRows(rows: string[][], column: number, descending: boolean): string[][] {
  const keyed = rows.map((row, index) => ({ row, index }));
  keyed.sort((a, b) => {
    const x = a.row[column] ?? "";
    const y = b.row[column] ?? "";
    const nx = Number(x);
    const ny = Number(y);
    let order: number;
    if (x !== "" && y !== "" && !Number.isNaN(nx) && !Number.isNaN(ny)) {
      order = nx - ny;
    } else {
      order = x < y ? -1 : x > y ? 1 : 0;
    }
    if (order === 0) order = a.index - b.index;
    return descending ? -order : order;
  });
  return keyed.map((k) => k.row);
}
