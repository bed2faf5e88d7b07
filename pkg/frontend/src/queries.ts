/** Query-string construction and URL-fragment state. */

export type ViewState =
  | { view: "query"; query: string }
  | { view: "entity"; id: number };

/** Quoted names are always safe, whatever the name contains. */
export function quoteName(name: string): string {
  return '"' + name.replace(/\\/g, "\\\\").replace(/"/g, '\\"') + '"';
}

/**
 * Server query for "who points at this entity". The query language
 * addresses entities by name, so the browser resolves the name first and
 * filters the response down to exact id matches client-side.
 */
export function backReferenceQuery(targetName: string): string {
  return `FIND ENTITY WHICH REFERENCES ${quoteName(targetName)}`;
}

export function queryUrl(base: string, query: string): string {
  return `${base}/Entity/?query=${encodeURIComponent(query)}`;
}

export function entityUrl(base: string, id: number): string {
  return `${base}/Entity/${id}`;
}

export function encodeState(state: ViewState): string {
  if (state.view === "entity") return `#e=${state.id}`;
  return `#q=${encodeURIComponent(state.query)}`;
}

export function decodeState(fragment: string): ViewState | null {
  const body = fragment.startsWith("#") ? fragment.slice(1) : fragment;
  if (body.startsWith("e=")) {
    const id = Number(body.slice(2));
    return Number.isInteger(id) && id > 0 ? { view: "entity", id } : null;
  }
  if (body.startsWith("q=")) {
    return { view: "query", query: decodeURIComponent(body.slice(2)) };
  }
  return null;
}

/**
 * One query in flight at a time: each submission takes a ticket, and a
 * response is applied only if its ticket is still the latest.
 */
export function makeSequencer(): { begin(): number; isCurrent(ticket: number): boolean } {
  let latest = 0;
  return {
    begin: () => ++latest,
    isCurrent: (ticket) => ticket === latest,
  };
}

/** TSV downloads pass the server's bytes through untouched. */
export function tsvBlobParts(payload: ArrayBuffer): BlobPart[] {
  return [payload];
}
