/** Thin fetch layer; all responses are XML except the TSV download. */

import { QueryView, ServerError, EntityCard, parseEntity, parseQueryResponse, parseServerError } from "./model.js";
import { entityUrl, queryUrl } from "./queries.js";
import { parseXml } from "./xml.js";

export type QueryOutcome =
  | { ok: true; result: QueryView }
  | { ok: false; status: number; error: ServerError };

export type EntityOutcome =
  | { ok: true; entity: EntityCard }
  | { ok: false; status: number; error: ServerError };

const SERVER_BASE = "..";

export async function runQuery(query: string): Promise<QueryOutcome> {
  const response = await fetch(queryUrl(SERVER_BASE, query));
  const body = await response.text();
  const root = parseXml(body);
  if (!response.ok) {
    return { ok: false, status: response.status, error: parseServerError(root) };
  }
  return { ok: true, result: parseQueryResponse(root) };
}

export async function fetchEntity(id: number): Promise<EntityOutcome> {
  const response = await fetch(entityUrl(SERVER_BASE, id));
  const body = await response.text();
  const root = parseXml(body);
  if (!response.ok) {
    return { ok: false, status: response.status, error: parseServerError(root) };
  }
  return { ok: true, entity: parseEntity(root) };
}

export async function fetchTsv(query: string): Promise<ArrayBuffer> {
  const response = await fetch(queryUrl(SERVER_BASE, query), {
    headers: { Accept: "text/tab-separated-values" },
  });
  if (!response.ok) throw new Error(`TSV download failed: ${response.status}`);
  return response.arrayBuffer();
}
