import type { SearchResponse, SearchResult } from "../src/types.js";

export function makeResults(ids: string[]): SearchResponse {
  const results: SearchResult[] = ids.map((id, i) => ({
    id,
    distance: 0.1 * (i + 1),
    rank: i + 1,
    caption: `caption for ${id}`,
    image_path: null,
  }));
  return { version: 1, results, dropped_tokens: [] };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
