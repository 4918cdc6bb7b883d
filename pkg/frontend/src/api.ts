import type {
  AnnotationSubmission,
  HealthResponse,
  IcrResponse,
  SearchError,
  SearchResponse,
} from "./types.js";

/** Thrown when /search answers 422 because every token was unknown. */
export class AllTokensUnknownError extends Error {
  constructor(public droppedTokens: string[]) {
    super(`no known tokens: ${droppedTokens.join(", ")}`);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  async health(): Promise<HealthResponse> {
    return this.getJson("/health");
  }

  async search(query: string, k: number): Promise<SearchResponse> {
    const resp = await fetch(`${this.baseUrl}/search`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ version: 1, query, k }),
    });
    if (resp.status === 422) {
      const body = (await resp.json()) as SearchError;
      throw new AllTokensUnknownError(body.dropped_tokens ?? []);
    }
    if (!resp.ok) {
      throw new Error(`search failed: HTTP ${resp.status}`);
    }
    return (await resp.json()) as SearchResponse;
  }

  async annotate(submission: AnnotationSubmission): Promise<void> {
    const resp = await fetch(`${this.baseUrl}/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ version: 1, ...submission }),
    });
    if (!resp.ok) {
      throw new Error(`annotation failed: HTTP ${resp.status}`);
    }
  }

  async icr(): Promise<IcrResponse> {
    return this.getJson("/icr");
  }

  imageUrl(itemId: string): string {
    return `${this.baseUrl}/memes/${encodeURIComponent(itemId)}/image`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`);
    if (!resp.ok) {
      throw new Error(`${path} failed: HTTP ${resp.status}`);
    }
    return (await resp.json()) as T;
  }
}
