export type ClassLabel = "meme" | "sticker" | "no_meme";

export interface SearchResult {
  id: string;
  distance: number;
  rank: number;
  caption: string | null;
  image_path: string | null;
}

export interface SearchResponse {
  version: number;
  results: SearchResult[];
  dropped_tokens: string[];
}

export interface SearchError {
  version: number;
  error: string;
  dropped_tokens: string[];
}

export interface IcrPair {
  coders: [string, string];
  agreement: number;
  co_annotated: number;
}

export interface IcrResponse {
  version: number;
  pairs: IcrPair[];
  mean: number | null;
}

export interface HealthResponse {
  version: number;
  item_count: number;
  classifier: string | null;
}

export interface AnnotationSubmission {
  item_id: string;
  coder_id: string;
  label: ClassLabel;
}

/** Mean agreement required before coders count as trained. */
export const ICR_GATE = 0.9;
