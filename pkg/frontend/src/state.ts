import type { AnnotationSubmission, SearchResponse } from "./types.js";
import { ICR_GATE } from "./types.js";
import type { ApiClient } from "./api.js";

const STORAGE_KEY = "memesearch-console-session";

interface PersistedSession {
  coderId: string;
  annotationMode: boolean;
  lastQuery: string;
  lastResponse: SearchResponse | null;
  annotationCursor: number;
  pendingAnnotations: AnnotationSubmission[];
}

const DEFAULTS: PersistedSession = {
  coderId: "",
  annotationMode: false,
  lastQuery: "",
  lastResponse: null,
  annotationCursor: 0,
  pendingAnnotations: [],
};

/**
 * Session state persisted to localStorage.  Everything survives a page
 * reload except the in-flight query text, which is never stored.
 */
export class ConsoleSession {
  coderId: string;
  annotationMode: boolean;
  lastQuery: string;
  lastResponse: SearchResponse | null;
  annotationCursor: number;
  private pending: AnnotationSubmission[];
  private flushing = false;

  constructor(private storage: Storage) {
    const restored = this.restore();
    this.coderId = restored.coderId;
    this.annotationMode = restored.annotationMode;
    this.lastQuery = restored.lastQuery;
    this.lastResponse = restored.lastResponse;
    this.annotationCursor = restored.annotationCursor;
    this.pending = [...restored.pendingAnnotations];
  }

  private restore(): PersistedSession {
    try {
      const raw = this.storage.getItem(STORAGE_KEY);
      if (!raw) return { ...DEFAULTS };
      return { ...DEFAULTS, ...(JSON.parse(raw) as Partial<PersistedSession>) };
    } catch {
      return { ...DEFAULTS };
    }
  }

  persist(): void {
    const doc: PersistedSession = {
      coderId: this.coderId,
      annotationMode: this.annotationMode,
      lastQuery: this.lastQuery,
      lastResponse: this.lastResponse,
      annotationCursor: this.annotationCursor,
      pendingAnnotations: this.pending,
    };
    this.storage.setItem(STORAGE_KEY, JSON.stringify(doc));
  }

  recordSearch(query: string, response: SearchResponse): void {
    this.lastQuery = query;
    this.lastResponse = response;
    this.persist();
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  /** Queue a submission; failed sends stay queued and retry in FIFO order. */
  enqueueAnnotation(submission: AnnotationSubmission): void {
    this.pending.push(submission);
    this.persist();
  }

  /**
   * Send queued submissions oldest-first, stopping at the first failure
   * so order is preserved.  Returns the number delivered.
   */
  async flushAnnotations(api: ApiClient): Promise<number> {
    if (this.flushing) return 0;
    this.flushing = true;
    let delivered = 0;
    try {
      while (this.pending.length > 0) {
        const head = this.pending[0];
        try {
          await api.annotate(head);
        } catch {
          break;
        }
        this.pending.shift();
        delivered += 1;
        this.persist();
      }
    } finally {
      this.flushing = false;
    }
    return delivered;
  }
}

/** The gate activates once mean agreement reaches the training threshold. */
export function icrGateActive(mean: number | null): boolean {
  return mean !== null && mean >= ICR_GATE - 1e-9;
}
