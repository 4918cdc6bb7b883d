import { AllTokensUnknownError, ApiClient } from "./api.js";
import { ConsoleSession } from "./state.js";
import {
  renderIcrPanel,
  renderNetworkError,
  renderOovError,
  renderResults,
} from "./render.js";
import type { ClassLabel } from "./types.js";

const LABEL_KEYS: Record<string, ClassLabel> = {
  "1": "meme",
  "2": "sticker",
  "3": "no_meme",
};

const ICR_POLL_MS = 3000;

export function startConsole(root: Document = document): void {
  const api = new ApiClient("");
  const session = new ConsoleSession(window.localStorage);

  const queryInput = root.getElementById("query") as HTMLInputElement;
  const kInput = root.getElementById("k") as HTMLInputElement;
  const searchForm = root.getElementById("search-form") as HTMLFormElement;
  const results = root.getElementById("results") as HTMLElement;
  const coderInput = root.getElementById("coder-id") as HTMLInputElement;
  const modeToggle = root.getElementById("annotation-mode") as HTMLInputElement;
  const icrPanel = root.getElementById("icr-panel") as HTMLElement;
  const currentItem = root.getElementById("current-item") as HTMLElement;

  coderInput.value = session.coderId;
  modeToggle.checked = session.annotationMode;
  if (session.lastResponse) {
    renderResults(results, session.lastResponse, (id) => api.imageUrl(id));
  }

  async function runSearch(): Promise<void> {
    const query = queryInput.value;
    const k = Math.max(1, Number(kInput.value) || 10);
    if (!query.trim()) return;
    try {
      const response = await api.search(query, k);
      session.recordSearch(query, response);
      renderResults(results, response, (id) => api.imageUrl(id));
    } catch (err) {
      if (err instanceof AllTokensUnknownError) {
        renderOovError(results, err.droppedTokens);
      } else {
        renderNetworkError(results, () => void runSearch());
      }
    }
  }

  searchForm.addEventListener("submit", (event) => {
    event.preventDefault();
    void runSearch();
  });

  coderInput.addEventListener("change", () => {
    session.coderId = coderInput.value.trim();
    session.persist();
  });

  modeToggle.addEventListener("change", () => {
    session.annotationMode = modeToggle.checked;
    session.persist();
    showCurrentItem();
  });

  function annotationItems(): string[] {
    return session.lastResponse?.results.map((r) => r.id) ?? [];
  }

  function showCurrentItem(): void {
    const items = annotationItems();
    if (!session.annotationMode || items.length === 0) {
      currentItem.textContent = "";
      return;
    }
    const index = Math.min(session.annotationCursor, items.length - 1);
    currentItem.textContent =
      `Labeling ${items[index]} (${index + 1}/${items.length}) — ` +
      "press 1 = meme, 2 = sticker, 3 = no_meme";
  }

  async function submitLabel(label: ClassLabel): Promise<void> {
    const items = annotationItems();
    if (items.length === 0 || !session.coderId) return;
    const index = Math.min(session.annotationCursor, items.length - 1);
    session.enqueueAnnotation({
      item_id: items[index],
      coder_id: session.coderId,
      label,
    });
    session.annotationCursor = Math.min(index + 1, items.length - 1);
    session.persist();
    showCurrentItem();
    await session.flushAnnotations(api);
    await refreshIcr();
  }

  root.addEventListener("keydown", (event) => {
    if (!session.annotationMode) return;
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) return;
    const label = LABEL_KEYS[(event as KeyboardEvent).key];
    if (label) void submitLabel(label);
  });

  async function refreshIcr(): Promise<void> {
    try {
      const icr = await api.icr();
      renderIcrPanel(icrPanel, icr, session.pendingCount);
    } catch {
      // panel keeps its last contents when the service is briefly away
    }
  }

  setInterval(() => {
    void session.flushAnnotations(api).then((sent) => {
      if (sent > 0) void refreshIcr();
    });
    void refreshIcr();
  }, ICR_POLL_MS);

  void refreshIcr();
  showCurrentItem();
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", () => startConsole());
  } else {
    startConsole();
  }
}
