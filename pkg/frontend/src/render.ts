import type { IcrResponse, SearchResponse } from "./types.js";
import { icrGateActive } from "./state.js";

/**
 * Rendering is deliberately dumb: every rank, distance and agreement
 * number comes straight from a service response.  Nothing is recomputed
 * or reordered client-side.
 */

export function renderResults(
  container: HTMLElement,
  response: SearchResponse,
  imageUrl: (id: string) => string,
): void {
  container.replaceChildren();
  if (response.dropped_tokens.length > 0) {
    const notice = document.createElement("p");
    notice.className = "oov-notice";
    notice.textContent = `Unknown words ignored: ${response.dropped_tokens.join(", ")}`;
    container.appendChild(notice);
  }
  const grid = document.createElement("div");
  grid.className = "result-grid";
  for (const result of response.results) {
    const card = document.createElement("figure");
    card.className = "result-card";
    card.dataset.itemId = result.id;
    card.dataset.rank = String(result.rank);

    const img = document.createElement("img");
    img.src = imageUrl(result.id);
    img.alt = result.caption ?? result.id;
    img.loading = "lazy";
    card.appendChild(img);

    const meta = document.createElement("figcaption");
    const rank = document.createElement("span");
    rank.className = "rank";
    rank.textContent = `#${result.rank}`;
    const distance = document.createElement("span");
    distance.className = "distance";
    distance.textContent = result.distance.toFixed(4);
    const caption = document.createElement("span");
    caption.className = "caption";
    caption.textContent = result.caption ?? "";
    meta.append(rank, distance, caption);
    card.appendChild(meta);
    grid.appendChild(card);
  }
  container.appendChild(grid);
}

export function renderOovError(container: HTMLElement, tokens: string[]): void {
  container.replaceChildren();
  const notice = document.createElement("p");
  notice.className = "oov-error";
  notice.textContent =
    tokens.length > 0
      ? `No results: none of these words are in the vocabulary: ${tokens.join(", ")}`
      : "No results: the query contained no usable words.";
  container.appendChild(notice);
}

export function renderNetworkError(container: HTMLElement, retry: () => void): void {
  container.replaceChildren();
  const banner = document.createElement("div");
  banner.className = "error-banner";
  const text = document.createElement("span");
  text.textContent = "The search service is unreachable.";
  const button = document.createElement("button");
  button.textContent = "Retry";
  button.addEventListener("click", retry);
  banner.append(text, button);
  container.appendChild(banner);
}

export function renderIcrPanel(panel: HTMLElement, icr: IcrResponse, pendingCount: number): void {
  panel.replaceChildren();
  const mean = document.createElement("p");
  mean.className = "icr-mean";
  mean.textContent = icr.mean === null ? "ICR: n/a" : `ICR: ${icr.mean.toFixed(2)}`;
  panel.appendChild(mean);

  const gate = document.createElement("p");
  gate.className = "icr-gate";
  if (icrGateActive(icr.mean)) {
    gate.classList.add("active");
    gate.textContent = "Training gate reached (≥ 0.90)";
  } else {
    gate.textContent = "Below training gate (0.90)";
  }
  panel.appendChild(gate);

  if (icr.pairs.length > 0) {
    const list = document.createElement("ul");
    list.className = "icr-pairs";
    for (const pair of icr.pairs) {
      const li = document.createElement("li");
      li.textContent =
        `${pair.coders[0]} / ${pair.coders[1]}: ${pair.agreement.toFixed(2)} ` +
        `(${pair.co_annotated} shared)`;
      list.appendChild(li);
    }
    panel.appendChild(list);
  }

  if (pendingCount > 0) {
    const pending = document.createElement("p");
    pending.className = "pending-count";
    pending.textContent = `${pendingCount} submission(s) pending retry`;
    panel.appendChild(pending);
  }
}
