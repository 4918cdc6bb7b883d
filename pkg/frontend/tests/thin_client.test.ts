import { afterEach, describe, expect, it, vi } from "vitest";

import { AllTokensUnknownError, ApiClient } from "../src/api.js";
import { renderOovError, renderResults } from "../src/render.js";
import { jsonResponse, makeResults } from "./helpers.js";

afterEach(() => {
  vi.restoreAllMocks();
});

function renderedIds(container: HTMLElement): string[] {
  return Array.from(container.querySelectorAll<HTMLElement>(".result-card")).map(
    (card) => card.dataset.itemId!,
  );
}

describe("thin-client property", () => {
  it("renders results exactly in service order, even when permuted", async () => {
    // a service answering in a deliberately non-alphabetical, non-distance
    // order: the console must not reorder anything
    const permuted = makeResults(["m7", "m2", "m9", "m1"]);
    permuted.results[0].distance = 5.0; // larger distance at rank 1
    vi.stubGlobal("fetch", vi.fn(async () => jsonResponse(permuted)));

    const api = new ApiClient("");
    const response = await api.search("hola", 4);
    const container = document.createElement("div");
    renderResults(container, response, (id) => `/memes/${id}/image`);

    expect(renderedIds(container)).toEqual(["m7", "m2", "m9", "m1"]);
    const ranks = Array.from(container.querySelectorAll(".rank")).map((el) => el.textContent);
    expect(ranks).toEqual(["#1", "#2", "#3", "#4"]);
    const distances = Array.from(container.querySelectorAll(".distance")).map(
      (el) => el.textContent,
    );
    expect(distances[0]).toBe("5.0000");
  });

  it("displays only numbers taken from the response body", async () => {
    const response = makeResults(["a", "b"]);
    response.results[1].distance = 0.123456;
    const container = document.createElement("div");
    renderResults(container, response, (id) => id);
    const distances = Array.from(container.querySelectorAll(".distance")).map(
      (el) => el.textContent,
    );
    expect(distances).toEqual(["0.1000", "0.1235"]);
  });

  it("surfaces dropped tokens as a visible notice", () => {
    const response = makeResults(["a"]);
    response.dropped_tokens = ["zzz"];
    const container = document.createElement("div");
    renderResults(container, response, (id) => id);
    expect(container.querySelector(".oov-notice")?.textContent).toContain("zzz");
  });
});

describe("all-tokens-unknown handling", () => {
  it("raises a typed error carrying the token list on 422", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () =>
        jsonResponse(
          { version: 1, error: "all_tokens_unknown", dropped_tokens: ["qqq", "zzz"] },
          422,
        ),
      ),
    );
    const api = new ApiClient("");
    await expect(api.search("qqq zzz", 5)).rejects.toThrowError(AllTokensUnknownError);
    try {
      await api.search("qqq zzz", 5);
    } catch (err) {
      expect((err as AllTokensUnknownError).droppedTokens).toEqual(["qqq", "zzz"]);
    }
  });

  it("renders the explanatory notice with the tokens", () => {
    const container = document.createElement("div");
    renderOovError(container, ["qqq", "zzz"]);
    const text = container.querySelector(".oov-error")?.textContent ?? "";
    expect(text).toContain("qqq");
    expect(text).toContain("zzz");
    expect(container.querySelectorAll(".result-card")).toHaveLength(0);
  });
});
