/** Thin typed client over the rating-service JSON API. */

import type { ItemView, Progress } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export interface RatingApi {
  nextItem(raterId: string): Promise<ItemView | null>;
  submitRating(raterId: string, item: ItemView, score: number): Promise<void>;
  progress(raterId: string): Promise<Progress>;
}

type FetchLike = typeof fetch;

function toItemView(body: Record<string, unknown>): ItemView {
  const summary = (body.feature_summary ?? {}) as Record<string, unknown>;
  return {
    itemId: String(body.item_id),
    trialId: Number(body.trial_id),
    topicId: Number(body.topic_id),
    candidateLabel: String(body.candidate_label),
    topWords: ((summary.top_words ?? []) as unknown[]).map(String),
    titles: ((summary.titles ?? []) as unknown[]).map(String),
    groundTruth: body.ground_truth == null ? null : String(body.ground_truth),
    scale: Number(body.scale ?? 3),
  };
}

export function createApi(baseUrl: string, fetchFn: FetchLike = fetch): RatingApi {
  const root = baseUrl.replace(/\/+$/, "");

  async function request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await fetchFn(`${root}${path}`, init);
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
    return response;
  }

  return {
    async nextItem(raterId: string): Promise<ItemView | null> {
      const response = await request(`/api/items/next?rater=${encodeURIComponent(raterId)}`);
      if (response.status === 204) return null;
      if (!response.ok) throw new ApiError(response.status, await response.text());
      return toItemView((await response.json()) as Record<string, unknown>);
    },

    async submitRating(raterId: string, item: ItemView, score: number): Promise<void> {
      const response = await request("/api/ratings", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          rater_id: raterId,
          item_id: item.itemId,
          scale: item.scale,
          score,
        }),
      });
      if (response.status !== 201) {
        throw new ApiError(response.status, await response.text());
      }
    },

    async progress(raterId: string): Promise<Progress> {
      const response = await request(`/api/progress?rater=${encodeURIComponent(raterId)}`);
      if (!response.ok) throw new ApiError(response.status, await response.text());
      return (await response.json()) as Progress;
    },
  };
}
