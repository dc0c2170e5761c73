/** Annotation session state machine: fetch -> select -> submit -> advance.
 *
 * Advancement is never optimistic: the item only changes after the server
 * acknowledges the rating, and a failed request keeps the selected score so
 * nothing is lost on retry.
 */

import type { RatingApi } from "./api.js";
import { mapKey } from "./keyboard.js";
import type { SessionState } from "./types.js";

type Listener = (state: SessionState) => void;

export class AnnotatorSession {
  private state: SessionState = {
    phase: "idle",
    item: null,
    selectedScore: null,
    progress: { rated: 0, remaining: 0 },
    message: null,
  };
  private listeners: Listener[] = [];

  constructor(
    private api: RatingApi,
    private raterId: string,
  ) {}

  getState(): SessionState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.state);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(partial: Partial<SessionState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  canSubmit(): boolean {
    return this.state.phase === "ready" && this.state.selectedScore !== null;
  }

  async start(): Promise<void> {
    this.update({ phase: "loading", message: null });
    try {
      const progress = await this.api.progress(this.raterId);
      const item = await this.api.nextItem(this.raterId);
      this.update({
        phase: item === null ? "done" : "ready",
        item,
        progress,
        selectedScore: null,
        message: null,
      });
    } catch (err) {
      // keep whatever was on screen; the banner offers a retry
      this.update({ phase: "error", message: String(err) });
    }
  }

  selectScore(score: number): void {
    const item = this.state.item;
    if (this.state.phase !== "ready" || item === null) return;
    if (score < 1 || score > item.scale) return;
    this.update({ selectedScore: score });
  }

  async submit(): Promise<void> {
    const { item, selectedScore } = this.state;
    if (!this.canSubmit() || item === null || selectedScore === null) return;
    this.update({ phase: "submitting", message: null });
    try {
      await this.api.submitRating(this.raterId, item, selectedScore);
    } catch (err) {
      // selection survives so the rater can retry without re-entering it
      this.update({ phase: "ready", message: String(err) });
      return;
    }
    await this.advance();
  }

  private async advance(): Promise<void> {
    try {
      const progress = await this.api.progress(this.raterId);
      const item = await this.api.nextItem(this.raterId);
      this.update({
        phase: item === null ? "done" : "ready",
        item: item,
        selectedScore: null,
        progress,
        message: null,
      });
    } catch (err) {
      this.update({ phase: "error", message: String(err) });
    }
  }

  /** View-only skip: asks the server for an item again without rating. */
  async skip(): Promise<void> {
    if (this.state.phase !== "ready") return;
    const before = this.state.item?.itemId;
    await this.advance();
    if (this.state.item?.itemId === before) {
      this.update({ message: "no other unrated item to show" });
    }
  }

  async retry(): Promise<void> {
    if (this.state.phase === "error") {
      await this.start();
    } else if (this.state.message !== null && this.canSubmit()) {
      await this.submit();
    }
  }

  async handleKey(key: string): Promise<void> {
    const scale = this.state.item?.scale ?? 0;
    const action = mapKey(key, scale);
    if (action === null) return;
    if (action.type === "select") {
      this.selectScore(action.score);
    } else if (action.type === "submit") {
      await this.submit();
    } else {
      await this.skip();
    }
  }
}
