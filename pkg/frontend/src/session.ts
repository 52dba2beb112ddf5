/** Rating-session state machine.
 *
 * The machine owns the whole flow for one rater: fetch the next image,
 * collect both 1-5 scores, submit, advance.  There is deliberately no
 * transition that moves past an image without a stored rating, and a
 * submit already in flight blocks further submits (double-click safe).
 */

import { ApiError, EvalApiClient, NextImage } from "./api.js";

export const QUALITY_QUESTION =
  "How would you rate the overall quality of the image?";
export const REPRESENTATIVENESS_QUESTION =
  "How well does the image represent the provided descriptor?";

export type Phase =
  | "idle"
  | "loading"
  | "rating"
  | "submitting"
  | "error"
  | "complete";

export type ScoreField = "quality" | "representativeness";

export interface SessionView {
  phase: Phase;
  imageUrl: string | null;
  descriptor: string | null;
  /** 1-based position of the image being rated. */
  position: number;
  total: number;
  quality: number | null;
  representativeness: number | null;
  commentDraft: string;
  focusedField: ScoreField;
  /** Inline error from the last failed request, if any. */
  error: string | null;
  /** Whether the failed action can be retried. */
  canRetry: boolean;
}

function isScore(value: number): boolean {
  return Number.isInteger(value) && value >= 1 && value <= 5;
}

export class SessionMachine {
  private view: SessionView = {
    phase: "idle",
    imageUrl: null,
    descriptor: null,
    position: 0,
    total: 0,
    quality: null,
    representativeness: null,
    commentDraft: "",
    focusedField: "quality",
    error: null,
    canRetry: false,
  };
  private current: NextImage | null = null;
  private lastFailed: "load" | "submit" | null = null;
  private listeners: Array<(view: SessionView) => void> = [];

  constructor(
    private readonly api: EvalApiClient,
    private readonly sessionId: string
  ) {}

  getView(): SessionView {
    return { ...this.view };
  }

  subscribe(listener: (view: SessionView) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<SessionView>): void {
    this.view = { ...this.view, ...patch };
    for (const listener of this.listeners) listener(this.getView());
  }

  /** Fetch the next unrated image, or the completion screen. */
  async loadNext(): Promise<void> {
    if (this.view.phase === "loading") return;
    this.update({ phase: "loading", error: null, canRetry: false });
    let next;
    try {
      next = await this.api.next(this.sessionId);
    } catch (err) {
      this.lastFailed = "load";
      this.update({
        phase: "error",
        error: err instanceof Error ? err.message : String(err),
        canRetry: true,
      });
      return;
    }
    if (next.complete) {
      this.current = null;
      this.update({
        phase: "complete",
        imageUrl: null,
        descriptor: null,
        position: next.progress.total,
        total: next.progress.total,
      });
      return;
    }
    this.current = next;
    this.update({
      phase: "rating",
      imageUrl: this.api.imageUrl(next.image_url),
      descriptor: next.descriptor,
      position: next.progress.done + 1,
      total: next.progress.total,
      quality: null,
      representativeness: null,
      commentDraft: "",
      focusedField: "quality",
    });
  }

  setScore(field: ScoreField, value: number): void {
    if (this.view.phase !== "rating" || !isScore(value)) return;
    this.update({ [field]: value });
  }

  setComment(text: string): void {
    if (this.view.phase !== "rating") return;
    this.update({ commentDraft: text });
  }

  focusField(field: ScoreField): void {
    this.update({ focusedField: field });
  }

  /** Tab / shift-tab between the two questions. */
  toggleFocus(): void {
    this.focusField(
      this.view.focusedField === "quality" ? "representativeness" : "quality"
    );
  }

  /** 1-5 key press applies to the focused question, then moves focus on. */
  pressKey(key: string): void {
    if (key === "Tab") {
      this.toggleFocus();
      return;
    }
    if (key === "Enter") {
      void this.submit();
      return;
    }
    const value = Number(key);
    if (!isScore(value)) return;
    const field = this.view.focusedField;
    this.setScore(field, value);
    if (field === "quality") this.focusField("representativeness");
  }

  get canSubmit(): boolean {
    return (
      this.view.phase === "rating" &&
      this.view.quality !== null &&
      this.view.representativeness !== null
    );
  }

  /** POST the rating; on ack, advance to the next image. */
  async submit(): Promise<void> {
    if (!this.canSubmit || this.current === null) return;
    const { quality, representativeness, commentDraft } = this.view;
    this.update({ phase: "submitting", error: null, canRetry: false });
    try {
      await this.api.submitRating(this.sessionId, {
        image_id: this.current.image_id,
        quality: quality as number,
        representativeness: representativeness as number,
        comment: commentDraft,
      });
    } catch (err) {
      this.lastFailed = "submit";
      const validation = err instanceof ApiError && err.status === 422;
      this.update({
        phase: "error",
        error: err instanceof Error ? err.message : String(err),
        canRetry: !validation,
      });
      if (validation) {
        // invalid scores: return to the form instead of retry-looping
        this.update({ phase: "rating", canRetry: false });
      }
      return;
    }
    await this.loadNext();
  }

  /** Re-run whichever request failed last; ratings are never lost. */
  async retry(): Promise<void> {
    if (this.view.phase !== "error" || !this.view.canRetry) return;
    if (this.lastFailed === "submit") {
      this.update({ phase: "rating" });
      await this.submit();
    } else {
      this.update({ phase: "idle" });
      await this.loadNext();
    }
  }
}
