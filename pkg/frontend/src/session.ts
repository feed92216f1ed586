import type { FeedbackClient } from "./api.js";
import type { FeedbackReport } from "./types.js";

export interface Revision {
  response: string;
  report: FeedbackReport;
}

/** Client-side state for one writing session: a seeker post, the current
 * draft, and an append-only history of scored revisions.
 *
 * One request may be in flight at a time; submitting while pending is a
 * no-op, which is what suppresses double submission. Scores and deltas are
 * always the server's numbers, never recomputed locally.
 */
export class Session {
  draft = "";
  error: string | null = null;
  private revisions: Revision[] = [];
  private inFlight = false;

  constructor(
    readonly seekerPost: string,
    private readonly client: FeedbackClient,
  ) {}

  get history(): readonly Revision[] {
    return this.revisions;
  }

  get pending(): boolean {
    return this.inFlight;
  }

  get latest(): Revision | undefined {
    return this.revisions[this.revisions.length - 1];
  }

  async submitDraft(): Promise<Revision | null> {
    if (this.inFlight) {
      return null;
    }
    const draft = this.draft;
    if (!draft.trim()) {
      this.error = "write a response before submitting";
      return null;
    }
    this.inFlight = true;
    try {
      const previous = this.latest?.response;
      const report = await this.client.feedback(this.seekerPost, draft, previous);
      const revision: Revision = { response: draft, report };
      this.revisions.push(revision);
      this.error = null;
      return revision;
    } catch (err) {
      // draft stays untouched so the writer can retry or edit
      this.error = err instanceof Error ? err.message : String(err);
      return null;
    } finally {
      this.inFlight = false;
    }
  }
}

/** Bundled demo prompts; free entry is always allowed too. */
export const DEMO_SEEKERS = [
  "I am about to have an anxiety attack.",
  "I feel so alone tonight.",
  "Nothing is going right for me.",
];
