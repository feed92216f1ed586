export const MECHANISMS = [
  "emotional_reactions",
  "interpretations",
  "explorations",
] as const;

export type Mechanism = (typeof MECHANISMS)[number];

/** Rationale span; offsets are UTF-8 byte offsets into the response. */
export interface RationaleSpan {
  start: number;
  end: number;
  text: string;
}

/** One highlightable range; offsets are UTF-8 byte offsets into the response. */
export interface HighlightSegment {
  start: number;
  end: number;
  mechanism: Mechanism;
  level: number;
}

export interface FeedbackReport {
  levels: Record<Mechanism, number>;
  total_score: number;
  items: string[];
  spans: Record<Mechanism, RationaleSpan[]>;
  highlights: HighlightSegment[];
  previous_total_score?: number;
  score_delta?: number;
}
