import type { FeedbackReport } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Thin client for the feedback HTTP service. All scoring happens server-side. */
export class FeedbackClient {
  constructor(private readonly baseUrl: string) {}

  async feedback(
    seeker: string,
    response: string,
    previousResponse?: string,
  ): Promise<FeedbackReport> {
    const body: Record<string, string> = { seeker, response };
    if (previousResponse !== undefined) {
      body.previous_response = previousResponse;
    }
    const res = await fetch(`${this.baseUrl}/feedback`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) {
      let detail = `request failed with status ${res.status}`;
      try {
        const payload = (await res.json()) as { error?: string };
        if (payload.error) detail = payload.error;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as FeedbackReport;
  }
}
