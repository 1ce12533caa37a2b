/**
 * Typed client for the prefline session service.
 *
 * Every response is validated against the JSON contract before the rest
 * of the app sees it, and the client enforces the one-in-flight rule:
 * a second request started before the first settles is a programming
 * error and throws immediately.
 */
import { z } from "zod";

export const spaceSchema = z.object({
  names: z.array(z.string()),
  lower: z.array(z.number()),
  upper: z.array(z.number()),
  granularity: z.number().int(),
});

export const trialSchema = z.object({
  index: z.number().int(),
  action: z.array(z.number()),
  previous: z.array(z.number()).nullable(),
});

export const summarySchema = z.object({
  a_max: z.array(z.number()).nullable(),
  validation: z.object({
    scored: z.number().int(),
    preferred: z.number().int(),
    accuracy_pct: z.number().nullable(),
  }),
  trials_completed: z.number().int(),
});

const createdSchema = z.object({
  id: z.string(),
  seed: z.number().int(),
  space: spaceSchema,
  trial: trialSchema,
});

const feedbackReplySchema = z.union([
  z.object({ trial: trialSchema }),
  z.object({ summary: summarySchema }),
]);

const coactiveEchoSchema = z.object({
  dim: z.number().int(),
  direction: z.number(),
  magnitude: z.number(),
});

export const reportSchema = z.object({
  id: z.string(),
  phase: z.string(),
  seed: z.number().int(),
  space: spaceSchema,
  trials_completed: z.number().int(),
  trials: z.array(
    z.object({
      index: z.number().int(),
      action: z.array(z.number()),
      preference: z.string(),
      coactive: coactiveEchoSchema.nullable(),
    }),
  ),
  a_max: z.array(z.number()).nullable(),
  validation: z
    .object({
      scored: z.number().int(),
      preferred: z.number().int(),
      accuracy_pct: z.number().nullable(),
    })
    .nullable(),
  correlation: z
    .array(
      z.object({
        dim: z.number().int(),
        name: z.string(),
        visits: z.array(z.number()),
        mean_utility: z.array(z.number().nullable()),
        r: z.number().nullable(),
        p: z.number().nullable(),
      }),
    )
    .nullable(),
});

export type SpacePayload = z.infer<typeof spaceSchema>;
export type TrialPayload = z.infer<typeof trialSchema>;
export type SummaryPayload = z.infer<typeof summarySchema>;
export type ReportPayload = z.infer<typeof reportSchema>;
export type FeedbackReply = z.infer<typeof feedbackReplySchema>;

export interface CoactiveBody {
  dim: number;
  direction: 1 | -1;
  magnitude: number;
}

export interface FeedbackBody {
  preference: "first" | "second" | "none";
  trial: number;
  coactive?: CoactiveBody;
}

export interface CreateSessionBody {
  preset?: string;
  space?: { lower: number[]; upper: number[]; names?: string[] };
  seed?: number;
  config?: Record<string, number>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export class SessionApi {
  private busy = false;

  constructor(private readonly baseUrl: string) {}

  get inFlight(): boolean {
    return this.busy;
  }

  private async request<T>(
    path: string,
    schema: z.ZodType<T>,
    init?: RequestInit,
  ): Promise<T> {
    if (this.busy) {
      throw new Error("a request is already in flight");
    }
    this.busy = true;
    try {
      const resp = await fetch(this.baseUrl + path, init);
      const text = await resp.text();
      if (!resp.ok) {
        let detail = text;
        try {
          detail = String(JSON.parse(text).detail ?? text);
        } catch {
          // non-JSON error body, keep raw text
        }
        throw new ApiError(resp.status, detail);
      }
      return schema.parse(JSON.parse(text));
    } finally {
      this.busy = false;
    }
  }

  private post<T>(path: string, schema: z.ZodType<T>, body: unknown): Promise<T> {
    return this.request(path, schema, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  createSession(body: CreateSessionBody) {
    return this.post("/sessions", createdSchema, body);
  }

  submitFeedback(sessionId: string, body: FeedbackBody) {
    return this.post(`/sessions/${sessionId}/feedback`, feedbackReplySchema, body);
  }

  getReport(sessionId: string) {
    return this.request(`/sessions/${sessionId}/report`, reportSchema);
  }

  /**
   * Pending trial only. The state payload carries more (including the
   * operator-facing phase), but the subject client never parses it.
   */
  getPendingTrial(sessionId: string) {
    return this.request(
      `/sessions/${sessionId}/state`,
      z.object({ trial: trialSchema.nullable() }),
    );
  }
}
