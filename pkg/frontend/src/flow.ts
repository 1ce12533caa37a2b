/**
 * Session state machine: create, loop trials, land on the report.
 *
 * The client never computes optimizer state; it only relays the
 * subject's answers and re-renders whatever the server says next.
 * 409 means a duplicate submission lost a race: the answer was already
 * counted, so the pending trial is refetched and the loop continues.
 * 410 means the session finished elsewhere; both fall through to the
 * report rather than dead-ending.
 */
import {
  ApiError,
  SessionApi,
  type CreateSessionBody,
  type SpacePayload,
  type SummaryPayload,
  type TrialPayload,
} from "./api.js";
import {
  buildFeedbackBody,
  toReportView,
  toTrialView,
  type CoactiveForm,
  type PreferenceChoice,
  type ReportView,
  type TrialView,
} from "./model.js";

export type FlowState =
  | { kind: "trial"; view: TrialView; recovered?: { status: number; detail: string } }
  | { kind: "report"; view: ReportView; summary: SummaryPayload | null };

export class SessionFlow {
  private sessionId = "";
  private space: SpacePayload | null = null;
  private trial: TrialPayload | null = null;

  constructor(private readonly api: SessionApi) {}

  get id(): string {
    return this.sessionId;
  }

  async start(body: CreateSessionBody): Promise<FlowState> {
    const created = await this.api.createSession(body);
    this.sessionId = created.id;
    this.space = created.space;
    this.trial = created.trial;
    return this.trialState();
  }

  async submit(
    choice: PreferenceChoice,
    coactive: CoactiveForm | null,
  ): Promise<FlowState> {
    if (this.trial === null) {
      throw new Error("no pending trial");
    }
    const body = buildFeedbackBody(this.trial.index, choice, coactive);
    try {
      const reply = await this.api.submitFeedback(this.sessionId, body);
      if ("summary" in reply) {
        return this.reportState(reply.summary);
      }
      this.trial = reply.trial;
      return this.trialState();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        const { trial } = await this.api.getPendingTrial(this.sessionId);
        if (trial === null) {
          return this.reportState(null);
        }
        this.trial = trial;
        return {
          ...this.trialState(),
          recovered: { status: 409, detail: err.message },
        };
      }
      if (err instanceof ApiError && err.status === 410) {
        return this.reportState(null);
      }
      throw err;
    }
  }

  private trialState(): Extract<FlowState, { kind: "trial" }> {
    if (this.space === null || this.trial === null) {
      throw new Error("session not started");
    }
    return { kind: "trial", view: toTrialView(this.space, this.trial) };
  }

  private async reportState(summary: SummaryPayload | null): Promise<FlowState> {
    this.trial = null;
    const report = await this.api.getReport(this.sessionId);
    return { kind: "report", view: toReportView(report), summary };
  }
}
