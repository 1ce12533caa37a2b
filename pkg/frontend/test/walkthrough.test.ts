/**
 * End-to-end walkthrough against the fixture service: a scripted
 * 36-trial session must reach the report screen with exactly one
 * request in flight at any time, and the recorded feedback bodies must
 * match the wire contract byte for byte.
 */
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { SessionApi } from "../src/api.js";
import { SessionFlow, type FlowState } from "../src/flow.js";
import type { CoactiveForm, PreferenceChoice } from "../src/model.js";
import { externalAnswer, startFixtureServer, type FixtureHandle } from "./fixture_server.js";

let fx: FixtureHandle;

beforeAll(async () => {
  fx = await startFixtureServer();
});

afterAll(async () => {
  await fx.close();
});

function scripted(index: number): { choice: PreferenceChoice; co: CoactiveForm | null } {
  if (index === 1) {
    return { choice: "none", co: null };
  }
  if (index === 5) {
    return { choice: "first", co: { dim: 0, direction: "higher", magnitude: 0.02 } };
  }
  return { choice: "first", co: null };
}

describe("scripted session", () => {
  it("runs 36 trials to the report and honours the contract", async () => {
    const firstBody = fx.bodies.length;
    const api = new SessionApi(fx.url);
    const flow = new SessionFlow(api);
    let state: FlowState = await flow.start({ preset: "exoskeleton", seed: 5 });

    expect(state.kind).toBe("trial");
    if (state.kind !== "trial") {
      return;
    }
    // values arrive unmangled: the fixture plants 0.1 + 0.2 in trial 1
    expect(state.view.current[0]!.value).toBe(0.1 + 0.2);
    expect(state.view.current.map((p) => p.name)).toContain("step_length_m");
    expect(state.view.previous).toBeNull();

    let submissions = 0;
    const trialJson: string[] = [];
    while (state.kind === "trial" && submissions < 50) {
      trialJson.push(JSON.stringify(state));
      const { choice, co } = scripted(state.view.index);
      state = await flow.submit(choice, co);
      submissions += 1;
    }

    expect(submissions).toBe(36);
    expect(state.kind).toBe("report");
    if (state.kind !== "report") {
      return;
    }

    // the client never saw one request overlap another
    expect(fx.maxConcurrent()).toBe(1);

    // exact wire bodies: "none" carries no coactive key at all
    const bodies = fx.bodies.slice(firstBody) as Record<string, unknown>[];
    expect(bodies).toHaveLength(36);
    expect(bodies[0]).toEqual({ preference: "none", trial: 1 });
    expect(Object.keys(bodies[0]!).sort()).toEqual(["preference", "trial"]);
    expect(bodies[4]).toEqual({
      preference: "first",
      trial: 5,
      coactive: { dim: 0, direction: 1, magnitude: 0.02 },
    });
    expect(bodies[10]).toEqual({ preference: "first", trial: 11 });
    // the trial token is present in every submission and increments
    bodies.forEach((b, i) => expect(b.trial).toBe(i + 1));

    // no trial state ever exposes phase bookkeeping
    for (const json of trialJson) {
      expect(json).not.toMatch(/phase|validation|learning/i);
    }

    // the summary reflects an always-"first" subject: 2 of 4 scored
    expect(state.summary).not.toBeNull();
    expect(state.summary!.validation.scored).toBe(4);
    expect(state.summary!.validation.preferred).toBe(2);
    expect(state.summary!.validation.accuracy_pct).toBe(50);

    // report view carries API values exactly and 10-bin histograms
    const raw = await fetch(`${fx.url}/sessions/${flow.id}/report`);
    const payload = (await raw.json()) as {
      a_max: number[];
      trials: { preference: string }[];
      correlation: { visits: number[] }[];
    };
    expect(state.view.aMax).not.toBeNull();
    state.view.aMax!.forEach((p, i) => expect(p.value).toBe(payload.a_max[i]));
    expect(state.view.trials).toHaveLength(36);
    expect(state.view.trials[0]!.preference).toBe("none");
    expect(state.view.trials[4]!.coactive).toBe("dim 0 higher by 0.02");
    expect(state.view.histograms).toHaveLength(6);
    state.view.histograms.forEach((h, i) => {
      expect(h.visits).toHaveLength(10);
      expect(h.visits).toEqual(payload.correlation[i]!.visits);
    });
  });

  it("recovers from a 409 by reloading the pending trial", async () => {
    const api = new SessionApi(fx.url);
    const flow = new SessionFlow(api);
    let state = await flow.start({ preset: "exoskeleton", seed: 9 });
    expect(state.kind).toBe("trial");

    // a second tab answers trial 1 behind our back
    await externalAnswer(fx.url, flow.id, 1);

    state = await flow.submit("first", null);
    expect(state.kind).toBe("trial");
    if (state.kind !== "trial") {
      return;
    }
    expect(state.view.index).toBe(2);
    expect(state.recovered?.status).toBe(409);

    // and the loop continues normally from the reloaded trial
    const next = await flow.submit("second", null);
    expect(next.kind).toBe("trial");
    if (next.kind === "trial") {
      expect(next.view.index).toBe(3);
      expect(next.recovered).toBeUndefined();
    }
  });

  it("lands on the report when the session finished elsewhere (410)", async () => {
    const api = new SessionApi(fx.url);
    const flow = new SessionFlow(api);
    const state = await flow.start({ preset: "exoskeleton", seed: 11 });
    expect(state.kind).toBe("trial");

    for (let t = 1; t <= 36; t += 1) {
      await externalAnswer(fx.url, flow.id, t);
    }

    const after = await flow.submit("first", null);
    expect(after.kind).toBe("report");
    if (after.kind === "report") {
      expect(after.summary).toBeNull();
      expect(after.view.scored).toBe(4);
      expect(after.view.trials).toHaveLength(36);
    }
  });
});
