import { describe, expect, it } from "vitest";

import {
  applyError,
  applyNextSample,
  applyProgress,
  applyQueueEmpty,
  canFinalize,
  finalizeDeficits,
  initialState,
} from "../src/state";
import type { NextResponse, ProgressResponse } from "../src/types";

function progress(retained: Record<string, number>, m = 0): ProgressResponse {
  const counts: ProgressResponse["counts"] = {};
  for (const [category, value] of Object.entries(retained)) {
    counts[category] = { undecided: 0, retained: value, discarded: 0 };
  }
  return { counts, rulebase_version: 1, status: "active" };
}

describe("canFinalize", () => {
  it("requires every category at or above m", () => {
    expect(canFinalize(progress({ Gambling: 5, Fraud: 5 }), 5)).toBe(true);
    expect(canFinalize(progress({ Gambling: 5, Fraud: 4 }), 5)).toBe(false);
  });

  it("is false with no progress yet", () => {
    expect(canFinalize(null, 5)).toBe(false);
    expect(canFinalize(progress({}), 5)).toBe(false);
  });
});

describe("finalizeDeficits", () => {
  it("lists only deficient categories with their gaps", () => {
    const deficits = finalizeDeficits(
      progress({ Gambling: 5, Fraud: 3, Abuse: 0 }),
      5,
    );
    expect(deficits).toEqual({ Fraud: 2, Abuse: 5 });
  });
});

describe("reducers", () => {
  const base = initialState("s1");

  it("are pure (inputs untouched)", () => {
    const next: NextResponse = {
      sample: {
        id: "a",
        text: "文本",
        label: "Abuse",
        label_zh: "谩骂引战",
        source: "fixture",
      },
      hints: [],
      rulebase_version: 3,
    };
    const updated = applyNextSample(base, next);
    expect(base.current).toBeNull();
    expect(updated.current).toBe(next);
    expect(updated.queueEmpty).toBe(false);
  });

  it("queue-empty clears the current sample", () => {
    const withSample = applyNextSample(base, {
      sample: {
        id: "a",
        text: "x",
        label: "Abuse",
        label_zh: "谩骂引战",
        source: "f",
      },
      hints: [],
      rulebase_version: 1,
    });
    const empty = applyQueueEmpty(withSample);
    expect(empty.current).toBeNull();
    expect(empty.queueEmpty).toBe(true);
  });

  it("errors clear the pending flag and keep the code verbatim", () => {
    const pending = { ...base, pendingDecision: true };
    const errored = applyError(pending, "decision_conflict", "already decided");
    expect(errored.pendingDecision).toBe(false);
    expect(errored.lastError).toEqual({
      code: "decision_conflict",
      message: "already decided",
    });
  });

  it("progress replaces wholesale (server is the source of truth)", () => {
    const p = progress({ Gambling: 2 });
    expect(applyProgress(base, p).progress).toBe(p);
  });
});
