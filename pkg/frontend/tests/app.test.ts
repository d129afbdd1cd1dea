import { afterEach, describe, expect, it, vi } from "vitest";

import { AnnotationApi } from "../src/api";
import { ConsoleApp } from "../src/app";
import { defaultFixture } from "./fixture_server";

function makeApp(server = defaultFixture()) {
  vi.stubGlobal("fetch", server.fetch);
  const api = new AnnotationApi("http://fixture");
  const app = new ConsoleApp(api, server.sessionId, "tester");
  return { server, app };
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("review loop", () => {
  it("start loads rule base, progress, and the first sample", async () => {
    const { app } = makeApp();
    await app.start();
    expect(app.state.rulebase?.version).toBe(2);
    expect(app.state.progress?.counts.Gambling.undecided).toBe(6);
    expect(app.state.current?.sample.id).toBe("s0");
    expect(app.state.current?.hints.length).toBeGreaterThan(0);
  });

  it("discard updates the progress counters on the next fetch", async () => {
    const { app } = makeApp();
    await app.start();
    await app.decide({ kind: "discard", reason: "错标" });
    expect(app.state.progress?.counts.Gambling.discarded).toBe(1);
    expect(app.state.current?.sample.id).toBe("s1");
  });

  it("retain-matched keeps the rule base version and advances", async () => {
    const { app } = makeApp();
    await app.start();
    await app.decide({ kind: "retain_matched", rule_id: "g1" });
    expect(app.state.progress?.counts.Gambling.retained).toBe(1);
    expect(app.state.rulebase?.version).toBe(2);
  });

  it("retain-with-new-rule bumps the version and shows the rule", async () => {
    const { app } = makeApp();
    await app.start();
    await app.decide({
      kind: "retain_rule_change",
      new_rule: {
        id: "fresh",
        category: "Gambling",
        title: "",
        body: "新的规则内容。",
        hint_terms: ["新词"],
      },
    });
    expect(app.state.rulebase?.version).toBe(3);
    expect(app.state.rulebase?.rules.some((r) => r.id === "fresh")).toBe(true);
    expect(app.state.progress?.counts.Gambling.retained).toBe(1);
  });

  it("a decision click issues exactly one POST even when double-clicked",
    async () => {
      const { server, app } = makeApp();
      await app.start();
      const first = app.decide({ kind: "discard" });
      const second = app.decide({ kind: "discard" }); // double click
      await Promise.all([first, second]);
      expect(server.decisionPosts).toBe(1);
    });

  it("conflicts surface a notice and skip to the next sample", async () => {
    const { server, app } = makeApp();
    await app.start();
    // another annotator decides s0 behind our back
    server.decisions.set("s0", "retained");
    await app.decide({ kind: "discard" });
    expect(app.state.notice).toContain("s0");       // conflict surfaced
    expect(app.state.current?.sample.id).toBe("s1"); // sample skipped
    expect(app.state.pendingDecision).toBe(false);
  });

  it("network failures keep the current sample for retry", async () => {
    const { server, app } = makeApp();
    await app.start();
    const healthy = server.fetch;
    let fail = true;
    vi.stubGlobal("fetch", async (url: RequestInfo | URL, init?: RequestInit) => {
      if (fail && init?.method === "POST") throw new TypeError("fetch failed");
      return healthy(url, init);
    });
    await app.decide({ kind: "discard" });
    expect(app.state.lastError?.code).toBe("network_error");
    expect(app.state.current?.sample.id).toBe("s0"); // not lost
    fail = false;
    await app.decide({ kind: "discard" });
    expect(app.state.progress?.counts.Gambling.discarded).toBe(1);
  });

  it("drains the queue to the empty signal", async () => {
    const { server, app } = makeApp();
    await app.start();
    while (app.state.current) {
      await app.decide({ kind: "retain_matched", rule_id: "g1" });
    }
    expect(app.state.queueEmpty).toBe(true);
    expect(server.decisionPosts).toBe(36);
  });

  it("reload mid-session reconstructs identical state from GETs", async () => {
    const { server, app } = makeApp();
    await app.start();
    await app.decide({ kind: "discard" });
    await app.decide({ kind: "retain_matched", rule_id: "g1" });
    const snapshot = {
      progress: app.state.progress,
      rulebase: app.state.rulebase,
      currentId: app.state.current?.sample.id,
    };
    const fresh = new ConsoleApp(
      new AnnotationApi("http://fixture"),
      server.sessionId,
      "tester",
    );
    await fresh.start();
    expect(fresh.state.progress).toEqual(snapshot.progress);
    expect(fresh.state.rulebase).toEqual(snapshot.rulebase);
    expect(fresh.state.current?.sample.id).toBe(snapshot.currentId);
  });
});

describe("rule editor", () => {
  it("add rule bumps the sidebar count and version", async () => {
    const { app } = makeApp();
    await app.start();
    const before = app.state.rulebase!.rules.length;
    await app.addRule({
      id: "edit-1",
      category: "Fraud",
      body: "新增的欺诈规则。",
    });
    expect(app.state.rulebase!.rules.length).toBe(before + 1);
    expect(app.state.rulebase!.version).toBe(3);
  });

  it("duplicate rule id shows the server error verbatim", async () => {
    const { app } = makeApp();
    await app.start();
    await app.addRule({ id: "g1", category: "Gambling", body: "重复。" });
    expect(app.state.lastError?.code).toBe("duplicate_rule");
  });

  it("edit body refreshes the rendered preview from the server", async () => {
    const { app } = makeApp();
    await app.start();
    await app.updateRule("g1", { body: "修改后的正文。" });
    expect(app.state.rulebase?.rendered).toContain("修改后的正文。");
  });
});

describe("finalize", () => {
  it("shortfall renders the per-category deficit detail", async () => {
    const { app } = makeApp();
    await app.start();
    await app.finalize(5, 0);
    expect(app.state.lastError?.code).toBe("shortfall");
    expect(app.state.finalized).toBeNull();
  });

  it("succeeds once every category reaches m retained", async () => {
    const { app } = makeApp();
    await app.start();
    while (app.state.current) {
      await app.decide({ kind: "retain_matched", rule_id: "g1" });
    }
    await app.finalize(5, 0);
    expect(app.state.finalized?.count).toBe(30);
    expect(app.state.finalized?.benchmark_path).toContain("benchmark");
  });

  it("a second finalize attempt reports the finalized session", async () => {
    const { server, app } = makeApp();
    await app.start();
    while (app.state.current) {
      await app.decide({ kind: "retain_matched", rule_id: "g1" });
    }
    await app.finalize(5, 0);
    expect(server.finalized).toBe(true);
    expect(app.state.progress?.status).toBe("finalized");
  });
});
