// @vitest-environment happy-dom
import { afterEach, describe, expect, it, vi } from "vitest";

import { AnnotationApi } from "../src/api";
import { ConsoleApp } from "../src/app";
import {
  render,
  renderDecisionButtons,
  renderFinalizePanel,
  renderProgress,
  renderSampleText,
} from "../src/render";
import type { Handlers } from "../src/render";
import { defaultFixture } from "./fixture_server";

const noopHandlers: Handlers = {
  onDecision: () => {},
  onFinalize: () => {},
  onAddRule: () => {},
  onUpdateRule: () => {},
};

async function startedApp(server = defaultFixture()) {
  vi.stubGlobal("fetch", server.fetch);
  const app = new ConsoleApp(
    new AnnotationApi("http://fixture"),
    server.sessionId,
    "tester",
  );
  await app.start();
  return { server, app };
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("sample rendering", () => {
  it("marks cover exactly the server-reported spans", async () => {
    const { app } = await startedApp();
    const node = renderSampleText(app.state);
    expect(node.textContent).toBe("今晚时时彩开盘");
    const marks = Array.from(node.querySelectorAll("mark"));
    expect(marks.map((m) => m.textContent)).toEqual(["时时彩"]);
    expect(marks[0].getAttribute("data-rules")).toBe("g1");
  });

  it("shows the queue-empty message once drained", async () => {
    const { app } = await startedApp();
    while (app.state.current) {
      await app.decide({ kind: "retain_matched", rule_id: "g1" });
    }
    expect(renderSampleText(app.state).textContent).toBe("队列已空");
  });
});

describe("progress table", () => {
  it("reflects the per-category counters", async () => {
    const { app } = await startedApp();
    await app.decide({ kind: "discard" });
    const table = renderProgress(app.state);
    const row = table.querySelector('tr[data-category="Gambling"]')!;
    expect(row.querySelector(".discarded")!.textContent).toBe("1");
    expect(row.querySelector(".undecided")!.textContent).toBe("5");
  });
});

describe("decision buttons", () => {
  it("clicking discard dispatches exactly one decision", async () => {
    const { app } = await startedApp();
    const seen: string[] = [];
    const bar = renderDecisionButtons(app.state, {
      ...noopHandlers,
      onDecision: (d) => seen.push(d.kind),
    });
    const discard = bar.querySelector<HTMLButtonElement>("#btn-discard")!;
    discard.click();
    expect(seen).toEqual(["discard"]);
  });

  it("buttons disable while a decision is pending", async () => {
    const { app } = await startedApp();
    const bar = renderDecisionButtons(
      { ...app.state, pendingDecision: true },
      noopHandlers,
    );
    const buttons = Array.from(bar.querySelectorAll("button"));
    expect(buttons.every((b) => (b as HTMLButtonElement).disabled)).toBe(true);
  });
});

describe("finalize panel", () => {
  it("is disabled until every category shows >= m retained", async () => {
    const { app } = await startedApp();
    let panel = renderFinalizePanel(app.state, 5, noopHandlers);
    let button = panel.querySelector<HTMLButtonElement>("#btn-finalize")!;
    expect(button.disabled).toBe(true);
    // deficits table lists every category still short
    expect(panel.querySelectorAll(".deficits tr")).toHaveLength(6);

    while (app.state.current) {
      await app.decide({ kind: "retain_matched", rule_id: "g1" });
    }
    panel = renderFinalizePanel(app.state, 5, noopHandlers);
    button = panel.querySelector<HTMLButtonElement>("#btn-finalize")!;
    expect(button.disabled).toBe(false);
    expect(panel.querySelectorAll(".deficits tr")).toHaveLength(0);
  });

  it("shows the benchmark reference after success", async () => {
    const { app } = await startedApp();
    while (app.state.current) {
      await app.decide({ kind: "retain_matched", rule_id: "g1" });
    }
    await app.finalize(5, 0);
    const panel = renderFinalizePanel(app.state, 5, noopHandlers);
    expect(panel.querySelector(".finalized")!.textContent).toContain(
      "benchmark-default-m5.jsonl",
    );
  });
});

describe("rule editor forms", () => {
  it("add form posts the parsed payload through the handler", async () => {
    const { app } = await startedApp();
    const root = document.createElement("div");
    const added: unknown[] = [];
    render(root, app.state, 5, {
      ...noopHandlers,
      onAddRule: (rule) => added.push(rule),
    });
    const form = root.querySelector<HTMLFormElement>("#rule-add-form")!;
    form.querySelector<HTMLInputElement>('input[name="id"]')!.value = "n9";
    form.querySelector<HTMLSelectElement>("select")!.value = "Fraud";
    form.querySelector<HTMLTextAreaElement>("textarea")!.value = "新规则。";
    form.querySelector<HTMLInputElement>('input[name="hints"]')!.value =
      "甲, 乙，丙";
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    expect(added).toEqual([
      {
        id: "n9",
        category: "Fraud",
        body: "新规则。",
        hint_terms: ["甲", "乙", "丙"],
      },
    ]);
  });

  it("edit form offers existing rules and submits the new body", async () => {
    const { app } = await startedApp();
    const root = document.createElement("div");
    const edits: unknown[] = [];
    render(root, app.state, 5, {
      ...noopHandlers,
      onUpdateRule: (id, patch) => edits.push([id, patch]),
    });
    const form = root.querySelector<HTMLFormElement>("#rule-edit-form")!;
    const select = form.querySelector<HTMLSelectElement>("select")!;
    expect(Array.from(select.options).map((o) => o.value)).toEqual([
      "g1",
      "g2",
    ]);
    select.value = "g2";
    form.querySelector<HTMLTextAreaElement>("textarea")!.value = "改写。";
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    expect(edits).toEqual([["g2", { body: "改写。" }]]);
  });

  it("incomplete add form submits nothing", async () => {
    const { app } = await startedApp();
    const root = document.createElement("div");
    const added: unknown[] = [];
    render(root, app.state, 5, {
      ...noopHandlers,
      onAddRule: (rule) => added.push(rule),
    });
    const form = root.querySelector<HTMLFormElement>("#rule-add-form")!;
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    expect(added).toEqual([]);
  });
});

describe("full page render", () => {
  it("renders every section from the state alone", async () => {
    const { app } = await startedApp();
    const root = document.createElement("div");
    render(root, app.state, 5, noopHandlers);
    expect(root.querySelector(".sample-text")).toBeTruthy();
    expect(root.querySelector(".progress")).toBeTruthy();
    expect(root.querySelector(".rules")).toBeTruthy();
    expect(root.querySelector(".rule-list")!.children).toHaveLength(2);
    expect(root.querySelector(".rendered-preview")!.textContent).toContain(
      "使用赌博行业术语。",
    );
    expect(root.querySelector("#rule-add-form")).toBeTruthy();
    expect(root.querySelector("#rule-edit-form")).toBeTruthy();
  });
});
