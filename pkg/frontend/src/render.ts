import { segmentText } from "./highlight";
import { canFinalize, ConsoleState, finalizeDeficits } from "./state";
import type { Decision } from "./types";

export interface Handlers {
  onDecision(decision: Decision): void;
  onFinalize(m: number, seed: number): void;
  onAddRule(rule: {
    id: string;
    category: string;
    title?: string;
    body: string;
    hint_terms?: string[];
  }): void;
  onUpdateRule(ruleId: string, patch: { body: string }): void;
}

function el(
  tag: string,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

/** Sample text with <mark> elements exactly over the hinted spans. */
export function renderSampleText(state: ConsoleState): HTMLElement {
  const container = el("div", { class: "sample-text", lang: "zh" });
  if (!state.current) {
    container.textContent = state.queueEmpty ? "队列已空" : "加载中…";
    return container;
  }
  const { sample, hints } = state.current;
  for (const seg of segmentText(sample.text, hints)) {
    if (seg.highlighted) {
      container.append(
        el("mark", { "data-rules": seg.ruleIds.join(",") }, [seg.text]),
      );
    } else {
      container.append(document.createTextNode(seg.text));
    }
  }
  return container;
}

export function renderProgress(state: ConsoleState): HTMLElement {
  const table = el("table", { class: "progress" });
  const head = el("tr", {}, [
    el("th", {}, ["类别"]),
    el("th", {}, ["待标注"]),
    el("th", {}, ["保留"]),
    el("th", {}, ["丢弃"]),
  ]);
  table.append(head);
  if (state.progress) {
    for (const [category, counts] of Object.entries(state.progress.counts)) {
      table.append(
        el("tr", { "data-category": category }, [
          el("td", {}, [category]),
          el("td", { class: "undecided" }, [String(counts.undecided)]),
          el("td", { class: "retained" }, [String(counts.retained)]),
          el("td", { class: "discarded" }, [String(counts.discarded)]),
        ]),
      );
    }
  }
  return table;
}

export function renderDecisionButtons(
  state: ConsoleState,
  handlers: Handlers,
): HTMLElement {
  const bar = el("div", { class: "decisions" });
  const disabled = !state.current || state.pendingDecision;

  const matched = el(
    "button",
    { id: "btn-retain-matched" },
    ["保留（符合规则）"],
  ) as HTMLButtonElement;
  const withRule = el(
    "button",
    { id: "btn-retain-new-rule" },
    ["保留（新增规则）"],
  ) as HTMLButtonElement;
  const discard = el("button", { id: "btn-discard" }, [
    "丢弃",
  ]) as HTMLButtonElement;
  matched.disabled = disabled;
  withRule.disabled = disabled;
  discard.disabled = disabled;

  matched.addEventListener("click", () => {
    const hint = state.current?.hints[0];
    const fallback = state.rulebase?.rules[0]?.id ?? "";
    handlers.onDecision({
      kind: "retain_matched",
      rule_id: hint ? hint.rule_id : fallback,
    });
  });
  withRule.addEventListener("click", () => {
    const sample = state.current?.sample;
    if (!sample) return;
    handlers.onDecision({
      kind: "retain_rule_change",
      new_rule: {
        id: `rule-${sample.id}`,
        category: sample.label,
        title: "",
        body: `针对样本 ${sample.id} 的新规则`,
        hint_terms: [],
      },
    });
  });
  discard.addEventListener("click", () =>
    handlers.onDecision({ kind: "discard", reason: "" }),
  );
  bar.append(matched, withRule, discard);
  return bar;
}

export function renderFinalizePanel(
  state: ConsoleState,
  m: number,
  handlers: Handlers,
): HTMLElement {
  const panel = el("div", { class: "finalize" });
  const button = el("button", { id: "btn-finalize" }, [
    `抽取基准集（每类 ${m} 条）`,
  ]) as HTMLButtonElement;
  button.disabled = !canFinalize(state.progress, m) || !!state.finalized;
  button.addEventListener("click", () => handlers.onFinalize(m, 0));
  panel.append(button);

  const deficits = finalizeDeficits(state.progress, m);
  if (Object.keys(deficits).length > 0) {
    const table = el("table", { class: "deficits" });
    for (const [category, missing] of Object.entries(deficits)) {
      table.append(
        el("tr", { "data-category": category }, [
          el("td", {}, [category]),
          el("td", {}, [`还差 ${missing} 条`]),
        ]),
      );
    }
    panel.append(table);
  }
  if (state.finalized) {
    panel.append(
      el("p", { class: "finalized" }, [
        `已生成基准集：${state.finalized.benchmark_path}（共 ${state.finalized.count} 条）`,
      ]),
    );
  }
  return panel;
}

export function renderRuleSidebar(
  state: ConsoleState,
  handlers: Handlers,
): HTMLElement {
  const aside = el("aside", { class: "rules" });
  const version = state.rulebase?.version ?? "-";
  aside.append(el("h2", {}, [`规则库 v${version}`]));
  if (state.rulebase) {
    const list = el("ol", { class: "rule-list" });
    for (const rule of state.rulebase.rules) {
      list.append(
        el("li", { "data-rule-id": rule.id }, [
          el("strong", {}, [`[${rule.category}] `]),
          rule.body,
        ]),
      );
    }
    aside.append(list);
    const preview = el("pre", { class: "rendered-preview" }, [
      state.rulebase.rendered,
    ]);
    aside.append(preview);
  }
  aside.append(renderRuleEditor(state, handlers));
  return aside;
}

/** Create/edit forms posting to the rule endpoints; no optimistic updates,
 * the sidebar re-renders only from the server's next response. */
export function renderRuleEditor(
  state: ConsoleState,
  handlers: Handlers,
): HTMLElement {
  const editor = el("div", { class: "rule-editor" });

  const addForm = el("form", { id: "rule-add-form" }) as HTMLFormElement;
  const addId = el("input", {
    name: "id",
    placeholder: "规则 id",
  }) as HTMLInputElement;
  const addCategory = el("select", { name: "category" }) as HTMLSelectElement;
  for (const category of [
    "Gambling",
    "Pornography",
    "Abuse",
    "Fraud",
    "IllicitAds",
  ]) {
    addCategory.append(el("option", { value: category }, [category]));
  }
  const addBody = el("textarea", {
    name: "body",
    placeholder: "规则内容",
  }) as HTMLTextAreaElement;
  const addHints = el("input", {
    name: "hints",
    placeholder: "提示词（逗号分隔）",
  }) as HTMLInputElement;
  const addSubmit = el("button", { type: "submit", id: "btn-rule-add" }, [
    "新增规则",
  ]);
  addForm.append(addId, addCategory, addBody, addHints, addSubmit);
  addForm.addEventListener("submit", (event) => {
    event.preventDefault();
    if (!addId.value || !addBody.value) return;
    handlers.onAddRule({
      id: addId.value,
      category: addCategory.value,
      body: addBody.value,
      hint_terms: addHints.value
        .split(/[,，]/)
        .map((t) => t.trim())
        .filter(Boolean),
    });
  });
  editor.append(el("h3", {}, ["新增规则"]), addForm);

  const editForm = el("form", { id: "rule-edit-form" }) as HTMLFormElement;
  const editSelect = el("select", { name: "rule_id" }) as HTMLSelectElement;
  for (const rule of state.rulebase?.rules ?? []) {
    editSelect.append(el("option", { value: rule.id }, [rule.id]));
  }
  const editBody = el("textarea", {
    name: "body",
    placeholder: "新的规则内容",
  }) as HTMLTextAreaElement;
  const editSubmit = el("button", { type: "submit", id: "btn-rule-edit" }, [
    "保存修改",
  ]);
  editForm.append(editSelect, editBody, editSubmit);
  editForm.addEventListener("submit", (event) => {
    event.preventDefault();
    if (!editSelect.value || !editBody.value) return;
    handlers.onUpdateRule(editSelect.value, { body: editBody.value });
  });
  editor.append(el("h3", {}, ["修改规则"]), editForm);
  return editor;
}

export function renderError(state: ConsoleState): HTMLElement {
  const banner = el("div", { class: "error-banner" });
  if (state.lastError) {
    banner.textContent = `${state.lastError.code}: ${state.lastError.message}`;
  } else if (state.notice) {
    banner.textContent = state.notice;
  }
  return banner;
}

/** Full-page render: the view is a pure function of the state. */
export function render(
  root: HTMLElement,
  state: ConsoleState,
  m: number,
  handlers: Handlers,
): void {
  root.replaceChildren(
    renderError(state),
    renderSampleText(state),
    renderDecisionButtons(state, handlers),
    renderProgress(state),
    renderFinalizePanel(state, m, handlers),
    renderRuleSidebar(state, handlers),
  );
}
