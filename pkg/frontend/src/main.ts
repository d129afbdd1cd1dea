import { AnnotationApi } from "./api";
import { ConsoleApp } from "./app";
import { render } from "./render";

/**
 * Bootstrap: configuration comes from query parameters —
 *   ?base=http://127.0.0.1:8321&session=default&annotator=ann&m=1000
 */
function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const base = param("base", "http://127.0.0.1:8321");
const sessionId = param("session", "default");
const annotator = param("annotator", "annotator");
const m = parseInt(param("m", "1000"), 10);

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

const api = new AnnotationApi(base);
const app = new ConsoleApp(api, sessionId, annotator, (state) => {
  render(root, state, m, {
    onDecision: (decision) => void app.decide(decision),
    onFinalize: (mm, seed) => void app.finalize(mm, seed),
    onAddRule: (rule) => void app.addRule(rule),
    onUpdateRule: (ruleId, patch) => void app.updateRule(ruleId, patch),
  });
});

app.start().catch((err) => {
  root.textContent = `无法连接标注服务：${err}`;
});
