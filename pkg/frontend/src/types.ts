/** Wire types for the annotation service API (all bodies UTF-8 JSON). */

export interface ApiSample {
  id: string;
  text: string;
  label: string;
  label_zh: string;
  source: string;
}

/** Hint spans arrive as UTF-8 byte offsets into the sample text. */
export interface HintSpan {
  rule_id: string;
  term: string;
  start: number;
  end: number;
}

export interface NextResponse {
  sample: ApiSample;
  hints: HintSpan[];
  rulebase_version: number;
}

export interface CategoryCounts {
  undecided: number;
  retained: number;
  discarded: number;
}

export interface ProgressResponse {
  counts: Record<string, CategoryCounts>;
  rulebase_version: number;
  status: string;
}

export interface ApiRule {
  id: string;
  category: string;
  ordinal: number;
  title: string;
  body: string;
  hint_terms: string[];
}

export interface RulebaseResponse {
  version: number;
  rules: ApiRule[];
  rendered: string;
}

export interface NewRulePayload {
  id: string;
  category: string;
  title: string;
  body: string;
  hint_terms: string[];
}

export interface RuleUpdatePayload {
  rule_id: string;
  body: string;
  hint_terms?: string[];
}

export type Decision =
  | { kind: "retain_matched"; rule_id: string }
  | { kind: "retain_rule_change"; new_rule: NewRulePayload }
  | { kind: "retain_rule_change"; update: RuleUpdatePayload }
  | { kind: "discard"; reason?: string };

export interface DecisionResponse {
  ok: boolean;
  rulebase_version: number;
}

export interface FinalizeResponse {
  ok: boolean;
  benchmark_path: string;
  count: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}
