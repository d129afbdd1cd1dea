import type {
  FinalizeResponse,
  NextResponse,
  ProgressResponse,
  RulebaseResponse,
} from "./types";

/**
 * Client view model. Every field mirrors the latest server response: the
 * console never invents state, so reloading mid-session reconstructs the
 * identical view from the GET endpoints.
 */
export interface ConsoleState {
  sessionId: string;
  current: NextResponse | null;
  queueEmpty: boolean;
  progress: ProgressResponse | null;
  rulebase: RulebaseResponse | null;
  pendingDecision: boolean; // in-flight POST guard (double-click protection)
  finalized: FinalizeResponse | null;
  lastError: { code: string; message: string } | null;
  notice: string | null;
}

export function initialState(sessionId: string): ConsoleState {
  return {
    sessionId,
    current: null,
    queueEmpty: false,
    progress: null,
    rulebase: null,
    pendingDecision: false,
    finalized: null,
    lastError: null,
    notice: null,
  };
}

export function applyNextSample(
  state: ConsoleState,
  next: NextResponse,
): ConsoleState {
  return { ...state, current: next, queueEmpty: false, lastError: null };
}

export function applyQueueEmpty(state: ConsoleState): ConsoleState {
  return { ...state, current: null, queueEmpty: true };
}

export function applyProgress(
  state: ConsoleState,
  progress: ProgressResponse,
): ConsoleState {
  return { ...state, progress };
}

export function applyRulebase(
  state: ConsoleState,
  rulebase: RulebaseResponse,
): ConsoleState {
  return { ...state, rulebase };
}

export function applyError(
  state: ConsoleState,
  code: string,
  message: string,
): ConsoleState {
  return { ...state, lastError: { code, message }, pendingDecision: false };
}

export function applyFinalized(
  state: ConsoleState,
  result: FinalizeResponse,
): ConsoleState {
  return { ...state, finalized: result };
}

/** The rule base version the view must render: always the server's. */
export function rulebaseVersion(state: ConsoleState): number | null {
  return state.rulebase ? state.rulebase.version : null;
}

/**
 * Finalize is offered only when every category in the progress report shows
 * at least m retained samples.
 */
export function canFinalize(
  progress: ProgressResponse | null,
  m: number,
): boolean {
  if (!progress || m <= 0) return false;
  const rows = Object.values(progress.counts);
  if (rows.length === 0) return false;
  return rows.every((row) => row.retained >= m);
}

/** Per-category deficits for the shortfall table (empty when none). */
export function finalizeDeficits(
  progress: ProgressResponse | null,
  m: number,
): Record<string, number> {
  const deficits: Record<string, number> = {};
  if (!progress) return deficits;
  for (const [category, row] of Object.entries(progress.counts)) {
    if (row.retained < m) deficits[category] = m - row.retained;
  }
  return deficits;
}
