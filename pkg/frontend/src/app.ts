import { AnnotationApi, ApiError } from "./api";
import {
  applyError,
  applyFinalized,
  applyNextSample,
  applyProgress,
  applyQueueEmpty,
  applyRulebase,
  ConsoleState,
  initialState,
} from "./state";
import type { Decision } from "./types";

export type StateListener = (state: ConsoleState) => void;

/**
 * Review-loop orchestration. All state transitions happen in response to
 * server replies; a decision click issues exactly one POST (the pending
 * flag swallows double-clicks), and conflicts skip to the next sample.
 */
export class ConsoleApp {
  state: ConsoleState;

  constructor(
    private api: AnnotationApi,
    sessionId: string,
    private annotator: string,
    private listener: StateListener = () => {},
  ) {
    this.state = initialState(sessionId);
  }

  private setState(next: ConsoleState): void {
    this.state = next;
    this.listener(this.state);
  }

  /** Initial load (and reload): rule base, progress, first sample. */
  async start(): Promise<void> {
    await this.refreshRulebase();
    await this.refreshProgress();
    await this.fetchNext();
  }

  async refreshRulebase(): Promise<void> {
    this.setState(applyRulebase(this.state, await this.api.rulebase()));
  }

  async refreshProgress(): Promise<void> {
    this.setState(
      applyProgress(this.state, await this.api.progress(this.state.sessionId)),
    );
  }

  async fetchNext(category?: string): Promise<void> {
    const result = await this.api.next(this.state.sessionId, category);
    if (result.kind === "empty") {
      this.setState(applyQueueEmpty(this.state));
    } else {
      this.setState(applyNextSample(this.state, result.value));
    }
  }

  /**
   * Submit one of the three decisions for the current sample, then refresh
   * progress and rule base from the server and advance the queue.
   */
  async decide(decision: Decision): Promise<void> {
    const current = this.state.current;
    if (!current || this.state.pendingDecision) return;
    this.setState({ ...this.state, pendingDecision: true, notice: null });
    try {
      await this.api.submitDecision(
        this.state.sessionId,
        current.sample.id,
        decision,
        this.annotator,
      );
    } catch (err) {
      if (err instanceof ApiError && err.code === "decision_conflict") {
        // decided elsewhere: surface it and skip to the next sample
        this.setState({
          ...applyError(this.state, err.code, err.message),
          notice: `样本 ${current.sample.id} 已被他人标注，跳过`,
        });
        await this.refreshProgress();
        await this.fetchNext();
        return;
      }
      this.setState(applyError(this.state, codeOf(err), messageOf(err)));
      return; // network failure etc: keep the sample, let the user retry
    }
    this.setState({ ...this.state, pendingDecision: false });
    await this.refreshProgress();
    await this.refreshRulebase();
    await this.fetchNext();
  }

  async addRule(rule: {
    id: string;
    category: string;
    title?: string;
    body: string;
    hint_terms?: string[];
  }): Promise<void> {
    try {
      await this.api.addRule(rule);
    } catch (err) {
      this.setState(applyError(this.state, codeOf(err), messageOf(err)));
      return;
    }
    await this.refreshRulebase();
  }

  async updateRule(
    ruleId: string,
    patch: { body: string; hint_terms?: string[] },
  ): Promise<void> {
    try {
      await this.api.updateRule(ruleId, patch);
    } catch (err) {
      this.setState(applyError(this.state, codeOf(err), messageOf(err)));
      return;
    }
    await this.refreshRulebase();
  }

  async finalize(m: number, seed: number): Promise<void> {
    try {
      const result = await this.api.finalize(this.state.sessionId, m, seed);
      this.setState(applyFinalized(this.state, result));
    } catch (err) {
      this.setState(applyError(this.state, codeOf(err), messageOf(err)));
    }
    await this.refreshProgress();
  }
}

function codeOf(err: unknown): string {
  return err instanceof ApiError ? err.code : "network_error";
}

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
