/**
 * Application controller: binds the service client, the review flow, and
 * local persistence together, and exposes a change feed for the view.
 *
 * Responsibilities:
 * - registration and session recovery (a restarted service forgets
 *   annotators; the controller silently re-registers and retries, so no
 *   local work is lost);
 * - draft autosave on every interaction, restored when a task is reloaded;
 * - queueing judgments that fail to reach the service and flushing the
 *   queue before anything new is submitted;
 * - the live overly-broad advisory, refreshed whenever the marks change.
 */

import {
  AnnotationClient,
  JudgmentDocument,
  ProgressResult,
  ServiceError,
} from "./api.js";
import { DraftStore, PendingQueue } from "./draft.js";
import { DecisionStep, ReviewFlow, StepOutcome } from "./model.js";

export type AppPhase = "idle" | "loading" | "reviewing" | "done" | "offline";

export interface StatusNote {
  kind: "info" | "queued" | "error";
  text: string;
}

export interface AppOptions {
  client: AnnotationClient;
  annotator: string;
  drafts: DraftStore;
  pending: PendingQueue;
  /** Seconds since the epoch; injectable for deterministic tests. */
  clock?: () => number;
}

/** True for transport-level failures (server unreachable), as opposed to
 * an HTTP error response the service itself produced. */
function isNetworkFailure(error: unknown): boolean {
  return !(error instanceof ServiceError);
}

/** Service rejections that a re-registration round can repair: the service
 * restarted and forgot this annotator's session. */
function isStaleSession(error: unknown): boolean {
  return (
    error instanceof ServiceError &&
    error.status === 422 &&
    (error.message.includes("unknown annotator") ||
      error.message.includes("never served"))
  );
}

export class AnnotationApp {
  readonly annotator: string;
  phase: AppPhase = "idle";
  flow: ReviewFlow | null = null;
  progress: ProgressResult | null = null;
  status: StatusNote | null = null;

  private readonly client: AnnotationClient;
  private readonly drafts: DraftStore;
  private readonly pending: PendingQueue;
  private readonly clock: () => number;
  private readonly listeners: (() => void)[] = [];
  private advisoryEpoch = 0;

  constructor(options: AppOptions) {
    this.client = options.client;
    this.annotator = options.annotator;
    this.drafts = options.drafts;
    this.pending = options.pending;
    this.clock = options.clock ?? (() => Date.now() / 1000);
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  // -- lifecycle

  /** Register, deliver any locally queued judgments, then load a task. */
  async start(): Promise<void> {
    this.phase = "loading";
    this.status = null;
    this.emit();
    try {
      await this.client.register(this.annotator);
      await this.flushPending();
      await this.loadNext();
    } catch (error) {
      this.goOffline(error);
    }
  }

  /** Retry after a connection loss; queued work is flushed first. */
  async retry(): Promise<void> {
    await this.start();
  }

  private goOffline(error: unknown): void {
    this.phase = "offline";
    this.flow = null;
    const queued = this.pending.all().length;
    const suffix =
      queued > 0
        ? ` ${queued} judgment${queued === 1 ? "" : "s"} saved locally.`
        : "";
    this.status = {
      kind: "error",
      text: `Cannot reach the service (${describe(error)}).${suffix}`,
    };
    this.emit();
  }

  private async loadNext(): Promise<void> {
    this.phase = "loading";
    this.emit();
    const response = await this.recovering(() =>
      this.client.nextTask(this.annotator),
    );
    await this.refreshProgress();
    if (response.done || response.task === null) {
      this.phase = "done";
      this.flow = null;
      this.emit();
      return;
    }
    const flow = new ReviewFlow(response.task);
    const draft = this.drafts.load(this.annotator, response.task.query);
    if (draft !== null) {
      flow.restore(draft);
      this.status = { kind: "info", text: "Draft restored." };
    } else {
      this.status = null;
    }
    this.flow = flow;
    this.phase = "reviewing";
    this.emit();
    if (flow.marks().length > 0) void this.refreshAdvisory();
  }

  private async refreshProgress(): Promise<void> {
    try {
      this.progress = await this.client.progress(this.annotator);
    } catch {
      // progress display is cosmetic; never fail an action over it
    }
  }

  /** Run a service call; on a stale-session rejection, re-register (and
   * re-serve the pending task) once, then retry. */
  private async recovering<T>(call: () => Promise<T>): Promise<T> {
    try {
      return await call();
    } catch (error) {
      if (!isStaleSession(error)) throw error;
      await this.client.register(this.annotator);
      await this.client.nextTask(this.annotator);
      return await call();
    }
  }

  // -- review interactions (all autosave the draft)

  private saveDraft(): void {
    if (this.flow !== null) {
      this.drafts.save(this.annotator, this.flow.snapshot());
    }
  }

  private mutate(action: (flow: ReviewFlow) => void): void {
    if (this.flow === null) return;
    action(this.flow);
    this.saveDraft();
    this.emit();
  }

  answer(outcome: StepOutcome): void {
    this.mutate((flow) => flow.answer(outcome));
  }

  answerAndAdvance(outcome: StepOutcome): void {
    this.mutate((flow) => {
      flow.answer(outcome);
      flow.advance();
    });
  }

  answerStep(step: DecisionStep, outcome: StepOutcome): void {
    this.mutate((flow) => flow.answerStep(step, outcome));
  }

  advance(): void {
    this.mutate((flow) => flow.advance());
  }

  back(): void {
    this.mutate((flow) => flow.back());
  }

  jumpTo(step: number): void {
    this.mutate((flow) => flow.jumpTo(step));
  }

  setNote(text: string): void {
    if (this.flow === null) return;
    this.flow.note = text;
    this.saveDraft();
  }

  /** Toggle a panel mark and refresh the advisory against the new set. */
  toggleMark(item: string): void {
    this.mutate((flow) => flow.toggleMark(item));
    void this.refreshAdvisory();
  }

  /** Ask the service whether the marked set crosses the overly-broad
   * threshold; a lost advisory never blocks the review. */
  async refreshAdvisory(): Promise<void> {
    const flow = this.flow;
    if (flow === null) return;
    const epoch = ++this.advisoryEpoch;
    try {
      const result = await this.client.advisory(flow.task.query, flow.marks());
      if (epoch !== this.advisoryEpoch || this.flow !== flow) return;
      flow.applyAdvisory(result);
      this.saveDraft();
      this.emit();
    } catch {
      // advisory is advice; the annotator can still answer every step
    }
  }

  // -- submission

  /** Submit the completed review.  Delivery failures keep the judgment in
   * the local queue; nothing is lost and nothing blocks. */
  async submit(): Promise<void> {
    const flow = this.flow;
    if (flow === null || !flow.isComplete()) return;
    const judgment = flow.judgment(this.annotator, this.clock());
    try {
      await this.flushPending();
      const result = await this.recovering(() => this.client.submit(judgment));
      this.drafts.clear(this.annotator, judgment.query);
      this.status = result.superseded
        ? { kind: "info", text: `Revised judgment for ${judgment.query} accepted.` }
        : { kind: "info", text: `Judgment for ${judgment.query} accepted.` };
    } catch (error) {
      if (!isNetworkFailure(error)) {
        // the service refused the judgment; surface why and stay on the task
        this.status = { kind: "error", text: describe(error) };
        this.emit();
        return;
      }
      this.pending.push(judgment);
      this.drafts.clear(this.annotator, judgment.query);
      this.goOffline(error);
      this.status = {
        kind: "queued",
        text: `Connection lost; judgment for ${judgment.query} queued locally.`,
      };
      this.emit();
      return;
    }
    try {
      await this.loadNext();
    } catch (error) {
      this.goOffline(error);
    }
  }

  /** Deliver queued judgments oldest-first; stop at the first network
   * failure, leaving the remainder queued. */
  async flushPending(): Promise<void> {
    let queue = this.pending.all();
    while (queue.length > 0) {
      const head = queue[0] as JudgmentDocument;
      await this.recovering(() => this.client.submit(head));
      queue = queue.slice(1);
      this.pending.replace(queue);
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ServiceError) {
    return `service rejected the request (${error.status}): ${error.message}`;
  }
  return error instanceof Error ? error.message : String(error);
}
