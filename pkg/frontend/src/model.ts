/**
 * Pure review-flow state machine: the four-step decision walk, panel
 * plausibility marks, and the judgment a completed walk produces.
 *
 * No DOM, no network — everything here is synchronously testable, and the
 * controller/view layers stay thin.
 */

import type {
  AdvisoryResult,
  JudgmentDocument,
  TaskDocument,
  TraceStepDocument,
} from "./api.js";

/** The fixed decision order every task walks, first step first. */
export const DECISION_STEPS = [
  "text_validity",
  "reference_quality",
  "target_correctness",
  "specificity",
] as const;

export type DecisionStep = (typeof DECISION_STEPS)[number];

/** Issue label recorded when a step's answer is "issue". */
export const STEP_ISSUE: Record<DecisionStep, string> = {
  text_validity: "invalid_text",
  reference_quality: "invalid_reference_image",
  target_correctness: "invalid_target_image",
  specificity: "overly_broad_query",
};

/** Human-readable step prompts shown in the step indicator. */
export const STEP_PROMPTS: Record<DecisionStep, string> = {
  text_validity: "Is the edit text well-formed and meaningful?",
  reference_quality: "Is the reference image usable?",
  target_correctness: "Does the target satisfy reference + edit?",
  specificity: "Is the query specific enough (not overly broad)?",
};

export type StepOutcome = "ok" | "issue";

/** Serialisable snapshot of an in-progress review, for draft persistence. */
export interface FlowSnapshot {
  query: string;
  outcomes: (StepOutcome | null)[];
  stepIndex: number;
  marks: string[];
  note: string;
}

/**
 * One task's review walk.
 *
 * Invariants maintained here (and relied on by the view):
 * - steps always render in the fixed order; a task that disagrees is rejected;
 * - advancing past an unanswered step is impossible;
 * - a judgment is only buildable once all steps are answered;
 * - `valid` is derived (no issue answers), so a valid judgment can never
 *   carry a nonempty issue set.
 */
export class ReviewFlow {
  readonly task: TaskDocument;
  private outcomes: (StepOutcome | null)[];
  private index = 0;
  private readonly marked = new Set<string>();
  private lastAdvisory: AdvisoryResult | null = null;
  note = "";

  constructor(task: TaskDocument) {
    const expected: readonly string[] = DECISION_STEPS;
    if (
      task.steps.length !== expected.length ||
      task.steps.some((s, i) => s !== expected[i])
    ) {
      throw new Error(
        `task ${task.query} steps [${task.steps.join(", ")}] ` +
          `differ from the fixed order [${expected.join(", ")}]`,
      );
    }
    this.task = task;
    this.outcomes = expected.map(() => null);
  }

  get stepIndex(): number {
    return this.index;
  }

  get currentStep(): DecisionStep {
    return DECISION_STEPS[this.index] as DecisionStep;
  }

  outcomeOf(step: DecisionStep): StepOutcome | null {
    return this.outcomes[DECISION_STEPS.indexOf(step)] ?? null;
  }

  /** Answer the current step; stays on it so the answer can be revised. */
  answer(outcome: StepOutcome): void {
    this.outcomes[this.index] = outcome;
  }

  /** Set a specific step's answer (used by the issue checkboxes). */
  answerStep(step: DecisionStep, outcome: StepOutcome): void {
    const at = DECISION_STEPS.indexOf(step);
    if (at > this.firstUnanswered() && this.outcomes[at] === null) {
      throw new Error(`cannot answer ${step} before the steps preceding it`);
    }
    this.outcomes[at] = outcome;
  }

  /** Index of the first unanswered step, or the step count when complete. */
  firstUnanswered(): number {
    const at = this.outcomes.indexOf(null);
    return at === -1 ? DECISION_STEPS.length : at;
  }

  /** Advance to the next step; refused while the current one is unanswered. */
  advance(): boolean {
    if (this.outcomes[this.index] === null) return false;
    if (this.index < DECISION_STEPS.length - 1) {
      this.index += 1;
      return true;
    }
    return false;
  }

  back(): boolean {
    if (this.index === 0) return false;
    this.index -= 1;
    return true;
  }

  /** Jump to a step; forward jumps stop at the first unanswered step. */
  jumpTo(step: number): void {
    const cap = Math.min(step, this.firstUnanswered(), DECISION_STEPS.length - 1);
    this.index = Math.max(0, cap);
  }

  // -- panel plausibility marks

  toggleMark(item: string): boolean {
    if (!this.task.panel.items.includes(item)) {
      throw new Error(`item ${item} is not on this task's panel`);
    }
    if (this.marked.has(item)) {
      this.marked.delete(item);
      return false;
    }
    this.marked.add(item);
    return true;
  }

  isMarked(item: string): boolean {
    return this.marked.has(item);
  }

  /** Marks in panel order (the service's ordering is preserved). */
  marks(): string[] {
    return this.task.panel.items.filter((i) => this.marked.has(i));
  }

  // -- advisory

  /**
   * Record the service's overly-broad advisory.  When the threshold is
   * reached and the specificity step has no answer yet, preselect "issue";
   * the annotator can still override it (advisory, not enforcement).
   */
  applyAdvisory(result: AdvisoryResult): void {
    this.lastAdvisory = result;
    const at = DECISION_STEPS.indexOf("specificity");
    if (result.reached && this.outcomes[at] === null) {
      this.outcomes[at] = "issue";
    }
  }

  get advisory(): AdvisoryResult | null {
    return this.lastAdvisory;
  }

  // -- outcome

  isComplete(): boolean {
    return this.outcomes.every((o) => o !== null);
  }

  issues(): string[] {
    return DECISION_STEPS.filter(
      (step) => this.outcomeOf(step) === "issue",
    ).map((step) => STEP_ISSUE[step]);
  }

  isValid(): boolean {
    return this.issues().length === 0;
  }

  judgment(annotator: string, timestamp: number): JudgmentDocument {
    if (!this.isComplete()) {
      throw new Error("cannot build a judgment before all steps are answered");
    }
    const trace: TraceStepDocument[] = DECISION_STEPS.map((step) => ({
      step,
      outcome: this.outcomeOf(step) as "ok" | "issue",
    }));
    const issues = this.issues();
    const doc: JudgmentDocument = {
      query: this.task.query,
      annotator,
      timestamp,
      valid: issues.length === 0,
      issues,
      trace,
    };
    if (this.note.trim() !== "") doc.note = this.note.trim();
    return doc;
  }

  // -- draft persistence

  snapshot(): FlowSnapshot {
    return {
      query: this.task.query,
      outcomes: [...this.outcomes],
      stepIndex: this.index,
      marks: this.marks(),
      note: this.note,
    };
  }

  restore(snapshot: FlowSnapshot): void {
    if (snapshot.query !== this.task.query) {
      throw new Error(
        `draft for ${snapshot.query} cannot restore task ${this.task.query}`,
      );
    }
    this.outcomes = DECISION_STEPS.map(
      (_, i) => snapshot.outcomes[i] ?? null,
    );
    this.index = Math.min(
      Math.max(0, snapshot.stepIndex),
      DECISION_STEPS.length - 1,
    );
    this.marked.clear();
    for (const item of snapshot.marks) {
      if (this.task.panel.items.includes(item)) this.marked.add(item);
    }
    this.note = snapshot.note;
  }
}
