/**
 * DOM view: renders the controller's state and translates clicks and
 * keystrokes into controller calls.
 *
 * Rendering rules the tests pin down:
 * - the four decision steps always appear in their fixed order;
 * - the submit button stays disabled until every step is answered;
 * - panel items appear exactly in the order the service sent them;
 * - the audit category is never displayed (task documents never carry it,
 *   and the view adds nothing of its own);
 * - the overly-broad banner is advice: it reports the threshold and the
 *   preselection, and every control stays editable.
 */

import { AnnotationClient } from "./api.js";
import { AnnotationApp } from "./app.js";
import {
  DECISION_STEPS,
  DecisionStep,
  ReviewFlow,
  STEP_ISSUE,
  STEP_PROMPTS,
} from "./model.js";

export class AnnotationView {
  constructor(
    private readonly root: HTMLElement,
    private readonly app: AnnotationApp,
    private readonly client: AnnotationClient,
  ) {}

  /** Attach listeners and render the current state. */
  mount(): void {
    this.app.onChange(() => this.render());
    const doc = this.root.ownerDocument;
    doc.addEventListener("keydown", (event) => this.onKey(event));
    this.render();
  }

  // -- keyboard-first controls

  private onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    const tag = target?.tagName?.toLowerCase() ?? "";
    if (tag === "textarea" || tag === "input") return;
    if (event.ctrlKey || event.metaKey || event.altKey) return;
    if (this.app.flow === null) return;
    const key = event.key;
    if (key >= "1" && key <= "4") {
      this.app.jumpTo(Number(key) - 1);
    } else if (key === "o") {
      this.app.answerAndAdvance("ok");
    } else if (key === "x") {
      this.app.answerAndAdvance("issue");
    } else if (key === "n" || key === "ArrowRight" || key === "]") {
      this.app.advance();
    } else if (key === "p" || key === "ArrowLeft" || key === "[") {
      this.app.back();
    } else if (key === "Enter") {
      void this.app.submit();
    } else {
      return;
    }
    event.preventDefault();
  }

  // -- rendering

  render(): void {
    const doc = this.root.ownerDocument;
    this.root.textContent = "";
    this.root.append(this.header(doc));
    const status = this.statusLine(doc);
    if (status !== null) this.root.append(status);
    const screen = doc.createElement("main");
    screen.id = "screen";
    switch (this.app.phase) {
      case "idle":
      case "loading":
        screen.append(this.message(doc, "loading", "Loading the next task…"));
        break;
      case "done":
        screen.append(
          this.message(doc, "all-done", "All assigned tasks are complete."),
        );
        break;
      case "offline":
        screen.append(this.offline(doc));
        break;
      case "reviewing":
        if (this.app.flow !== null) this.reviewScreen(doc, screen, this.app.flow);
        break;
    }
    this.root.append(screen);
  }

  private header(doc: Document): HTMLElement {
    const bar = doc.createElement("header");
    bar.className = "topbar";
    const title = doc.createElement("h1");
    title.textContent = "Annotation review";
    const who = doc.createElement("span");
    who.id = "annotator";
    who.textContent = this.app.annotator;
    const progress = doc.createElement("span");
    progress.id = "progress";
    const p = this.app.progress;
    progress.textContent = p === null ? "" : `${p.done} of ${p.total} done`;
    bar.append(title, who, progress);
    return bar;
  }

  private statusLine(doc: Document): HTMLElement | null {
    if (this.app.status === null) return null;
    const line = doc.createElement("div");
    line.id = "status";
    line.className = `status ${this.app.status.kind}`;
    line.textContent = this.app.status.text;
    return line;
  }

  private message(doc: Document, cls: string, text: string): HTMLElement {
    const p = doc.createElement("p");
    p.className = cls;
    p.textContent = text;
    return p;
  }

  private offline(doc: Document): HTMLElement {
    const box = doc.createElement("div");
    box.className = "offline";
    box.append(
      this.message(
        doc,
        "offline-note",
        "Working copy saved. Reconnect to continue.",
      ),
    );
    const retry = doc.createElement("button");
    retry.id = "btn-retry";
    retry.textContent = "Retry connection";
    retry.addEventListener("click", () => void this.app.retry());
    box.append(retry);
    return box;
  }

  private reviewScreen(doc: Document, screen: HTMLElement, flow: ReviewFlow): void {
    screen.append(
      this.tripletSection(doc, flow),
      this.stepsSection(doc, flow),
      this.panelSection(doc, flow),
      this.footer(doc, flow),
    );
  }

  // the query triplet: reference image, edit text, target image(s)

  private tripletSection(doc: Document, flow: ReviewFlow): HTMLElement {
    const section = doc.createElement("section");
    section.className = "task";
    const heading = doc.createElement("h2");
    heading.id = "task-id";
    heading.textContent = flow.task.query;
    section.append(heading);

    const triplet = doc.createElement("div");
    triplet.className = "triplet";
    triplet.append(
      this.figure(doc, "reference", flow.task.reference, "Reference"),
    );
    const text = doc.createElement("div");
    text.id = "edit-text";
    text.className = "edit-text";
    text.textContent = flow.task.text;
    triplet.append(text);
    flow.task.targets.forEach((ref, i) => {
      const label = flow.task.targets.length === 1 ? "Target" : `Target ${i + 1}`;
      triplet.append(this.figure(doc, "target", ref, label));
    });
    section.append(triplet);
    return section;
  }

  private figure(
    doc: Document,
    cls: string,
    ref: string,
    caption: string,
  ): HTMLElement {
    const figure = doc.createElement("figure");
    figure.className = cls;
    const img = doc.createElement("img");
    img.src = this.client.assetUrl(ref);
    img.alt = `${caption} image`;
    const cap = doc.createElement("figcaption");
    cap.textContent = caption;
    figure.append(img, cap);
    return figure;
  }

  // the four-step decision walk

  private stepsSection(doc: Document, flow: ReviewFlow): HTMLElement {
    const section = doc.createElement("section");
    section.className = "steps";

    const list = doc.createElement("ol");
    list.id = "step-list";
    DECISION_STEPS.forEach((step, i) => {
      const item = doc.createElement("li");
      item.dataset.step = step;
      const outcome = flow.outcomeOf(step);
      item.className = [
        "step",
        i === flow.stepIndex ? "current" : "",
        outcome === null ? "unanswered" : `answered-${outcome}`,
      ]
        .filter(Boolean)
        .join(" ");
      const no = doc.createElement("span");
      no.className = "step-no";
      no.textContent = String(i + 1);
      const prompt = doc.createElement("span");
      prompt.className = "prompt";
      prompt.textContent = STEP_PROMPTS[step];
      const verdict = doc.createElement("span");
      verdict.className = "verdict";
      verdict.textContent = outcome ?? "·";
      item.append(no, prompt, verdict);
      item.addEventListener("click", () => this.app.jumpTo(i));
      list.append(item);
    });
    section.append(list);

    const controls = doc.createElement("div");
    controls.className = "answer-controls";
    controls.append(
      this.control(doc, "btn-ok", "Ok (o)", () =>
        this.app.answerAndAdvance("ok"),
      ),
      this.control(doc, "btn-issue", "Issue (x)", () =>
        this.app.answerAndAdvance("issue"),
      ),
      this.control(doc, "btn-back", "Back (p)", () => this.app.back()),
      this.control(doc, "btn-next", "Next (n)", () => this.app.advance()),
    );
    section.append(controls);

    section.append(this.issueChecks(doc, flow));

    const noteLabel = doc.createElement("label");
    noteLabel.className = "note";
    noteLabel.textContent = "Note";
    const note = doc.createElement("textarea");
    note.id = "note";
    note.value = flow.note;
    note.addEventListener("input", () => this.app.setNote(note.value));
    noteLabel.append(note);
    section.append(noteLabel);
    return section;
  }

  private control(
    doc: Document,
    id: string,
    label: string,
    onClick: () => void,
  ): HTMLElement {
    const button = doc.createElement("button");
    button.id = id;
    button.textContent = label;
    button.addEventListener("click", onClick);
    return button;
  }

  private issueChecks(doc: Document, flow: ReviewFlow): HTMLElement {
    const fieldset = doc.createElement("fieldset");
    fieldset.id = "issue-checks";
    const legend = doc.createElement("legend");
    legend.textContent = "Issues recorded";
    fieldset.append(legend);
    DECISION_STEPS.forEach((step, i) => {
      const label = doc.createElement("label");
      const box = doc.createElement("input");
      box.type = "checkbox";
      box.dataset.step = step;
      box.checked = flow.outcomeOf(step) === "issue";
      // an unanswered step beyond the walk cannot be answered out of order,
      // but anything already answered (or preselected) stays editable
      box.disabled = flow.outcomeOf(step) === null && i > flow.firstUnanswered();
      box.addEventListener("change", () =>
        this.app.answerStep(step, box.checked ? "issue" : "ok"),
      );
      label.append(box, doc.createTextNode(` ${STEP_ISSUE[step]}`));
      fieldset.append(label);
    });
    return fieldset;
  }

  // the retrieved panel with plausibility marks and the advisory banner

  private panelSection(doc: Document, flow: ReviewFlow): HTMLElement {
    const section = doc.createElement("section");
    section.className = "panel";
    const heading = doc.createElement("h3");
    heading.textContent = "Retrieved items — mark every plausible match";
    section.append(heading, this.advisoryBanner(doc, flow));

    const list = doc.createElement("ol");
    list.id = "panel-list";
    for (const item of flow.task.panel.items) {
      const entry = doc.createElement("li");
      const toggle = doc.createElement("button");
      toggle.dataset.item = item;
      toggle.className = "panel-item";
      toggle.setAttribute("aria-pressed", String(flow.isMarked(item)));
      const id = doc.createElement("span");
      id.className = "item-id";
      id.textContent = item;
      const hits = doc.createElement("span");
      hits.className = "hits";
      const lists = flow.task.panel.contributors[item] ?? 0;
      hits.textContent = `×${lists}`;
      toggle.append(id, hits);
      toggle.addEventListener("click", () => this.app.toggleMark(item));
      entry.append(toggle);
      list.append(entry);
    }
    section.append(list);
    return section;
  }

  private advisoryBanner(doc: Document, flow: ReviewFlow): HTMLElement {
    const banner = doc.createElement("div");
    banner.id = "advisory";
    const advisory = flow.advisory;
    if (advisory === null) {
      banner.className = "advisory idle";
      banner.textContent = "";
      banner.hidden = true;
      return banner;
    }
    banner.hidden = false;
    const count = `${advisory.non_ground_truth_marks} of ${advisory.k}`;
    if (advisory.reached) {
      banner.className = "advisory reached";
      banner.textContent =
        `${count} non-ground-truth marks: this query may be overly broad. ` +
        "The specificity step is preset to issue — change it if you disagree.";
    } else {
      banner.className = "advisory counting";
      banner.textContent = `${count} non-ground-truth marks toward the overly-broad advisory.`;
    }
    return banner;
  }

  private footer(doc: Document, flow: ReviewFlow): HTMLElement {
    const footer = doc.createElement("footer");
    const submit = doc.createElement("button");
    submit.id = "btn-submit";
    submit.textContent = "Submit judgment";
    submit.disabled = !flow.isComplete();
    submit.addEventListener("click", () => void this.app.submit());
    footer.append(submit);
    return footer;
  }
}
