/**
 * Shared test scaffolding: a task factory, an in-memory fake of the
 * validation service protocol (driven through the real client via an
 * injected fetch), and small async/DOM utilities.
 */

import type {
  FetchLike,
  JudgmentDocument,
  TaskDocument,
} from "../src/api.js";
import { DECISION_STEPS } from "../src/model.js";

export function makeTask(
  query: string,
  options: { panelSize?: number; k?: number } = {},
): TaskDocument {
  const size = options.panelSize ?? 12;
  const items = Array.from(
    { length: size },
    (_, i) => `g${String(i + 1).padStart(4, "0")}`,
  );
  const contributors = Object.fromEntries(
    items.map((item, at) => [item, (at % 3) + 1]),
  );
  return {
    query,
    reference: `assets/${query}/reference.png`,
    text: `edit request for ${query}`,
    targets: [`assets/${query}/target0.png`],
    panel: { items, contributors },
    k: options.k ?? 10,
    steps: [...DECISION_STEPS],
  };
}

/**
 * In-memory stand-in for the validation service, speaking the same wire
 * shapes: register / next task / judgments / advisory / progress.  Knobs:
 * `offline` makes every call fail at the transport level; `restart()`
 * forgets sessions the way a relaunched service does.
 */
export class FakeService {
  readonly records: JudgmentDocument[] = [];
  readonly registered = new Set<string>();
  relevant = new Set<string>();
  k = 10;
  offline = false;

  private readonly tasks: TaskDocument[];
  private readonly served = new Set<string>();

  constructor(tasks: TaskDocument[]) {
    this.tasks = [...tasks];
  }

  get fetchFn(): FetchLike {
    return (input, init) => this.handle(input, init);
  }

  restart(): void {
    this.registered.clear();
    this.served.clear();
  }

  private json(status: number, body: unknown): Response {
    return {
      ok: status >= 200 && status < 300,
      status,
      text: async () => JSON.stringify(body),
    } as unknown as Response;
  }

  private async handle(input: string, init?: RequestInit): Promise<Response> {
    if (this.offline) throw new TypeError("fetch failed: connection refused");
    const url = new URL(input);
    const path = url.pathname;
    const method = init?.method ?? "GET";
    const body =
      init?.body === undefined ? null : JSON.parse(String(init.body));

    if (method === "POST" && path === "/annotators/register") {
      this.registered.add(body.annotator);
      return this.json(200, { registered: body.annotator });
    }
    if (method === "GET" && path === "/tasks/next") {
      const annotator = url.searchParams.get("annotator") ?? "";
      const stale = this.requireSession(annotator);
      if (stale !== null) return stale;
      const next = this.tasks.find(
        (t) => !this.judged(annotator).has(t.query),
      );
      if (next === undefined) return this.json(200, { done: true, task: null });
      this.served.add(`${annotator}:${next.query}`);
      return this.json(200, { done: false, task: next });
    }
    if (method === "POST" && path === "/judgments") {
      const stale = this.requireSession(body.annotator);
      if (stale !== null) return stale;
      if (!this.served.has(`${body.annotator}:${body.query}`)) {
        return this.json(422, {
          detail: `query '${body.query}' was never served to '${body.annotator}'`,
        });
      }
      const superseded = this.judged(body.annotator).has(body.query);
      this.records.push(body as JudgmentDocument);
      return this.json(200, { accepted: true, superseded });
    }
    if (method === "POST" && path === "/advisory") {
      const marks: string[] = body.marks;
      const nonGt = marks.filter((m) => !this.relevant.has(m));
      return this.json(200, {
        query: body.query,
        non_ground_truth_marks: nonGt.length,
        k: this.k,
        reached: nonGt.length >= this.k,
      });
    }
    if (method === "GET" && path === "/progress") {
      const annotator = url.searchParams.get("annotator") ?? "";
      const stale = this.requireSession(annotator);
      if (stale !== null) return stale;
      return this.json(200, {
        annotator,
        total: this.tasks.length,
        done: this.judged(annotator).size,
      });
    }
    return this.json(404, { detail: `no route ${method} ${path}` });
  }

  private judged(annotator: string): Set<string> {
    return new Set(
      this.records
        .filter((r) => r.annotator === annotator)
        .map((r) => r.query),
    );
  }

  private requireSession(annotator: string): Response | null {
    if (!this.registered.has(annotator)) {
      return this.json(422, { detail: `unknown annotator '${annotator}'` });
    }
    return null;
  }
}

/** Poll until `check` passes; fail loudly with `what` on timeout. */
export async function waitFor(
  check: () => boolean,
  what: string,
  timeoutMs = 15_000,
): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
}

export function byId<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) throw new Error(`no element #${id}`);
  return found as T;
}

export function click(id: string): void {
  byId<HTMLButtonElement>(id).click();
}

/** Text of an element, or "" while it is absent (safe inside waitFor). */
export function textOf(id: string): string {
  return document.getElementById(id)?.textContent ?? "";
}
