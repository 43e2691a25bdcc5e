/**
 * Local persistence: per-task review drafts and a queue of judgments that
 * failed to reach the service (retried before anything new is submitted).
 *
 * Backed by any string key-value store; the browser passes localStorage,
 * tests pass an in-memory map.
 */

import type { JudgmentDocument } from "./api.js";
import type { FlowSnapshot } from "./model.js";

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class MemoryStore implements KeyValueStore {
  private readonly map = new Map<string, string>();

  getItem(key: string): string | null {
    return this.map.has(key) ? (this.map.get(key) as string) : null;
  }

  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }

  removeItem(key: string): void {
    this.map.delete(key);
  }
}

export class DraftStore {
  constructor(
    private readonly store: KeyValueStore,
    private readonly prefix = "ciraudit.draft",
  ) {}

  private key(annotator: string, query: string): string {
    return `${this.prefix}:${annotator}:${query}`;
  }

  save(annotator: string, snapshot: FlowSnapshot): void {
    this.store.setItem(
      this.key(annotator, snapshot.query),
      JSON.stringify(snapshot),
    );
  }

  load(annotator: string, query: string): FlowSnapshot | null {
    const raw = this.store.getItem(this.key(annotator, query));
    if (raw === null) return null;
    try {
      const parsed = JSON.parse(raw) as FlowSnapshot;
      return parsed.query === query ? parsed : null;
    } catch {
      return null;
    }
  }

  clear(annotator: string, query: string): void {
    this.store.removeItem(this.key(annotator, query));
  }
}

/** FIFO queue of judgments awaiting delivery after a network failure. */
export class PendingQueue {
  constructor(
    private readonly store: KeyValueStore,
    private readonly annotator: string,
    private readonly prefix = "ciraudit.pending",
  ) {}

  private get key(): string {
    return `${this.prefix}:${this.annotator}`;
  }

  all(): JudgmentDocument[] {
    const raw = this.store.getItem(this.key);
    if (raw === null) return [];
    try {
      return JSON.parse(raw) as JudgmentDocument[];
    } catch {
      return [];
    }
  }

  push(judgment: JudgmentDocument): void {
    const queue = this.all().filter((j) => j.query !== judgment.query);
    queue.push(judgment);
    this.store.setItem(this.key, JSON.stringify(queue));
  }

  replace(queue: JudgmentDocument[]): void {
    if (queue.length === 0) {
      this.store.removeItem(this.key);
    } else {
      this.store.setItem(this.key, JSON.stringify(queue));
    }
  }
}
