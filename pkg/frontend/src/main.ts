/**
 * Browser entry point: wires the client, controller, and view together
 * with localStorage-backed persistence, then starts the session.
 */

import { AnnotationClient } from "./api.js";
import { AnnotationApp } from "./app.js";
import {
  DraftStore,
  KeyValueStore,
  MemoryStore,
  PendingQueue,
} from "./draft.js";
import { AnnotationView } from "./view.js";

function storage(): KeyValueStore {
  try {
    const probe = "__ciraudit_probe__";
    window.localStorage.setItem(probe, "1");
    window.localStorage.removeItem(probe);
    return window.localStorage;
  } catch {
    return new MemoryStore();
  }
}

function annotatorId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("annotator");
  if (fromQuery !== null && fromQuery.trim() !== "") return fromQuery.trim();
  const prompted = window.prompt("Annotator id?");
  return prompted !== null && prompted.trim() !== ""
    ? prompted.trim()
    : "anonymous";
}

const annotator = annotatorId();
const store = storage();
const client = new AnnotationClient(window.location.origin);
const app = new AnnotationApp({
  client,
  annotator,
  drafts: new DraftStore(store),
  pending: new PendingQueue(store, annotator),
});

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");
new AnnotationView(root, app, client).mount();
void app.start();
