/**
 * The submission gate, ported check for check from the server engine:
 * value integrity, completeness, repetition bounds, regex constraints,
 * and registered custom predicates, reported exhaustively in document
 * order. The shared vector corpus holds both sides to identical output;
 * the server remains authoritative and revalidates on POST.
 */

import { enabledSet, instanceKey, settle, splitKey, taskIndex } from "./conditions.js";
import { fullMatch } from "./regex.js";
import type { ResponseState } from "./state.js";
import type {
  AnnotationDoc,
  ConstraintDoc,
  SpanSelection,
  TaskDoc,
  Violation,
} from "./types.js";

export const COMPLETENESS_MESSAGE = "This question requires an answer.";

export type Predicate = (
  task: TaskDoc,
  state: ResponseState,
  params: Record<string, unknown>,
) => string | null;

export class ConstraintRegistry {
  private predicates = new Map<string, Predicate>();

  register(name: string, predicate: Predicate): string {
    if (this.predicates.has(name)) {
      throw new Error(`custom constraint ${name} is already registered`);
    }
    this.predicates.set(name, predicate);
    return name;
  }

  get(name: string | undefined): Predicate | undefined {
    return name === undefined ? undefined : this.predicates.get(name);
  }
}

export function noDuplicateQuestion(
  _task: TaskDoc,
  state: ResponseState,
  params: Record<string, unknown>,
): string | null {
  const aid = params["field"];
  if (typeof aid !== "string" || !aid) return "constraint params must name a 'field'";
  const seen = new Set<string>();
  const entries = state
    .keys()
    .filter(([keyAid]) => keyAid === aid)
    .sort((a, b) => (a[1] !== b[1] ? a[1] - b[1] : 0));
  for (const [keyAid, instance] of entries) {
    const value = state.get(keyAid, instance);
    if (typeof value !== "string") continue;
    if (seen.has(value)) return `duplicate value ${value} for ${aid}`;
    seen.add(value);
  }
  return null;
}

const defaultRegistryInstance = new ConstraintRegistry();
defaultRegistryInstance.register("no-duplicate-question", noDuplicateQuestion);

export function defaultRegistry(): ConstraintRegistry {
  return defaultRegistryInstance;
}

// ---------------------------------------------------------------------------
// Individual checks

export function checkRegex(
  c: ConstraintDoc,
  value: string,
  subject = "",
  instance: number | null = null,
): Violation | null {
  if (fullMatch(c.regex ?? "", value)) return null;
  return { subject, instance, description: c.description, kind: "regex" };
}

function boundsMessage(lo: number, hi: number | null): string {
  if (hi === null) return `Requires at least ${lo} response(s).`;
  if (lo === hi) return `Requires exactly ${lo} response(s).`;
  return `Requires between ${lo} and ${hi} responses.`;
}

export function checkRepetition(
  definition: { id: string; min?: number | null; max?: number | null },
  count: number,
  instance: number | null = null,
): Violation | null {
  const lo = definition.min ?? 0;
  const hi = definition.max ?? null;
  if (lo <= count && (hi === null || count <= hi)) return null;
  return {
    subject: definition.id,
    instance,
    description: boundsMessage(lo, hi),
    kind: "repetition",
  };
}

// ---------------------------------------------------------------------------
// Value integrity

const DATE_RE =
  /^(\d{4})-(\d{2})-(\d{2})([T ](\d{2}):(\d{2})(:(\d{2})(\.\d{1,6})?)?([+-]\d{2}:\d{2})?)?$/;

function validDatetime(value: string): boolean {
  const m = DATE_RE.exec(value);
  if (!m) return false;
  const year = Number(m[1]);
  const month = Number(m[2]);
  const day = Number(m[3]);
  if (month < 1 || month > 12) return false;
  const days = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31][month - 1];
  const leap = year % 4 === 0 && (year % 100 !== 0 || year % 400 === 0);
  const maxDay = month === 2 && leap ? 29 : days;
  if (day < 1 || day > maxDay) return false;
  if (m[5] !== undefined) {
    if (Number(m[5]) > 23 || Number(m[6]) > 59) return false;
    if (m[8] !== undefined && Number(m[8]) > 59) return false;
  }
  return true;
}

function sourceChars(task: TaskDoc, a: AnnotationDoc): string[] {
  const ctx = task.contexts.find((c) => c.id === a.from_context);
  const payload = ctx?.type === "text" ? (ctx.text ?? "") : "";
  return Array.from(payload);
}

function validSpan(sel: unknown, sourceLen: number, source: string[]): boolean {
  if (typeof sel !== "object" || sel === null || Array.isArray(sel)) return false;
  const span = sel as SpanSelection;
  if (!Number.isInteger(span.start) || !Number.isInteger(span.end)) return false;
  if (!(0 <= span.start && span.start < span.end && span.end <= sourceLen)) {
    return false;
  }
  if (span.text !== undefined && span.text !== null) {
    if (span.text !== source.slice(span.start, span.end).join("")) return false;
  }
  return true;
}

export function spanText(sel: SpanSelection, source: string[]): string {
  return source.slice(sel.start, sel.end).join("");
}

function checkValue(
  task: TaskDoc,
  a: AnnotationDoc,
  value: unknown,
  instance: number,
): Violation | null {
  const bad = (msg: string): Violation => ({
    subject: a.id,
    instance,
    description: msg,
    kind: "value",
  });
  const keys = Object.keys(a.options ?? {});
  if (a.type === "multiple-choice") {
    if (typeof value !== "string" || !keys.includes(value)) {
      return bad("Answer must be one of the listed options.");
    }
  } else if (a.type === "multi-label") {
    if (
      !Array.isArray(value) ||
      !value.every((v) => typeof v === "string") ||
      new Set(value).size !== value.length ||
      !value.every((v) => keys.includes(v as string))
    ) {
      return bad("Answer must be a set of the listed options.");
    }
  } else if (a.type === "text-input") {
    if (typeof value !== "string") return bad("Answer must be text.");
  } else if (a.type === "datetime") {
    if (typeof value !== "string" || !validDatetime(value)) {
      return bad("Answer must be a valid ISO-8601 date or date-time.");
    }
  } else if (a.type === "span-from-text") {
    const source = sourceChars(task, a);
    if (!Array.isArray(value)) return bad("Span selections must be a list.");
    for (const sel of value) {
      if (!validSpan(sel, source.length, source)) {
        return bad("Span selection does not lie within the source text.");
      }
    }
  }
  return null;
}

// ---------------------------------------------------------------------------
// The gate

export interface SubmissionResult {
  accepted: boolean;
  violations: Violation[];
  state: ResponseState;
  cleared: [string, number][];
}

function sortedEnabled(task: TaskDoc, enabled: Set<string>): [string, number][] {
  const order = taskIndex(task).order;
  return [...enabled]
    .map(splitKey)
    .sort((a, b) => {
      const oa = order.get(a[0]) ?? 0;
      const ob = order.get(b[0]) ?? 0;
      if (oa !== ob) return oa - ob;
      return a[1] - b[1];
    });
}

export function checkCompleteness(
  task: TaskDoc,
  state: ResponseState,
  enabled: Set<string>,
): Violation[] {
  const idx = taskIndex(task);
  const out: Violation[] = [];
  for (const [aid, instance] of sortedEnabled(task, enabled)) {
    const ref = idx.resolve(aid);
    if (!ref || ref.definition.optional) continue;
    if (ref.definition.type === "span-from-text") continue;
    if (!state.answered(aid, instance)) {
      out.push({
        subject: aid,
        instance,
        description: COMPLETENESS_MESSAGE,
        kind: "completeness",
      });
    }
  }
  return out;
}

export function validateSubmission(
  task: TaskDoc,
  state: ResponseState,
  registry: ConstraintRegistry = defaultRegistry(),
): SubmissionResult {
  const settled = settle(task, state);
  const enabled = enabledSet(task, settled.state);
  const idx = taskIndex(task);
  const violations: Violation[] = [];
  const valueBad = new Set<string>();
  const cur = settled.state;

  for (const [aid, instance] of sortedEnabled(task, enabled)) {
    const ref = idx.resolve(aid);
    if (!ref || !cur.answered(aid, instance)) continue;
    const v = checkValue(task, ref.definition, cur.get(aid, instance), instance);
    if (v !== null) {
      violations.push(v);
      valueBad.add(instanceKey(aid, instance));
    }
  }

  violations.push(...checkCompleteness(task, cur, enabled));

  for (const g of task.annotation_groups) {
    const count = cur.instanceCount(g);
    if (g.repeated) {
      const v = checkRepetition(g, count);
      if (v !== null) violations.push(v);
    } else if (count !== 1) {
      violations.push({
        subject: g.id,
        instance: null,
        description: boundsMessage(1, 1),
        kind: "repetition",
      });
    }
  }
  for (const [aid, instance] of sortedEnabled(task, enabled)) {
    const ref = idx.resolve(aid);
    if (!ref || ref.definition.type !== "span-from-text") continue;
    if (valueBad.has(instanceKey(aid, instance))) continue;
    if (ref.definition.optional && !cur.answered(aid, instance)) continue;
    const value = (cur.get(aid, instance) as SpanSelection[] | undefined) ?? [];
    const v = checkRepetition(ref.definition as never, value.length, instance);
    if (v !== null) violations.push(v);
  }

  for (const [aid, instance] of sortedEnabled(task, enabled)) {
    const ref = idx.resolve(aid);
    if (!ref || valueBad.has(instanceKey(aid, instance))) continue;
    const a = ref.definition;
    const textValued = a.type === "span-from-text" || a.type === "text-input";
    if (!textValued || !cur.answered(aid, instance)) continue;
    const value = cur.get(aid, instance);
    let texts: string[];
    if (a.type === "text-input") {
      texts = [value as string];
    } else {
      const source = sourceChars(task, a);
      texts = (value as SpanSelection[]).map((sel) => spanText(sel, source));
    }
    for (const c of a.constraints) {
      if (c.type !== "regex") continue;
      if (texts.some((t) => checkRegex(c, t) !== null)) {
        violations.push({
          subject: aid,
          instance,
          description: c.description,
          kind: "regex",
        });
      }
    }
  }

  violations.push(...runCustom(task, cur, registry));

  return {
    accepted: violations.length === 0,
    violations,
    state: cur,
    cleared: settled.cleared,
  };
}

function runCustom(
  task: TaskDoc,
  state: ResponseState,
  registry: ConstraintRegistry,
): Violation[] {
  const out: Violation[] = [];
  const run = (c: ConstraintDoc, subject: string): void => {
    if (c.type !== "custom") return;
    const predicate = registry.get(c.name);
    if (!predicate) {
      throw new Error(`custom constraint ${c.name} is not registered`);
    }
    if (predicate(task, state, c.params ?? {}) !== null) {
      out.push({
        subject,
        instance: null,
        description: c.description,
        kind: "custom",
      });
    }
  };
  const subjectFor = (c: ConstraintDoc, owner: string, group: string | null): string => {
    if (c.scope === "task") return task.task_id;
    if (c.scope === "group" && group !== null) return group;
    return owner;
  };
  for (const a of task.annotations) {
    for (const c of a.constraints) run(c, subjectFor(c, a.id, null));
  }
  for (const g of task.annotation_groups) {
    for (const a of g.annotations) {
      for (const c of a.constraints) run(c, subjectFor(c, a.id, g.id));
    }
    for (const c of g.constraints) run(c, subjectFor(c, g.id, g.id));
  }
  for (const c of task.constraints) run(c, task.task_id);
  return out;
}
