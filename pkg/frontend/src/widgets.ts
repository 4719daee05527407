/**
 * Task rendering as a widget tree. Disabled widgets are absent from the
 * tree (hidden, holding no value); every state change re-settles so
 * conditioned widgets appear and disappear live. The submit flag mirrors
 * the submission gate, which the server re-checks on POST.
 */

import { enabledSet, instanceKey, settle, taskIndex } from "./conditions.js";
import {
  ConstraintRegistry,
  defaultRegistry,
  validateSubmission,
} from "./constraints.js";
import { ResponseState, type WireState } from "./state.js";
import {
  contextPayload,
  optionPairs,
  parseTask,
  type AnnotationDoc,
  type AnswerValue,
  type ContextDoc,
  type TaskDoc,
  type Violation,
} from "./types.js";

export type WidgetKind =
  | "choice-group"
  | "checkbox-group"
  | "span-selector"
  | "text-box"
  | "datetime-picker";

const WIDGET_KINDS: Record<AnnotationDoc["type"], WidgetKind> = {
  "multiple-choice": "choice-group",
  "multi-label": "checkbox-group",
  "span-from-text": "span-selector",
  "text-input": "text-box",
  datetime: "datetime-picker",
};

export interface WidgetBinding {
  annotationId: string;
  instance: number;
  kind: WidgetKind;
  prompt: string;
  enabled: true; // disabled widgets never appear in the tree
  optional: boolean;
  groupId: string | null;
  options?: [string, string][];
  fromContext?: string;
  value: AnswerValue | undefined;
  violations: string[];
}

export interface GroupView {
  groupId: string;
  title: string;
  instances: number;
  canAdd: boolean;
  canRemove: boolean;
  violations: string[];
}

export interface ContextView {
  id: string;
  type: ContextDoc["type"];
  label?: string;
  payload: string;
}

export interface TaskView {
  taskId: string;
  contexts: ContextView[];
  widgets: WidgetBinding[];
  groups: GroupView[];
  submitEnabled: boolean;
  violations: Violation[];
}

export class TaskController {
  readonly task: TaskDoc;
  private registry: ConstraintRegistry;
  state: ResponseState;

  constructor(
    taskDoc: unknown,
    initial?: Partial<WireState>,
    registry: ConstraintRegistry = defaultRegistry(),
  ) {
    this.task = parseTask(taskDoc);
    this.registry = registry;
    this.state = ResponseState.fromWire(initial);
    for (const g of this.task.annotation_groups) {
      if (g.repeated && !this.state.groupCounts.has(g.id)) {
        this.state.groupCounts.set(g.id, g.min ?? 1);
      }
    }
    this.resettle();
  }

  private resettle(): void {
    this.state = settle(this.task, this.state).state;
  }

  setValue(aid: string, value: AnswerValue, instance = 0): void {
    this.state.set(aid, value, instance);
    this.resettle();
  }

  clearValue(aid: string, instance = 0): void {
    this.state.delete(aid, instance);
    this.resettle();
  }

  groupCount(groupId: string): number {
    const g = this.task.annotation_groups.find((x) => x.id === groupId);
    if (!g) throw new Error(`no group ${groupId}`);
    return this.state.instanceCount(g);
  }

  canAddInstance(groupId: string): boolean {
    const g = this.task.annotation_groups.find((x) => x.id === groupId);
    if (!g || !g.repeated) return false;
    const max = g.max ?? null;
    return max === null || this.groupCount(groupId) < max;
  }

  canRemoveInstance(groupId: string): boolean {
    const g = this.task.annotation_groups.find((x) => x.id === groupId);
    if (!g || !g.repeated) return false;
    return this.groupCount(groupId) > (g.min ?? 1);
  }

  addInstance(groupId: string): void {
    if (!this.canAddInstance(groupId)) return;
    this.state.groupCounts.set(groupId, this.groupCount(groupId) + 1);
    this.resettle();
  }

  removeInstance(groupId: string): void {
    if (!this.canRemoveInstance(groupId)) return;
    const g = this.task.annotation_groups.find((x) => x.id === groupId)!;
    const last = this.groupCount(groupId) - 1;
    for (const a of g.annotations) this.state.delete(a.id, last);
    this.state.groupCounts.set(groupId, last);
    this.resettle();
  }

  validate() {
    return validateSubmission(this.task, this.state, this.registry);
  }

  submitEnabled(): boolean {
    return this.validate().accepted;
  }

  submissionPayload(): WireState {
    return this.validate().state.toWire();
  }

  render(): TaskView {
    const result = this.validate();
    const enabled = enabledSet(this.task, this.state);
    const byKey = new Map<string, string[]>();
    const byGroup = new Map<string, string[]>();
    for (const v of result.violations) {
      if (v.instance === null) {
        byGroup.set(v.subject, [...(byGroup.get(v.subject) ?? []), v.description]);
      } else {
        const key = instanceKey(v.subject, v.instance);
        byKey.set(key, [...(byKey.get(key) ?? []), v.description]);
      }
    }

    const widgets: WidgetBinding[] = [];
    const push = (a: AnnotationDoc, instance: number, groupId: string | null) => {
      if (!enabled.has(instanceKey(a.id, instance))) return; // hidden
      widgets.push({
        annotationId: a.id,
        instance,
        kind: WIDGET_KINDS[a.type],
        prompt: a.prompt,
        enabled: true,
        optional: a.optional,
        groupId,
        options: a.options ? optionPairs(a.options) : undefined,
        fromContext: a.from_context,
        value: this.state.get(a.id, instance),
        violations: byKey.get(instanceKey(a.id, instance)) ?? [],
      });
    };
    for (const a of this.task.annotations) push(a, 0, null);
    const groups: GroupView[] = [];
    for (const g of this.task.annotation_groups) {
      const count = this.state.instanceCount(g);
      for (let i = 0; i < count; i++) {
        for (const a of g.annotations) push(a, i, g.id);
      }
      groups.push({
        groupId: g.id,
        title: g.title,
        instances: count,
        canAdd: this.canAddInstance(g.id),
        canRemove: this.canRemoveInstance(g.id),
        violations: byGroup.get(g.id) ?? [],
      });
    }
    return {
      taskId: this.task.task_id,
      contexts: this.task.contexts.map((c) => ({
        id: c.id,
        type: c.type,
        label: c.label,
        payload: contextPayload(c),
      })),
      widgets,
      groups,
      submitEnabled: result.accepted,
      violations: result.violations,
    };
  }
}

/**
 * Span selections carry exact code-point offsets into the source text;
 * re-rendering from offsets reproduces the highlighted substring.
 */
export function selectionFromOffsets(
  task: TaskDoc,
  contextId: string,
  start: number,
  end: number,
): { start: number; end: number; text: string } {
  const ctx = task.contexts.find((c) => c.id === contextId);
  if (!ctx || ctx.type !== "text") {
    throw new Error(`no text context ${contextId}`);
  }
  const chars = Array.from(ctx.text ?? "");
  if (!(0 <= start && start < end && end <= chars.length)) {
    throw new Error("selection offsets out of range");
  }
  return { start, end, text: chars.slice(start, end).join("") };
}

export function renderTask(taskDoc: unknown, initial?: Partial<WireState>): TaskView {
  return new TaskController(taskDoc, initial).render();
}
