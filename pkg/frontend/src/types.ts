/**
 * Spec document types as the gateway serves them (canonical form:
 * defaults materialized, list order preserved, options in display order).
 */

import { z } from "zod";

export const ConditionAtomSchema = z.object({
  id: z.string(),
  op: z.literal("eq"),
  value: z.string(),
});

export type ConditionDoc =
  | z.infer<typeof ConditionAtomSchema>
  | { op: "not"; arg: ConditionDoc }
  | { op: "and"; args: ConditionDoc[] }
  | { op: "or"; args: ConditionDoc[] };

export const ConditionSchema: z.ZodType<ConditionDoc> = z.lazy(() =>
  z.union([
    ConditionAtomSchema,
    z.object({ op: z.literal("not"), arg: ConditionSchema }),
    z.object({ op: z.literal("and"), args: z.array(ConditionSchema).min(1) }),
    z.object({ op: z.literal("or"), args: z.array(ConditionSchema).min(1) }),
  ]),
);

export const ConstraintSchema = z.object({
  type: z.enum(["regex", "custom"]),
  description: z.string().min(1),
  scope: z.enum(["annotation", "group", "task"]).default("annotation"),
  regex: z.string().optional(),
  name: z.string().optional(),
  params: z.record(z.string(), z.unknown()).optional(),
});
export type ConstraintDoc = z.infer<typeof ConstraintSchema>;

export const ContextSchema = z
  .object({
    // ids are optional in source documents; positional defaults fill them
    id: z.string().default(""),
    type: z.enum(["text", "html", "image", "audio", "video"]),
    label: z.string().optional(),
    text: z.string().optional(),
    html: z.string().optional(),
    url: z.string().optional(),
  })
  .loose();
export type ContextDoc = z.infer<typeof ContextSchema>;

function defaultContextIds(contexts: ContextDoc[]): void {
  contexts.forEach((ctx, i) => {
    if (!ctx.id) ctx.id = `context-${i + 1}`;
  });
}

export function contextPayload(ctx: ContextDoc): string {
  if (ctx.type === "text") return ctx.text ?? "";
  if (ctx.type === "html") return ctx.html ?? "";
  return ctx.url ?? "";
}

export const AnnotationSchema = z
  .object({
    id: z.string(),
    type: z.enum([
      "multiple-choice",
      "multi-label",
      "span-from-text",
      "text-input",
      "datetime",
    ]),
    prompt: z.string(),
    options: z.record(z.string(), z.string()).optional(),
    from_context: z.string().optional(),
    optional: z.boolean().default(false),
    min: z.number().int().nullable().optional(),
    max: z.number().int().nullable().optional(),
    conditions: z.array(ConditionSchema).default([]),
    constraints: z.array(ConstraintSchema).default([]),
  })
  .loose();
export type AnnotationDoc = z.infer<typeof AnnotationSchema>;

export const GroupSchema = z
  .object({
    id: z.string(),
    title: z.string().default(""),
    annotations: z.array(AnnotationSchema).min(1),
    repeated: z.boolean().default(false),
    min: z.number().int().nullable().optional(),
    max: z.number().int().nullable().optional(),
    constraints: z.array(ConstraintSchema).default([]),
  })
  .loose();
export type GroupDoc = z.infer<typeof GroupSchema>;

export const TaskSchema = z
  .object({
    task_id: z.string(),
    contexts: z.array(ContextSchema).default([]),
    annotations: z.array(AnnotationSchema).default([]),
    annotation_groups: z.array(GroupSchema).default([]),
    constraints: z.array(ConstraintSchema).default([]),
  })
  .loose();
export type TaskDoc = z.infer<typeof TaskSchema>;

export const TaskSetSchema = z
  .object({
    task_set_id: z.string().default("taskset"),
    redundancy: z.number().int().default(1),
    shared: z.array(ContextSchema).default([]),
    tasks: z.array(TaskSchema).min(1),
  })
  .loose();
export type TaskSetDoc = z.infer<typeof TaskSetSchema>;

export const QuestionSchema = z
  .object({
    question_id: z.string(),
    context: z.array(ContextSchema).default([]),
    question: z.object({
      question_text: z.string(),
      options: z.record(z.string(), z.string()),
    }),
    answer: z.string().optional(),
    explanation: z.record(z.string(), z.string()).default({}),
  })
  .loose();
export type QuestionDoc = z.infer<typeof QuestionSchema>;

export const QuestionSetSchema = z.object({
  question_set: z.array(QuestionSchema).min(1),
});
export type QuestionSetDoc = z.infer<typeof QuestionSetSchema>;

/** One worker-visible blocked-submission reason. */
export interface Violation {
  subject: string;
  instance: number | null;
  description: string;
  kind: "completeness" | "repetition" | "regex" | "custom" | "value";
}

export type SpanSelection = { start: number; end: number; text?: string };
export type AnswerValue = string | string[] | SpanSelection[];

export function parseTask(doc: unknown): TaskDoc {
  const task = TaskSchema.parse(doc);
  defaultContextIds(task.contexts);
  return task;
}

export function parseTaskSet(doc: unknown): TaskSetDoc {
  const spec = TaskSetSchema.parse(doc);
  defaultContextIds(spec.shared);
  for (const task of spec.tasks) defaultContextIds(task.contexts);
  return spec;
}

export function parseQuestionSet(doc: unknown): QuestionSetDoc {
  const spec = QuestionSetSchema.parse(doc);
  for (const q of spec.question_set) defaultContextIds(q.context);
  return spec;
}

export function optionPairs(options: Record<string, string>): [string, string][] {
  // JSON object order is preserved by the canonical form; it is the display order
  return Object.entries(options);
}
