/**
 * Exam flow: render the sampled questions the server issued, collect one
 * choice per question, and show the aggregate result only - mistake
 * count, pass/fail, chances left. Per-question correctness is never
 * available client-side (the page payload carries no answers).
 */

import { QuestionSchema, type QuestionDoc } from "./types.js";
import { z } from "zod";

const ExamPageSchema = z
  .object({
    kind: z.literal("exam"),
    pipeline: z.string(),
    attempt_index: z.number().int().optional(),
    attempts_remaining: z.number().int().optional(),
    sample_size: z.number().int().optional(),
    questions: z.array(QuestionSchema),
    submit_token: z.string().optional(),
  })
  .loose();

export type ExamPage = z.infer<typeof ExamPageSchema>;

export interface ExamResultScreen {
  mistakes: number;
  passed: boolean;
  attemptsRemaining: number;
  status: string;
  summary: string;
}

export class ExamFlow {
  readonly page: ExamPage;
  private answers = new Map<string, string>();
  result: ExamResultScreen | null = null;

  constructor(pagePayload: unknown) {
    this.page = ExamPageSchema.parse(pagePayload);
    for (const q of this.page.questions) {
      if ("answer" in q && q.answer !== undefined) {
        // defense in depth: an exam payload must never reveal answers
        throw new Error("exam payload contains answer material");
      }
    }
  }

  get questions(): QuestionDoc[] {
    return this.page.questions;
  }

  choose(questionId: string, option: string): void {
    const q = this.page.questions.find((x) => x.question_id === questionId);
    if (!q) throw new Error(`no question ${questionId}`);
    if (!(option in q.question.options)) {
      throw new Error(`${option} is not an option of ${questionId}`);
    }
    this.answers.set(questionId, option);
  }

  answeredCount(): number {
    return this.answers.size;
  }

  ready(): boolean {
    return this.answers.size === this.page.questions.length;
  }

  submission(): { answers: Record<string, string> } {
    const answers: Record<string, string> = {};
    for (const [qid, choice] of this.answers) answers[qid] = choice;
    return { answers };
  }

  /** Build the aggregate-only result screen from the server's grade. */
  applyResult(serverResult: {
    mistakes: number;
    passed: boolean;
    attempts_remaining: number;
    status?: string;
  }): ExamResultScreen {
    const { mistakes, passed } = serverResult;
    const remaining = serverResult.attempts_remaining;
    const chances =
      remaining === 1 ? "1 chance left" : `${remaining} chances left`;
    const summary = passed
      ? `${mistakes} mistake${mistakes === 1 ? "" : "s"} - passed`
      : `${mistakes} mistake${mistakes === 1 ? "" : "s"} - not passed, ${chances}`;
    this.result = {
      mistakes,
      passed,
      attemptsRemaining: remaining,
      status: serverResult.status ?? (passed ? "passed" : "in-progress"),
      summary,
    };
    return this.result;
  }
}
