/**
 * Tutorial flow: all questions shown in order; choosing an option reveals
 * correctness plus that option's explanation immediately. Tutorials are
 * never scored and never gate submission.
 */

import { parseQuestionSet, type QuestionDoc } from "./types.js";

export interface TutorialFeedback {
  correct: boolean;
  explanation: string;
}

export function checkTutorialAnswer(
  question: QuestionDoc,
  choice: string,
): TutorialFeedback {
  const keys = Object.keys(question.question.options);
  if (!keys.includes(choice)) {
    throw new Error(`${choice} is not an option of ${question.question_id}`);
  }
  return {
    correct: choice === question.answer,
    explanation: question.explanation[choice] ?? "",
  };
}

export interface TutorialQuestionView {
  questionId: string;
  questionText: string;
  options: [string, string][];
  chosen: string | null;
  feedback: TutorialFeedback | null;
}

export class TutorialFlow {
  readonly questions: QuestionDoc[];
  private chosen = new Map<string, string>();

  constructor(doc: unknown) {
    this.questions = parseQuestionSet(doc).question_set;
  }

  choose(questionId: string, choice: string): TutorialFeedback {
    const question = this.questions.find((q) => q.question_id === questionId);
    if (!question) throw new Error(`no question ${questionId}`);
    const feedback = checkTutorialAnswer(question, choice);
    this.chosen.set(questionId, choice);
    return feedback;
  }

  view(): TutorialQuestionView[] {
    return this.questions.map((q) => {
      const choice = this.chosen.get(q.question_id) ?? null;
      return {
        questionId: q.question_id,
        questionText: q.question.question_text,
        options: Object.entries(q.question.options),
        chosen: choice,
        feedback: choice === null ? null : checkTutorialAnswer(q, choice),
      };
    });
  }
}
