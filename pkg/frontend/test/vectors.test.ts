/**
 * The shared JSON test-vector corpus must pass identically in this
 * engine port: condition evaluation, enabled/settle, the regex dialect,
 * tutorial feedback, and the full submission gate.
 */

import { describe, expect, it } from "vitest";

import { evaluate, enabledSet, settle, taskIndex, splitKey } from "../src/conditions.js";
import { validateSubmission } from "../src/constraints.js";
import { checkPattern, fullMatch } from "../src/regex.js";
import { ResponseState } from "../src/state.js";
import { checkTutorialAnswer } from "../src/tutorial.js";
import { parseQuestionSet, parseTaskSet, type TaskDoc } from "../src/types.js";
import { loadFixture, loadVectors } from "./helpers.js";

function taskFor(entry: any): TaskDoc {
  const doc = entry.fixture ? loadFixture(entry.fixture) : entry.task_set;
  return parseTaskSet(doc).tasks[entry.task_index ?? 0];
}

describe("evaluate vectors", () => {
  const corpus = loadVectors("evaluate.json");
  const task = parseTaskSet(corpus.task_set).tasks[0];
  const idx = taskIndex(task);
  for (const c of corpus.cases) {
    it(c.name, () => {
      const state = ResponseState.fromWire(c.state);
      const scope = c.scope
        ? { index: idx, groupId: c.scope.group, instance: c.scope.instance }
        : { index: idx };
      expect(evaluate(c.expr, state, scope)).toBe(c.expected);
    });
  }
});

describe("conditions vectors (enabled + settle)", () => {
  const corpus = loadVectors("conditions.json");
  for (const c of corpus.cases) {
    it(c.name, () => {
      const task = taskFor(c);
      const state = ResponseState.fromWire(c.state);
      const enabled = [...enabledSet(task, state)]
        .map(splitKey)
        .sort((a, b) => (a[0] < b[0] ? -1 : a[0] > b[0] ? 1 : a[1] - b[1]))
        .map(([aid, i]) => [aid, i]);
      expect(enabled).toEqual(c.enabled);
      const settled = settle(task, state);
      expect(settled.state.toWire()).toEqual(c.settled);
      expect(settled.cleared.map(([aid, i]) => [aid, i])).toEqual(c.cleared);
    });
  }
});

describe("regex vectors", () => {
  const corpus = loadVectors("regex.json");
  for (const c of corpus.cases) {
    it(`${JSON.stringify(c.pattern)} vs ${JSON.stringify(c.value)}`, () => {
      expect(fullMatch(c.pattern, c.value)).toBe(c.match);
    });
  }
  for (const c of corpus.invalid) {
    it(`rejects ${JSON.stringify(c.pattern)} with ${c.code}`, () => {
      expect(checkPattern(c.pattern)).toBe(c.code);
    });
  }
});

describe("tutorial vectors", () => {
  const corpus = loadVectors("tutorial.json");
  const questions = parseQuestionSet(loadFixture(corpus.fixture)).question_set;
  const byId = new Map(questions.map((q) => [q.question_id, q]));
  for (const c of corpus.cases) {
    it(`${c.question_id} choice ${c.choice}`, () => {
      const feedback = checkTutorialAnswer(byId.get(c.question_id)!, c.choice);
      expect(feedback.correct).toBe(c.correct);
      expect(feedback.explanation).toBe(c.explanation);
    });
  }
});

describe("submission-gate vectors", () => {
  const corpus = loadVectors("submissions.json");
  for (const c of corpus.cases) {
    it(c.name, () => {
      const task = taskFor(c);
      const state = ResponseState.fromWire(c.state);
      const result = validateSubmission(task, state);
      expect(result.accepted).toBe(c.accepted);
      expect(
        result.violations.map((v) => ({
          subject: v.subject,
          instance: v.instance,
          description: v.description,
          kind: v.kind,
        })),
      ).toEqual(c.violations);
      expect(result.cleared.map(([aid, i]) => [aid, i])).toEqual(c.cleared);
    });
  }
});
