"""Regenerate the shared engine test-vector corpus in testvectors/.

The corpus pins condition-evaluation, settle, regex, tutorial, and
submission-gate behavior so the browser-side engine port can be checked
against the server's semantics case by case. Deterministic output:
re-running this script must be a no-op unless engine behavior changed
(tests/test_vectors.py enforces that).
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from crowdforge import fixtures
from crowdforge.canonical import task_set_doc
from crowdforge.conditions import (
    EvalScope,
    ResponseState,
    enabled_set,
    evaluate,
    settle,
)
from crowdforge.constraints import validate_submission
from crowdforge.exam import check_tutorial_answer
from crowdforge.model import task_index
from crowdforge.parsing import parse_pipeline_spec
from crowdforge import regexlang

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "testvectors"

MINI_TASK_DOC = {
    "task_set_id": "mini",
    "tasks": [{
        "task_id": "mini-1",
        "contexts": [{"type": "text", "text": "alpha beta 42 gamma", "id": "src"}],
        "annotations": [
            {"type": "multiple-choice", "prompt": "first",
             "options": {"A": "a", "B": "b"}, "id": "q1"},
            {"type": "multiple-choice", "prompt": "second",
             "options": {"A": "a", "B": "b"}, "id": "q2"},
            {"type": "text-input", "prompt": "why",
             "id": "why",
             "conditions": [{"op": "not", "arg": {"op": "or", "args": [
                 {"id": "q1", "op": "eq", "value": "A"},
                 {"id": "q2", "op": "eq", "value": "B"}]}}]},
        ],
        "annotation_groups": [{
            "id": "g", "title": "G", "repeated": True, "min": 1, "max": 3,
            "annotations": [
                {"type": "multiple-choice", "prompt": "inner",
                 "options": {"A": "a", "B": "b"}, "id": "inner"},
                {"type": "text-input", "prompt": "dep", "id": "dep",
                 "conditions": [{"id": "inner", "op": "eq", "value": "A"}]},
            ],
        }],
    }],
}


def _parse(doc):
    result = parse_pipeline_spec(json.dumps(doc), "task_set")
    assert result.ok, [d.to_dict() for d in result.diagnostics]
    return result.spec


def _dump(name: str, payload) -> None:
    OUT.mkdir(exist_ok=True)
    (OUT / name).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8")


def _state(values: dict, counts: dict | None = None) -> ResponseState:
    return ResponseState.from_wire({"values": values,
                                    "group_counts": counts or {}})


def gen_evaluate():
    spec = _parse(MINI_TASK_DOC)
    task = spec.tasks[0]
    idx = task_index(task)
    cases = []

    atom = {"id": "q1", "op": "eq", "value": "A"}
    nested = {"op": "not", "arg": {"op": "or", "args": [
        {"id": "q1", "op": "eq", "value": "A"},
        {"id": "q2", "op": "eq", "value": "B"}]}}
    conj = {"op": "and", "args": [
        {"id": "q1", "op": "eq", "value": "A"},
        {"op": "not", "arg": {"id": "q2", "op": "eq", "value": "A"}}]}
    group_atom = {"id": "inner", "op": "eq", "value": "A"}

    states = [
        {}, {"q1": {"0": "A"}}, {"q1": {"0": "B"}},
        {"q1": {"0": "A"}, "q2": {"0": "A"}},
        {"q1": {"0": "A"}, "q2": {"0": "B"}},
        {"q1": {"0": "B"}, "q2": {"0": "A"}},
        {"q1": {"0": "B"}, "q2": {"0": "B"}},
    ]
    for expr_doc, expr_name in [(atom, "atom"), (nested, "not-or"),
                                (conj, "and-not")]:
        for i, values in enumerate(states):
            state = _state(values)
            from crowdforge.parsing import _parse_condition, _Diags

            expr = _parse_condition(expr_doc, "", _Diags())
            cases.append({
                "name": f"{expr_name}-{i}",
                "expr": expr_doc,
                "scope": None,
                "state": state.to_wire(),
                "expected": evaluate(expr, state, EvalScope(idx)),
            })
    for instance, values in [
        (0, {"inner": {"0": "A", "1": "B"}}),
        (1, {"inner": {"0": "A", "1": "B"}}),
        (1, {"inner": {"0": "A"}}),
    ]:
        state = _state(values, {"g": 2})
        from crowdforge.parsing import _parse_condition, _Diags

        expr = _parse_condition(group_atom, "", _Diags())
        cases.append({
            "name": f"group-inner-{instance}-{len(cases)}",
            "expr": group_atom,
            "scope": {"group": "g", "instance": instance},
            "state": state.to_wire(),
            "expected": evaluate(expr, state,
                                 EvalScope(idx, "g", instance)),
        })
    _dump("evaluate.json", {"task_set": task_set_doc(spec), "cases": cases})


def gen_conditions():
    covid = parse_pipeline_spec(fixtures.load_text("covid_taskset"),
                                "task_set").spec
    mini = _parse(MINI_TASK_DOC)
    entries = []
    scenarios = [
        ("covid-empty", covid, 0, {}, {"quantity_extraction_typing": 1}),
        ("covid-relevant", covid, 0, {"relevance": {"0": "A"}},
         {"quantity_extraction_typing": 1}),
        ("covid-irrelevant", covid, 0, {"relevance": {"0": "B"}},
         {"quantity_extraction_typing": 1}),
        ("covid-stale-typing", covid, 0,
         {"relevance": {"0": "B"}, "typing": {"0": "A"}},
         {"quantity_extraction_typing": 1}),
        ("covid-two-instances", covid, 0,
         {"relevance": {"0": "A", "1": "B"}, "typing": {"0": "B", "1": "C"}},
         {"quantity_extraction_typing": 2}),
        ("covid-out-of-range", covid, 0, {"relevance": {"5": "A"}},
         {"quantity_extraction_typing": 1}),
        ("mini-why-enabled", mini, 0,
         {"q1": {"0": "B"}, "q2": {"0": "A"}, "why": {"0": "because"}}, {"g": 1}),
        ("mini-why-cleared", mini, 0,
         {"q1": {"0": "A"}, "why": {"0": "stale"}}, {"g": 1}),
        ("mini-group-dep", mini, 0,
         {"inner": {"0": "A", "1": "B"}, "dep": {"0": "keep", "1": "drop"}},
         {"g": 2}),
    ]
    for name, spec, task_i, values, counts in scenarios:
        task = spec.tasks[task_i]
        state = _state(values, counts)
        enabled = sorted(enabled_set(task, state))
        settled, cleared = settle(task, state)
        entries.append({
            "name": name,
            "fixture": ("covid_taskset" if spec is covid else None),
            "task_set": None if spec is covid else task_set_doc(spec),
            "task_index": task_i,
            "state": state.to_wire(),
            "enabled": [[aid, i] for aid, i in enabled],
            "settled": settled.to_wire(),
            "cleared": [[aid, i] for aid, i in cleared],
        })
    _dump("conditions.json", {"cases": entries})


def gen_regex():
    patterns = [
        (r"^[\w\d].*$", ["294", " 294", "q", "", "é294", "_x"]),
        (r"^.{1,30}$", ["", "x", "x" * 30, "x" * 31, "294"]),
        (r"^-?[0-9]+(\.[0-9]+)?$", ["42", "-7", "3.14", "12.", "x42", ""]),
        (r"(ab|cd)+", ["ab", "abcd", "abc", ""]),
        (r"[a-zà-ÿ]{2,12}", ["café", "naïve", "a", "Hello",
                                       "abcdefghijklm"]),
        (r"a*b?c{2}", ["cc", "aaabcc", "abc", "abccc"]),
        (r"[^ ].{0,79}", ["note", " note", "x" * 80, "x" * 81]),
        (r"\d+|\s+", ["123", "  ", "1 2", ""]),
        (r"(?:xy)*z", ["z", "xyz", "xyxyz", "xz"]),
        (r"^a$|^b$", ["a", "b", "ab", ""]),
    ]
    cases = []
    for pattern, values in patterns:
        for value in values:
            cases.append({"pattern": pattern, "value": value,
                          "match": regexlang.full_match(pattern, value)})
    invalid = []
    for pattern in ["[", "(a", "a{2,1}", "a**", "*a", "[z-a]",
                    "(?=x)", r"(a)\1", r"\bword", "(?P<n>a)"]:
        invalid.append({"pattern": pattern,
                        "code": regexlang.check_pattern(pattern)})
    _dump("regex.json", {"cases": cases, "invalid": invalid})


def gen_tutorial():
    qs = parse_pipeline_spec(fixtures.load_text("covid_tutorial"),
                             "tutorial").spec
    cases = []
    for q in qs.questions[:4]:
        for key in q.option_keys():
            correct, explanation = check_tutorial_answer(q, key)
            cases.append({"question_id": q.question_id, "choice": key,
                          "correct": correct, "explanation": explanation})
    _dump("tutorial.json", {"fixture": "covid_tutorial", "cases": cases})


def gen_submissions():
    covid = parse_pipeline_spec(fixtures.load_text("covid_taskset"),
                                "task_set").spec
    task = covid.tasks[0]
    snippet = task.contexts[1].payload
    s294 = snippet.find("294")
    s144 = snippet.find("144")

    def wire(values, counts):
        return _state(values, counts)

    scenarios = [
        ("accept-minimal", wire(
            {"quantity": {"0": [{"start": s294, "end": s294 + 3,
                                 "text": "294"}]},
             "relevance": {"0": "A"}, "typing": {"0": "A"}},
            {"quantity_extraction_typing": 1})),
        ("leading-space-span", wire(
            {"quantity": {"0": [{"start": s144 - 1, "end": s144 + 3,
                                 "text": " 144"}]},
             "relevance": {"0": "B"}},
            {"quantity_extraction_typing": 1})),
        ("zero-instances", wire({}, {"quantity_extraction_typing": 0})),
        ("incomplete-typing", wire(
            {"quantity": {"0": [{"start": s294, "end": s294 + 3}]},
             "relevance": {"0": "A"}},
            {"quantity_extraction_typing": 1})),
        ("too-long-selection", wire(
            {"quantity": {"0": [{"start": 0, "end": 33}]},
             "relevance": {"0": "B"}},
            {"quantity_extraction_typing": 1})),
        ("stale-disabled-typing-accepts", wire(
            {"quantity": {"0": [{"start": s294, "end": s294 + 3}]},
             "relevance": {"0": "B"}, "typing": {"0": "A"}},
            {"quantity_extraction_typing": 1})),
    ]
    entries = []
    for name, state in scenarios:
        result = validate_submission(task, state)
        entries.append({
            "name": name,
            "fixture": "covid_taskset",
            "task_index": 0,
            "state": state.to_wire(),
            "accepted": result.accepted,
            "violations": [v.to_dict() for v in result.violations],
            "cleared": [[aid, i] for aid, i in result.cleared],
        })

    drop = parse_pipeline_spec(fixtures.load_text("drop_taskset"),
                               "task_set").spec
    dtask = drop.tasks[0]
    rng = random.Random(7)
    base_values = {}
    for i in range(12):
        base_values.setdefault("question", {})[str(i)] = f"Question number {i}?"
        base_values.setdefault("answer_type", {})[str(i)] = "A"
        base_values.setdefault("number_answer", {})[str(i)] = str(10 + i)
    ok_state = wire(base_values, {"question_writing": 12})
    dup_values = json.loads(json.dumps(base_values))
    dup_values["question"]["3"] = dup_values["question"]["0"]
    dup_state = wire(dup_values, {"question_writing": 12})
    for name, state in [("drop-accept", ok_state),
                        ("drop-duplicate-question", dup_state)]:
        result = validate_submission(dtask, state)
        entries.append({
            "name": name,
            "fixture": "drop_taskset",
            "task_index": 0,
            "state": state.to_wire(),
            "accepted": result.accepted,
            "violations": [v.to_dict() for v in result.violations],
            "cleared": [[aid, i] for aid, i in result.cleared],
        })
    _dump("submissions.json", {"cases": entries})


def main():
    gen_evaluate()
    gen_conditions()
    gen_regex()
    gen_tutorial()
    gen_submissions()
    print(f"wrote vectors to {OUT}")


if __name__ == "__main__":
    main()
