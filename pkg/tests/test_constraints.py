"""Submission gating: regex/repetition/completeness/custom checks."""

from __future__ import annotations

import json
import random

import pytest

from crowdforge import parse_pipeline_spec
from crowdforge.conditions import ResponseState
from crowdforge.constraints import (
    COMPLETENESS_MESSAGE,
    ConstraintRegistry,
    UnknownConstraintError,
    check_completeness,
    check_regex,
    check_repetition,
    default_registry,
    validate_submission,
)
from crowdforge.errors import DuplicateRegistrationError
from crowdforge.conditions import enabled_set, settle
from crowdforge.model import AnnotationDef, ConstraintDef

START_MSG = "The quantity should only start with digits or letters."
LENGTH_MSG = "The length of your selection should be within 1 and 30."

START_CONSTRAINT = ConstraintDef(type="regex", description=START_MSG,
                                 regex=r"^[\w\d].*$")
LENGTH_CONSTRAINT = ConstraintDef(type="regex", description=LENGTH_MSG,
                                  regex=r"^.{1,30}$")


class TestCheckRegex:
    def test_leading_space_yields_paper_message(self):
        violation = check_regex(START_CONSTRAINT, " 294")
        assert violation is not None
        assert violation.description == START_MSG

    def test_length_31_rejected(self):
        value = "x" * 31
        assert len(value) == 31  # oracle: character count
        violation = check_regex(LENGTH_CONSTRAINT, value)
        assert violation is not None
        assert violation.description == LENGTH_MSG

    def test_294_accepted(self):
        assert check_regex(LENGTH_CONSTRAINT, "294") is None
        assert check_regex(START_CONSTRAINT, "294") is None

    def test_pure_same_inputs_same_result(self):
        for _ in range(3):
            assert check_regex(START_CONSTRAINT, " x") is not None
            assert check_regex(START_CONSTRAINT, "x") is None


class TestCheckRepetition:
    def _group(self, lo, hi):
        return AnnotationDef(id="g", type="text-input", prompt="p", min=lo, max=hi)

    def test_within_bounds_ok(self, covid_task):
        group = covid_task.annotation_groups[0]
        assert check_repetition(group, 2) is None

    def test_below_lower_bound(self, covid_task):
        group = covid_task.annotation_groups[0]
        violation = check_repetition(group, 0)
        assert violation is not None
        assert violation.subject == group.id

    def test_drop_minimum_twelve(self, drop_task_set):
        group = drop_task_set.tasks[0].annotation_groups[0]
        assert group.min == 12
        assert check_repetition(group, 11) is not None
        assert check_repetition(group, 12) is None

    def test_unbounded_above(self):
        assert check_repetition(self._group(1, None), 10_000) is None

    def test_exact_bound_message(self):
        v = check_repetition(self._group(2, 2), 1)
        assert "exactly 2" in v.description


class TestCheckCompleteness:
    def test_enabled_unanswered_flagged(self, covid_task):
        state = ResponseState(values={("relevance", 0): "A"},
                              group_counts={"quantity_extraction_typing": 1})
        state, _ = settle(covid_task, state)
        enabled = enabled_set(covid_task, state)
        violations = check_completeness(covid_task, state, enabled)
        assert ("typing", 0) in {(v.subject, v.instance) for v in violations}
        assert all(v.description == COMPLETENESS_MESSAGE for v in violations)

    def test_disabled_not_flagged(self, covid_task):
        state = ResponseState(values={("relevance", 0): "B"},
                              group_counts={"quantity_extraction_typing": 1})
        state, _ = settle(covid_task, state)
        enabled = enabled_set(covid_task, state)
        subjects = {v.subject for v in check_completeness(covid_task, state, enabled)}
        assert "typing" not in subjects

    def test_optional_not_flagged(self):
        doc = {"tasks": [{"annotations": [
            {"type": "text-input", "prompt": "p", "id": "note", "optional": True}]}]}
        task = parse_pipeline_spec(json.dumps(doc), "task_set").spec.tasks[0]
        state = ResponseState()
        violations = check_completeness(task, state, enabled_set(task, state))
        assert violations == []


class TestCustomConstraints:
    def test_register_and_duplicate(self):
        registry = ConstraintRegistry()
        handle = registry.register("all-caps", lambda t, s, p: None)
        assert handle == "all-caps"
        with pytest.raises(DuplicateRegistrationError):
            registry.register("all-caps", lambda t, s, p: None)

    def test_frozen_registry_rejects_registration(self):
        registry = ConstraintRegistry()
        registry.freeze()
        with pytest.raises(DuplicateRegistrationError):
            registry.register("late", lambda t, s, p: None)

    def test_unregistered_name_faults_at_runtime(self, drop_task_set):
        task = drop_task_set.tasks[0]
        state = _drop_response(task, 12)
        with pytest.raises(UnknownConstraintError):
            validate_submission(task, state, ConstraintRegistry())

    def test_no_duplicate_question_is_builtin(self):
        assert "no-duplicate-question" in default_registry().names()


def _drop_response(task, n: int, *, duplicate: bool = False) -> ResponseState:
    """A DROP response with n group instances of number-typed answers."""
    state = ResponseState(group_counts={"question_writing": n})
    for i in range(n):
        text = "How many points in total?" if (duplicate and i == 1) else \
            f"How many points were scored in game {i}?"
        if duplicate and i == 0:
            text = "How many points in total?"
        state.set("question", text, i)
        state.set("answer_type", "A", i)
        state.set("number_answer", str(40 + i), i)
    return state


class TestValidateSubmission:
    def test_covid_fixture_accepts(self, covid_task):
        snippet = covid_task.contexts[1].payload
        start = snippet.find("294")
        state = ResponseState(group_counts={"quantity_extraction_typing": 1})
        state.set("quantity", [{"start": start, "end": start + 3, "text": "294"}])
        state.set("relevance", "A")
        state.set("typing", "A")
        result = validate_submission(covid_task, state)
        # oracle: each sub-check run independently
        settled, _ = settle(covid_task, state)
        enabled = enabled_set(covid_task, settled)
        assert check_completeness(covid_task, settled, enabled) == []
        assert check_repetition(covid_task.annotation_groups[0], 1) is None
        assert result.accepted, [v.to_dict() for v in result.violations]

    def test_leading_space_span_rejected(self, covid_task):
        snippet = covid_task.contexts[1].payload
        start = snippet.find("144") - 1  # the char before 144 is a space
        state = ResponseState(group_counts={"quantity_extraction_typing": 1})
        state.set("quantity", [{"start": start, "end": start + 4, "text": " 144"}])
        state.set("relevance", "B")
        result = validate_submission(covid_task, state)
        assert not result.accepted
        assert [v.description for v in result.violations] == [START_MSG]

    def test_zero_instances_violates_min(self, covid_task):
        state = ResponseState(group_counts={"quantity_extraction_typing": 0})
        result = validate_submission(covid_task, state)
        assert not result.accepted
        assert any(v.kind == "repetition" and
                   v.subject == "quantity_extraction_typing"
                   for v in result.violations)

    def test_drop_distinct_questions_accepts(self, drop_task_set):
        task = drop_task_set.tasks[0]
        result = validate_submission(task, _drop_response(task, 12))
        assert result.accepted, [v.to_dict() for v in result.violations]

    def test_drop_duplicate_questions_rejected_at_task_scope(self, drop_task_set):
        task = drop_task_set.tasks[0]
        state = _drop_response(task, 12, duplicate=True)
        # oracle: pairwise string comparison over the question field
        texts = [state.get("question", i) for i in range(12)]
        assert any(texts[i] == texts[j]
                   for i in range(12) for j in range(i + 1, 12))
        result = validate_submission(task, state)
        assert not result.accepted
        violation = [v for v in result.violations if v.kind == "custom"][0]
        assert violation.subject == task.task_id
        assert violation.description == task.constraints[0].description

    def test_drop_eleven_instances_rejected(self, drop_task_set):
        task = drop_task_set.tasks[0]
        result = validate_submission(task, _drop_response(task, 11))
        assert not result.accepted
        assert any(v.kind == "repetition" for v in result.violations)

    def test_settle_applied_before_checks(self, covid_task):
        # a stale typing answer under relevance=B must not block acceptance
        snippet = covid_task.contexts[1].payload
        start = snippet.find("294")
        state = ResponseState(group_counts={"quantity_extraction_typing": 1})
        state.set("quantity", [{"start": start, "end": start + 3, "text": "294"}])
        state.set("relevance", "B")
        state.set("typing", "A")  # disabled once relevance is B
        result = validate_submission(covid_task, state)
        assert result.accepted
        assert result.cleared == [("typing", 0)]
        assert not result.state.answered("typing")

    def test_invalid_multiple_choice_value(self, covid_task):
        snippet = covid_task.contexts[1].payload
        start = snippet.find("294")
        state = ResponseState(group_counts={"quantity_extraction_typing": 1})
        state.set("quantity", [{"start": start, "end": start + 3, "text": "294"}])
        state.set("relevance", "Z")
        result = validate_submission(covid_task, state)
        assert not result.accepted
        assert any(v.kind == "value" for v in result.violations)

    def test_invalid_datetime_value(self, drop_task_set):
        task = drop_task_set.tasks[0]
        state = _drop_response(task, 12)
        state.set("answer_type", "B", 0)
        state.values.pop(("number_answer", 0))
        state.set("date_answer", "2020-02-30", 0)  # not a calendar date
        result = validate_submission(task, state)
        assert not result.accepted
        assert any(v.kind == "value" and v.subject == "date_answer"
                   for v in result.violations)
        state.set("date_answer", "2020-02-29", 0)  # leap day is fine
        assert validate_submission(task, state).accepted

    def test_span_offsets_must_match_source(self, covid_task):
        state = ResponseState(group_counts={"quantity_extraction_typing": 1})
        state.set("quantity", [{"start": 0, "end": 3, "text": "294"}])  # wrong text
        state.set("relevance", "B")
        result = validate_submission(covid_task, state)
        assert any(v.kind == "value" and v.subject == "quantity"
                   for v in result.violations)

    def test_all_violations_reported_not_just_first(self, drop_task_set):
        task = drop_task_set.tasks[0]
        state = _drop_response(task, 12, duplicate=True)
        state.set("number_answer", "not a number", 3)
        result = validate_submission(task, state)
        kinds = {v.kind for v in result.violations}
        assert {"regex", "custom"} <= kinds

    def test_conjunction_semantics_random_states(self, covid_task):
        """accept iff every independently coded sub-check accepts."""
        rng = random.Random(2024)
        snippet = covid_task.contexts[1].payload
        group = covid_task.annotation_groups[0]
        for _ in range(300):
            state = _random_covid_state(rng, snippet)
            result = validate_submission(covid_task, state)
            assert result.accepted == _covid_oracle(covid_task, state), (
                state.values, state.group_counts,
                [v.to_dict() for v in result.violations])
            # violation descriptions are byte-identical to the constraint defs
            for v in result.violations:
                if v.kind == "regex":
                    assert v.description in {c.description
                                             for a in group.annotations
                                             for c in a.constraints}


def _random_covid_state(rng, snippet) -> ResponseState:
    count = rng.randint(0, 4)
    state = ResponseState(group_counts={"quantity_extraction_typing": count})
    for i in range(count):
        if rng.random() < 0.85:
            start = rng.randrange(0, len(snippet) - 1)
            end = min(len(snippet), start + rng.randint(1, 40))
            state.set("quantity", [{"start": start, "end": end}], i)
        if rng.random() < 0.9:
            state.set("relevance", rng.choice(["A", "B"]), i)
        if rng.random() < 0.5:
            state.set("typing", rng.choice(["A", "B", "C", "D"]), i)
    return state


def _covid_oracle(task, state) -> bool:
    """Separately coded completeness + bounds + regex oracle for the
    COVID fixture (relevance=A enables typing, per instance)."""
    import re as _re

    snippet = task.contexts[1].payload
    count = state.group_counts.get("quantity_extraction_typing", 0)
    if not 1 <= count <= 3:
        return False
    for i in range(count):
        spans = state.values.get(("quantity", i))
        if not spans:
            return False
        for span in spans:
            s, e = span.get("start"), span.get("end")
            if not (isinstance(s, int) and isinstance(e, int)
                    and 0 <= s < e <= len(snippet)):
                return False
            text = snippet[s:e]
            if not _re.fullmatch(r"^[\w\d].*$", text, flags=0):
                return False
            if not _re.fullmatch(r"^.{1,30}$", text):
                return False
        if len(spans) != 1:
            return False
        relevance = state.values.get(("relevance", i))
        if relevance not in ("A", "B"):
            return False
        if relevance == "A":
            typing = state.values.get(("typing", i))
            if typing not in ("A", "B", "C", "D"):
                return False
    return True
