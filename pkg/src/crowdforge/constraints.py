"""Submission gating: completeness, repetition bounds, regex and custom
constraints.

``validate_submission`` settles the state first, so disabled annotations
can never contribute violations, then reports every violation at once (in
document order) so the UI can mark all offending widgets. Violation
descriptions for regex/custom constraints are byte-identical to the
spec's ``description`` fields.
"""

from __future__ import annotations

import datetime as _dt
import threading
from dataclasses import dataclass, field, replace
from typing import Any, Callable

from . import regexlang
from .conditions import ResponseKey, ResponseState, enabled_set, settle
from .errors import CrowdforgeError, DuplicateRegistrationError
from .model import (
    AnnotationDef,
    AnnotationGroupDef,
    ConstraintDef,
    TaskSpec,
    task_index,
)

COMPLETENESS_MESSAGE = "This question requires an answer."

TASK_SUBJECT = "task"


@dataclass(frozen=True)
class Violation:
    """One reason a submission is blocked, keyed to the widget (or group,
    or whole task) the UI should mark."""

    subject: str  # annotation id, group id, or task id
    description: str
    kind: str  # completeness | repetition | regex | custom | value
    instance: int | None = None

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "instance": self.instance,
            "description": self.description,
            "kind": self.kind,
        }


Predicate = Callable[[TaskSpec, ResponseState, dict], "str | None"]


class UnknownConstraintError(CrowdforgeError):
    code = "unknown-custom-constraint"


class ConstraintRegistry:
    """Named custom predicates, registered in code at startup.

    Append-only; ``freeze()`` before serving traffic makes it immutable
    and safe for concurrent readers.
    """

    def __init__(self):
        self._predicates: dict[str, Predicate] = {}
        self._frozen = False
        self._lock = threading.Lock()

    def register(self, name: str, predicate: Predicate) -> str:
        with self._lock:
            if self._frozen:
                raise DuplicateRegistrationError(
                    "registry is frozen; register constraints during startup"
                )
            if name in self._predicates:
                raise DuplicateRegistrationError(
                    f"custom constraint {name!r} is already registered"
                )
            self._predicates[name] = predicate
        return name

    def freeze(self) -> None:
        with self._lock:
            self._frozen = True

    def get(self, name: str | None) -> Predicate | None:
        return self._predicates.get(name or "")

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._predicates))


def no_duplicate_question(task: TaskSpec, state: ResponseState, params: dict) -> str | None:
    """Task-scope predicate: every text answer for ``params['field']``
    must be distinct within the task."""
    aid = params.get("field")
    if not aid:
        return "constraint params must name a 'field'"
    seen: set[str] = set()
    for (key_aid, _idx), value in sorted(state.values.items()):
        if key_aid != aid or not isinstance(value, str):
            continue
        if value in seen:
            return f"duplicate value {value!r} for {aid!r}"
        seen.add(value)
    return None


_default = ConstraintRegistry()
_default.register("no-duplicate-question", no_duplicate_question)


def default_registry() -> ConstraintRegistry:
    return _default


def register_custom(name: str, predicate: Predicate) -> str:
    """Register a predicate in the default registry; returns the handle."""
    return _default.register(name, predicate)


# ---------------------------------------------------------------------------
# Individual checks


def check_regex(c: ConstraintDef, value: str, *, subject: str = "",
                instance: int | None = None) -> Violation | None:
    """Whole-value match against the constraint's pattern (unanchored
    patterns are implicitly anchored)."""
    if c.type != "regex":
        raise ValueError("check_regex requires a regex constraint")
    if regexlang.full_match(c.regex or "", value):
        return None
    return Violation(subject=subject, description=c.description, kind="regex",
                     instance=instance)


def _bounds_message(lo: int, hi: int | None) -> str:
    if hi is None:
        return f"Requires at least {lo} response(s)."
    if lo == hi:
        return f"Requires exactly {lo} response(s)."
    return f"Requires between {lo} and {hi} responses."


def check_repetition(definition: AnnotationGroupDef | AnnotationDef, count: int,
                     *, instance: int | None = None) -> Violation | None:
    """Bounds check for a repeated group (instance count) or a
    span-from-text annotation (selection count)."""
    lo = definition.min if definition.min is not None else 0
    hi = definition.max
    if lo <= count and (hi is None or count <= hi):
        return None
    return Violation(subject=definition.id, description=_bounds_message(lo, hi),
                     kind="repetition", instance=instance)


def check_completeness(task: TaskSpec, state: ResponseState,
                       enabled: set[ResponseKey]) -> list[Violation]:
    """One violation per enabled, non-optional, unanswered annotation
    instance (span annotations are handled by their selection bounds)."""
    idx = task_index(task)
    out = []
    for aid, instance in sorted(enabled, key=lambda k: (_order(task).get(k[0], 0), k[1])):
        ref = idx.resolve(aid)
        if ref is None or ref.definition.optional:
            continue
        if ref.definition.type == "span-from-text":
            continue
        if not state.answered(aid, instance):
            out.append(Violation(subject=aid, description=COMPLETENESS_MESSAGE,
                                 kind="completeness", instance=instance))
    return out


_ORDER_CACHE: dict[int, dict[str, int]] = {}


def _order(task: TaskSpec) -> dict[str, int]:
    order = _ORDER_CACHE.get(id(task))
    if order is None:
        order = {}
        for a in task.annotations:
            order[a.id] = len(order)
        for g in task.annotation_groups:
            order[g.id] = len(order)
            for a in g.annotations:
                order[a.id] = len(order)
        _ORDER_CACHE[id(task)] = order
    return order


# ---------------------------------------------------------------------------
# Value integrity (shapes the store is allowed to persist)


def _check_value(task: TaskSpec, a: AnnotationDef, value: Any,
                 instance: int) -> Violation | None:
    def bad(msg: str) -> Violation:
        return Violation(subject=a.id, description=msg, kind="value", instance=instance)

    if a.type == "multiple-choice":
        if not isinstance(value, str) or value not in a.option_keys():
            return bad("Answer must be one of the listed options.")
    elif a.type == "multi-label":
        if (not isinstance(value, list)
                or not all(isinstance(v, str) for v in value)
                or len(set(value)) != len(value)
                or not set(value) <= set(a.option_keys())):
            return bad("Answer must be a set of the listed options.")
    elif a.type == "text-input":
        if not isinstance(value, str):
            return bad("Answer must be text.")
    elif a.type == "datetime":
        if not isinstance(value, str) or not _valid_datetime(value):
            return bad("Answer must be a valid ISO-8601 date or date-time.")
    elif a.type == "span-from-text":
        ctx = task.context_by_id(a.from_context or "")
        source = ctx.payload if ctx is not None else ""
        if not isinstance(value, list):
            return bad("Span selections must be a list.")
        for sel in value:
            if not _valid_span(sel, source):
                return bad("Span selection does not lie within the source text.")
    return None


def _valid_datetime(value: str) -> bool:
    for parser in (_dt.date.fromisoformat, _dt.datetime.fromisoformat):
        try:
            parser(value)
            return True
        except ValueError:
            continue
    return False


def _valid_span(sel: Any, source: str) -> bool:
    if not isinstance(sel, dict):
        return False
    start, end = sel.get("start"), sel.get("end")
    if not isinstance(start, int) or not isinstance(end, int):
        return False
    if isinstance(start, bool) or isinstance(end, bool):
        return False
    if not (0 <= start < end <= len(source)):
        return False
    text = sel.get("text")
    if text is not None and text != source[start:end]:
        return False
    return True


def span_text(sel: dict, source: str) -> str:
    return source[sel["start"]:sel["end"]]


# ---------------------------------------------------------------------------
# The submission gate


@dataclass
class SubmissionResult:
    accepted: bool
    violations: list[Violation]
    state: ResponseState  # settled
    cleared: list[ResponseKey] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "violations": [v.to_dict() for v in self.violations],
            "cleared": [list(k) for k in self.cleared],
        }


def validate_submission(task: TaskSpec, state: ResponseState,
                        registry: ConstraintRegistry | None = None) -> SubmissionResult:
    """Accept exactly when completeness, repetition bounds, regex
    constraints on answered enabled annotations, and custom constraints
    all pass; otherwise the complete violation list."""
    if registry is None:
        registry = default_registry()
    settled, cleared = settle(task, state)
    enabled = enabled_set(task, settled)
    order = _order(task)
    violations: list[Violation] = []
    value_bad: set[ResponseKey] = set()

    # value shapes first: malformed answers block everything else on the key
    for (aid, instance) in sorted(enabled, key=lambda k: (order.get(k[0], 0), k[1])):
        ref = task_index(task).resolve(aid)
        if ref is None or not settled.answered(aid, instance):
            continue
        v = _check_value(task, ref.definition, settled.get(aid, instance), instance)
        if v is not None:
            violations.append(v)
            value_bad.add((aid, instance))

    violations.extend(check_completeness(task, settled, enabled))

    # repetition: group instance counts, then span selection counts
    for g in task.annotation_groups:
        count = settled.instance_count(g)
        if g.repeated:
            v = check_repetition(g, count)
            if v is not None:
                violations.append(v)
        elif count != 1:
            violations.append(Violation(subject=g.id, kind="repetition",
                                        description=_bounds_message(1, 1)))
    for aid, instance in sorted(enabled, key=lambda k: (order.get(k[0], 0), k[1])):
        ref = task_index(task).resolve(aid)
        if ref is None or ref.definition.type != "span-from-text":
            continue
        if (aid, instance) in value_bad:
            continue
        if ref.definition.optional and not settled.answered(aid, instance):
            continue
        value = settled.get(aid, instance) or []
        v = check_repetition(ref.definition, len(value), instance=instance)
        if v is not None:
            violations.append(v)

    # regex constraints over answered, enabled, well-formed text values
    for aid, instance in sorted(enabled, key=lambda k: (order.get(k[0], 0), k[1])):
        ref = task_index(task).resolve(aid)
        if ref is None or (aid, instance) in value_bad:
            continue
        a = ref.definition
        if not a.is_text_valued or not settled.answered(aid, instance):
            continue
        value = settled.get(aid, instance)
        texts: list[str]
        if a.type == "text-input":
            texts = [value]
        else:
            ctx = task.context_by_id(a.from_context or "")
            source = ctx.payload if ctx is not None else ""
            texts = [span_text(sel, source) for sel in value]
        for c in a.constraints:
            if c.type != "regex":
                continue
            if any(check_regex(c, t) is not None for t in texts):
                violations.append(Violation(subject=aid, description=c.description,
                                            kind="regex", instance=instance))

    violations.extend(_run_custom(task, settled, registry))

    return SubmissionResult(accepted=not violations, violations=violations,
                            state=settled, cleared=cleared)


def _run_custom(task: TaskSpec, state: ResponseState,
                registry: ConstraintRegistry) -> list[Violation]:
    out: list[Violation] = []

    def run(c: ConstraintDef, subject: str) -> None:
        if c.type != "custom":
            return
        predicate = registry.get(c.name)
        if predicate is None:
            raise UnknownConstraintError(
                f"custom constraint {c.name!r} is not registered"
            )
        if predicate(task, state, dict(c.params_dict())) is not None:
            out.append(Violation(subject=subject, description=c.description,
                                 kind="custom"))

    for a in task.annotations:
        for c in a.constraints:
            run(c, _custom_subject(c, a.id, None, task))
    for g in task.annotation_groups:
        for a in g.annotations:
            for c in a.constraints:
                run(c, _custom_subject(c, a.id, g.id, task))
        for c in g.constraints:
            run(c, _custom_subject(c, g.id, g.id, task))
    for c in task.constraints:
        run(c, task.task_id)
    return out


def _custom_subject(c: ConstraintDef, owner: str, group: str | None,
                    task: TaskSpec) -> str:
    if c.scope == "task":
        return task.task_id
    if c.scope == "group" and group is not None:
        return group
    return owner


def apply_subject(v: Violation, subject: str, instance: int | None = None) -> Violation:
    return replace(v, subject=subject, instance=instance)
