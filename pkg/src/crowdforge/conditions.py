"""Condition evaluation: which annotations are enabled for a response state.

Atoms compare a multiple-choice answer against an option key; an
unanswered reference makes the atom false (so an empty form shows exactly
the unconditioned annotations). ``not``/``and``/``or`` compose
classically. ``settle`` enforces the submission-time guarantee that no
answer survives on a disabled annotation, whatever order answers were
edited in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import CrowdforgeError
from .model import (
    AnnotationGroupDef,
    ConditionAnd,
    ConditionAtom,
    ConditionExpr,
    ConditionNot,
    ConditionOr,
    TaskIndex,
    TaskSpec,
    task_index,
)

ResponseKey = tuple[str, int]  # (annotation id, group-instance index)


class EvaluationError(CrowdforgeError):
    """Condition references an id the spec does not define (unvalidated spec)."""

    code = "evaluation-fault"


def _is_answered(value: Any) -> bool:
    if value is None:
        return False
    if isinstance(value, (str, list, tuple, dict)) and len(value) == 0:
        return False
    return True


@dataclass
class ResponseState:
    """A worker's answers for one task.

    ``values`` is keyed by (annotation id, instance index); top-level
    annotations use index 0. ``group_counts`` holds the number of
    instances currently open per repeated group.
    """

    values: dict[ResponseKey, Any] = field(default_factory=dict)
    group_counts: dict[str, int] = field(default_factory=dict)

    def answered(self, aid: str, instance: int = 0) -> bool:
        return _is_answered(self.values.get((aid, instance)))

    def get(self, aid: str, instance: int = 0) -> Any:
        return self.values.get((aid, instance))

    def set(self, aid: str, value: Any, instance: int = 0) -> None:
        self.values[(aid, instance)] = value

    def instance_count(self, group: AnnotationGroupDef) -> int:
        return self.group_counts.get(group.id, 0 if group.repeated else 1)

    def copy(self) -> "ResponseState":
        return ResponseState(dict(self.values), dict(self.group_counts))

    def to_wire(self) -> dict:
        values: dict[str, dict[str, Any]] = {}
        for (aid, idx), v in sorted(self.values.items()):
            values.setdefault(aid, {})[str(idx)] = v
        return {"values": values, "group_counts": dict(sorted(self.group_counts.items()))}

    @classmethod
    def from_wire(cls, doc: dict) -> "ResponseState":
        if not isinstance(doc, dict):
            raise ValueError("response document must be an object")
        values: dict[ResponseKey, Any] = {}
        raw_values = doc.get("values", {})
        if not isinstance(raw_values, dict):
            raise ValueError("'values' must be an object keyed by annotation id")
        for aid, per_instance in raw_values.items():
            if not isinstance(per_instance, dict):
                raise ValueError(f"values[{aid!r}] must map instance index to value")
            for idx_str, v in per_instance.items():
                try:
                    idx = int(idx_str)
                except (TypeError, ValueError):
                    raise ValueError(f"bad instance index {idx_str!r} for {aid!r}")
                if idx < 0:
                    raise ValueError(f"negative instance index for {aid!r}")
                values[(aid, idx)] = v
        counts_raw = doc.get("group_counts", {})
        if not isinstance(counts_raw, dict):
            raise ValueError("'group_counts' must be an object")
        counts: dict[str, int] = {}
        for gid, n in counts_raw.items():
            if not isinstance(n, int) or isinstance(n, bool) or n < 0:
                raise ValueError(f"group count for {gid!r} must be a non-negative integer")
            counts[gid] = n
        return cls(values, counts)


@dataclass(frozen=True)
class EvalScope:
    """Where a condition is being evaluated: task level, or one instance
    of a group (same-instance references win over task-level ones)."""

    index: TaskIndex
    group_id: str | None = None
    instance: int = 0


def evaluate(expr: ConditionExpr, state: ResponseState, scope: EvalScope) -> bool:
    if isinstance(expr, ConditionAtom):
        ref = scope.index.resolve(expr.id)
        if ref is None:
            raise EvaluationError(f"condition references unknown annotation {expr.id!r}")
        if ref.group_id is None:
            key = (expr.id, 0)
        elif ref.group_id == scope.group_id:
            key = (expr.id, scope.instance)
        else:
            raise EvaluationError(
                f"condition references {expr.id!r} in group {ref.group_id!r}, "
                "outside the evaluation scope"
            )
        value = state.values.get(key)
        if not _is_answered(value):
            return False
        return value == expr.value
    if isinstance(expr, ConditionNot):
        return not evaluate(expr.arg, state, scope)
    if isinstance(expr, ConditionAnd):
        return all(evaluate(a, state, scope) for a in expr.args)
    if isinstance(expr, ConditionOr):
        return any(evaluate(a, state, scope) for a in expr.args)
    raise TypeError(f"not a condition expression: {expr!r}")


def enabled_set(task: TaskSpec, state: ResponseState) -> set[ResponseKey]:
    """Annotation instances whose conditions all hold (empty list = enabled)."""
    idx = task_index(task)
    out: set[ResponseKey] = set()
    top_scope = EvalScope(idx)
    for a in task.annotations:
        if all(evaluate(c, state, top_scope) for c in a.conditions):
            out.add((a.id, 0))
    for g in task.annotation_groups:
        for i in range(state.instance_count(g)):
            scope = EvalScope(idx, g.id, i)
            for a in g.annotations:
                if all(evaluate(c, state, scope) for c in a.conditions):
                    out.add((a.id, i))
    return out


def _doc_order(task: TaskSpec) -> dict[str, int]:
    order: dict[str, int] = {}
    for a in task.annotations:
        order[a.id] = len(order)
    for g in task.annotation_groups:
        order[g.id] = len(order)
        for a in g.annotations:
            order[a.id] = len(order)
    return order


def settle(task: TaskSpec, state: ResponseState) -> tuple[ResponseState, list[ResponseKey]]:
    """Clear answers of disabled instances until a fixpoint.

    Also drops keys that do not name an enabled instance at all (unknown
    ids, out-of-range instances). Returns the settled state and the keys
    cleared, in document order. Idempotent; the settled state's answered
    keys are a subset of the input's.
    """
    cur = state.copy()
    order = _doc_order(task)
    cleared: list[ResponseKey] = []
    while True:
        enabled = enabled_set(task, cur)
        stale = [k for k in cur.values if k not in enabled]
        if not stale:
            return cur, cleared
        stale.sort(key=lambda k: (order.get(k[0], len(order)), k[1], k[0]))
        for k in stale:
            del cur.values[k]
            cleared.append(k)
