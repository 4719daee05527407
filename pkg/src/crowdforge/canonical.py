"""Canonical document form for specs.

Canonical output is deterministic bytes: UTF-8, LF, 2-space indent,
object keys sorted, defaults materialized. List order is preserved for
``questions``/``contexts``/``annotations`` (and the other spec lists),
and the ``options``/``explanation`` maps keep document order because that
order is the display order.
"""

from __future__ import annotations

import json

from .model import (
    AnnotationDef,
    AnnotationGroupDef,
    ConditionAnd,
    ConditionAtom,
    ConditionExpr,
    ConditionNot,
    ConditionOr,
    ConstraintDef,
    ContextObject,
    ExamConfig,
    McQuestion,
    PipelineSpec,
    QuestionSet,
    TaskSetSpec,
    TaskSpec,
)

CONTEXT_PAYLOAD_KEYS = {
    "text": "text",
    "html": "html",
    "image": "url",
    "audio": "url",
    "video": "url",
}


def _sorted(d: dict) -> dict:
    return {k: d[k] for k in sorted(d)}


def thaw_params(params: tuple) -> object:
    """Normalized constraint params back to plain JSON values."""
    if isinstance(params, tuple):
        if all(isinstance(p, tuple) and len(p) == 2 and isinstance(p[0], str) for p in params):
            return {k: thaw_params(v) for k, v in params}
        return [thaw_params(v) for v in params]
    return params


def freeze_params(value: object) -> object:
    """Plain JSON params to a hashable normal form with sorted keys."""
    if isinstance(value, dict):
        return tuple((k, freeze_params(value[k])) for k in sorted(value))
    if isinstance(value, (list, tuple)):
        return tuple(freeze_params(v) for v in value)
    return value


def condition_doc(expr: ConditionExpr) -> dict:
    if isinstance(expr, ConditionAtom):
        return {"id": expr.id, "op": expr.op, "value": expr.value}
    if isinstance(expr, ConditionNot):
        return {"arg": condition_doc(expr.arg), "op": "not"}
    if isinstance(expr, ConditionAnd):
        return {"args": [condition_doc(a) for a in expr.args], "op": "and"}
    if isinstance(expr, ConditionOr):
        return {"args": [condition_doc(a) for a in expr.args], "op": "or"}
    raise TypeError(f"not a condition expression: {expr!r}")


def constraint_doc(c: ConstraintDef) -> dict:
    doc: dict = {"description": c.description, "scope": c.scope, "type": c.type}
    if c.type == "regex":
        doc["regex"] = c.regex
    else:
        doc["name"] = c.name
        doc["params"] = thaw_params(c.params)
    return _sorted(doc)


def context_doc(ctx: ContextObject) -> dict:
    doc: dict = {"id": ctx.id, "type": ctx.type}
    doc[CONTEXT_PAYLOAD_KEYS[ctx.type]] = ctx.payload
    if ctx.label is not None:
        doc["label"] = ctx.label
    return _sorted(doc)


def annotation_doc(a: AnnotationDef) -> dict:
    doc: dict = {
        "conditions": [condition_doc(c) for c in a.conditions],
        "constraints": [constraint_doc(c) for c in a.constraints],
        "id": a.id,
        "optional": a.optional,
        "prompt": a.prompt,
        "type": a.type,
    }
    if a.options is not None:
        doc["options"] = dict(a.options)
    if a.type == "span-from-text":
        doc["from_context"] = a.from_context
        doc["min"] = a.min if a.min is not None else 1
        doc["max"] = a.max
    return _sorted(doc)


def group_doc(g: AnnotationGroupDef) -> dict:
    doc: dict = {
        "annotations": [annotation_doc(a) for a in g.annotations],
        "constraints": [constraint_doc(c) for c in g.constraints],
        "id": g.id,
        "repeated": g.repeated,
        "title": g.title,
    }
    if g.repeated:
        doc["min"] = g.min if g.min is not None else 1
        doc["max"] = g.max
    return _sorted(doc)


def task_doc(t: TaskSpec) -> dict:
    return _sorted(
        {
            "annotation_groups": [group_doc(g) for g in t.annotation_groups],
            "annotations": [annotation_doc(a) for a in t.annotations],
            "constraints": [constraint_doc(c) for c in t.constraints],
            "contexts": [context_doc(c) for c in t.contexts],
            "task_id": t.task_id,
        }
    )


def task_set_doc(ts: TaskSetSpec) -> dict:
    return _sorted(
        {
            "redundancy": ts.redundancy,
            "shared": [context_doc(c) for c in ts.shared],
            "task_set_id": ts.task_set_id,
            "tasks": [task_doc(t) for t in ts.tasks],
        }
    )


def question_doc(q: McQuestion) -> dict:
    return _sorted(
        {
            "answer": q.answer,
            "context": [context_doc(c) for c in q.context],
            "explanation": dict(q.explanation),
            "question": {"options": dict(q.options), "question_text": q.question_text},
            "question_id": q.question_id,
            "type": "multiple-choice",
        }
    )


def question_set_doc(qs: QuestionSet) -> dict:
    return {"question_set": [question_doc(q) for q in qs.questions]}


def exam_config_doc(cfg: ExamConfig) -> dict:
    return _sorted(
        {
            "max_attempts": cfg.max_attempts,
            "pass_comparison": cfg.pass_comparison,
            "passing_score": cfg.passing_score,
            "sample_size": cfg.sample_size,
        }
    )


def pipeline_doc(p: PipelineSpec) -> dict:
    # version is store bookkeeping, not part of the editable document
    doc: dict = {"instruction": p.instruction, "name": p.name}
    if p.tutorial is not None:
        doc["tutorial"] = question_set_doc(p.tutorial)
    if p.exam is not None:
        doc["exam"] = question_set_doc(p.exam)
    if p.exam_config is not None:
        doc["exam_config"] = exam_config_doc(p.exam_config)
    if p.task_set is not None:
        doc["task_set"] = task_set_doc(p.task_set)
    return _sorted(doc)


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def canonicalize(spec) -> str:
    """Deterministic document text for any spec object."""
    if isinstance(spec, QuestionSet):
        return dumps(question_set_doc(spec))
    if isinstance(spec, TaskSetSpec):
        return dumps(task_set_doc(spec))
    if isinstance(spec, ExamConfig):
        return dumps(exam_config_doc(spec))
    if isinstance(spec, PipelineSpec):
        return dumps(pipeline_doc(spec))
    if isinstance(spec, TaskSpec):
        return dumps(task_doc(spec))
    raise TypeError(f"cannot canonicalize {type(spec).__name__}")
