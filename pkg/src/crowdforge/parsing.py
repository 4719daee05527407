"""Parsing and semantic validation of spec documents.

Documents are UTF-8 JSON following the listing shapes (``question_set``,
``contexts``, ``annotations``, ``annotation_groups``, ``conditions``,
``constraints``). Parsing never throws for bad content: every problem
becomes a :class:`~crowdforge.model.Diagnostic` with a JSON-pointer-style
path. Unknown fields warn and are dropped from the typed spec; they never
change the meaning of known fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import regexlang
from .canonical import CONTEXT_PAYLOAD_KEYS, freeze_params
from .model import (
    ANNOTATION_TYPES,
    CONTEXT_TYPES,
    NAME_RE,
    PASS_COMPARISONS,
    AnnotationDef,
    AnnotationGroupDef,
    ConditionAnd,
    ConditionAtom,
    ConditionExpr,
    ConditionNot,
    ConditionOr,
    ConstraintDef,
    ContextObject,
    Diagnostic,
    ExamConfig,
    McQuestion,
    QuestionSet,
    TaskSetSpec,
    TaskSpec,
    condition_atom_ids,
    has_errors,
)

SPEC_KINDS = ("tutorial", "exam", "task_set")


class _Diags:
    def __init__(self):
        self.items: list[Diagnostic] = []

    def error(self, path: str, code: str, message: str) -> None:
        self.items.append(Diagnostic("error", path, code, message))

    def warning(self, path: str, code: str, message: str) -> None:
        self.items.append(Diagnostic("warning", path, code, message))

    @property
    def failed(self) -> bool:
        return has_errors(self.items)


def _p(*segments) -> str:
    return "".join(f"/{s}" for s in segments)


def _check_unknown(obj: dict, known: set[str], path: str, d: _Diags) -> None:
    for key in obj:
        if key not in known:
            d.warning(_p(path, key) if path else f"/{key}", "unknown-field",
                      f"unrecognized field {key!r} is ignored")


def _req(obj: dict, key: str, typ, path: str, d: _Diags, type_name: str):
    if key not in obj:
        d.error(path, "missing-field", f"required field {key!r} is missing")
        return None
    v = obj[key]
    if typ is not None and not isinstance(v, typ) or isinstance(v, bool) and typ is int:
        d.error(_p_join(path, key), "invalid-type", f"{key!r} must be {type_name}")
        return None
    return v


def _p_join(path: str, key) -> str:
    return f"{path}/{key}"


def _opt(obj: dict, key: str, typ, path: str, d: _Diags, type_name: str, default=None):
    if key not in obj or obj[key] is None:
        return default
    v = obj[key]
    if not isinstance(v, typ) or isinstance(v, bool) and typ is int:
        d.error(_p_join(path, key), "invalid-type", f"{key!r} must be {type_name}")
        return default
    return v


def _identifier(value, path: str, d: _Diags, what: str) -> str | None:
    if not isinstance(value, str) or not value:
        d.error(path, "invalid-value", f"{what} must be a non-empty string")
        return None
    return value


def _option_pairs(obj, path: str, d: _Diags) -> tuple[tuple[str, str], ...] | None:
    if not isinstance(obj, dict):
        d.error(path, "invalid-type", "options must be an object of key -> text")
        return None
    pairs = []
    for k, v in obj.items():
        if not k:
            d.error(path, "invalid-option-key", "option keys must be non-empty")
            return None
        if not isinstance(v, str):
            d.error(_p_join(path, k), "invalid-type", "option text must be a string")
            return None
        pairs.append((k, v))
    return tuple(pairs)


# ---------------------------------------------------------------------------
# Contexts


def _parse_context(obj, path: str, d: _Diags, default_id: str) -> ContextObject | None:
    if not isinstance(obj, dict):
        d.error(path, "invalid-type", "context must be an object")
        return None
    ctype = obj.get("type")
    if ctype not in CONTEXT_TYPES:
        d.error(_p_join(path, "type"), "unknown-context-type",
                f"context type must be one of {', '.join(CONTEXT_TYPES)}")
        return None
    payload_key = CONTEXT_PAYLOAD_KEYS[ctype]
    _check_unknown(obj, {"id", "type", "label", payload_key}, path, d)
    cid = _identifier(obj.get("id", default_id), _p_join(path, "id"), d, "context id")
    payload = _req(obj, payload_key, str, path, d, "a string")
    label = _opt(obj, "label", str, path, d, "a string")
    if cid is None or payload is None:
        return None
    return ContextObject(id=cid, type=ctype, payload=payload, label=label)


def _parse_context_list(obj, path: str, d: _Diags) -> tuple[ContextObject, ...]:
    if obj is None:
        return ()
    if not isinstance(obj, list):
        d.error(path, "invalid-type", "expected a list of context objects")
        return ()
    out = []
    seen: set[str] = set()
    for i, raw in enumerate(obj):
        ctx = _parse_context(raw, _p_join(path, i), d, f"context-{i + 1}")
        if ctx is None:
            continue
        if ctx.id in seen:
            d.error(_p_join(_p_join(path, i), "id"), "duplicate-id",
                    f"context id {ctx.id!r} appears more than once")
            continue
        seen.add(ctx.id)
        out.append(ctx)
    return tuple(out)


# ---------------------------------------------------------------------------
# Conditions


def _parse_condition(obj, path: str, d: _Diags) -> ConditionExpr | None:
    if not isinstance(obj, dict):
        d.error(path, "invalid-type", "condition must be an object")
        return None
    op = obj.get("op")
    if "id" in obj:
        _check_unknown(obj, {"id", "op", "value"}, path, d)
        if op != "eq":
            d.error(_p_join(path, "op"), "unknown-operator",
                    f"atom operator must be 'eq', got {op!r}")
            return None
        aid = _identifier(obj.get("id"), _p_join(path, "id"), d, "condition id")
        value = obj.get("value")
        if not isinstance(value, str):
            d.error(_p_join(path, "value"), "invalid-type", "atom value must be a string")
            return None
        if aid is None:
            return None
        return ConditionAtom(id=aid, value=value)
    if op == "not":
        _check_unknown(obj, {"op", "arg"}, path, d)
        if "arg" not in obj:
            d.error(path, "missing-field", "'not' requires an 'arg'")
            return None
        arg = _parse_condition(obj["arg"], _p_join(path, "arg"), d)
        return ConditionNot(arg) if arg is not None else None
    if op in ("and", "or"):
        _check_unknown(obj, {"op", "args"}, path, d)
        args_raw = obj.get("args")
        if not isinstance(args_raw, list) or not args_raw:
            d.error(_p_join(path, "args"), "empty-composite",
                    f"'{op}' requires a non-empty 'args' list")
            return None
        args = []
        for i, raw in enumerate(args_raw):
            sub = _parse_condition(raw, _p_join(_p_join(path, "args"), i), d)
            if sub is None:
                return None
            args.append(sub)
        return ConditionAnd(tuple(args)) if op == "and" else ConditionOr(tuple(args))
    d.error(_p_join(path, "op"), "unknown-operator",
            f"condition operator must be eq/not/and/or, got {op!r}")
    return None


def _parse_conditions(obj, path: str, d: _Diags) -> tuple[ConditionExpr, ...]:
    if obj is None:
        return ()
    if not isinstance(obj, list):
        d.error(path, "invalid-type", "conditions must be a list")
        return ()
    out = []
    for i, raw in enumerate(obj):
        c = _parse_condition(raw, _p_join(path, i), d)
        if c is not None:
            out.append(c)
    return tuple(out)


# ---------------------------------------------------------------------------
# Constraints


def _parse_constraint(obj, path: str, d: _Diags, default_scope: str) -> ConstraintDef | None:
    if not isinstance(obj, dict):
        d.error(path, "invalid-type", "constraint must be an object")
        return None
    ctype = obj.get("type")
    if ctype not in ("regex", "custom"):
        d.error(_p_join(path, "type"), "unknown-constraint-type",
                f"constraint type must be 'regex' or 'custom', got {ctype!r}")
        return None
    known = {"type", "description", "scope"}
    known |= {"regex"} if ctype == "regex" else {"name", "params"}
    _check_unknown(obj, known, path, d)
    description = _req(obj, "description", str, path, d, "a string")
    if description is not None and not description:
        d.error(_p_join(path, "description"), "invalid-value",
                "constraint description must be non-empty")
        description = None
    scope = _opt(obj, "scope", str, path, d, "a string", default_scope)
    if scope not in ("annotation", "group", "task"):
        d.error(_p_join(path, "scope"), "invalid-value",
                "scope must be annotation, group, or task")
        scope = default_scope
    if description is None:
        return None
    if ctype == "regex":
        pattern = _req(obj, "regex", str, path, d, "a string")
        if pattern is None:
            return None
        return ConstraintDef(type="regex", description=description, scope=scope, regex=pattern)
    name = _req(obj, "name", str, path, d, "a string")
    if name is None:
        return None
    params_raw = _opt(obj, "params", dict, path, d, "an object", {})
    return ConstraintDef(
        type="custom",
        description=description,
        scope=scope,
        name=name,
        params=freeze_params(params_raw),
    )


def _parse_constraints(obj, path: str, d: _Diags, default_scope: str) -> tuple[ConstraintDef, ...]:
    if obj is None:
        return ()
    if not isinstance(obj, list):
        d.error(path, "invalid-type", "constraints must be a list")
        return ()
    out = []
    for i, raw in enumerate(obj):
        c = _parse_constraint(raw, _p_join(path, i), d, default_scope)
        if c is not None:
            out.append(c)
    return tuple(out)


# ---------------------------------------------------------------------------
# Annotations and groups


_ANNOTATION_FIELDS = {
    "id", "type", "prompt", "options", "from_context", "optional",
    "min", "max", "conditions", "constraints",
}


def _parse_bounds(obj, path: str, d: _Diags, *, lo_floor: int,
                  default_min: int | None) -> tuple[int | None, int | None]:
    lo = _opt(obj, "min", int, path, d, "an integer", default_min)
    hi = obj.get("max")
    if hi is not None and (not isinstance(hi, int) or isinstance(hi, bool)):
        d.error(_p_join(path, "max"), "invalid-type", "'max' must be an integer or null")
        hi = None
    if lo is not None and lo < lo_floor:
        d.error(_p_join(path, "min"), "invalid-value", f"'min' must be >= {lo_floor}")
        lo = lo_floor
    if lo is not None and hi is not None and hi < lo:
        d.error(path, "bounds-inverted", f"max ({hi}) is less than min ({lo})")
    return lo, hi


def _parse_annotation(obj, path: str, d: _Diags) -> AnnotationDef | None:
    if not isinstance(obj, dict):
        d.error(path, "invalid-type", "annotation must be an object")
        return None
    atype = obj.get("type")
    if atype not in ANNOTATION_TYPES:
        d.error(_p_join(path, "type"), "unknown-annotation-type",
                f"annotation type must be one of {', '.join(ANNOTATION_TYPES)}")
        return None
    _check_unknown(obj, _ANNOTATION_FIELDS, path, d)
    aid = _identifier(obj.get("id"), _p_join(path, "id"), d, "annotation id")
    prompt = _req(obj, "prompt", str, path, d, "a string")
    optional = _opt(obj, "optional", bool, path, d, "a boolean", False)
    conditions = _parse_conditions(obj.get("conditions"), _p_join(path, "conditions"), d)
    constraints = _parse_constraints(
        obj.get("constraints"), _p_join(path, "constraints"), d, "annotation"
    )

    options = None
    is_choice = atype in ("multiple-choice", "multi-label")
    if is_choice:
        if "options" not in obj:
            d.error(path, "missing-options", f"{atype} annotations require 'options'")
            return None
        options = _option_pairs(obj["options"], _p_join(path, "options"), d)
        if options is None:
            return None
        floor = 2 if atype == "multiple-choice" else 1
        if len(options) < floor:
            d.error(_p_join(path, "options"), "too-few-options",
                    f"{atype} requires at least {floor} options")
            return None
    elif "options" in obj:
        d.error(_p_join(path, "options"), "unexpected-options",
                f"'options' is not allowed on {atype} annotations")

    from_context = None
    lo = hi = None
    if atype == "span-from-text":
        from_context = _req(obj, "from_context", str, path, d, "a context id string")
        if from_context is None:
            return None
        lo, hi = _parse_bounds(obj, path, d, lo_floor=0, default_min=1)
        if "max" not in obj:
            hi = 1  # selection bounds default to exactly one span
    else:
        if "from_context" in obj:
            d.error(_p_join(path, "from_context"), "unexpected-field",
                    "'from_context' is only allowed on span-from-text annotations")
        for k in ("min", "max"):
            if k in obj:
                d.warning(_p_join(path, k), "ignored-field",
                          f"{k!r} only applies to span-from-text annotations")
    if aid is None or prompt is None or d_failed_under(d, path):
        return None
    return AnnotationDef(
        id=aid, type=atype, prompt=prompt, options=options,
        from_context=from_context, optional=bool(optional),
        min=lo, max=hi, conditions=conditions, constraints=constraints,
    )


def d_failed_under(d: _Diags, path: str) -> bool:
    return any(x.is_error and x.path.startswith(path) for x in d.items)


def _parse_group(obj, path: str, d: _Diags) -> AnnotationGroupDef | None:
    if not isinstance(obj, dict):
        d.error(path, "invalid-type", "annotation group must be an object")
        return None
    _check_unknown(obj, {"id", "title", "annotations", "repeated", "min", "max",
                         "constraints"}, path, d)
    gid = _identifier(obj.get("id"), _p_join(path, "id"), d, "group id")
    title = _opt(obj, "title", str, path, d, "a string", "")
    repeated = _opt(obj, "repeated", bool, path, d, "a boolean", False)
    lo = hi = None
    if repeated:
        lo, hi = _parse_bounds(obj, path, d, lo_floor=1, default_min=1)
    else:
        for k in ("min", "max"):
            if k in obj:
                d.warning(_p_join(path, k), "ignored-field",
                          f"{k!r} only applies when 'repeated' is true")
    anns_raw = obj.get("annotations")
    if not isinstance(anns_raw, list) or not anns_raw:
        d.error(_p_join(path, "annotations"), "invalid-value",
                "group requires a non-empty 'annotations' list")
        return None
    annotations = []
    for i, raw in enumerate(anns_raw):
        a = _parse_annotation(raw, _p_join(_p_join(path, "annotations"), i), d)
        if a is not None:
            annotations.append(a)
    constraints = _parse_constraints(obj.get("constraints"),
                                     _p_join(path, "constraints"), d, "group")
    if gid is None or d_failed_under(d, path):
        return None
    return AnnotationGroupDef(
        id=gid, title=title, annotations=tuple(annotations),
        repeated=bool(repeated), min=lo, max=hi, constraints=constraints,
    )


def _parse_task(obj, path: str, d: _Diags, default_id: str) -> TaskSpec | None:
    if not isinstance(obj, dict):
        d.error(path, "invalid-type", "task must be an object")
        return None
    _check_unknown(obj, {"task_id", "contexts", "annotations", "annotation_groups",
                         "constraints"}, path, d)
    task_id = obj.get("task_id", default_id)
    task_id = _identifier(task_id, _p_join(path, "task_id"), d, "task id")
    contexts = _parse_context_list(obj.get("contexts"), _p_join(path, "contexts"), d)
    annotations = []
    anns_raw = obj.get("annotations")
    if anns_raw is not None:
        if not isinstance(anns_raw, list):
            d.error(_p_join(path, "annotations"), "invalid-type",
                    "'annotations' must be a list")
        else:
            for i, raw in enumerate(anns_raw):
                a = _parse_annotation(raw, _p_join(_p_join(path, "annotations"), i), d)
                if a is not None:
                    annotations.append(a)
    groups = []
    groups_raw = obj.get("annotation_groups")
    if groups_raw is not None:
        if not isinstance(groups_raw, list):
            d.error(_p_join(path, "annotation_groups"), "invalid-type",
                    "'annotation_groups' must be a list")
        else:
            for i, raw in enumerate(groups_raw):
                g = _parse_group(raw, _p_join(_p_join(path, "annotation_groups"), i), d)
                if g is not None:
                    groups.append(g)
    constraints = _parse_constraints(obj.get("constraints"),
                                     _p_join(path, "constraints"), d, "task")
    if task_id is None:
        return None
    return TaskSpec(
        task_id=task_id, contexts=contexts, annotations=tuple(annotations),
        annotation_groups=tuple(groups), constraints=constraints,
    )


def _parse_task_set(obj, path: str, d: _Diags) -> TaskSetSpec | None:
    if not isinstance(obj, dict):
        d.error(path or "", "malformed-document", "task set document must be a JSON object")
        return None
    if "tasks" not in obj and (
        "contexts" in obj or "annotations" in obj or "annotation_groups" in obj
    ):
        # bare single-task form, as in the listings
        task = _parse_task(obj, path, d, "task-1")
        if task is None:
            return None
        return TaskSetSpec(task_set_id="taskset", tasks=(task,))
    _check_unknown(obj, {"task_set_id", "shared", "redundancy", "tasks"}, path, d)
    ts_id = obj.get("task_set_id", "taskset")
    ts_id = _identifier(ts_id, _p_join(path, "task_set_id"), d, "task set id")
    shared = _parse_context_list(obj.get("shared"), _p_join(path, "shared"), d)
    redundancy = _opt(obj, "redundancy", int, path, d, "an integer", 1)
    if redundancy is not None and redundancy < 1:
        d.error(_p_join(path, "redundancy"), "invalid-value", "redundancy must be >= 1")
        redundancy = 1
    tasks_raw = obj.get("tasks")
    if not isinstance(tasks_raw, list) or not tasks_raw:
        d.error(_p_join(path, "tasks"), "invalid-value",
                "task set requires a non-empty 'tasks' list")
        return None
    tasks = []
    seen: set[str] = set()
    for i, raw in enumerate(tasks_raw):
        t = _parse_task(raw, _p_join(_p_join(path, "tasks"), i), d, f"task-{i + 1}")
        if t is None:
            continue
        if t.task_id in seen:
            d.error(_p_join(_p_join(_p_join(path, "tasks"), i), "task_id"),
                    "duplicate-id", f"task id {t.task_id!r} appears more than once")
            continue
        seen.add(t.task_id)
        tasks.append(t)
    if ts_id is None or not tasks:
        return None
    return TaskSetSpec(task_set_id=ts_id, tasks=tuple(tasks), shared=shared,
                       redundancy=int(redundancy))


# ---------------------------------------------------------------------------
# Questions


def _parse_question(obj, path: str, d: _Diags) -> McQuestion | None:
    if not isinstance(obj, dict):
        d.error(path, "invalid-type", "question must be an object")
        return None
    qtype = obj.get("type", "multiple-choice")
    if qtype != "multiple-choice":
        d.error(_p_join(path, "type"), "unknown-annotation-type",
                "tutorial/exam questions must be multiple-choice")
        return None
    _check_unknown(obj, {"type", "question_id", "context", "question", "answer",
                         "explanation"}, path, d)
    qid = _identifier(obj.get("question_id"), _p_join(path, "question_id"), d,
                      "question id")
    context = _parse_context_list(obj.get("context"), _p_join(path, "context"), d)
    inner = _req(obj, "question", dict, path, d, "an object")
    question_text = None
    options = None
    if inner is not None:
        ipath = _p_join(path, "question")
        _check_unknown(inner, {"question_text", "options"}, ipath, d)
        question_text = _req(inner, "question_text", str, ipath, d, "a string")
        opts_raw = _req(inner, "options", dict, ipath, d, "an object")
        if opts_raw is not None:
            options = _option_pairs(opts_raw, _p_join(ipath, "options"), d)
            if options is not None and len(options) < 2:
                d.error(_p_join(ipath, "options"), "too-few-options",
                        "questions require at least 2 options")
                options = None
    answer = _req(obj, "answer", str, path, d, "a string")
    explanation_raw = _opt(obj, "explanation", dict, path, d, "an object", {})
    if qid is None or question_text is None or options is None or answer is None:
        return None
    keys = {k for k, _ in options}
    if answer not in keys:
        d.error(_p_join(path, "answer"), "answer-not-in-options",
                f"answer {answer!r} is not one of the option keys")
        return None
    explanation = []
    for k, v in explanation_raw.items():
        if k not in keys:
            d.error(_p_join(_p_join(path, "explanation"), k), "unknown-explanation-key",
                    f"explanation key {k!r} is not one of the option keys")
            continue
        if not isinstance(v, str):
            d.error(_p_join(_p_join(path, "explanation"), k), "invalid-type",
                    "explanation text must be a string")
            continue
        explanation.append((k, v))
    return McQuestion(
        question_id=qid, question_text=question_text, options=options,
        answer=answer, context=context, explanation=tuple(explanation),
    )


def _parse_question_set(obj, path: str, d: _Diags) -> QuestionSet | None:
    if not isinstance(obj, dict):
        d.error(path or "", "malformed-document",
                "question set document must be a JSON object")
        return None
    _check_unknown(obj, {"question_set"}, path, d)
    entries = obj.get("question_set")
    if not isinstance(entries, list) or not entries:
        d.error(_p_join(path, "question_set"), "empty-question-set",
                "document requires a non-empty 'question_set' list")
        return None
    questions = []
    seen: set[str] = set()
    base = _p_join(path, "question_set")
    for i, raw in enumerate(entries):
        q = _parse_question(raw, _p_join(base, i), d)
        if q is None:
            continue
        if q.question_id in seen:
            d.error(_p_join(_p_join(base, i), "question_id"), "duplicate-id",
                    f"question id {q.question_id!r} appears more than once")
            continue
        seen.add(q.question_id)
        questions.append(q)
    if d_failed_under(d, path or "/"):
        return None
    return QuestionSet(questions=tuple(questions))


# ---------------------------------------------------------------------------
# Exam config


def parse_exam_config_obj(obj, path: str, d: _Diags) -> ExamConfig | None:
    if not isinstance(obj, dict):
        d.error(path or "", "malformed-document", "exam config must be a JSON object")
        return None
    _check_unknown(obj, {"sample_size", "passing_score", "max_attempts",
                         "pass_comparison"}, path, d)
    sample_size = _req(obj, "sample_size", int, path, d, "an integer")
    passing = _req(obj, "passing_score", (int, float), path, d, "a number")
    max_attempts = _req(obj, "max_attempts", int, path, d, "an integer")
    comparison = _opt(obj, "pass_comparison", str, path, d, "a string", "strict-greater")
    ok = True
    if sample_size is not None and sample_size < 1:
        d.error(_p_join(path, "sample_size"), "invalid-value", "sample_size must be >= 1")
        ok = False
    if passing is not None and not 0.0 <= float(passing) <= 1.0:
        d.error(_p_join(path, "passing_score"), "invalid-value",
                "passing_score must be a fraction in [0, 1]")
        ok = False
    if max_attempts is not None and max_attempts < 1:
        d.error(_p_join(path, "max_attempts"), "invalid-value", "max_attempts must be >= 1")
        ok = False
    if comparison not in PASS_COMPARISONS:
        d.error(_p_join(path, "pass_comparison"), "invalid-value",
                f"pass_comparison must be one of {', '.join(PASS_COMPARISONS)}")
        ok = False
    if None in (sample_size, passing, max_attempts) or not ok:
        return None
    return ExamConfig(sample_size=sample_size, passing_score=float(passing),
                      max_attempts=max_attempts, pass_comparison=comparison)


# ---------------------------------------------------------------------------
# Public entry points


@dataclass
class ParseResult:
    """Outcome of a parse: the typed spec (when error-free) plus diagnostics."""

    spec: object | None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.spec is not None and not has_errors(self.diagnostics)


def _load_json(raw: str | bytes, d: _Diags):
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            d.error("", "malformed-document", f"document is not valid UTF-8: {exc}")
            return None
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        d.error("", "malformed-document", f"document is not valid JSON: {exc}")
        return None


def parse_pipeline_spec(raw: str | bytes | dict, kind: str, *,
                        registry=None) -> ParseResult:
    """Parse one pipeline part.

    ``kind`` selects the document shape: ``tutorial``/``exam`` parse a
    question-set document, ``task_set`` a task-set document (which is also
    semantically validated).
    """
    if kind not in SPEC_KINDS:
        raise ValueError(f"kind must be one of {SPEC_KINDS}, got {kind!r}")
    d = _Diags()
    obj = raw if isinstance(raw, dict) else _load_json(raw, d)
    if obj is None:
        return ParseResult(None, d.items)
    if kind in ("tutorial", "exam"):
        spec = _parse_question_set(obj, "", d)
    else:
        spec = _parse_task_set(obj, "", d)
        if spec is not None and not d.failed:
            d.items.extend(validate_semantics(spec, registry=registry))
    if d.failed:
        spec = None
    return ParseResult(spec, d.items)


def parse_exam_config(raw: str | bytes | dict) -> ParseResult:
    d = _Diags()
    obj = raw if isinstance(raw, dict) else _load_json(raw, d)
    if obj is None:
        return ParseResult(None, d.items)
    cfg = parse_exam_config_obj(obj, "", d)
    return ParseResult(cfg if not d.failed else None, d.items)


@dataclass
class PipelineParse:
    """Parsed whole-pipeline document (version is assigned by the store)."""

    name: str | None
    instruction: str
    tutorial: QuestionSet | None
    exam: QuestionSet | None
    exam_config: ExamConfig | None
    task_set: TaskSetSpec | None
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.name is not None and not has_errors(self.diagnostics)


def parse_pipeline_document(raw: str | bytes | dict, *, registry=None,
                            name: str | None = None) -> PipelineParse:
    """Parse a full pipeline document: name, instruction, and parts."""
    d = _Diags()
    obj = raw if isinstance(raw, dict) else _load_json(raw, d)
    result = PipelineParse(None, "", None, None, None, None, d.items)
    if obj is None:
        return result
    if not isinstance(obj, dict):
        d.error("", "malformed-document", "pipeline document must be a JSON object")
        return result
    _check_unknown(obj, {"name", "instruction", "tutorial", "exam", "exam_config",
                         "task_set"}, "", d)
    doc_name = obj.get("name", name)
    if doc_name is None:
        d.error("/name", "missing-field", "pipeline requires a 'name'")
    elif not isinstance(doc_name, str) or not NAME_RE.match(doc_name):
        d.error("/name", "invalid-name",
                "name must match [A-Za-z0-9_-]{1,64}")
        doc_name = None
    if name is not None and doc_name is not None and doc_name != name:
        d.error("/name", "invalid-name",
                f"document name {doc_name!r} does not match target {name!r}")
        doc_name = None
    result.instruction = _opt(obj, "instruction", str, "", d, "a markdown string", "")
    if "tutorial" in obj and obj["tutorial"] is not None:
        result.tutorial = _parse_question_set(obj["tutorial"], "/tutorial", d)
    if "exam" in obj and obj["exam"] is not None:
        result.exam = _parse_question_set(obj["exam"], "/exam", d)
    if "exam_config" in obj and obj["exam_config"] is not None:
        result.exam_config = parse_exam_config_obj(obj["exam_config"], "/exam_config", d)
    if "task_set" in obj and obj["task_set"] is not None:
        ts = _parse_task_set(obj["task_set"], "/task_set", d)
        if ts is not None and not d.failed:
            d.items.extend(validate_semantics(ts, registry=registry,
                                              base_path="/task_set"))
        result.task_set = ts
    if result.exam is not None and result.exam_config is None:
        d.error("/exam_config", "missing-exam-config",
                "an exam requires an exam_config")
    if result.exam is not None and result.exam_config is not None:
        pool = len(result.exam.questions)
        if result.exam_config.sample_size > pool:
            d.error("/exam_config/sample_size", "sample-size-exceeds-pool",
                    f"sample_size {result.exam_config.sample_size} exceeds the "
                    f"{pool}-question exam pool")
    if d.failed:
        return PipelineParse(None, result.instruction or "", result.tutorial,
                             result.exam, result.exam_config, result.task_set, d.items)
    result.name = doc_name
    return result


# ---------------------------------------------------------------------------
# Semantic validation


def validate_semantics(spec: TaskSetSpec, *, registry=None,
                       base_path: str = "") -> list[Diagnostic]:
    """Reference integrity, condition-graph acyclicity, regex dialect
    compliance, and custom-constraint resolution for a parsed task set.

    Returns an empty list exactly when every lookup the condition and
    constraint engines will perform on this spec succeeds.
    """
    if registry is None:
        from .constraints import default_registry

        registry = default_registry()
    d = _Diags()
    shared_ids = {c.id for c in spec.shared}
    for ti, task in enumerate(spec.tasks):
        tpath = f"{base_path}/tasks/{ti}"
        _validate_task(task, tpath, d, shared=spec.shared, shared_ids=shared_ids,
                       registry=registry)
    return d.items


def _annotation_paths(task: TaskSpec, tpath: str) -> dict[str, str]:
    paths: dict[str, str] = {}
    for i, a in enumerate(task.annotations):
        paths[a.id] = f"{tpath}/annotations/{i}"
    for gi, g in enumerate(task.annotation_groups):
        paths[g.id] = f"{tpath}/annotation_groups/{gi}"
        for i, a in enumerate(g.annotations):
            paths[a.id] = f"{tpath}/annotation_groups/{gi}/annotations/{i}"
    return paths


def _validate_task(task: TaskSpec, tpath: str, d: _Diags, *, shared, shared_ids,
                   registry) -> None:
    paths = _annotation_paths(task, tpath)

    # id uniqueness across annotations and groups
    seen: dict[str, str] = {}
    members: list[tuple[str, str]] = [(a.id, "annotation") for a, _ in task.all_annotations()]
    members += [(g.id, "group") for g in task.annotation_groups]
    for mid, kind in members:
        if mid in seen:
            d.error(paths.get(mid, tpath), "duplicate-id",
                    f"{kind} id {mid!r} collides with another {seen[mid]} id")
        else:
            seen[mid] = kind

    ctx_ids = {c.id for c in task.contexts} | shared_ids
    for c in task.contexts:
        if c.id in shared_ids:
            d.error(f"{tpath}/contexts", "duplicate-id",
                    f"context id {c.id!r} collides with a shared context")

    index: dict[str, tuple[AnnotationDef, str | None]] = {}
    for a, gid in task.all_annotations():
        index.setdefault(a.id, (a, gid))

    edges: dict[str, set[str]] = {}
    for a, gid in task.all_annotations():
        apath = paths[a.id]
        _validate_annotation_refs(a, gid, apath, d, task, ctx_ids, index, edges, shared)
        _validate_constraints(a.constraints, f"{apath}/constraints", d, a, registry)
    for gi, g in enumerate(task.annotation_groups):
        _validate_constraints(g.constraints,
                              f"{tpath}/annotation_groups/{gi}/constraints", d, None,
                              registry)
    _validate_constraints(task.constraints, f"{tpath}/constraints", d, None, registry)

    _check_cycles(edges, paths, d)


def _validate_annotation_refs(a: AnnotationDef, gid: str | None, apath: str,
                              d: _Diags, task: TaskSpec, ctx_ids: set[str],
                              index, edges, shared) -> None:
    if a.type == "span-from-text":
        if a.from_context not in ctx_ids:
            d.error(f"{apath}/from_context", "dangling-from-context",
                    f"context {a.from_context!r} does not exist in this task")
        else:
            ctx = task.context_by_id(a.from_context)
            if ctx is None:
                ctx = next((c for c in shared if c.id == a.from_context), None)
            if ctx is not None and ctx.type != "text":
                d.error(f"{apath}/from_context", "from-context-not-text",
                        "span selections require a context of type 'text'")
    for ci, cond in enumerate(a.conditions):
        cpath = f"{apath}/conditions/{ci}"
        for ref in sorted(condition_atom_ids(cond)):
            target = index.get(ref)
            if target is None:
                d.error(cpath, "dangling-condition-ref",
                        f"condition references unknown annotation {ref!r}")
                continue
            tdef, tgid = target
            if tgid is not None and tgid != gid:
                d.error(cpath, "condition-ref-scope",
                        f"condition references {ref!r} inside group {tgid!r}, "
                        "which is not visible from here")
                continue
            if tdef.type != "multiple-choice":
                d.error(cpath, "condition-target-not-multiple-choice",
                        f"condition references {ref!r} of type {tdef.type}; only "
                        "multiple-choice annotations can be referenced")
                continue
            edges.setdefault(a.id, set()).add(ref)


def _validate_constraints(constraints, base: str, d: _Diags,
                          owner: AnnotationDef | None, registry) -> None:
    for i, c in enumerate(constraints):
        cpath = f"{base}/{i}"
        if c.type == "regex":
            if owner is not None and not owner.is_text_valued:
                d.error(cpath, "regex-on-non-text",
                        "regex constraints only apply to span-from-text or "
                        "text-input annotations")
            code = regexlang.check_pattern(c.regex or "")
            if code is not None:
                d.error(f"{cpath}/regex", code,
                        f"pattern {c.regex!r} is not usable: {code}")
        else:
            if registry.get(c.name) is None:
                d.error(f"{cpath}/name", "unknown-custom-constraint",
                        f"no custom constraint named {c.name!r} is registered")


def _check_cycles(edges: dict[str, set[str]], paths: dict[str, str], d: _Diags) -> None:
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in edges}
    reported: set[frozenset] = set()

    def visit(node: str, stack: list[str]) -> None:
        color[node] = GRAY
        stack.append(node)
        for nxt in sorted(edges.get(node, ())):
            if nxt not in color:
                continue
            if color[nxt] == GRAY:
                cycle = stack[stack.index(nxt):] + [nxt]
                key = frozenset(cycle)
                if key not in reported:
                    reported.add(key)
                    d.error(paths.get(nxt, ""), "condition-cycle",
                            "conditions form a cycle: " + " -> ".join(cycle))
            elif color[nxt] == WHITE:
                visit(nxt, stack)
        stack.pop()
        color[node] = BLACK

    for n in sorted(edges):
        if color[n] == WHITE:
            visit(n, [])
