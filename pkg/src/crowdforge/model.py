"""Domain types for declarative annotation pipelines.

Everything here is an immutable value object. Specs are parsed once
(see :mod:`crowdforge.parsing`), validated, and then shared freely across
threads; equality is structural, which is what the canonicalization
round-trip guarantees are stated against.

Option maps (``options``, ``explanation``) are stored as ordered key/text
pairs because document order is the display order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

CONTEXT_TYPES = ("text", "html", "image", "audio", "video")
ANNOTATION_TYPES = (
    "multiple-choice",
    "multi-label",
    "span-from-text",
    "text-input",
    "datetime",
)
PASS_COMPARISONS = ("strict-greater", "at-least")

NAME_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")

OptionPairs = tuple[tuple[str, str], ...]


# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class Diagnostic:
    """One parse/validation finding, anchored to a document path."""

    severity: str  # "error" | "warning"
    path: str  # JSON-pointer-style location, e.g. /tasks/0/annotations/1
    code: str  # stable machine identifier
    message: str

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "path": self.path,
            "code": self.code,
            "message": self.message,
        }


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


# ---------------------------------------------------------------------------
# Conditions

# A condition expression is a boolean tree over equality atoms that
# reference multiple-choice annotation values. ConditionExpr is the union
# of the four variants below.


@dataclass(frozen=True)
class ConditionAtom:
    id: str
    value: str
    op: str = "eq"


@dataclass(frozen=True)
class ConditionNot:
    arg: "ConditionExpr"


@dataclass(frozen=True)
class ConditionAnd:
    args: tuple["ConditionExpr", ...]


@dataclass(frozen=True)
class ConditionOr:
    args: tuple["ConditionExpr", ...]


ConditionExpr = ConditionAtom | ConditionNot | ConditionAnd | ConditionOr


def condition_atom_ids(expr: ConditionExpr) -> set[str]:
    """All annotation ids referenced by atoms anywhere in the tree."""
    if isinstance(expr, ConditionAtom):
        return {expr.id}
    if isinstance(expr, ConditionNot):
        return condition_atom_ids(expr.arg)
    ids: set[str] = set()
    for a in expr.args:
        ids |= condition_atom_ids(a)
    return ids


# ---------------------------------------------------------------------------
# Constraints


@dataclass(frozen=True, eq=True)
class ConstraintDef:
    """A submission-blocking requirement attached to an annotation, group,
    or task.

    ``description`` is the exact message annotators see when it is
    violated. ``regex`` constraints use the restricted linear-time dialect
    of :mod:`crowdforge.regexlang`; ``custom`` constraints name a
    predicate registered in code.
    """

    type: str  # "regex" | "custom"
    description: str
    scope: str = "annotation"  # "annotation" | "group" | "task"
    regex: str | None = None
    name: str | None = None
    params: tuple[tuple[str, object], ...] = ()

    def params_dict(self) -> dict:
        return dict(self.params)


# ---------------------------------------------------------------------------
# Spec objects


@dataclass(frozen=True)
class ContextObject:
    """A displayed object visible throughout a task (or question)."""

    id: str
    type: str  # one of CONTEXT_TYPES
    payload: str  # text body, html body, or media URL depending on type
    label: str | None = None


@dataclass(frozen=True)
class AnnotationDef:
    """One typed input prompt.

    ``options`` is present only for multiple-choice / multi-label;
    ``from_context`` and the min/max selection bounds only for
    span-from-text. ``conditions`` is an implicit conjunction.
    """

    id: str
    type: str  # one of ANNOTATION_TYPES
    prompt: str
    options: OptionPairs | None = None
    from_context: str | None = None
    optional: bool = False
    min: int | None = None
    max: int | None = None  # None = unbounded above (span-from-text)
    conditions: tuple[ConditionExpr, ...] = ()
    constraints: tuple[ConstraintDef, ...] = ()

    def option_keys(self) -> tuple[str, ...]:
        return tuple(k for k, _ in (self.options or ()))

    @property
    def is_choice(self) -> bool:
        return self.type in ("multiple-choice", "multi-label")

    @property
    def is_text_valued(self) -> bool:
        """True when answers carry free text a regex can run against."""
        return self.type in ("span-from-text", "text-input")


@dataclass(frozen=True)
class AnnotationGroupDef:
    """A bundle of annotations, optionally repeated min..max times."""

    id: str
    title: str
    annotations: tuple[AnnotationDef, ...]
    repeated: bool = False
    min: int | None = None  # repeated groups only
    max: int | None = None  # None = unbounded above
    constraints: tuple[ConstraintDef, ...] = ()


@dataclass(frozen=True)
class TaskSpec:
    """One annotation instance: contexts plus typed prompts."""

    task_id: str
    contexts: tuple[ContextObject, ...] = ()
    annotations: tuple[AnnotationDef, ...] = ()
    annotation_groups: tuple[AnnotationGroupDef, ...] = ()
    constraints: tuple[ConstraintDef, ...] = ()  # task-scope constraints

    def all_annotations(self) -> list[tuple[AnnotationDef, str | None]]:
        """Every annotation with its containing group id (None = top level)."""
        out: list[tuple[AnnotationDef, str | None]] = []
        for a in self.annotations:
            out.append((a, None))
        for g in self.annotation_groups:
            for a in g.annotations:
                out.append((a, g.id))
        return out

    def context_by_id(self, cid: str) -> ContextObject | None:
        for c in self.contexts:
            if c.id == cid:
                return c
        return None


@dataclass(frozen=True)
class TaskSetSpec:
    """A launchable bundle of tasks with a redundancy requirement."""

    task_set_id: str
    tasks: tuple[TaskSpec, ...]
    shared: tuple[ContextObject, ...] = ()
    redundancy: int = 1

    def task_by_id(self, task_id: str) -> TaskSpec | None:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        return None


@dataclass(frozen=True)
class McQuestion:
    """A multiple-choice question with a hidden answer and per-option
    explanations (explanations are only revealed in tutorials)."""

    question_id: str
    question_text: str
    options: OptionPairs
    answer: str
    context: tuple[ContextObject, ...] = ()
    explanation: OptionPairs = ()

    def option_keys(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.options)

    def explanation_for(self, key: str) -> str:
        for k, text in self.explanation:
            if k == key:
                return text
        return ""


@dataclass(frozen=True)
class QuestionSet:
    questions: tuple[McQuestion, ...]

    def question_ids(self) -> tuple[str, ...]:
        return tuple(q.question_id for q in self.questions)

    def question_by_id(self, qid: str) -> McQuestion | None:
        for q in self.questions:
            if q.question_id == qid:
                return q
        return None


@dataclass(frozen=True)
class ExamConfig:
    """Per-attempt sampling and pass/fail policy for an exam."""

    sample_size: int
    passing_score: float  # fraction in [0, 1]
    max_attempts: int
    pass_comparison: str = "strict-greater"

    def passes(self, score: float) -> bool:
        if self.pass_comparison == "at-least":
            return score >= self.passing_score
        return score > self.passing_score


@dataclass(frozen=True)
class PipelineSpec:
    """The four-part declarative pipeline; the unit of reproducibility.

    ``version`` is assigned by the store and increases by exactly one on
    each saved edit; launched versions are immutable.
    """

    name: str
    version: int
    instruction: str = ""
    tutorial: QuestionSet | None = None
    exam: QuestionSet | None = None
    exam_config: ExamConfig | None = None
    task_set: TaskSetSpec | None = None


# ---------------------------------------------------------------------------
# Task indexing (shared by the condition and constraint engines)


@dataclass(frozen=True)
class AnnotationRef:
    """Where an annotation lives inside its task."""

    definition: AnnotationDef
    group_id: str | None  # None = top level


class TaskIndex:
    """Id lookups over a validated TaskSpec.

    Built once per task; evaluation-time reference faults only occur for
    specs that skipped validation.
    """

    def __init__(self, task: TaskSpec):
        self.task = task
        self.annotations: dict[str, AnnotationRef] = {}
        self.groups: dict[str, AnnotationGroupDef] = {}
        for a in task.annotations:
            self.annotations[a.id] = AnnotationRef(a, None)
        for g in task.annotation_groups:
            self.groups[g.id] = g
            for a in g.annotations:
                self.annotations[a.id] = AnnotationRef(a, g.id)

    def resolve(self, aid: str) -> AnnotationRef | None:
        return self.annotations.get(aid)


_INDEX_CACHE: dict[int, TaskIndex] = {}


def task_index(task: TaskSpec) -> TaskIndex:
    """Memoized TaskIndex (specs are immutable, so identity is a safe key)."""
    idx = _INDEX_CACHE.get(id(task))
    if idx is None or idx.task is not task:
        idx = TaskIndex(task)
        _INDEX_CACHE[id(task)] = idx
    return idx
