"""Crowdforge: declaratively specified crowdsourcing pipelines.

Parse and validate annotation-UI specs, gate annotators through sampled
multiple-choice exams, enforce condition/constraint semantics on
submissions, integrate with an MTurk-style marketplace through the
ExternalQuestion handshake, and export analytics plus re-launchable
pipeline bundles.
"""

from .analytics import (
    AgreementResult,
    ExamReport,
    TaskSetReport,
    agreement,
    exam_report,
    fleiss_kappa,
    pay_rate,
    task_progress,
)
from .canonical import canonicalize
from .conditions import (
    EvalScope,
    ResponseState,
    enabled_set,
    evaluate,
    settle,
)
from .constraints import (
    ConstraintRegistry,
    SubmissionResult,
    Violation,
    check_completeness,
    check_regex,
    check_repetition,
    default_registry,
    register_custom,
    validate_submission,
)
from .exam import (
    Attempt,
    ExamEngine,
    ExamSession,
    check_tutorial_answer,
    grade_attempt,
    sample_questions,
)
from .model import (
    AnnotationDef,
    AnnotationGroupDef,
    ConditionAtom,
    ConstraintDef,
    ContextObject,
    Diagnostic,
    ExamConfig,
    McQuestion,
    PipelineSpec,
    QuestionSet,
    TaskSetSpec,
    TaskSpec,
)
from .parsing import (
    ParseResult,
    parse_exam_config,
    parse_pipeline_document,
    parse_pipeline_spec,
    validate_semantics,
)
from .rendering import render_instruction
from .storage import AnnotationStore, Assignment, KVStore

__version__ = "0.1.0"

__all__ = [
    "AgreementResult", "AnnotationDef", "AnnotationGroupDef", "AnnotationStore",
    "Assignment", "Attempt", "ConditionAtom", "ConstraintDef",
    "ConstraintRegistry", "ContextObject", "Diagnostic", "EvalScope",
    "ExamConfig", "ExamEngine", "ExamReport", "ExamSession", "KVStore",
    "McQuestion", "ParseResult", "PipelineSpec", "QuestionSet", "ResponseState",
    "SubmissionResult", "TaskSetReport", "TaskSetSpec", "TaskSpec", "Violation",
    "agreement", "canonicalize", "check_completeness", "check_regex",
    "check_repetition", "check_tutorial_answer", "default_registry",
    "enabled_set", "evaluate", "exam_report", "fleiss_kappa", "grade_attempt",
    "parse_exam_config", "parse_pipeline_document", "parse_pipeline_spec",
    "pay_rate", "register_custom", "render_instruction", "sample_questions",
    "settle", "task_progress", "validate_semantics", "validate_submission",
]
