"""Requester-facing statistics: exam reports, progress, pay rate, and
inter-annotator agreement.

Everything here is a pure function of store contents; callers pass the
raw rows. Agreement is reported as raw percent agreement plus Fleiss'
kappa (tasks with unequal rater counts are down-sampled to the minimum,
keeping the earliest submissions; multi-label answers are scored
per-option as binary).
"""

from __future__ import annotations

import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import CrowdforgeError
from .exam import ExamSession
from .model import McQuestion, TaskSetSpec

MISSING_ANSWER = "(none)"


class InsufficientRatersError(CrowdforgeError):
    code = "insufficient-raters"


# ---------------------------------------------------------------------------
# Exam reports


@dataclass
class QuestionStats:
    shown: int = 0
    errors: int = 0
    answer_counts: Counter = field(default_factory=Counter)

    @property
    def error_rate(self) -> float:
        return self.errors / self.shown if self.shown else 0.0

    def to_dict(self) -> dict:
        return {
            "shown": self.shown,
            "errors": self.errors,
            "error_rate": self.error_rate,
            "answer_counts": dict(sorted(self.answer_counts.items())),
        }


@dataclass
class ExamReport:
    graded_attempts: int
    histogram: dict[float, int]
    best_scores: dict[str, float]  # participant -> best graded score
    questions: dict[str, QuestionStats]
    passed: int
    participants: int

    def to_dict(self) -> dict:
        return {
            "graded_attempts": self.graded_attempts,
            "participants": self.participants,
            "passed": self.passed,
            "histogram": {f"{k:g}": v for k, v in sorted(self.histogram.items())},
            "best_scores": dict(sorted(self.best_scores.items())),
            "questions": {qid: qs.to_dict() for qid, qs in sorted(self.questions.items())},
        }


def exam_report(sessions: Iterable[ExamSession],
                questions: dict[str, McQuestion]) -> ExamReport:
    """Aggregate graded attempts: score histogram (keyed by the exact
    score fraction), per-participant best, and per-question error rates
    (one count per attempt that sampled the question)."""
    histogram: dict[float, int] = defaultdict(int)
    best: dict[str, float] = {}
    qstats: dict[str, QuestionStats] = {qid: QuestionStats() for qid in questions}
    graded = 0
    passed = 0
    participants = 0
    for session in sessions:
        participants += 1
        if session.status == "passed":
            passed += 1
        for attempt in session.attempts:
            if not attempt.graded:
                continue
            graded += 1
            histogram[attempt.score] += 1
            prev = best.get(session.participant)
            if prev is None or attempt.score > prev:
                best[session.participant] = attempt.score
            for qid in attempt.sampled:
                stats = qstats.setdefault(qid, QuestionStats())
                stats.shown += 1
                choice = attempt.answers.get(qid, MISSING_ANSWER)
                stats.answer_counts[choice] += 1
                correct = questions[qid].answer if qid in questions else None
                if choice != correct:
                    stats.errors += 1
    return ExamReport(
        graded_attempts=graded,
        histogram=dict(histogram),
        best_scores=best,
        questions=qstats,
        passed=passed,
        participants=participants,
    )


# ---------------------------------------------------------------------------
# Pay rate


def pay_rate(mean_duration_seconds: float, reward: float) -> float:
    """Implied hourly rate for a per-task reward."""
    if mean_duration_seconds <= 0:
        raise ValueError("duration must be positive")
    return reward * 3600.0 / mean_duration_seconds


# ---------------------------------------------------------------------------
# Agreement


@dataclass(frozen=True)
class AgreementResult:
    percent_agreement: float
    kappa: float
    subjects: int
    raters_per_subject: int

    def to_dict(self) -> dict:
        return {
            "percent_agreement": self.percent_agreement,
            "kappa": self.kappa,
            "subjects": self.subjects,
            "raters_per_subject": self.raters_per_subject,
        }


def fleiss_kappa(table: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa over an N x K table of category counts with the same
    number of ratings per subject. Perfect agreement returns exactly 1.0."""
    if not table:
        raise ValueError("empty table")
    n = sum(table[0])
    if n < 2:
        raise ValueError("need at least 2 ratings per subject")
    if any(sum(row) != n for row in table):
        raise ValueError("all subjects must have the same number of ratings")
    per_subject = [
        (sum(c * c for c in row) - n) / (n * (n - 1)) for row in table
    ]
    p_bar = sum(per_subject) / len(per_subject)
    if p_bar == 1.0:
        return 1.0
    total = n * len(table)
    p_j = [sum(row[j] for row in table) / total for j in range(len(table[0]))]
    p_e = sum(p * p for p in p_j)
    if p_e == 1.0:
        return 0.0
    return (p_bar - p_e) / (1.0 - p_e)


def percent_agreement(ratings_per_subject: Sequence[Sequence[str]]) -> float:
    """Mean over subjects of the fraction of rater pairs that agree."""
    fractions = []
    for ratings in ratings_per_subject:
        n = len(ratings)
        if n < 2:
            continue
        agree = 0
        pairs = 0
        for i in range(n):
            for j in range(i + 1, n):
                pairs += 1
                if ratings[i] == ratings[j]:
                    agree += 1
        fractions.append(agree / pairs)
    if not fractions:
        raise InsufficientRatersError("no subject has two or more raters")
    return sum(fractions) / len(fractions)


@dataclass(frozen=True)
class LabelRow:
    """One rater's label for one subject, with its submit order."""

    subject: tuple
    order: tuple  # (submit time, tiebreak) - earliest submissions win
    label: str


def _downsample(rows_by_subject: dict[tuple, list[LabelRow]]) -> tuple[list[list[str]], int]:
    usable = {s: sorted(rs, key=lambda r: r.order)
              for s, rs in rows_by_subject.items() if len(rs) >= 2}
    if not usable:
        raise InsufficientRatersError("need at least one subject with two raters")
    n_min = min(len(rs) for rs in usable.values())
    sampled = [[r.label for r in rs[:n_min]] for _, rs in sorted(usable.items())]
    return sampled, n_min


def agreement_from_rows(rows: Iterable[LabelRow]) -> AgreementResult:
    by_subject: dict[tuple, list[LabelRow]] = defaultdict(list)
    for row in rows:
        by_subject[row.subject].append(row)
    all_ratings = [[r.label for r in sorted(rs, key=lambda r: r.order)]
                   for _, rs in sorted(by_subject.items())]
    percent = percent_agreement(all_ratings)
    sampled, n_min = _downsample(by_subject)
    categories = sorted({label for ratings in sampled for label in ratings})
    table = [[ratings.count(c) for c in categories] for ratings in sampled]
    return AgreementResult(
        percent_agreement=percent,
        kappa=fleiss_kappa(table),
        subjects=len(sampled),
        raters_per_subject=n_min,
    )


@dataclass(frozen=True)
class SubmissionRow:
    """A submitted response, as the store reports it."""

    task_id: str
    worker_id: str
    submitted: float
    values: dict  # wire form: {annotation id: {instance: value}}


def agreement(task_set: TaskSetSpec, annotation_id: str,
              submissions: Iterable[SubmissionRow]) -> AgreementResult:
    """Agreement for one multiple-choice or multi-label annotation."""
    definition = None
    for task in task_set.tasks:
        for a, _gid in task.all_annotations():
            if a.id == annotation_id:
                definition = a
                break
    if definition is None or not definition.is_choice:
        raise ValueError(
            f"{annotation_id!r} is not a multiple-choice or multi-label annotation"
        )
    rows: list[LabelRow] = []
    for sub in submissions:
        per_instance = sub.values.get(annotation_id, {})
        for idx_str, value in per_instance.items():
            subject = (sub.task_id, int(idx_str))
            order = (sub.submitted, sub.worker_id)
            if definition.type == "multiple-choice":
                if isinstance(value, str):
                    rows.append(LabelRow(subject, order, value))
            else:
                chosen = set(value) if isinstance(value, list) else set()
                for key in definition.option_keys():
                    rows.append(LabelRow(subject + (key,), order,
                                         "1" if key in chosen else "0"))
    return agreement_from_rows(rows)


# ---------------------------------------------------------------------------
# Task-set progress


@dataclass
class TaskSetReport:
    tasks_total: int
    tasks_complete: int
    tasks_in_progress: int
    submissions: int
    mean_duration_seconds: float | None
    median_duration_seconds: float | None
    implied_hourly_pay: float | None
    agreement: dict[str, AgreementResult] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tasks_total": self.tasks_total,
            "tasks_complete": self.tasks_complete,
            "tasks_in_progress": self.tasks_in_progress,
            "submissions": self.submissions,
            "mean_duration_seconds": self.mean_duration_seconds,
            "median_duration_seconds": self.median_duration_seconds,
            "implied_hourly_pay": self.implied_hourly_pay,
            "agreement": {aid: r.to_dict() for aid, r in sorted(self.agreement.items())},
        }


@dataclass(frozen=True)
class AssignmentRow:
    task_id: str
    worker_id: str
    state: str
    started: float
    submitted: float | None
    values: dict


def task_progress(task_set: TaskSetSpec, rows: Iterable[AssignmentRow], *,
                  reward: float | None = None) -> TaskSetReport:
    rows = list(rows)
    submitted = [r for r in rows if r.state == "submitted"]
    per_task: dict[str, int] = defaultdict(int)
    touched: set[str] = set()
    for r in rows:
        touched.add(r.task_id)
    for r in submitted:
        per_task[r.task_id] += 1
    complete = sum(1 for t in task_set.tasks
                   if per_task.get(t.task_id, 0) >= task_set.redundancy)
    in_progress = sum(1 for t in task_set.tasks
                      if t.task_id in touched
                      and per_task.get(t.task_id, 0) < task_set.redundancy)
    durations = [r.submitted - r.started for r in submitted if r.submitted is not None]
    mean = sum(durations) / len(durations) if durations else None
    median = statistics.median(durations) if durations else None
    pay = None
    if reward is not None and mean:
        pay = pay_rate(mean, reward)

    agreements: dict[str, AgreementResult] = {}
    subs = [SubmissionRow(r.task_id, r.worker_id, r.submitted, r.values)
            for r in submitted]
    seen_choice_ids = set()
    for task in task_set.tasks:
        for a, _gid in task.all_annotations():
            if a.is_choice and a.id not in seen_choice_ids:
                seen_choice_ids.add(a.id)
                try:
                    agreements[a.id] = agreement(task_set, a.id, subs)
                except (InsufficientRatersError, ValueError):
                    continue
    return TaskSetReport(
        tasks_total=len(task_set.tasks),
        tasks_complete=complete,
        tasks_in_progress=in_progress,
        submissions=len(submitted),
        mean_duration_seconds=mean,
        median_duration_seconds=median,
        implied_hourly_pay=pay,
        agreement=agreements,
    )


# ---------------------------------------------------------------------------
# Plain-text rendering for the CLI


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """Aligned-column plain text."""
    cells = [[str(c) for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for i, c in enumerate(row):
            widths[i] = max(widths[i], len(c))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(headers))).rstrip(),
    ]
    for row in cells:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip())
    return "\n".join(lines)
