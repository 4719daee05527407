"""Qualification exams and tutorials: sampling, grading, attempt accounting.

Each attempt sees a fresh uniform sample of the question pool, drawn from
a seed derived from (exam version, participant, attempt index, server
secret) so a downloaded pipeline replays exam behavior exactly.
Participants learn their mistake count and pass/fail only, never
per-question results.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import (
    AlreadyPassedError,
    AlreadySubmittedError,
    AttemptsExhaustedError,
    CrowdforgeError,
    InvalidOptionError,
)
from .model import ExamConfig, McQuestion

STATUS_NONE = "none"
STATUS_IN_PROGRESS = "in-progress"
STATUS_PASSED = "passed"
STATUS_FAILED = "failed-exhausted"


@dataclass
class Attempt:
    index: int  # 1-based
    sampled: tuple[str, ...]
    seed: str  # hex, recorded for replay
    started: float
    answers: dict[str, str] = field(default_factory=dict)
    score: float | None = None
    passed: bool | None = None
    mistakes: int | None = None
    submitted: float | None = None

    @property
    def graded(self) -> bool:
        return self.submitted is not None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "sampled": list(self.sampled),
            "seed": self.seed,
            "started": self.started,
            "answers": dict(self.answers),
            "score": self.score,
            "passed": self.passed,
            "mistakes": self.mistakes,
            "submitted": self.submitted,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Attempt":
        return cls(
            index=doc["index"],
            sampled=tuple(doc["sampled"]),
            seed=doc["seed"],
            started=doc["started"],
            answers=dict(doc.get("answers", {})),
            score=doc.get("score"),
            passed=doc.get("passed"),
            mistakes=doc.get("mistakes"),
            submitted=doc.get("submitted"),
        )


@dataclass
class ExamSession:
    exam_name: str
    exam_version: int
    participant: str
    attempts: list[Attempt] = field(default_factory=list)
    status: str = STATUS_IN_PROGRESS

    def open_attempt_record(self) -> Attempt | None:
        for a in self.attempts:
            if not a.graded:
                return a
        return None

    def to_dict(self) -> dict:
        return {
            "exam_name": self.exam_name,
            "exam_version": self.exam_version,
            "participant": self.participant,
            "attempts": [a.to_dict() for a in self.attempts],
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExamSession":
        return cls(
            exam_name=doc["exam_name"],
            exam_version=doc["exam_version"],
            participant=doc["participant"],
            attempts=[Attempt.from_dict(a) for a in doc.get("attempts", [])],
            status=doc.get("status", STATUS_IN_PROGRESS),
        )


def derive_seed(secret: bytes, exam_version: int, participant: str,
                attempt_index: int) -> bytes:
    msg = f"{exam_version}:{participant}:{attempt_index}".encode()
    return hmac.new(secret, msg, hashlib.sha256).digest()


def sample_questions(pool: Sequence[str], n: int, seed: bytes) -> list[str]:
    """Uniform sample without replacement, deterministic for a given seed."""
    if not 1 <= n <= len(pool):
        raise ValueError(f"sample size {n} outside 1..{len(pool)}")
    rng = random.Random(seed)
    return rng.sample(list(pool), n)


@dataclass(frozen=True)
class GradeResult:
    score: float
    passed: bool
    mistakes: int


def grade_attempt(answers: Mapping[str, str], sampled: Sequence[str],
                  questions: Mapping[str, McQuestion],
                  config: ExamConfig) -> GradeResult:
    """Score is correct/sample-size; missing answers count as mistakes.

    Raises when an answer names an option the question does not have, or
    a question outside the sampled set.
    """
    sampled_set = set(sampled)
    for qid in answers:
        if qid not in sampled_set:
            raise CrowdforgeError(
                f"answer for {qid!r} which is not part of this attempt",
                code="unknown-question",
            )
    correct = 0
    for qid in sampled:
        q = questions[qid]
        choice = answers.get(qid)
        if choice is None:
            continue
        if choice not in q.option_keys():
            raise InvalidOptionError(
                f"{choice!r} is not an option of question {qid!r}"
            )
        if choice == q.answer:
            correct += 1
    score = correct / len(sampled)
    return GradeResult(score=score, passed=config.passes(score),
                       mistakes=len(sampled) - correct)


def check_tutorial_answer(question: McQuestion, choice: str) -> tuple[bool, str]:
    """Immediate tutorial feedback: correctness plus the option's explanation."""
    if choice not in question.option_keys():
        raise InvalidOptionError(
            f"{choice!r} is not an option of question {question.question_id!r}"
        )
    return choice == question.answer, question.explanation_for(choice)


def session_status(session: ExamSession | None, config: ExamConfig) -> str:
    if session is None or not session.attempts:
        return STATUS_NONE if session is None else STATUS_IN_PROGRESS
    if any(a.passed for a in session.attempts):
        return STATUS_PASSED
    if (len(session.attempts) >= config.max_attempts
            and all(a.graded for a in session.attempts)):
        return STATUS_FAILED
    return STATUS_IN_PROGRESS


class ExamEngine:
    """Session manager: serializes attempt state per (exam, participant).

    Persistence and locking are delegated to the annotation store; grading
    and sampling stay pure.
    """

    def __init__(self, store):
        self.store = store

    def _key(self, exam_name: str, version: int, participant: str) -> str:
        return f"session/{exam_name}/v{version}/{participant}"

    def load_session(self, exam_name: str, version: int,
                     participant: str) -> ExamSession | None:
        doc = self.store.kv.get(self._key(exam_name, version, participant))
        return ExamSession.from_dict(doc) if doc is not None else None

    def _save(self, session: ExamSession) -> None:
        self.store.kv.put(
            self._key(session.exam_name, session.exam_version, session.participant),
            session.to_dict(),
        )

    def sessions(self, exam_name: str, version: int) -> list[ExamSession]:
        prefix = f"session/{exam_name}/v{version}/"
        return [ExamSession.from_dict(v) for _, v in self.store.kv.items(prefix)]

    def open_attempt(self, exam_name: str, version: int, config: ExamConfig,
                     pool: Sequence[str], participant: str) -> Attempt:
        """Atomically claim the next attempt slot; at most ``max_attempts``
        opens ever succeed for one participant, however racy the calls."""
        with self.store.locks.lock(("session", exam_name, version, participant)):
            session = self.load_session(exam_name, version, participant)
            if session is None:
                session = ExamSession(exam_name, version, participant)
            if session.status == STATUS_PASSED:
                raise AlreadyPassedError("exam already passed")
            if len(session.attempts) >= config.max_attempts:
                raise AttemptsExhaustedError(
                    f"all {config.max_attempts} attempts have been used"
                )
            index = len(session.attempts) + 1
            seed = derive_seed(self.store.secret, version, participant, index)
            sampled = sample_questions(pool, config.sample_size, seed)
            attempt = Attempt(index=index, sampled=tuple(sampled), seed=seed.hex(),
                              started=self.store.clock())
            session.attempts.append(attempt)
            self._save(session)
            return attempt

    def current_or_open_attempt(self, exam_name: str, version: int,
                                config: ExamConfig, pool: Sequence[str],
                                participant: str) -> Attempt:
        """Re-serve an un-submitted attempt rather than burning a slot
        (page reloads must not consume chances)."""
        with self.store.locks.lock(("session", exam_name, version, participant)):
            session = self.load_session(exam_name, version, participant)
            if session is not None:
                if session.status == STATUS_PASSED:
                    raise AlreadyPassedError("exam already passed")
                open_attempt = session.open_attempt_record()
                if open_attempt is not None:
                    return open_attempt
        return self.open_attempt(exam_name, version, config, pool, participant)

    def grade(self, exam_name: str, version: int, config: ExamConfig,
              questions: Mapping[str, McQuestion], participant: str,
              attempt_index: int, answers: Mapping[str, str]) -> tuple[GradeResult, ExamSession]:
        with self.store.locks.lock(("session", exam_name, version, participant)):
            session = self.load_session(exam_name, version, participant)
            if session is None or not 1 <= attempt_index <= len(session.attempts):
                raise CrowdforgeError("no such attempt", code="unknown-attempt")
            attempt = session.attempts[attempt_index - 1]
            if attempt.graded:
                raise AlreadySubmittedError("attempt already graded")
            result = grade_attempt(answers, attempt.sampled, questions, config)
            attempt.answers = dict(answers)
            attempt.score = result.score
            attempt.passed = result.passed
            attempt.mistakes = result.mistakes
            attempt.submitted = self.store.clock()
            session.status = session_status(session, config)
            self._save(session)
            return result, session

    def qualification_status(self, exam_name: str, version: int,
                             config: ExamConfig, participant: str) -> str:
        return session_status(
            self.load_session(exam_name, version, participant), config
        )


def pool_question_ids(questions: Iterable[McQuestion]) -> list[str]:
    return [q.question_id for q in questions]
