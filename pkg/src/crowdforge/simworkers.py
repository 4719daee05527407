"""Simulated worker populations for hermetic end-to-end runs.

Workers drive the real worker routes over an HTTP client: accept a HIT on
the mock marketplace, sit the exam (answering correctly with a
per-worker skill probability; the answer key comes from the fixture, the
server never reveals it), then attempt tasks whether or not they
qualified - which is exactly what makes the gating property testable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .conditions import ResponseState, enabled_set, settle
from .constraints import validate_submission
from .model import AnnotationDef, TaskSpec
from .parsing import parse_pipeline_spec


@dataclass(frozen=True)
class WorkerProfile:
    worker_id: str
    skill: float  # chance of answering an exam question correctly
    abandonment: float = 0.0  # chance of walking away from a leased task
    latency_seconds: float = 0.0  # simulated think time, added to the clock


@dataclass
class WorkerOutcome:
    worker_id: str
    skill: float
    exam_status: str = "none"
    attempts_used: int = 0
    best_score: float | None = None
    task_rejections: int = 0
    tasks_submitted: int = 0
    abandoned: int = 0


@dataclass
class SimulationReport:
    outcomes: dict[str, WorkerOutcome] = field(default_factory=dict)

    @property
    def passed_workers(self) -> set[str]:
        return {w for w, o in self.outcomes.items() if o.exam_status == "passed"}

    @property
    def total_task_submissions(self) -> int:
        return sum(o.tasks_submitted for o in self.outcomes.values())


def mixed_population(n: int, *, seed: int = 0, skilled_fraction: float = 0.5,
                     skilled_accuracy: float = 0.95,
                     unskilled_accuracy: float = 0.35) -> list[WorkerProfile]:
    rng = random.Random(seed)
    out = []
    for i in range(n):
        skilled = rng.random() < skilled_fraction
        out.append(WorkerProfile(
            worker_id=f"w{i:04d}",
            skill=skilled_accuracy if skilled else unskilled_accuracy,
        ))
    return out


class AutoResponder:
    """Builds a valid response for any fixture task by filling enabled
    annotations until the submission gate accepts."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self._text_counter = 0

    def respond(self, task: TaskSpec) -> ResponseState:
        state = ResponseState()
        for g in task.annotation_groups:
            if g.repeated:
                state.group_counts[g.id] = g.min if g.min is not None else 1
        for _ in range(100):
            state, _ = settle(task, state)
            enabled = enabled_set(task, state)
            progress = False
            for aid, instance in sorted(enabled):
                if state.answered(aid, instance):
                    continue
                ref = None
                for a, _gid in task.all_annotations():
                    if a.id == aid:
                        ref = a
                        break
                if ref is None:
                    continue
                if ref.optional and ref.type != "span-from-text":
                    continue
                value = self._fill(task, ref)
                if value is None:
                    continue
                state.set(aid, value, instance)
                progress = True
            if not progress:
                break
        result = validate_submission(task, state)
        if not result.accepted:
            raise AssertionError(
                f"auto-responder failed on task {task.task_id}: "
                + "; ".join(v.description for v in result.violations)
            )
        return result.state

    def _fill(self, task: TaskSpec, a: AnnotationDef):
        if a.type == "multiple-choice":
            return self.rng.choice(a.option_keys())
        if a.type == "multi-label":
            keys = list(a.option_keys())
            k = self.rng.randrange(1, len(keys) + 1)
            return sorted(self.rng.sample(keys, k))
        if a.type == "text-input":
            self._text_counter += 1
            return f"Sample response {self._text_counter} ({self.rng.randrange(10**6)})"
        if a.type == "datetime":
            return f"2020-{self.rng.randrange(1, 13):02d}-{self.rng.randrange(1, 29):02d}"
        if a.type == "span-from-text":
            return self._fill_span(task, a)
        return None

    def _fill_span(self, task: TaskSpec, a: AnnotationDef):
        ctx = task.context_by_id(a.from_context or "")
        if ctx is None:
            return None
        needed = a.min if a.min is not None else 1
        if needed == 0 and a.optional:
            return []
        needed = max(needed, 1)
        candidates = self._span_candidates(ctx.payload, a)
        if len(candidates) < needed:
            return None
        picks = self.rng.sample(candidates, needed)
        return [{"start": s, "end": e, "text": ctx.payload[s:e]} for s, e in picks]

    def _span_candidates(self, source: str, a: AnnotationDef) -> list[tuple[int, int]]:
        from . import regexlang

        patterns = [c.regex for c in a.constraints if c.type == "regex"]
        spans: list[tuple[int, int]] = []
        pos = 0
        for word in source.split(" "):
            if word:
                start = source.index(word, pos)
                token = word.strip(".,;:!?\"'()")
                if token:
                    tstart = start + word.index(token)
                    spans.append((tstart, tstart + len(token)))
                pos = start + len(word)
            else:
                pos += 1
        out = []
        for s, e in spans:
            text = source[s:e]
            if all(regexlang.full_match(p, text) for p in patterns):
                out.append((s, e))
        return out


@dataclass
class SimulatedWorker:
    profile: WorkerProfile
    rng: random.Random

    def exam_answers(self, questions: list[dict], answer_key: dict[str, str]) -> dict[str, str]:
        answers = {}
        for q in questions:
            qid = q["question_id"]
            options = list(q["question"]["options"])
            correct = answer_key.get(qid)
            if correct is not None and self.rng.random() < self.profile.skill:
                answers[qid] = correct
            else:
                wrong = [o for o in options if o != correct] or options
                answers[qid] = self.rng.choice(wrong)
        return answers


def run_population(client, connector, pipeline: str, *,
                   workers: list[WorkerProfile],
                   answer_key: dict[str, str],
                   exam_hit: str, task_hit: str,
                   seed: int = 0,
                   clock_advance=None) -> SimulationReport:
    """Drive every worker through exam attempts and then the task set.

    ``client`` is any object with ``get``/``post`` (an httpx/TestClient).
    Unqualified workers still knock on the task route; the report records
    their rejections.
    """
    report = SimulationReport()
    responder_rng = random.Random(seed ^ 0x5EED)
    responder = AutoResponder(responder_rng)

    for profile in workers:
        rng = random.Random((seed, profile.worker_id).__hash__() & 0x7FFFFFFF)
        sim = SimulatedWorker(profile, rng)
        outcome = WorkerOutcome(profile.worker_id, profile.skill)
        report.outcomes[profile.worker_id] = outcome

        # -- exam attempts until passed or locked out
        while True:
            mka = connector.accept_hit(exam_hit, profile.worker_id)
            page = client.get(f"/w/exam/{pipeline}", params={
                "assignmentId": mka, "hitId": exam_hit,
                "workerId": profile.worker_id,
                "turkSubmitTo": "https://workersandbox.mturk.invalid/submit",
            })
            if page.status_code == 403:
                outcome.exam_status = "failed-exhausted"
                break
            body = page.json()
            if body.get("status") == "passed":
                outcome.exam_status = "passed"
                break
            answers = sim.exam_answers(body["questions"], answer_key)
            if clock_advance is not None:
                clock_advance(profile.latency_seconds or 1.0)
            result = client.post(f"/w/submit/{body['submit_token']}",
                                 json={"answers": answers}).json()
            outcome.attempts_used += 1
            score = result["score"]
            outcome.best_score = max(outcome.best_score or 0.0, score)
            if result["passed"]:
                outcome.exam_status = "passed"
                break
            if result["attempts_remaining"] <= 0:
                outcome.exam_status = "failed-exhausted"
                break

        # -- task attempts, qualified or not
        while True:
            mka = connector.accept_hit(task_hit, profile.worker_id)
            page = client.get(f"/w/task/{pipeline}", params={
                "assignmentId": mka, "hitId": task_hit,
                "workerId": profile.worker_id,
                "turkSubmitTo": "https://workersandbox.mturk.invalid/submit",
            })
            if page.status_code == 403:
                outcome.task_rejections += 1
                break
            body = page.json()
            if body.get("status") == "complete":
                break
            if rng.random() < profile.abandonment:
                outcome.abandoned += 1
                break
            task_spec = parse_pipeline_spec(
                {"tasks": [body["task"]]}, "task_set").spec.tasks[0]
            state = responder.respond(task_spec)
            if clock_advance is not None:
                clock_advance(profile.latency_seconds or 1.0)
            resp = client.post(f"/w/submit/{body['submit_token']}",
                               json=state.to_wire())
            if resp.status_code != 200:
                raise AssertionError(
                    f"simulated submit failed: {resp.status_code} {resp.text}")
            outcome.tasks_submitted += 1
    return report
