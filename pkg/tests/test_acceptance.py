"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with ``pytest tests/test_acceptance.py -v -s``).

Every expected value is either taken from the source listings, computed
by an independently coded oracle inside this module, or recomputed from
raw logs; tolerances and runtime budgets are asserted explicitly.
"""

from __future__ import annotations

import itertools
import json
import random
import re as stdlib_re
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from conftest import AUTH, FakeClock, make_app

import crowdforge
from crowdforge import fixtures
from crowdforge.bundle import export_bundle, import_bundle
from crowdforge.conditions import EvalScope, ResponseState, evaluate
from crowdforge.connector import MockConnector
from crowdforge.constraints import check_regex, validate_submission
from crowdforge.errors import AttemptsExhaustedError
from crowdforge.exam import ExamEngine
from crowdforge.model import (
    ConditionAnd,
    ConditionAtom,
    ConditionNot,
    ConditionOr,
    ConstraintDef,
    ExamConfig,
    task_index,
)
from crowdforge.parsing import parse_pipeline_document, parse_pipeline_spec
from crowdforge.simworkers import mixed_population, run_population
from crowdforge.storage import AnnotationStore, KVStore


def _report(name: str, detail: str = "") -> None:
    suffix = f" ({detail})" if detail else ""
    print(f"[PASS] {name}{suffix}", flush=True)


def _load(name: str):
    result = parse_pipeline_spec(fixtures.load_text(name), "task_set")
    assert result.ok
    return result.spec


def _save_covid(store, name="covid-quantities"):
    parsed = parse_pipeline_document(fixtures.load_text("covid_pipeline"))
    assert parsed.ok
    return store.save_pipeline(
        name, instruction=parsed.instruction, tutorial=parsed.tutorial,
        exam=parsed.exam, exam_config=parsed.exam_config, task_set=parsed.task_set)


EXAM_KEY = {q["question_id"]: q["answer"]
            for q in fixtures.load_json("covid_exam")["question_set"]}


# =============================================================================
# Criterion 1: condition-engine truth-table equivalence


def _random_tree(rng, variables, depth):
    if depth == 0 or rng.random() < 0.35:
        return ConditionAtom(id=rng.choice(variables), value=rng.choice(["A", "B"]))
    kind = rng.choice(["not", "and", "or"])
    if kind == "not":
        return ConditionNot(_random_tree(rng, variables, depth - 1))
    args = tuple(_random_tree(rng, variables, depth - 1)
                 for _ in range(rng.randint(1, 3)))
    return ConditionAnd(args) if kind == "and" else ConditionOr(args)


def _oracle_source(expr) -> str:
    if isinstance(expr, ConditionAtom):
        return f"(A[{expr.id!r}] == {expr.value!r})"
    if isinstance(expr, ConditionNot):
        return f"(not {_oracle_source(expr.arg)})"
    joiner = " and " if isinstance(expr, ConditionAnd) else " or "
    return "(" + joiner.join(_oracle_source(a) for a in expr.args) + ")"


def test_c1_truth_table_equivalence():
    """1,000 random trees (depth <= 5, <= 6 vars) x all assignments,
    including unanswered, match a brute-force evaluator; < 10 s."""
    rng = random.Random(0xC04D)
    tasks = {}
    for k in range(1, 7):
        doc = {"tasks": [{"task_id": "t", "annotations": [
            {"type": "multiple-choice", "prompt": "q",
             "options": {"A": "a", "B": "b"}, "id": f"v{i}"}
            for i in range(k)]}]}
        tasks[k] = parse_pipeline_spec(json.dumps(doc), "task_set").spec.tasks[0]
    start = time.perf_counter()
    assignments_checked = 0
    for _ in range(1000):
        k = rng.randint(1, 6)
        variables = [f"v{i}" for i in range(k)]
        scope = EvalScope(task_index(tasks[k]))
        tree = _random_tree(rng, variables, rng.randint(1, 5))
        oracle = compile(_oracle_source(tree), "<oracle>", "eval")
        for combo in itertools.product(["A", "B", None], repeat=k):
            assignment = dict(zip(variables, combo))
            state = ResponseState(values={
                (v, 0): val for v, val in assignment.items() if val is not None})
            expected = eval(oracle, {"A": assignment})
            assert evaluate(tree, state, scope) == expected, (tree, assignment)
            assignments_checked += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    _report("C1 condition truth-table equivalence",
            f"1000 trees, {assignments_checked} assignments, {elapsed:.1f}s")


# =============================================================================
# Criterion 2: paper regex fixtures bit-exact


def test_c2_regex_fixtures_bit_exact():
    start_constraint = ConstraintDef(
        type="regex",
        description="The quantity should only start with digits or letters.",
        regex=r"^[\w\d].*$")
    violation = check_regex(start_constraint, " 294")
    assert violation is not None
    assert violation.description == \
        "The quantity should only start with digits or letters."
    assert check_regex(start_constraint, "294") is None

    length = ConstraintDef(
        type="regex",
        description="The length of your selection should be within 1 and 30.",
        regex=r"^.{1,30}$")
    for k in range(0, 41):
        expected_ok = 1 <= k <= 30
        got_ok = check_regex(length, "x" * k) is None
        assert got_ok == expected_ok, k
    assert check_regex(length, "x" * 31) is not None
    _report("C2 paper regex fixtures bit-exact",
            "' 294' message exact; 0..40 length sweep")


# =============================================================================
# Criteria 3 + 4: exam lifecycle under the two configurations


def _exam_lifecycle(pool_size: int, sample_size: int, max_attempts: int,
                    participants: int, label: str) -> None:
    from scipy.stats import chisquare

    pool = [f"q{i:02d}" for i in range(pool_size)]
    questions = {}
    doc_questions = []
    for qid in pool:
        doc_questions.append({
            "type": "multiple-choice", "question_id": qid,
            "question": {"question_text": qid, "options": {"A": "a", "B": "b"}},
            "answer": "A", "explanation": {}})
    qs = parse_pipeline_spec(json.dumps({"question_set": doc_questions}),
                             "exam").spec
    questions = {q.question_id: q for q in qs.questions}
    config = ExamConfig(sample_size=sample_size, passing_score=0.8,
                        max_attempts=max_attempts)
    clock = FakeClock()
    store = AnnotationStore(KVStore(), secret=b"lifecycle", clock=clock)
    engine = ExamEngine(store)
    rng = random.Random(20200520)

    start = time.perf_counter()
    inclusion = Counter()
    graded = 0
    for p in range(participants):
        participant = f"p{p:04d}"
        skill = rng.choice([0.95, 0.8, 0.5])
        for _ in range(max_attempts):
            try:
                attempt = engine.open_attempt("exam", 1, config, pool, participant)
            except AttemptsExhaustedError:
                break
            # every attempt: exactly sample_size distinct pool members
            assert len(attempt.sampled) == sample_size
            assert len(set(attempt.sampled)) == sample_size
            assert set(attempt.sampled) <= set(pool)
            inclusion.update(attempt.sampled)
            answers = {}
            for qid in attempt.sampled:
                good = rng.random() < skill
                answers[qid] = "A" if good else "B"
            clock.advance(1)
            result, session = engine.grade("exam", 1, config, questions,
                                           participant, attempt.index, answers)
            graded += 1
            # independent recompute of the strict-greater rule
            correct = sum(1 for qid in attempt.sampled if answers[qid] == "A")
            assert result.score == correct / sample_size
            assert result.passed == (correct / sample_size > 0.8)
            if result.passed:
                break
        session = engine.load_session("exam", 1, participant)
        assert len(session.attempts) <= max_attempts
        if session.status != "passed":
            with pytest.raises(AttemptsExhaustedError):
                engine.open_attempt("exam", 1, config, pool, participant)

    # no participant records an attempt beyond max_attempts
    for _, doc in store.kv.items("session/exam/"):
        assert len(doc["attempts"]) <= max_attempts

    counts = [inclusion[qid] for qid in pool]
    result = chisquare(counts)
    assert result.pvalue > 0.01, f"chi-square p={result.pvalue:.4f}"
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"took {elapsed:.1f}s"
    _report(label,
            f"{participants} participants, {graded} graded attempts, "
            f"chi2 p={result.pvalue:.3f}, {elapsed:.1f}s")


def test_c3_exam_lifecycle_pool20_sample10_3chances():
    _exam_lifecycle(20, 10, 3, 500,
                    "C3 exam lifecycle (pool 20, sample 10, >80%, 3 chances)")


def test_c4_exam_lifecycle_pool8_sample5_2chances():
    _exam_lifecycle(8, 5, 2, 500,
                    "C4 exam lifecycle variant (pool 8, sample 5, 2 chances)")


# =============================================================================
# Criterion 5: submission gate vs independent oracle (COVID + DROP)


def _covid_random_state(rng, snippet):
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
    snippet = task.contexts[1].payload
    count = state.group_counts.get("quantity_extraction_typing", 0)
    if not 1 <= count <= 3:
        return False
    for i in range(count):
        spans = state.values.get(("quantity", i))
        if not spans or len(spans) != 1:
            return False
        for span in spans:
            s, e = span.get("start"), span.get("end")
            if not (isinstance(s, int) and isinstance(e, int)
                    and 0 <= s < e <= len(snippet)):
                return False
            text = snippet[s:e]
            if not stdlib_re.fullmatch(r"[\w\d].*", text):
                return False
            if not (1 <= len(text) <= 30):
                return False
        relevance = state.values.get(("relevance", i))
        if relevance not in ("A", "B"):
            return False
        if relevance == "A" and state.values.get(("typing", i)) not in \
                ("A", "B", "C", "D"):
            return False
    return True


_DATE_RE = stdlib_re.compile(r"(\d{4})-(\d{2})-(\d{2})$")
_DAYS = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31]


def _oracle_valid_date(value: str) -> bool:
    m = _DATE_RE.match(value)
    if not m:
        return False
    year, month, day = int(m.group(1)), int(m.group(2)), int(m.group(3))
    if not 1 <= month <= 12:
        return False
    days = _DAYS[month - 1]
    if month == 2 and (year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)):
        days = 29
    return 1 <= day <= days


_DATE_POOL = ["2020-05-20", "2020-02-29", "2021-02-29", "2020-13-01",
              "2020-00-10", "not-a-date", "2020-06-31", "1999-12-31"]
_NUMBER_POOL = ["42", "3.14", "-7", "0", "x42", " 42", "", "12.", "out of four"]


_VALID_NUMBERS = ["42", "3.14", "-7", "0"]
_VALID_DATES = ["2020-05-20", "2020-02-29", "1999-12-31"]


def _drop_random_state(rng, task):
    """A valid DROP response with 0-3 random corruptions injected, so the
    generator exercises both accept and every reject path."""
    passage = task.contexts[0].payload
    count = rng.randint(12, 15)
    state = ResponseState(group_counts={"question_writing": count})
    for i in range(count):
        state.set("question",
                  f"How many points in part {i} ({rng.randrange(10**6)})?", i)
        at = rng.choice(["A", "B", "C"])
        state.set("answer_type", at, i)
        if at == "A":
            state.set("number_answer", rng.choice(_VALID_NUMBERS), i)
        elif at == "B":
            state.set("date_answer", rng.choice(_VALID_DATES), i)
        else:
            s = rng.randrange(0, len(passage) - 1)
            e = min(len(passage), s + rng.randint(1, 12))
            state.set("span_answer", [{"start": s, "end": e}], i)
        if rng.random() < 0.1:  # stale disabled answer; settle must clear it
            other = {"A": "date_answer", "B": "span_answer",
                     "C": "number_answer"}[at]
            stale = {"date_answer": "2020-01-01", "number_answer": "5",
                     "span_answer": [{"start": 0, "end": 3}]}[other]
            state.set(other, stale, i)
    for _ in range(rng.choice([0, 0, 1, 1, 2, 3])):
        _corrupt_drop_state(rng, state, passage, count)
    return state


def _corrupt_drop_state(rng, state, passage, count):
    i = rng.randrange(count)
    kind = rng.randrange(7)
    if kind == 0:
        state.group_counts["question_writing"] = rng.choice([0, 5, 11, 31, 40])
    elif kind == 1:
        state.values.pop(("question", i), None)
    elif kind == 2 and count >= 2:
        state.set("question", state.get("question", (i + 1) % count), i)
    elif kind == 3:
        state.values.pop(("answer_type", i), None)
    elif kind == 4:
        state.set("answer_type", "A", i)
        state.set("number_answer", rng.choice(["x42", " 42", "", "12."]), i)
    elif kind == 5:
        state.set("answer_type", "B", i)
        state.set("date_answer",
                  rng.choice(["2021-02-29", "2020-13-01", "not-a-date",
                              "2020-06-31"]), i)
    else:
        state.set("answer_type", "C", i)
        bad = rng.choice([
            [],
            [{"start": len(passage), "end": len(passage) + 4}],
            [{"start": 5, "end": 5}],
            [{"start": -1, "end": 4}],
        ])
        state.set("span_answer", bad, i)


def _drop_oracle(task, state) -> bool:
    passage = task.contexts[0].payload
    count = state.group_counts.get("question_writing", 0)
    if not 12 <= count <= 30:
        return False
    questions = []
    for i in range(count):
        q = state.values.get(("question", i))
        if not isinstance(q, str) or not q:
            return False
        questions.append(q)
        at = state.values.get(("answer_type", i))
        if at not in ("A", "B", "C"):
            return False
        if at == "A":
            number = state.values.get(("number_answer", i))
            if not isinstance(number, str) or not number:
                return False
            if not stdlib_re.fullmatch(r"-?[0-9]+(\.[0-9]+)?", number):
                return False
        elif at == "B":
            date = state.values.get(("date_answer", i))
            if not isinstance(date, str) or not _oracle_valid_date(date):
                return False
        else:
            spans = state.values.get(("span_answer", i))
            if not isinstance(spans, list) or len(spans) < 1:
                return False
            for span in spans:
                s, e = span.get("start"), span.get("end")
                if not (isinstance(s, int) and isinstance(e, int)
                        and 0 <= s < e <= len(passage)):
                    return False
    if len(set(questions)) != len(questions):
        return False
    return True


def test_c5_submission_gate_matches_oracle():
    """10,000 randomized response states across the two fixtures: gate
    accepts exactly when the independently coded oracle accepts."""
    covid = _load("covid_taskset").tasks[0]
    drop = _load("drop_taskset").tasks[0]
    snippet = covid.contexts[1].payload
    rng = random.Random(0x5AFE)
    accepted = 0
    for i in range(5000):
        state = _covid_random_state(rng, snippet)
        got = validate_submission(covid, state).accepted
        want = _covid_oracle(covid, state)
        assert got == want, (i, state.values, state.group_counts)
        accepted += got
    drop_accepted = 0
    for i in range(5000):
        state = _drop_random_state(rng, drop)
        got = validate_submission(drop, state).accepted
        want = _drop_oracle(drop, state)
        assert got == want, (i, state.values, state.group_counts)
        drop_accepted += got
    assert accepted > 0 and drop_accepted > 0
    assert accepted < 5000 and drop_accepted < 5000
    _report("C5 submission gate == independent oracle",
            f"10000 states, covid accepts {accepted}/5000, "
            f"drop accepts {drop_accepted}/5000")


# =============================================================================
# Criterion 6: qualification gating airtight (end-to-end, 100 workers)


def test_c6_gating_airtight_100_workers():
    clock = FakeClock()
    store = AnnotationStore(KVStore(), secret=b"gate", clock=clock)
    connector = MockConnector(seed=99)
    app, _ = make_app(store, connector)
    with TestClient(app) as client:
        r = client.put("/api/v1/pipelines/covid-quantities",
                       content=fixtures.load_text("covid_pipeline"), headers=AUTH)
        assert r.status_code == 200, r.text
        exam = client.post("/api/v1/pipelines/covid-quantities/launch",
                           headers=AUTH,
                           json={"kind": "exam", "reward": 0.5,
                                 "count": 100}).json()
        ts = client.post("/api/v1/pipelines/covid-quantities/launch",
                         headers=AUTH,
                         json={"kind": "taskset", "reward": 1.0,
                               "count": 9}).json()
        workers = mixed_population(100, seed=17, skilled_fraction=0.45)
        report = run_population(
            client, connector, "covid-quantities", workers=workers,
            answer_key=EXAM_KEY, exam_hit=exam["hit_ids"][0],
            task_hit=ts["hit_ids"][0], seed=17, clock_advance=clock.advance)

        passed = report.passed_workers
        assert 0 < len(passed) < 100
        submitted_by = {a.worker_id for a in store.assignments("covid-quantities")
                        if a.state == "submitted"}
        leaked = submitted_by - passed
        assert leaked == set(), f"unqualified submissions from {leaked}"

        rep = client.get("/api/v1/pipelines/covid-quantities/report",
                         headers=AUTH).json()
        sessions = [s for _, s in store.kv.items("session/covid-quantities/")]
        graded = sum(1 for s in sessions for a in s["attempts"]
                     if a["submitted"] is not None)
        assert sum(rep["exam"]["histogram"].values()) == graded

        # per-question error rates equal a full-rescan recount
        for qid, stats in rep["exam"]["questions"].items():
            shown = errors = 0
            for s in sessions:
                for a in s["attempts"]:
                    if a["submitted"] is None or qid not in a["sampled"]:
                        continue
                    shown += 1
                    if a["answers"].get(qid) != EXAM_KEY[qid]:
                        errors += 1
            assert stats["shown"] == shown, qid
            assert stats["errors"] == errors, qid
            expected_rate = errors / shown if shown else 0.0
            assert abs(stats["error_rate"] - expected_rate) < 1e-12
    _report("C6 qualification gating airtight",
            f"{len(passed)}/100 passed, {len(submitted_by)} submitters, "
            f"{graded} graded attempts, 0 leaks")


# =============================================================================
# Criterion 7: agreement metrics


def test_c7_agreement_metrics():
    from crowdforge.analytics import fleiss_kappa

    # perfect copies: kappa exactly 1.0
    rng = random.Random(4)
    table = []
    for _ in range(200):
        row = [0, 0, 0]
        row[rng.randrange(3)] = 4  # 4 raters all copying rater 1
        table.append(row)
    assert fleiss_kappa(table) == 1.0

    # independent uniform raters over 10,000 binary tasks: kappa within 0.05
    rng = random.Random(0xA66E)
    table = []
    for _ in range(10_000):
        a, b = rng.randrange(2), rng.randrange(2)
        row = [0, 0]
        row[a] += 1
        row[b] += 1
        table.append(row)
    kappa = fleiss_kappa(table)
    assert abs(kappa) <= 0.05, kappa

    # hand-computed 3-rater, 2-category table:
    # rows [3,0],[2,1],[1,2],[0,3]; P = (1, 1/3, 1/3, 1); P-bar = 2/3
    # p_j = (1/2, 1/2) => P_e = 1/2; kappa = (2/3 - 1/2) / (1 - 1/2) = 1/3
    hand = fleiss_kappa([[3, 0], [2, 1], [1, 2], [0, 3]])
    assert abs(hand - (1 / 3)) < 1e-9
    _report("C7 agreement metrics",
            f"copy kappa=1.0 exact, independent kappa={kappa:+.4f}, "
            f"hand table matches 1/3 to 1e-9")


# =============================================================================
# Criterion 8: reproducibility round trip


def test_c8_reproducibility_round_trip():
    secret = b"replay-secret"
    clock = FakeClock()
    store_a = AnnotationStore(KVStore(), secret=secret, clock=clock)
    record = _save_covid(store_a)
    config = record.exam_config()
    pool_a = [q.question_id for q in record.exam().questions]
    engine_a = ExamEngine(store_a)

    participants = [f"p{i}" for i in range(10)]
    samples_a = {}
    for p in participants:
        for attempt_index in (1, 2):
            attempt = engine_a.open_attempt("covid-quantities", record.version,
                                            config, pool_a, p)
            samples_a[(p, attempt.index)] = list(attempt.sampled)

    data = export_bundle(record)
    store_b = AnnotationStore(KVStore(), secret=secret, clock=clock)
    imported = import_bundle(store_b, data, "covid-relaunch")
    assert imported.version == record.version
    # canonical spec bytes identical after the round trip
    assert imported.taskset_doc == record.taskset_doc
    assert imported.exam_doc == record.exam_doc
    assert imported.tutorial_doc == record.tutorial_doc
    assert imported.exam_config_doc == record.exam_config_doc
    assert export_bundle(imported) == data

    engine_b = ExamEngine(store_b)
    pool_b = [q.question_id for q in imported.exam().questions]
    for p in participants:
        for attempt_index in (1, 2):
            attempt = engine_b.open_attempt("covid-relaunch", imported.version,
                                            imported.exam_config(), pool_b, p)
            assert list(attempt.sampled) == samples_a[(p, attempt.index)], \
                (p, attempt.index)

    # parse/canonicalize round trip on all 8 fixture specs
    for name in fixtures.TASK_SET_FIXTURES:
        first = parse_pipeline_spec(fixtures.load_text(name), "task_set")
        assert first.ok, name
        text = crowdforge.canonicalize(first.spec)
        second = parse_pipeline_spec(text, "task_set")
        assert second.ok and second.spec == first.spec, name
        assert crowdforge.canonicalize(second.spec) == text, name
    _report("C8 reproducibility round trip",
            f"{len(samples_a)} (participant, attempt) samples identical; "
            f"{len(fixtures.TASK_SET_FIXTURES)} fixtures round-trip")


# =============================================================================
# Criterion 9: concurrency caps


def test_c9_concurrency_caps():
    # 64 parallel open_attempt calls, max_attempts=3 -> exactly 3 succeed
    store = AnnotationStore(KVStore(), secret=b"conc", clock=FakeClock())
    record = _save_covid(store)
    config = record.exam_config()
    pool = [q.question_id for q in record.exam().questions]
    engine = ExamEngine(store)
    outcomes = []

    def try_open(_):
        try:
            outcomes.append(engine.open_attempt("covid-quantities",
                                                record.version, config, pool,
                                                "racer"))
        except AttemptsExhaustedError:
            pass

    with ThreadPoolExecutor(max_workers=32) as pool_exec:
        list(pool_exec.map(try_open, range(64)))
    assert len(outcomes) == 3
    assert sorted(a.index for a in outcomes) == [1, 2, 3]
    session = engine.load_session("covid-quantities", record.version, "racer")
    assert len(session.attempts) == 3

    # 64 parallel leases on a redundancy-3 task -> exactly 3 eventual submissions
    clock = FakeClock()
    store2 = AnnotationStore(KVStore(), secret=b"conc2", clock=clock)
    record2 = _save_covid(store2)
    task = record2.task_set().tasks[0]
    snippet = task.contexts[1].payload
    match = stdlib_re.search(r"\d+", snippet)
    leases = []

    def try_lease(i):
        a = store2.next_assignment("covid-quantities", f"w{i}")
        if a is not None and a.task_id == task.task_id:
            leases.append(a)

    with ThreadPoolExecutor(max_workers=32) as pool_exec:
        list(pool_exec.map(try_lease, range(64)))

    submissions = 0
    for a in leases:
        state = ResponseState(group_counts={"quantity_extraction_typing": 1})
        state.set("quantity", [{"start": match.start(), "end": match.end()}])
        state.set("relevance", "A")
        state.set("typing", "A")
        clock.advance(1)
        if store2.submit_assignment(a.assignment_id, state).accepted:
            submissions += 1
    recount = sum(1 for x in store2.assignments("covid-quantities")
                  if x.state == "submitted" and x.task_id == task.task_id)
    assert submissions == 3 == recount
    _report("C9 concurrency caps",
            "64 opens -> 3 attempts; 64 leases -> 3 submissions")
