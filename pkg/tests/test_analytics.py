"""Reports, pay rate, and inter-annotator agreement."""

from __future__ import annotations

import random

import pytest

from crowdforge import fixtures, parse_pipeline_spec
from crowdforge.analytics import (
    AssignmentRow,
    InsufficientRatersError,
    SubmissionRow,
    agreement,
    agreement_from_rows,
    exam_report,
    fleiss_kappa,
    format_table,
    pay_rate,
    percent_agreement,
    task_progress,
    LabelRow,
)
from crowdforge.exam import Attempt, ExamSession


def _session(participant, scores, sampled_sets, answers_list, status="in-progress"):
    attempts = []
    for i, (score, sampled, answers) in enumerate(
            zip(scores, sampled_sets, answers_list), start=1):
        attempts.append(Attempt(
            index=i, sampled=tuple(sampled), seed="00", started=float(i),
            answers=answers, score=score, passed=score > 0.8,
            mistakes=round((1 - score) * len(sampled)), submitted=float(i) + 1))
    return ExamSession("e", 1, participant, attempts, status)


QUESTIONS = {
    q.question_id: q
    for q in parse_pipeline_spec(fixtures.load_text("covid_exam"), "exam")
    .spec.questions
}


class TestExamReport:
    def test_histogram_counts_exact_scores(self):
        qids = list(QUESTIONS)[:10]
        answers = {qid: QUESTIONS[qid].answer for qid in qids}
        sessions = [
            _session("p1", [0.9, 0.9], [qids, qids], [answers, answers]),
            _session("p2", [0.6], [qids], [answers]),
        ]
        report = exam_report(sessions, QUESTIONS)
        assert report.histogram == {0.9: 2, 0.6: 1}
        assert report.graded_attempts == 3

    def test_error_rate_quarter(self):
        qid = list(QUESTIONS)[0]
        q = QUESTIONS[qid]
        wrong = next(k for k in q.option_keys() if k != q.answer)
        sessions = []
        for i, choice in enumerate([q.answer, q.answer, q.answer, wrong]):
            sessions.append(_session(f"p{i}", [1.0], [[qid]], [{qid: choice}]))
        report = exam_report(sessions, QUESTIONS)
        stats = report.questions[qid]
        assert stats.shown == 4
        assert stats.errors == 1
        assert stats.error_rate == 0.25
        assert stats.answer_counts[q.answer] == 3

    def test_totals_match_full_rescan(self):
        rng = random.Random(3)
        qids = list(QUESTIONS)
        sessions = []
        for p in range(20):
            attempts = rng.randint(0, 3)
            scores, samples, answers = [], [], []
            for _ in range(attempts):
                sampled = rng.sample(qids, 10)
                ans = {qid: rng.choice(QUESTIONS[qid].option_keys())
                       for qid in sampled}
                correct = sum(1 for qid in sampled
                              if ans[qid] == QUESTIONS[qid].answer)
                scores.append(correct / 10)
                samples.append(sampled)
                answers.append(ans)
            sessions.append(_session(f"p{p}", scores, samples, answers))
        report = exam_report(sessions, QUESTIONS)
        # oracle: rescan the raw attempt log
        raw_graded = sum(len(s.attempts) for s in sessions)
        assert report.graded_attempts == raw_graded
        assert sum(report.histogram.values()) == raw_graded
        for qid, stats in report.questions.items():
            shown = sum(1 for s in sessions for a in s.attempts
                        if qid in a.sampled)
            errors = sum(1 for s in sessions for a in s.attempts
                         if qid in a.sampled
                         and a.answers.get(qid) != QUESTIONS[qid].answer)
            assert stats.shown == shown
            assert stats.errors == errors
            assert 0.0 <= stats.error_rate <= 1.0


class TestPayRate:
    def test_two_minute_task_at_fifty_cents(self):
        assert pay_rate(120, 0.50) == 15.00

    def test_hour_task_at_a_dollar(self):
        assert pay_rate(3600, 1.00) == 1.00

    def test_zero_duration_rejected(self):
        with pytest.raises(ValueError):
            pay_rate(0, 0.5)
        with pytest.raises(ValueError):
            pay_rate(-3, 0.5)


class TestFleissKappa:
    def test_perfect_agreement_exactly_one(self):
        table = [[3, 0], [0, 3], [3, 0], [0, 3]]
        assert fleiss_kappa(table) == 1.0

    def test_single_category_degenerate(self):
        assert fleiss_kappa([[2, 0], [2, 0]]) == 1.0

    def test_hand_computed_three_rater_table(self):
        # 4 subjects, 3 raters, 2 categories; per-subject counts below.
        # P_i = ([9-3]/6, [5-3]/6, [5-3]/6, [9-3]/6) = (1, 1/3, 1/3, 1)
        # P-bar = 2/3; p = (1/2, 1/2); P_e = 1/2; kappa = (2/3-1/2)/(1/2) = 1/3
        table = [[3, 0], [2, 1], [1, 2], [0, 3]]
        assert abs(fleiss_kappa(table) - (1 / 3)) < 1e-9

    def test_independent_raters_near_zero(self):
        rng = random.Random(12345)
        table = []
        for _ in range(10_000):
            a, b = rng.randrange(2), rng.randrange(2)
            row = [0, 0]
            row[a] += 1
            row[b] += 1
            table.append(row)
        assert abs(fleiss_kappa(table)) < 0.05

    def test_unequal_rows_rejected(self):
        with pytest.raises(ValueError):
            fleiss_kappa([[2, 0], [2, 1]])


@pytest.fixture(scope="module")
def acceptability():
    return parse_pipeline_spec(
        fixtures.load_text("acceptability_taskset"), "task_set").spec


class TestAgreementOverSubmissions:
    def _subs(self, labels_by_worker, tasks):
        subs = []
        for t, task in enumerate(tasks):
            for i, (worker, labels) in enumerate(labels_by_worker.items()):
                subs.append(SubmissionRow(
                    task_id=task, worker_id=worker, submitted=float(i),
                    values={"preference": {"0": labels[t]}}))
        return subs

    def test_identical_raters_perfect(self, acceptability):
        tasks = [t.task_id for t in acceptability.tasks]
        labels = {"w1": ["A", "B"], "w2": ["A", "B"]}
        result = agreement(acceptability, "preference", self._subs(labels, tasks))
        assert result.percent_agreement == 1.0
        assert result.kappa == 1.0

    def test_downsampling_to_earliest(self, acceptability):
        tasks = [t.task_id for t in acceptability.tasks]
        subs = self._subs({"w1": ["A", "A"], "w2": ["A", "A"]}, tasks)
        # a third, later rater disagrees on task 1 only
        subs.append(SubmissionRow("acc-1", "w3", submitted=99.0,
                                  values={"preference": {"0": "B"}}))
        result = agreement(acceptability, "preference", subs)
        # kappa table downsampled to 2 earliest raters everywhere -> perfect
        assert result.raters_per_subject == 2
        assert result.kappa == 1.0
        assert result.percent_agreement < 1.0  # percent sees all raters

    def test_multi_label_binary_expansion(self):
        spec = parse_pipeline_spec(fixtures.load_text("vqae_taskset"),
                                   "task_set").spec
        subs = []
        for w in ("w1", "w2"):
            subs.append(SubmissionRow("vqae-1", w, submitted=1.0,
                                      values={"unrelated_nouns": {"0": ["beach"]}}))
        result = agreement(spec, "unrelated_nouns", subs)
        assert result.kappa == 1.0
        assert result.subjects == 4  # one per option key

    def test_non_choice_annotation_rejected(self, covid_task_set):
        with pytest.raises(ValueError):
            agreement(covid_task_set, "quantity", [])

    def test_fewer_than_two_raters_everywhere(self, acceptability):
        subs = [SubmissionRow("acc-1", "w1", 1.0,
                              {"preference": {"0": "A"}})]
        with pytest.raises(InsufficientRatersError):
            agreement(acceptability, "preference", subs)

    def test_copycat_raters_kappa_exactly_one(self, acceptability):
        rng = random.Random(9)
        tasks = [t.task_id for t in acceptability.tasks]
        first = {t: rng.choice(["A", "B"]) for t in tasks}
        subs = []
        for w in ("w1", "w2", "w3", "w4"):
            for t in tasks:
                subs.append(SubmissionRow(t, w, 1.0,
                                          {"preference": {"0": first[t]}}))
        assert agreement(acceptability, "preference", subs).kappa == 1.0


class TestPercentAgreement:
    def test_pairwise_fraction(self):
        assert percent_agreement([["A", "A", "B"]]) == pytest.approx(1 / 3)
        assert percent_agreement([["A", "A"], ["A", "B"]]) == pytest.approx(0.5)

    def test_rows_api(self):
        rows = [LabelRow(("t", 0), (1.0, "w1"), "A"),
                LabelRow(("t", 0), (2.0, "w2"), "A")]
        result = agreement_from_rows(rows)
        assert result.kappa == 1.0 and result.subjects == 1


class TestTaskProgress:
    def test_counts(self, covid_task_set):
        rows = [
            AssignmentRow("covid-1", "w1", "submitted", 0.0, 60.0, {}),
            AssignmentRow("covid-1", "w2", "submitted", 0.0, 120.0, {}),
            AssignmentRow("covid-1", "w3", "submitted", 0.0, 180.0, {}),
            AssignmentRow("covid-2", "w1", "leased", 0.0, None, {}),
        ]
        report = task_progress(covid_task_set, rows, reward=0.50)
        assert report.tasks_total == 3
        assert report.tasks_complete == 1  # redundancy 3 met on covid-1
        assert report.tasks_in_progress == 1
        assert report.submissions == 3
        assert report.mean_duration_seconds == 120.0
        assert report.median_duration_seconds == 120.0
        assert report.implied_hourly_pay == 15.0

    def test_progress_matches_recount(self, covid_task_set):
        rng = random.Random(6)
        rows = []
        for t in covid_task_set.tasks:
            for w in range(rng.randint(0, 4)):
                submitted = rng.random() < 0.7
                rows.append(AssignmentRow(
                    t.task_id, f"w{w}", "submitted" if submitted else "leased",
                    0.0, 30.0 if submitted else None, {}))
        report = task_progress(covid_task_set, rows)
        per_task = {
            t.task_id: sum(1 for r in rows
                           if r.task_id == t.task_id and r.state == "submitted")
            for t in covid_task_set.tasks}
        assert report.tasks_complete == sum(
            1 for t in covid_task_set.tasks
            if per_task[t.task_id] >= covid_task_set.redundancy)
        assert report.submissions == sum(per_task.values())


def test_format_table_alignment():
    text = format_table(["name", "n"], [["alpha", 1], ["b", 22]])
    lines = text.splitlines()
    assert lines[0].startswith("name")
    assert len(lines) == 4
    assert lines[2].split() == ["alpha", "1"]
