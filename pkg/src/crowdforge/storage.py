"""Single-node persistence: a journaled key-value store plus the
assignment/lease bookkeeping built on it.

Every mutation is one JSON line appended to the journal, so a crash
leaves either the whole record or none of it; a torn final line is
discarded on replay. Writes are serialized per entity key by a lock
table; readers see plain-JSON copies.
"""

from __future__ import annotations

import copy
import json
import os
import secrets as _secrets
import threading
import time
import uuid
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator

from .canonical import canonicalize
from .conditions import ResponseState
from .constraints import ConstraintRegistry, SubmissionResult, validate_submission
from .errors import (
    AlreadySubmittedError,
    CrowdforgeError,
    LeaseExpiredError,
    UnknownEntityError,
)
from .model import ExamConfig, PipelineSpec, QuestionSet, TaskSetSpec
from .parsing import parse_exam_config, parse_pipeline_spec

DEFAULT_LEASE_SECONDS = 3600.0

ASSIGNMENT_LEASED = "leased"
ASSIGNMENT_SUBMITTED = "submitted"
ASSIGNMENT_EXPIRED = "expired"


class StoreCorruptError(CrowdforgeError):
    code = "store-corrupt"


class KVStore:
    """Embedded key-value store with a write-ahead JSON-lines journal.

    ``path`` None keeps everything in memory (tests, previews). Values
    must be plain JSON data; reads return copies.
    """

    def __init__(self, path: str | Path | None = None, *, fsync: bool = False):
        self._data: dict[str, Any] = {}
        self._lock = threading.RLock()
        self._fsync = fsync
        self._file = None
        self._path = Path(path) if path is not None else None
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._replay()
            self._file = open(self._path, "a", encoding="utf-8")

    def _replay(self) -> None:
        if not self._path.exists():
            return
        raw = self._path.read_text(encoding="utf-8")
        lines = raw.split("\n")
        for i, line in enumerate(lines):
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                rest = "\n".join(lines[i + 1:]).strip()
                if rest:
                    raise StoreCorruptError(
                        f"undecodable journal record at line {i + 1}"
                    )
                # torn final record from a crash mid-append: drop it
                break
            if rec.get("op") == "put":
                self._data[rec["k"]] = rec["v"]
            elif rec.get("op") == "del":
                self._data.pop(rec["k"], None)

    def _append(self, rec: dict) -> None:
        if self._file is None:
            return
        self._file.write(json.dumps(rec, ensure_ascii=False) + "\n")
        self._file.flush()
        if self._fsync:
            os.fsync(self._file.fileno())

    def put(self, key: str, value: Any) -> None:
        with self._lock:
            self._append({"op": "put", "k": key, "v": value})
            self._data[key] = value

    def delete(self, key: str) -> None:
        with self._lock:
            if key in self._data:
                self._append({"op": "del", "k": key})
                del self._data[key]

    def get(self, key: str, default: Any = None) -> Any:
        with self._lock:
            v = self._data.get(key)
        return copy.deepcopy(v) if v is not None else default

    def items(self, prefix: str = "") -> list[tuple[str, Any]]:
        with self._lock:
            keys = sorted(k for k in self._data if k.startswith(prefix))
            return [(k, copy.deepcopy(self._data[k])) for k in keys]

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None


class LockTable:
    """Named locks for per-entity write serialization."""

    def __init__(self):
        self._guard = threading.Lock()
        self._locks: dict[Any, threading.Lock] = defaultdict(threading.Lock)

    def lock(self, key: Any) -> threading.Lock:
        with self._guard:
            return self._locks[key]


@dataclass
class Assignment:
    """One worker's lease on one task, and eventually their response."""

    assignment_id: str
    pipeline: str
    version: int
    task_id: str
    worker_id: str
    state: str
    lease_deadline: float
    started: float
    submitted: float | None = None
    response: dict | None = None  # settled ResponseState wire form
    external: dict = field(default_factory=dict)  # marketplace ids

    def to_dict(self) -> dict:
        return {
            "assignment_id": self.assignment_id,
            "pipeline": self.pipeline,
            "version": self.version,
            "task_id": self.task_id,
            "worker_id": self.worker_id,
            "state": self.state,
            "lease_deadline": self.lease_deadline,
            "started": self.started,
            "submitted": self.submitted,
            "response": self.response,
            "external": dict(self.external),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Assignment":
        return cls(
            assignment_id=doc["assignment_id"],
            pipeline=doc["pipeline"],
            version=doc.get("version", 1),
            task_id=doc["task_id"],
            worker_id=doc["worker_id"],
            state=doc["state"],
            lease_deadline=doc["lease_deadline"],
            started=doc["started"],
            submitted=doc.get("submitted"),
            response=doc.get("response"),
            external=dict(doc.get("external", {})),
        )


@dataclass
class PipelineRecord:
    """A saved, immutable pipeline version (parts kept as canonical text)."""

    name: str
    version: int
    instruction: str
    tutorial_doc: str | None
    exam_doc: str | None
    exam_config_doc: str | None
    taskset_doc: str | None
    created: float

    def tutorial(self) -> QuestionSet | None:
        if self.tutorial_doc is None:
            return None
        return parse_pipeline_spec(self.tutorial_doc, "tutorial").spec

    def exam(self) -> QuestionSet | None:
        if self.exam_doc is None:
            return None
        return parse_pipeline_spec(self.exam_doc, "exam").spec

    def exam_config(self) -> ExamConfig | None:
        if self.exam_config_doc is None:
            return None
        return parse_exam_config(self.exam_config_doc).spec

    def task_set(self) -> TaskSetSpec | None:
        if self.taskset_doc is None:
            return None
        return parse_pipeline_spec(self.taskset_doc, "task_set").spec

    def spec(self) -> PipelineSpec:
        return PipelineSpec(
            name=self.name,
            version=self.version,
            instruction=self.instruction,
            tutorial=self.tutorial(),
            exam=self.exam(),
            exam_config=self.exam_config(),
            task_set=self.task_set(),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "instruction": self.instruction,
            "tutorial_doc": self.tutorial_doc,
            "exam_doc": self.exam_doc,
            "exam_config_doc": self.exam_config_doc,
            "taskset_doc": self.taskset_doc,
            "created": self.created,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineRecord":
        return cls(**doc)


@dataclass(frozen=True)
class AnnotatorRow:
    worker_id: str
    exams_passed: int
    tasks_submitted: int
    mean_task_seconds: float | None

    def to_dict(self) -> dict:
        return {
            "worker_id": self.worker_id,
            "exams_passed": self.exams_passed,
            "tasks_submitted": self.tasks_submitted,
            "mean_task_seconds": self.mean_task_seconds,
        }


class AnnotationStore:
    """Specs, exam sessions, assignments, and exports over a KVStore."""

    def __init__(self, kv: KVStore | None = None, *,
                 secret: bytes | None = None,
                 clock: Callable[[], float] = time.time,
                 lease_seconds: float = DEFAULT_LEASE_SECONDS,
                 registry: ConstraintRegistry | None = None):
        self.kv = kv if kv is not None else KVStore()
        self.clock = clock
        self.lease_seconds = lease_seconds
        self.registry = registry
        self.locks = LockTable()
        self.secret = self._init_secret(secret)
        self._pipeline_cache: dict[tuple[str, int], PipelineRecord] = {}
        self._index = _AssignmentIndex()
        for _, doc in self.kv.items("assignment/"):
            self._index.add(Assignment.from_dict(doc))

    def _init_secret(self, secret: bytes | None) -> bytes:
        if secret is not None:
            self.kv.put("meta/secret", secret.hex())
            return secret
        stored = self.kv.get("meta/secret")
        if stored is not None:
            return bytes.fromhex(stored)
        fresh = _secrets.token_bytes(32)
        self.kv.put("meta/secret", fresh.hex())
        return fresh

    # -- pipelines ----------------------------------------------------------

    def save_pipeline(self, name: str, *, instruction: str = "",
                      tutorial: QuestionSet | None = None,
                      exam: QuestionSet | None = None,
                      exam_config: ExamConfig | None = None,
                      task_set: TaskSetSpec | None = None,
                      initial_version: int | None = None) -> PipelineRecord:
        """Persist the next version of a pipeline (versions are immutable;
        every save creates version n+1)."""
        with self.locks.lock(("pipeline", name)):
            latest = self.latest_version(name)
            if latest is None:
                version = initial_version if initial_version is not None else 1
            else:
                version = latest + 1
            record = PipelineRecord(
                name=name,
                version=version,
                instruction=instruction,
                tutorial_doc=canonicalize(tutorial) if tutorial else None,
                exam_doc=canonicalize(exam) if exam else None,
                exam_config_doc=canonicalize(exam_config) if exam_config else None,
                taskset_doc=canonicalize(task_set) if task_set else None,
                created=self.clock(),
            )
            self.kv.put(f"pipeline/{name}/{version:08d}", record.to_dict())
            return record

    def latest_version(self, name: str) -> int | None:
        entries = self.kv.items(f"pipeline/{name}/")
        if not entries:
            return None
        return max(doc["version"] for _, doc in entries)

    def pipeline_names(self) -> list[str]:
        names = {doc["name"] for _, doc in self.kv.items("pipeline/")}
        return sorted(names)

    def load_pipeline(self, name: str, version: int | None = None) -> PipelineRecord:
        if version is None:
            version = self.latest_version(name)
            if version is None:
                raise UnknownEntityError(f"no pipeline named {name!r}")
        cached = self._pipeline_cache.get((name, version))
        if cached is not None:
            return cached
        doc = self.kv.get(f"pipeline/{name}/{version:08d}")
        if doc is None:
            raise UnknownEntityError(f"no version {version} of pipeline {name!r}")
        record = PipelineRecord.from_dict(doc)
        self._pipeline_cache[(name, version)] = record
        return record

    # -- launches -----------------------------------------------------------

    def record_launch(self, name: str, kind: str, doc: dict) -> None:
        self.kv.put(f"launch/{name}/{kind}", doc)

    def get_launch(self, name: str, kind: str) -> dict | None:
        return self.kv.get(f"launch/{name}/{kind}")

    # -- assignments and leasing --------------------------------------------

    def _task_spec(self, record: PipelineRecord, task_id: str):
        ts = record.task_set()
        if ts is None:
            raise UnknownEntityError(f"pipeline {record.name!r} has no task set")
        task = ts.task_by_id(task_id)
        if task is None:
            raise UnknownEntityError(f"no task {task_id!r} in {record.name!r}")
        return task

    def next_assignment(self, name: str, worker_id: str, *,
                        version: int | None = None,
                        external: dict | None = None) -> Assignment | None:
        """Lease the first unfinished task this worker has never held.

        A task is leasable while submitted + unexpired leases stay below
        the redundancy requirement; a worker never sees a task twice.
        """
        record = self.load_pipeline(name, version)
        ts = record.task_set()
        if ts is None:
            return None
        with self.locks.lock(("assign", name)):
            now = self.clock()
            self._expire_stale(name, now)
            held = self._index.active_lease(name, worker_id)
            if held is not None:
                return self.get_assignment(held)
            for task in ts.tasks:
                info = self._index.task_info(name, task.task_id)
                if worker_id in info.ever_workers:
                    continue
                if len(info.submitted) + len(info.leases) >= ts.redundancy:
                    continue
                assignment = Assignment(
                    assignment_id=uuid.uuid4().hex,
                    pipeline=name,
                    version=record.version,
                    task_id=task.task_id,
                    worker_id=worker_id,
                    state=ASSIGNMENT_LEASED,
                    lease_deadline=now + self.lease_seconds,
                    started=now,
                    external=dict(external or {}),
                )
                self.kv.put(f"assignment/{assignment.assignment_id}",
                            assignment.to_dict())
                self._index.add(assignment)
                return assignment
        return None

    def _expire_stale(self, name: str, now: float) -> None:
        for aid in self._index.stale_leases(name, now):
            doc = self.kv.get(f"assignment/{aid}")
            if doc is None:
                continue
            a = Assignment.from_dict(doc)
            a.state = ASSIGNMENT_EXPIRED
            self.kv.put(f"assignment/{aid}", a.to_dict())
            self._index.update(a)

    def expire_stale_leases(self) -> None:
        """Periodic sweep entry point (expiry is otherwise lazy)."""
        now = self.clock()
        for name in self.pipeline_names():
            with self.locks.lock(("assign", name)):
                self._expire_stale(name, now)

    def get_assignment(self, assignment_id: str) -> Assignment:
        doc = self.kv.get(f"assignment/{assignment_id}")
        if doc is None:
            raise UnknownEntityError(f"no assignment {assignment_id!r}")
        return Assignment.from_dict(doc)

    def submit_assignment(self, assignment_id: str,
                          state: ResponseState) -> SubmissionResult:
        """Validate and persist a response atomically (one journal record).

        Violations return without persisting anything; an expired lease or
        a second submit raises.
        """
        probe = self.get_assignment(assignment_id)
        with self.locks.lock(("assign", probe.pipeline)):
            a = self.get_assignment(assignment_id)
            now = self.clock()
            if a.state == ASSIGNMENT_SUBMITTED:
                raise AlreadySubmittedError("assignment already submitted")
            if a.state == ASSIGNMENT_EXPIRED or a.lease_deadline < now:
                if a.state != ASSIGNMENT_EXPIRED:
                    a.state = ASSIGNMENT_EXPIRED
                    self.kv.put(f"assignment/{a.assignment_id}", a.to_dict())
                    self._index.update(a)
                raise LeaseExpiredError("assignment lease has expired")
            record = self.load_pipeline(a.pipeline, a.version)
            task = self._task_spec(record, a.task_id)
            result = validate_submission(task, state, self.registry)
            if not result.accepted:
                return result
            a.state = ASSIGNMENT_SUBMITTED
            a.submitted = max(now, a.started + 1e-6)
            a.response = result.state.to_wire()
            self.kv.put(f"assignment/{a.assignment_id}", a.to_dict())
            self._index.update(a)
            return result

    def assignments(self, name: str) -> list[Assignment]:
        out = []
        for _, doc in self.kv.items("assignment/"):
            if doc["pipeline"] == name:
                out.append(Assignment.from_dict(doc))
        return out

    # -- exports ------------------------------------------------------------

    def pseudonym(self, worker_id: str) -> str:
        import hashlib

        return hashlib.sha256(b"worker:" + self.secret + worker_id.encode()).hexdigest()[:16]

    def export_dataset(self, name: str) -> Iterator[str]:
        """JSON Lines, one record per submitted assignment, ordered by
        (task id, submit time); stable across identical store contents."""
        rows = [a for a in self.assignments(name) if a.state == ASSIGNMENT_SUBMITTED]
        rows.sort(key=lambda a: (a.task_id, a.submitted, a.assignment_id))
        for a in rows:
            yield json.dumps(
                {
                    "task_id": a.task_id,
                    "worker_id": self.pseudonym(a.worker_id),
                    "duration_seconds": round(a.submitted - a.started, 6),
                    "values": a.response.get("values", {}),
                    "group_counts": a.response.get("group_counts", {}),
                },
                ensure_ascii=False,
                sort_keys=True,
            )

    def list_annotators(self, name: str) -> list[AnnotatorRow]:
        passed: dict[str, int] = defaultdict(int)
        for key, doc in self.kv.items(f"session/{name}/"):
            if doc.get("status") == "passed":
                passed[doc["participant"]] += 1
        durations: dict[str, list[float]] = defaultdict(list)
        submitted: dict[str, int] = defaultdict(int)
        for a in self.assignments(name):
            if a.state == ASSIGNMENT_SUBMITTED:
                submitted[a.worker_id] += 1
                durations[a.worker_id].append(a.submitted - a.started)
        workers = sorted(set(passed) | set(submitted))
        rows = []
        for w in workers:
            ds = durations.get(w)
            rows.append(AnnotatorRow(
                worker_id=w,
                exams_passed=passed.get(w, 0),
                tasks_submitted=submitted.get(w, 0),
                mean_task_seconds=(sum(ds) / len(ds)) if ds else None,
            ))
        return rows


@dataclass
class _TaskInfo:
    submitted: set[str] = field(default_factory=set)  # worker ids
    leases: dict[str, float] = field(default_factory=dict)  # assignment id -> deadline
    ever_workers: set[str] = field(default_factory=set)
    lease_worker: dict[str, str] = field(default_factory=dict)


class _AssignmentIndex:
    """In-memory leasing/redundancy counters, rebuilt from the journal."""

    def __init__(self):
        self._tasks: dict[tuple[str, str], _TaskInfo] = defaultdict(_TaskInfo)

    def task_info(self, pipeline: str, task_id: str) -> _TaskInfo:
        return self._tasks[(pipeline, task_id)]

    def add(self, a: Assignment) -> None:
        info = self.task_info(a.pipeline, a.task_id)
        info.ever_workers.add(a.worker_id)
        if a.state == ASSIGNMENT_LEASED:
            info.leases[a.assignment_id] = a.lease_deadline
            info.lease_worker[a.assignment_id] = a.worker_id
        elif a.state == ASSIGNMENT_SUBMITTED:
            info.submitted.add(a.worker_id)

    def update(self, a: Assignment) -> None:
        info = self.task_info(a.pipeline, a.task_id)
        info.leases.pop(a.assignment_id, None)
        info.lease_worker.pop(a.assignment_id, None)
        self.add(a)

    def stale_leases(self, pipeline: str, now: float) -> list[str]:
        out = []
        for (p, _task), info in self._tasks.items():
            if p != pipeline:
                continue
            for aid, deadline in info.leases.items():
                if deadline < now:
                    out.append(aid)
        return out

    def active_lease(self, pipeline: str, worker_id: str) -> str | None:
        for (p, _task), info in self._tasks.items():
            if p != pipeline:
                continue
            for aid, w in info.lease_worker.items():
                if w == worker_id:
                    return aid
        return None
