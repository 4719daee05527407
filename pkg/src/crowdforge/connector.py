"""Marketplace connector abstraction.

The service only ever talks to a :class:`MarketplaceConnector`; the mock
implementation is deterministic under a seed and idempotent by client
token, which keeps end-to-end tests hermetic. A live MTurk adapter would
implement the same four operations.
"""

from __future__ import annotations

import random
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass


@dataclass(frozen=True)
class MarketplaceAssignment:
    worker_id: str
    assignment_id: str
    status: str  # accepted | submitted | approved


class MarketplaceConnector(ABC):
    """Job management on the marketplace side: create HITs, observe
    assignments, grant qualifications, approve work."""

    @abstractmethod
    def create_hit(self, kind: str, external_url: str, reward: float,
                   count: int, *, client_token: str) -> list[str]:
        ...

    @abstractmethod
    def list_assignments(self, hit_id: str) -> list[MarketplaceAssignment]:
        ...

    @abstractmethod
    def grant_qualification(self, worker_id: str, qualification_id: str) -> None:
        ...

    @abstractmethod
    def approve(self, assignment_id: str) -> None:
        ...


@dataclass
class HitRecord:
    hit_id: str
    kind: str
    external_url: str
    reward: float
    count: int


class MockConnector(MarketplaceConnector):
    """In-memory marketplace.

    ``create_hit`` returns the same ids for a repeated client token (no
    duplicate HITs on retry). Workers "accept" HITs through
    :meth:`accept_hit`, which hands out marketplace assignment ids the
    ExternalQuestion flow echoes back.
    """

    def __init__(self, seed: int = 0):
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.hits: dict[str, HitRecord] = {}
        self.assignments: dict[str, MarketplaceAssignment] = {}
        self._assignment_hit: dict[str, str] = {}
        self.qualifications: set[tuple[str, str]] = set()
        self._by_token: dict[str, list[str]] = {}

    def create_hit(self, kind: str, external_url: str, reward: float,
                   count: int, *, client_token: str) -> list[str]:
        with self._lock:
            if client_token in self._by_token:
                return list(self._by_token[client_token])
            ids = []
            for _ in range(max(1, (count + 8) // 9)):  # MTurk batches ~9 per HIT
                hit_id = f"HIT-{self._rng.randrange(16**12):012x}"
                self.hits[hit_id] = HitRecord(hit_id, kind, external_url, reward, count)
                ids.append(hit_id)
            self._by_token[client_token] = ids
            return list(ids)

    def accept_hit(self, hit_id: str, worker_id: str) -> str:
        """Worker-side action: returns the marketplace assignment id."""
        with self._lock:
            if hit_id not in self.hits:
                raise KeyError(f"no HIT {hit_id!r}")
            assignment_id = f"MKA-{self._rng.randrange(16**12):012x}"
            self.assignments[assignment_id] = MarketplaceAssignment(
                worker_id=worker_id, assignment_id=assignment_id, status="accepted"
            )
            self._assignment_hit[assignment_id] = hit_id
            return assignment_id

    def record_submit(self, assignment_id: str) -> None:
        with self._lock:
            a = self.assignments.get(assignment_id)
            if a is not None and a.status == "accepted":
                self.assignments[assignment_id] = MarketplaceAssignment(
                    a.worker_id, a.assignment_id, "submitted"
                )

    def list_assignments(self, hit_id: str) -> list[MarketplaceAssignment]:
        with self._lock:
            return sorted(
                (a for aid, a in self.assignments.items()
                 if self._assignment_hit.get(aid) == hit_id),
                key=lambda a: a.assignment_id,
            )

    def grant_qualification(self, worker_id: str, qualification_id: str) -> None:
        with self._lock:
            self.qualifications.add((worker_id, qualification_id))

    def approve(self, assignment_id: str) -> None:
        with self._lock:
            a = self.assignments.get(assignment_id)
            if a is not None:
                self.assignments[assignment_id] = MarketplaceAssignment(
                    a.worker_id, a.assignment_id, "approved"
                )
