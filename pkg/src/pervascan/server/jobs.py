"""Offline job records, the per-job state machine, and its journal.

States advance strictly rightward through RECEIVED -> FETCHING -> DECODING
-> LOOKING_UP -> TAGGING -> NOTIFYING -> DONE; FAILED is reachable from any
non-terminal state. Terminal records never change again. Every transition
appends one JSON line to the journal when one is configured.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from ..catalog import BookInfo


class JobState(str, Enum):
    RECEIVED = "RECEIVED"
    FETCHING = "FETCHING"
    DECODING = "DECODING"
    LOOKING_UP = "LOOKING_UP"
    TAGGING = "TAGGING"
    NOTIFYING = "NOTIFYING"
    DONE = "DONE"
    FAILED = "FAILED"


_ORDER = {
    JobState.RECEIVED: 0,
    JobState.FETCHING: 1,
    JobState.DECODING: 2,
    JobState.LOOKING_UP: 3,
    JobState.TAGGING: 4,
    JobState.NOTIFYING: 5,
    JobState.DONE: 6,
}

TERMINAL_STATES = frozenset({JobState.DONE, JobState.FAILED})


def state_rank(state: JobState) -> int:
    """Position in the success ordering; FAILED ranks above everything."""
    return _ORDER.get(state, len(_ORDER))


class JobNotFound(Exception):
    code = "job_not_found"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


@dataclass
class OfflineJob:
    job_id: str
    photo_id: str
    msisdn: str
    state: JobState = JobState.RECEIVED
    failed_stage: JobState | None = None
    error_code: str | None = None
    created_at: str = field(default_factory=_now)
    updated_at: str = field(default_factory=_now)
    decoded: str | None = None
    book: BookInfo | None = None


class JobStore:
    """In-memory job table; transitions are serialized and journaled."""

    def __init__(self, journal_path: str | Path | None = None):
        self._jobs: dict[str, OfflineJob] = {}
        self._lock = threading.Lock()
        self._journal = Path(journal_path) if journal_path else None
        if self._journal:
            self._journal.parent.mkdir(parents=True, exist_ok=True)

    def create(self, job_id: str, photo_id: str, msisdn: str) -> OfflineJob:
        with self._lock:
            if job_id in self._jobs:
                raise ValueError(f"duplicate job id {job_id}")
            job = OfflineJob(job_id, photo_id, msisdn)
            job.updated_at = job.created_at
            self._jobs[job_id] = job
            self._append_journal(job)
            return replace(job)

    def get(self, job_id: str) -> OfflineJob:
        """Snapshot copy of the current record."""
        with self._lock:
            try:
                return replace(self._jobs[job_id])
            except KeyError:
                raise JobNotFound(job_id) from None

    def claim(self, job_id: str) -> bool:
        """Move RECEIVED -> FETCHING; False if some other runner got there first."""
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise JobNotFound(job_id)
            if job.state is not JobState.RECEIVED:
                return False
            self._mutate(job, JobState.FETCHING)
            return True

    def advance(
        self,
        job_id: str,
        state: JobState,
        *,
        decoded: str | None = None,
        book: BookInfo | None = None,
    ) -> OfflineJob:
        if state is JobState.FAILED:
            raise ValueError("use fail() for the FAILED transition")
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise JobNotFound(job_id)
            if job.state in TERMINAL_STATES:
                raise ValueError(f"job {job_id} is terminal ({job.state.value})")
            if _ORDER[state] <= _ORDER[job.state]:
                raise ValueError(
                    f"illegal transition {job.state.value} -> {state.value}"
                )
            if decoded is not None:
                job.decoded = decoded
            if book is not None:
                job.book = book
            self._mutate(job, state)
            return replace(job)

    def fail(self, job_id: str, failed_stage: JobState, error_code: str) -> OfflineJob:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise JobNotFound(job_id)
            if job.state in TERMINAL_STATES:
                raise ValueError(f"job {job_id} is terminal ({job.state.value})")
            job.failed_stage = failed_stage
            job.error_code = error_code
            self._mutate(job, JobState.FAILED)
            return replace(job)

    def _mutate(self, job: OfflineJob, state: JobState) -> None:
        # caller holds the lock
        job.state = state
        job.updated_at = _now()
        self._append_journal(job)

    def _append_journal(self, job: OfflineJob) -> None:
        if not self._journal:
            return
        line = json.dumps(
            {
                "ts": job.updated_at,
                "job_id": job.job_id,
                "photo_id": job.photo_id,
                "state": job.state.value,
                "failed_stage": job.failed_stage.value if job.failed_stage else None,
                "error_code": job.error_code,
                "barcode": job.decoded,
            },
            ensure_ascii=False,
        )
        with open(self._journal, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
