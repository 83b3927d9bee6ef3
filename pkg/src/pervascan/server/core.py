"""The image computation service behind both wire encodings.

Two entry points mirror the two architectures: handle_online answers a
lookup synchronously from image bytes, submit_job enqueues an offline
pipeline run (fetch -> decode -> lookup -> tag -> notify) and returns
immediately. Worker threads drain the queue; each job runs at most once
per service lifetime. Wire-byte counters make the bandwidth difference
between the two paths observable at /v1/metrics.
"""

from __future__ import annotations

import json
import queue
import threading

from ..barcode import BarcodeError, decode_image
from ..catalog import BookInfo, Catalog, cheapest_offer
from ..imagekit import PgmError, load_pgm
from ..imagestore import InvalidImage, valid_photo_id
from ..notifier import SmsNotifier, valid_msisdn
from ..rng import SplitMix64, token_hex
from .jobs import JobState, JobStore, OfflineJob
from .wire import CheapestOffer, JobStatusResponse, LookupResponse, WireMetrics

SUCCESS_SMS = "pervascan: info ready for photo {photo_id}"
FAILURE_SMS = "pervascan: lookup failed for photo {photo_id} ({error_code})"


class InvalidRequest(Exception):
    code = "invalid_request"


class DecodeFailed(Exception):
    """Image parsed but no code could be read; `detail` names the decoder error."""

    code = "decode_failed"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


def book_tags(book: BookInfo) -> list[str]:
    """Machine-parsable tag set written back to the photo."""
    tags = [f"barcode:{book.barcode}", f"title:{book.title}"]
    tags += [f"author:{author}" for author in book.authors]
    tags.append(f"price:{book.list_price_cents} {book.currency}")
    best = cheapest_offer(book)
    if best is not None:
        tags.append(f"cheapest:{best.seller} {best.price_cents} {best.currency}")
    return tags


def lookup_response(book: BookInfo) -> LookupResponse:
    best = cheapest_offer(book)
    return LookupResponse(
        barcode=book.barcode,
        title=book.title,
        authors=book.authors,
        list_price_cents=book.list_price_cents,
        currency=book.currency,
        cheapest=None
        if best is None
        else CheapestOffer(seller=best.seller, price_cents=best.price_cents),
    )


def job_view(job: OfflineJob) -> JobStatusResponse:
    return JobStatusResponse(
        job_id=job.job_id,
        photo_id=job.photo_id,
        state=job.state.value,
        failed_stage=job.failed_stage.value if job.failed_stage else None,
        error_code=job.error_code,
        barcode=job.decoded,
        created_at=job.created_at,
        updated_at=job.updated_at,
    )


class PervascanService:
    """Owns the catalog, store and notifier clients, the job queue, and workers."""

    def __init__(
        self,
        catalog: Catalog,
        store,
        notifier: SmsNotifier,
        *,
        worker_count: int = 2,
        queue_capacity: int = 64,
        seed: int | None = None,
        scanlines: int = 7,
        journal_path=None,
    ):
        if worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        self._catalog = catalog
        self._store = store
        self._notifier = notifier
        self._scanlines = scanlines
        self._jobs = JobStore(journal_path)
        self._queue: queue.Queue[str | None] = queue.Queue(maxsize=queue_capacity)
        self._worker_count = worker_count
        self._workers: list[threading.Thread] = []
        self._id_rng = SplitMix64(seed) if seed is not None else None
        self._id_lock = threading.Lock()
        self._metrics_lock = threading.Lock()
        self._online_requests = 0
        self._online_bytes = 0
        self._offline_requests = 0
        self._offline_bytes = 0

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        if self._workers:
            return
        for n in range(self._worker_count):
            worker = threading.Thread(
                target=self._worker_loop, name=f"pervascan-worker-{n}", daemon=True
            )
            worker.start()
            self._workers.append(worker)

    def stop(self) -> None:
        for _ in self._workers:
            self._queue.put(None)
        for worker in self._workers:
            worker.join(timeout=10.0)
        self._workers = []

    def __enter__(self) -> "PervascanService":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()

    def _worker_loop(self) -> None:
        while True:
            job_id = self._queue.get()
            if job_id is None:
                return
            try:
                self.run_job(job_id)
            except Exception:
                pass  # failures land on the job record, never kill the worker

    # -- online path ---------------------------------------------------------

    def handle_online(self, image_bytes: bytes, request_size: int | None = None) -> LookupResponse:
        """Decode the posted image and answer with the catalog record.

        Raises InvalidImage, DecodeFailed, or ProductNotFound; the request
        is counted either way.
        """
        self._count_online(len(image_bytes) if request_size is None else request_size)
        try:
            image = load_pgm(image_bytes)
        except PgmError as exc:
            raise InvalidImage(str(exc)) from exc
        try:
            report = decode_image(image, self._scanlines)
        except BarcodeError as exc:
            raise DecodeFailed(exc.code) from exc
        book = self._catalog.lookup(report.code.digits)
        return lookup_response(book)

    # -- offline path --------------------------------------------------------

    def submit_job(
        self, photo_id: str, msisdn: str, request_size: int | None = None
    ) -> str:
        """Persist a RECEIVED job, enqueue it, and return its ID immediately.

        Only the syntax of photo_id/msisdn is checked here; whether the
        photo exists is the pipeline's problem.
        """
        if request_size is None:
            request_size = len(
                json.dumps({"photo_id": photo_id, "msisdn": msisdn}).encode()
            )
        self._count_offline(request_size)
        if not isinstance(photo_id, str) or not valid_photo_id(photo_id):
            raise InvalidRequest(f"bad photo_id {photo_id!r}")
        if not valid_msisdn(msisdn):
            raise InvalidRequest(f"bad msisdn {msisdn!r}")
        job_id = self._fresh_job_id()
        self._jobs.create(job_id, photo_id, msisdn)
        self._queue.put(job_id)
        return job_id

    def run_job(self, job_id: str) -> OfflineJob:
        """Drive one job to a terminal state; at most once per lifetime.

        Every outcome sends exactly one SMS: the success body after
        tagging, or a failure body naming the stage's error code.
        """
        if not self._jobs.claim(job_id):
            return self._jobs.get(job_id)
        job = self._jobs.get(job_id)
        stage = JobState.FETCHING
        informed = False
        try:
            payload = self._store.fetch(job.photo_id)
            stage = JobState.DECODING
            self._jobs.advance(job_id, stage)
            image = load_pgm(payload)
            report = decode_image(image, self._scanlines)
            stage = JobState.LOOKING_UP
            self._jobs.advance(job_id, stage, decoded=report.code.digits)
            book = self._catalog.lookup(report.code.digits)
            stage = JobState.TAGGING
            self._jobs.advance(job_id, stage, book=book)
            self._store.add_tags(job.photo_id, book_tags(book))
            stage = JobState.NOTIFYING
            self._jobs.advance(job_id, stage)
            self._notifier.send(job.msisdn, SUCCESS_SMS.format(photo_id=job.photo_id))
            informed = True
            return self._jobs.advance(job_id, JobState.DONE)
        except Exception as exc:
            error_code = getattr(exc, "code", None) or "internal_error"
            final = self._jobs.fail(job_id, stage, error_code)
            if not informed:
                try:
                    self._notifier.send(
                        job.msisdn,
                        FAILURE_SMS.format(photo_id=job.photo_id, error_code=error_code),
                    )
                except Exception:
                    pass  # never mask the job failure with a notify failure
            return final

    def job_status(self, job_id: str) -> OfflineJob:
        return self._jobs.get(job_id)

    # -- metrics ---------------------------------------------------------------

    def metrics(self) -> WireMetrics:
        with self._metrics_lock:
            return WireMetrics(
                online_requests=self._online_requests,
                online_bytes_in=self._online_bytes,
                offline_requests=self._offline_requests,
                offline_bytes_in=self._offline_bytes,
            )

    def _count_online(self, nbytes: int) -> None:
        with self._metrics_lock:
            self._online_requests += 1
            self._online_bytes += nbytes

    def _count_offline(self, nbytes: int) -> None:
        with self._metrics_lock:
            self._offline_requests += 1
            self._offline_bytes += nbytes

    def _fresh_job_id(self) -> str:
        with self._id_lock:
            return token_hex(self._id_rng, 8)
