import json
import time

import pytest
from fastapi.testclient import TestClient

from conftest import KNR_BOOK, book_record, make_bundle
from pervascan.catalog import ProductNotFound
from pervascan.imagekit import GrayImage, RenderSpec, render_ean13, save_pgm
from pervascan.imagestore import InvalidImage
from pervascan.server import (
    DecodeFailed,
    InvalidRequest,
    JobNotFound,
    JobState,
    JobStore,
    TERMINAL_STATES,
    book_tags,
    state_rank,
)
from pervascan.server.wire import (
    JobStatusRequest,
    LookupRequest,
    SubmitJobRequest,
    from_xml,
    to_xml,
)

CODE = "9780131103627"
PGM = save_pgm(render_ean13(CODE))
GRAY = save_pgm(GrayImage(50, 40, [128] * 2000))


def wait_terminal(service, job_id, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = service.job_status(job_id)
        if job.state in TERMINAL_STATES:
            return job
        time.sleep(0.01)
    raise AssertionError(f"job {job_id} not terminal after {timeout}s")


def journal_states(journal_path, job_id):
    lines = journal_path.read_text("utf-8").splitlines()
    return [json.loads(l)["state"] for l in lines if json.loads(l)["job_id"] == job_id]


class TestJobStore:
    def test_create_and_get(self, tmp_path):
        store = JobStore(tmp_path / "jobs.jsonl")
        store.create("j1", "p1", "+15551234567")
        job = store.get("j1")
        assert job.state is JobState.RECEIVED
        assert job.created_at == job.updated_at

    def test_get_unknown(self):
        with pytest.raises(JobNotFound):
            JobStore().get("missing")

    def test_claim_only_once(self):
        store = JobStore()
        store.create("j1", "p1", "+15551234567")
        assert store.claim("j1") is True
        assert store.claim("j1") is False
        assert store.get("j1").state is JobState.FETCHING

    def test_states_only_move_rightward(self):
        store = JobStore()
        store.create("j1", "p1", "+15551234567")
        store.claim("j1")
        store.advance("j1", JobState.DECODING)
        with pytest.raises(ValueError):
            store.advance("j1", JobState.FETCHING)
        with pytest.raises(ValueError):
            store.advance("j1", JobState.DECODING)

    def test_terminal_is_immutable(self):
        store = JobStore()
        store.create("j1", "p1", "+15551234567")
        store.claim("j1")
        store.fail("j1", JobState.FETCHING, "photo_not_found")
        with pytest.raises(ValueError):
            store.advance("j1", JobState.DECODING)
        with pytest.raises(ValueError):
            store.fail("j1", JobState.FETCHING, "again")

    def test_snapshots_do_not_alias(self):
        store = JobStore()
        store.create("j1", "p1", "+15551234567")
        snap = store.get("j1")
        snap.state = JobState.DONE
        assert store.get("j1").state is JobState.RECEIVED

    def test_state_rank_ordering(self):
        success_path = [
            JobState.RECEIVED,
            JobState.FETCHING,
            JobState.DECODING,
            JobState.LOOKING_UP,
            JobState.TAGGING,
            JobState.NOTIFYING,
            JobState.DONE,
        ]
        ranks = [state_rank(s) for s in success_path]
        assert ranks == sorted(ranks)
        assert state_rank(JobState.FAILED) > state_rank(JobState.NOTIFYING)


class TestOnline:
    def test_happy_path(self, bundle):
        record = bundle.service.handle_online(PGM)
        assert record.barcode == CODE
        assert record.title == KNR_BOOK["title"]
        assert record.cheapest.seller == "pageturner"
        assert record.cheapest.price_cents == 950

    def test_invalid_image(self, bundle):
        with pytest.raises(InvalidImage):
            bundle.service.handle_online(b"not a pgm")

    def test_no_contrast_becomes_decode_failed(self, bundle):
        with pytest.raises(DecodeFailed) as err:
            bundle.service.handle_online(GRAY)
        assert err.value.detail == "no_contrast"

    def test_unknown_book(self, tmp_path):
        bundle = make_bundle(tmp_path, records=[book_record("4006381333931", 1)])
        with pytest.raises(ProductNotFound):
            bundle.service.handle_online(PGM)

    def test_online_metrics_count_request_bytes(self, bundle):
        before = bundle.service.metrics()
        assert before.online_requests == 0 and before.online_bytes_in == 0
        bundle.service.handle_online(PGM)
        after = bundle.service.metrics()
        assert after.online_requests == 1
        assert after.online_bytes_in == len(PGM)


class TestOfflinePipeline:
    def test_submit_returns_before_running(self, bundle):
        # no workers started: the job must sit in RECEIVED
        job_id = bundle.service.submit_job("0" * 16, "+15551234567")
        assert bundle.service.job_status(job_id).state is JobState.RECEIVED

    def test_submit_validates_syntax(self, bundle):
        with pytest.raises(InvalidRequest):
            bundle.service.submit_job("", "+15551234567")
        with pytest.raises(InvalidRequest):
            bundle.service.submit_job("has space", "+15551234567")
        with pytest.raises(InvalidRequest):
            bundle.service.submit_job("0" * 16, "not-a-number")

    def test_offline_metrics_count_submit_size(self, bundle):
        bundle.service.submit_job("0" * 16, "+15551234567")
        metrics = bundle.service.metrics()
        assert metrics.offline_requests == 1
        assert 0 < metrics.offline_bytes_in < 512

    def test_success_run(self, bundle):
        photo_id = bundle.store.upload(PGM)
        job_id = bundle.service.submit_job(photo_id, "+15551234567")
        final = bundle.service.run_job(job_id)
        assert final.state is JobState.DONE
        assert final.decoded == CODE
        assert final.error_code is None
        tags = bundle.store.get_tags(photo_id)
        assert tags == [
            f"barcode:{CODE}",
            "title:The C Programming Language",
            "author:Brian W. Kernighan",
            "author:Dennis M. Ritchie",
            "price:6699 USD",
            "cheapest:pageturner 950 USD",
        ]
        inbox = bundle.notifier.inbox("+15551234567")
        assert [m.body for m in inbox] == [f"pervascan: info ready for photo {photo_id}"]

    def test_success_journal_history_is_monotone(self, bundle):
        photo_id = bundle.store.upload(PGM)
        job_id = bundle.service.submit_job(photo_id, "+15551234567")
        bundle.service.run_job(job_id)
        states = journal_states(bundle.journal_path, job_id)
        assert states == [
            "RECEIVED",
            "FETCHING",
            "DECODING",
            "LOOKING_UP",
            "TAGGING",
            "NOTIFYING",
            "DONE",
        ]

    def test_unknown_photo_fails_at_fetching(self, bundle):
        job_id = bundle.service.submit_job("feedfacefeedface", "+15551234567")
        final = bundle.service.run_job(job_id)
        assert final.state is JobState.FAILED
        assert final.failed_stage is JobState.FETCHING
        assert final.error_code == "photo_not_found"
        inbox = bundle.notifier.inbox("+15551234567")
        assert [m.body for m in inbox] == [
            "pervascan: lookup failed for photo feedfacefeedface (photo_not_found)"
        ]

    def test_gray_photo_fails_at_decoding(self, bundle):
        photo_id = bundle.store.upload(GRAY)
        job_id = bundle.service.submit_job(photo_id, "+15551234567")
        final = bundle.service.run_job(job_id)
        assert final.state is JobState.FAILED
        assert final.failed_stage is JobState.DECODING
        assert final.error_code == "no_contrast"

    def test_unknown_book_fails_at_lookup(self, tmp_path):
        bundle = make_bundle(tmp_path, records=[book_record("4006381333931", 1)])
        photo_id = bundle.store.upload(PGM)
        job_id = bundle.service.submit_job(photo_id, "+15551234567")
        final = bundle.service.run_job(job_id)
        assert final.state is JobState.FAILED
        assert final.failed_stage is JobState.LOOKING_UP
        assert final.error_code == "product_not_found"
        assert final.decoded == CODE

    def test_exactly_one_sms_per_terminal_job(self, bundle):
        photo_id = bundle.store.upload(PGM)
        job_id = bundle.service.submit_job(photo_id, "+15550001111")
        bundle.service.run_job(job_id)
        bundle.service.run_job(job_id)  # second run is a no-op
        assert len(bundle.notifier.inbox("+15550001111")) == 1

    def test_terminal_status_stable(self, bundle):
        job_id = bundle.service.submit_job("feedfacefeedface", "+15551234567")
        bundle.service.run_job(job_id)
        first = bundle.service.job_status(job_id)
        second = bundle.service.job_status(job_id)
        assert first == second

    def test_worker_threads_drain_queue(self, bundle):
        photo_id = bundle.store.upload(PGM)
        with bundle.service:
            job_id = bundle.service.submit_job(photo_id, "+15551234567")
            final = wait_terminal(bundle.service, job_id)
        assert final.state is JobState.DONE

    def test_job_status_unknown(self, bundle):
        with pytest.raises(JobNotFound):
            bundle.service.job_status("nope")

    def test_book_tags_without_offers(self):
        from pervascan.catalog import BookInfo

        book = BookInfo(CODE, "Title", ("A",), "EUR", 1500, ())
        assert book_tags(book) == [
            f"barcode:{CODE}",
            "title:Title",
            "author:A",
            "price:1500 EUR",
        ]


class TestRestApi:
    def test_lookup_ok(self, app):
        with TestClient(app) as client:
            reply = client.post(
                "/v1/rest/lookup",
                content=PGM,
                headers={"Content-Type": "image/x-portable-graymap"},
            )
        assert reply.status_code == 200
        body = reply.json()
        assert body["barcode"] == CODE
        assert body["cheapest"] == {"seller": "pageturner", "price_cents": 950}

    def test_lookup_error_statuses(self, app):
        with TestClient(app) as client:
            bad = client.post("/v1/rest/lookup", content=b"junk")
            gray = client.post("/v1/rest/lookup", content=GRAY)
        assert (bad.status_code, bad.json()) == (400, {"error": "invalid_image"})
        assert gray.status_code == 422
        assert gray.json() == {"error": "decode_failed", "detail": "no_contrast"}

    def test_lookup_unknown_book(self, tmp_path):
        bundle = make_bundle(tmp_path, records=[book_record("4006381333931", 1)])
        from pervascan.server import create_app

        with TestClient(create_app(bundle.service)) as client:
            reply = client.post("/v1/rest/lookup", content=PGM)
        assert (reply.status_code, reply.json()) == (404, {"error": "product_not_found"})

    def test_submit_then_status_progresses(self, bundle, app):
        photo_id = bundle.store.upload(PGM)
        with TestClient(app) as client:
            reply = client.post(
                "/v1/rest/jobs", json={"photo_id": photo_id, "msisdn": "+15551234567"}
            )
            assert reply.status_code == 202
            job_id = reply.json()["job_id"]
            deadline = time.monotonic() + 5
            while time.monotonic() < deadline:
                status = client.get(f"/v1/rest/jobs/{job_id}").json()
                if status["state"] in ("DONE", "FAILED"):
                    break
                time.sleep(0.01)
        assert status["state"] == "DONE"
        assert status["barcode"] == CODE
        assert set(status) == {
            "job_id",
            "photo_id",
            "state",
            "failed_stage",
            "error_code",
            "barcode",
            "created_at",
            "updated_at",
        }

    def test_submit_rejects_bad_bodies(self, app):
        with TestClient(app) as client:
            missing = client.post("/v1/rest/jobs", json={"photo_id": "x"})
            invalid = client.post(
                "/v1/rest/jobs", json={"photo_id": "ok123", "msisdn": "nope"}
            )
            garbage = client.post("/v1/rest/jobs", content=b"{{{")
        for reply in (missing, invalid, garbage):
            assert (reply.status_code, reply.json()) == (400, {"error": "invalid_request"})

    def test_status_unknown_job(self, app):
        with TestClient(app) as client:
            reply = client.get("/v1/rest/jobs/unknown")
        assert (reply.status_code, reply.json()) == (404, {"error": "job_not_found"})

    def test_metrics_start_at_zero(self, app):
        with TestClient(app) as client:
            body = client.get("/v1/metrics").json()
        assert body == {
            "online_requests": 0,
            "online_bytes_in": 0,
            "offline_requests": 0,
            "offline_bytes_in": 0,
        }

    def test_metrics_reflect_traffic(self, bundle, app):
        with TestClient(app) as client:
            client.post("/v1/rest/lookup", content=PGM)
            client.post(
                "/v1/rest/jobs", json={"photo_id": "0" * 16, "msisdn": "+15551234567"}
            )
            body = client.get("/v1/metrics").json()
        assert body["online_requests"] == 1
        assert body["online_bytes_in"] >= len(PGM)
        assert body["offline_requests"] == 1
        assert body["offline_bytes_in"] < 512


class TestXmlApi:
    def test_lookup_via_envelope(self, app):
        with TestClient(app) as client:
            reply = client.post(
                "/v1/soap",
                content=to_xml(LookupRequest(image_bytes=PGM)),
                headers={"Content-Type": "application/xml"},
            )
        assert reply.status_code == 200
        record = from_xml(reply.content)
        assert record.barcode == CODE
        assert record.authors == tuple(KNR_BOOK["authors"])
        assert record.cheapest.price_cents == 950

    def test_submit_and_status_via_envelope(self, bundle, app):
        photo_id = bundle.store.upload(PGM)
        with TestClient(app) as client:
            submit = client.post(
                "/v1/soap",
                content=to_xml(SubmitJobRequest(photo_id=photo_id, msisdn="+15551234567")),
            )
            assert submit.status_code == 202
            job_id = from_xml(submit.content).job_id
            deadline = time.monotonic() + 5
            while time.monotonic() < deadline:
                reply = client.post(
                    "/v1/soap", content=to_xml(JobStatusRequest(job_id=job_id))
                )
                status = from_xml(reply.content)
                if status.state in ("DONE", "FAILED"):
                    break
                time.sleep(0.01)
        assert status.state == "DONE"
        assert status.barcode == CODE

    def test_rest_and_envelope_lookups_agree(self, app):
        from pervascan.server.wire import LookupResponse, from_json

        with TestClient(app) as client:
            rest = client.post("/v1/rest/lookup", content=PGM)
            soap = client.post("/v1/soap", content=to_xml(LookupRequest(image_bytes=PGM)))
        assert from_json(rest.content, LookupResponse) == from_xml(soap.content)

    def test_envelope_errors(self, app):
        with TestClient(app) as client:
            truncated = client.post("/v1/soap", content=b"<Envelope><Body>")
            gray = client.post(
                "/v1/soap", content=to_xml(LookupRequest(image_bytes=GRAY))
            )
            response_as_request = client.post(
                "/v1/soap", content=to_xml(SubmitJobRequest(photo_id="ok", msisdn="bad"))
            )
        assert truncated.status_code == 400
        assert from_xml(truncated.content).error == "malformed_body"
        assert gray.status_code == 422
        err = from_xml(gray.content)
        assert (err.error, err.detail) == ("decode_failed", "no_contrast")
        assert response_as_request.status_code == 400
        assert from_xml(response_as_request.content).error == "invalid_request"

    def test_envelope_rejects_response_records(self, app):
        from pervascan.server.wire import SubmitJobResponse

        with TestClient(app) as client:
            reply = client.post("/v1/soap", content=to_xml(SubmitJobResponse(job_id="x")))
        assert reply.status_code == 400
        assert from_xml(reply.content).error == "malformed_body"


class TestArchitectureEquivalence:
    def test_online_and_offline_agree_on_book_facts(self, bundle):
        record = bundle.service.handle_online(PGM)
        photo_id = bundle.store.upload(PGM)
        job_id = bundle.service.submit_job(photo_id, "+15551234567")
        bundle.service.run_job(job_id)
        tags = dict(t.split(":", 1) for t in bundle.store.get_tags(photo_id) if ":" in t)
        assert tags["barcode"] == record.barcode
        assert tags["title"] == record.title
        cheapest_cents = int(tags["cheapest"].split()[1])
        assert cheapest_cents == record.cheapest.price_cents
