"""HTTP front end: the REST/JSON routes and the XML-envelope endpoint.

Both speak to the same PervascanService; the envelope endpoint multiplexes
the three request kinds on POST /v1/soap. Errors carry the same codes in
both encodings, with the usual status mapping (400 bad input, 404 missing,
422 undecodable image).
"""

from __future__ import annotations

from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import Response

from ..catalog import ProductNotFound
from ..imagestore import InvalidImage
from .core import DecodeFailed, InvalidRequest, PervascanService, job_view
from .jobs import JobNotFound
from .wire import (
    ErrorResponse,
    JobStatusRequest,
    LookupRequest,
    MalformedBody,
    SubmitJobRequest,
    SubmitJobResponse,
    from_json,
    from_xml,
    to_json,
    to_xml,
)

_JSON = "application/json"
_XML = "application/xml"


def create_app(service: PervascanService) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        service.start()
        try:
            yield
        finally:
            service.stop()

    app = FastAPI(title="pervascan", lifespan=lifespan)

    def json_error(status: int, code: str, detail: str | None = None) -> Response:
        body = to_json(ErrorResponse(error=code, detail=detail))
        return Response(body, status_code=status, media_type=_JSON)

    def xml_error(status: int, code: str, detail: str | None = None) -> Response:
        body = to_xml(ErrorResponse(error=code, detail=detail))
        return Response(body, status_code=status, media_type=_XML)

    @app.post("/v1/rest/lookup")
    async def rest_lookup(request: Request) -> Response:
        body = bytes(await request.body())
        try:
            record = await run_in_threadpool(service.handle_online, body, len(body))
        except InvalidImage:
            return json_error(400, "invalid_image")
        except DecodeFailed as exc:
            return json_error(422, "decode_failed", exc.detail)
        except ProductNotFound:
            return json_error(404, "product_not_found")
        return Response(to_json(record), media_type=_JSON)

    @app.post("/v1/rest/jobs")
    async def rest_submit(request: Request) -> Response:
        body = bytes(await request.body())
        try:
            req = from_json(body, SubmitJobRequest)
            job_id = service.submit_job(req.photo_id, req.msisdn, request_size=len(body))
        except (MalformedBody, InvalidRequest):
            return json_error(400, "invalid_request")
        return Response(
            to_json(SubmitJobResponse(job_id=job_id)), status_code=202, media_type=_JSON
        )

    @app.get("/v1/rest/jobs/{job_id}")
    def rest_job_status(job_id: str) -> Response:
        try:
            job = service.job_status(job_id)
        except JobNotFound:
            return json_error(404, "job_not_found")
        return Response(to_json(job_view(job)), media_type=_JSON)

    @app.get("/v1/metrics")
    def metrics() -> Response:
        return Response(to_json(service.metrics()), media_type=_JSON)

    @app.post("/v1/soap")
    async def soap(request: Request) -> Response:
        body = await request.body()
        try:
            record = from_xml(body)
        except MalformedBody:
            return xml_error(400, "malformed_body")

        if isinstance(record, LookupRequest):
            try:
                response = await run_in_threadpool(
                    service.handle_online, record.image_bytes, len(body)
                )
            except InvalidImage:
                return xml_error(400, "invalid_image")
            except DecodeFailed as exc:
                return xml_error(422, "decode_failed", exc.detail)
            except ProductNotFound:
                return xml_error(404, "product_not_found")
            return Response(to_xml(response), media_type=_XML)

        if isinstance(record, SubmitJobRequest):
            try:
                job_id = service.submit_job(
                    record.photo_id, record.msisdn, request_size=len(body)
                )
            except InvalidRequest:
                return xml_error(400, "invalid_request")
            return Response(
                to_xml(SubmitJobResponse(job_id=job_id)), status_code=202, media_type=_XML
            )

        if isinstance(record, JobStatusRequest):
            try:
                job = service.job_status(record.job_id)
            except JobNotFound:
                return xml_error(404, "job_not_found")
            return Response(to_xml(job_view(job)), media_type=_XML)

        # a response-shaped envelope is not a request
        return xml_error(400, "malformed_body")

    return app
