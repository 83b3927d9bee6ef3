"""Request/response records with their two wire encodings.

Every record has a JSON body (the REST form) and an XML envelope form; the
two are byte-different but map bijectively onto the same record, so either
side of the service can be driven through either encoding. The envelope is
deliberately minimal: <Envelope><Body><OneRequestOrResponse/></Body>
</Envelope> under a single fixed default namespace, no further schema.
"""

from __future__ import annotations

import base64
import binascii
import xml.etree.ElementTree as ET
from typing import TypeVar

from pydantic import BaseModel, ConfigDict, ValidationError

XML_NAMESPACE = "urn:pervascan:v1"


class MalformedBody(Exception):
    code = "malformed_body"


class _Record(BaseModel):
    model_config = ConfigDict(frozen=True)


class LookupRequest(_Record):
    image_bytes: bytes


class CheapestOffer(_Record):
    seller: str
    price_cents: int


class LookupResponse(_Record):
    barcode: str
    title: str
    authors: tuple[str, ...] = ()
    list_price_cents: int
    currency: str
    cheapest: CheapestOffer | None = None


class SubmitJobRequest(_Record):
    photo_id: str
    msisdn: str


class SubmitJobResponse(_Record):
    job_id: str


class JobStatusRequest(_Record):
    job_id: str


class JobStatusResponse(_Record):
    job_id: str
    photo_id: str
    state: str
    failed_stage: str | None = None
    error_code: str | None = None
    barcode: str | None = None
    created_at: str
    updated_at: str


class ErrorResponse(_Record):
    error: str
    detail: str | None = None


class WireMetrics(_Record):
    online_requests: int = 0
    online_bytes_in: int = 0
    offline_requests: int = 0
    offline_bytes_in: int = 0


T = TypeVar("T", bound=_Record)


def to_json(record: _Record) -> bytes:
    """Canonical UTF-8 JSON body for a record.

    ErrorResponse drops its null detail so plain errors stay exactly
    {"error": "<code>"}.
    """
    if isinstance(record, ErrorResponse):
        return record.model_dump_json(exclude_none=True).encode()
    return record.model_dump_json().encode()


def from_json(data: bytes | str, record_type: type[T]) -> T:
    try:
        return record_type.model_validate_json(data)
    except ValidationError as exc:
        raise MalformedBody(str(exc)) from None


def _el(parent: ET.Element, tag: str, text: str | None = None) -> ET.Element:
    child = ET.SubElement(parent, tag)
    child.text = text
    return child


def _encode_payload(record: _Record) -> ET.Element:
    if isinstance(record, LookupRequest):
        el = ET.Element("LookupRequest")
        _el(el, "ImageBase64", base64.b64encode(record.image_bytes).decode("ascii"))
    elif isinstance(record, LookupResponse):
        el = ET.Element("LookupResponse")
        _el(el, "Barcode", record.barcode)
        _el(el, "Title", record.title)
        authors = _el(el, "Authors")
        for author in record.authors:
            _el(authors, "Author", author)
        _el(el, "ListPriceCents", str(record.list_price_cents))
        _el(el, "Currency", record.currency)
        if record.cheapest is not None:
            _el(el, "CheapestSeller", record.cheapest.seller)
            _el(el, "CheapestPriceCents", str(record.cheapest.price_cents))
    elif isinstance(record, SubmitJobRequest):
        el = ET.Element("SubmitJobRequest")
        _el(el, "PhotoId", record.photo_id)
        _el(el, "Msisdn", record.msisdn)
    elif isinstance(record, SubmitJobResponse):
        el = ET.Element("SubmitJobResponse")
        _el(el, "JobId", record.job_id)
    elif isinstance(record, JobStatusRequest):
        el = ET.Element("JobStatusRequest")
        _el(el, "JobId", record.job_id)
    elif isinstance(record, JobStatusResponse):
        el = ET.Element("JobStatusResponse")
        _el(el, "JobId", record.job_id)
        _el(el, "PhotoId", record.photo_id)
        _el(el, "State", record.state)
        if record.failed_stage is not None:
            _el(el, "FailedStage", record.failed_stage)
        if record.error_code is not None:
            _el(el, "ErrorCode", record.error_code)
        if record.barcode is not None:
            _el(el, "Barcode", record.barcode)
        _el(el, "CreatedAt", record.created_at)
        _el(el, "UpdatedAt", record.updated_at)
    elif isinstance(record, ErrorResponse):
        el = ET.Element("ErrorResponse")
        _el(el, "Code", record.error)
        if record.detail is not None:
            _el(el, "Detail", record.detail)
    else:
        raise TypeError(f"no XML encoding for {type(record).__name__}")
    return el


def to_xml(record: _Record) -> bytes:
    envelope = ET.Element("Envelope", {"xmlns": XML_NAMESPACE})
    body = ET.SubElement(envelope, "Body")
    body.append(_encode_payload(record))
    return ET.tostring(envelope, encoding="utf-8")


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _children(el: ET.Element) -> list[ET.Element]:
    return list(el)


def _child_map(el: ET.Element) -> dict[str, list[ET.Element]]:
    out: dict[str, list[ET.Element]] = {}
    for child in el:
        out.setdefault(_local(child.tag), []).append(child)
    return out


def _text(children: dict[str, list[ET.Element]], name: str) -> str:
    try:
        return children[name][0].text or ""
    except (KeyError, IndexError):
        raise MalformedBody(f"missing element {name}") from None


def _opt_text(children: dict[str, list[ET.Element]], name: str) -> str | None:
    if name not in children:
        return None
    return children[name][0].text or ""


def _int_text(children: dict[str, list[ET.Element]], name: str) -> int:
    raw = _text(children, name)
    try:
        return int(raw)
    except ValueError:
        raise MalformedBody(f"{name} must be an integer, got {raw!r}") from None


def _decode_payload(el: ET.Element) -> _Record:
    name = _local(el.tag)
    children = _child_map(el)
    if name == "LookupRequest":
        try:
            raw = base64.b64decode(_text(children, "ImageBase64"), validate=True)
        except binascii.Error as exc:
            raise MalformedBody(f"bad base64 payload: {exc}") from None
        return LookupRequest(image_bytes=raw)
    if name == "LookupResponse":
        cheapest = None
        if "CheapestSeller" in children or "CheapestPriceCents" in children:
            cheapest = CheapestOffer(
                seller=_text(children, "CheapestSeller"),
                price_cents=_int_text(children, "CheapestPriceCents"),
            )
        authors: tuple[str, ...] = ()
        if "Authors" in children:
            authors = tuple(
                child.text or ""
                for child in children["Authors"][0]
                if _local(child.tag) == "Author"
            )
        return LookupResponse(
            barcode=_text(children, "Barcode"),
            title=_text(children, "Title"),
            authors=authors,
            list_price_cents=_int_text(children, "ListPriceCents"),
            currency=_text(children, "Currency"),
            cheapest=cheapest,
        )
    if name == "SubmitJobRequest":
        return SubmitJobRequest(
            photo_id=_text(children, "PhotoId"), msisdn=_text(children, "Msisdn")
        )
    if name == "SubmitJobResponse":
        return SubmitJobResponse(job_id=_text(children, "JobId"))
    if name == "JobStatusRequest":
        return JobStatusRequest(job_id=_text(children, "JobId"))
    if name == "JobStatusResponse":
        return JobStatusResponse(
            job_id=_text(children, "JobId"),
            photo_id=_text(children, "PhotoId"),
            state=_text(children, "State"),
            failed_stage=_opt_text(children, "FailedStage"),
            error_code=_opt_text(children, "ErrorCode"),
            barcode=_opt_text(children, "Barcode"),
            created_at=_text(children, "CreatedAt"),
            updated_at=_text(children, "UpdatedAt"),
        )
    if name == "ErrorResponse":
        return ErrorResponse(
            error=_text(children, "Code"), detail=_opt_text(children, "Detail")
        )
    raise MalformedBody(f"unknown body element {name}")


def from_xml(data: bytes | str) -> _Record:
    """Parse an envelope into its record; anything off-shape is MalformedBody."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedBody(f"unparseable XML: {exc}") from None
    if _local(root.tag) != "Envelope":
        raise MalformedBody(f"document root must be Envelope, got {_local(root.tag)}")
    bodies = [el for el in root if _local(el.tag) == "Body"]
    if len(bodies) != 1:
        raise MalformedBody("Envelope must contain exactly one Body")
    payload = _children(bodies[0])
    if len(payload) != 1:
        raise MalformedBody("Body must contain exactly one element")
    return _decode_payload(payload[0])
