"""Command-line client: render and decode locally, or drive a running service.

Exit codes are stable: 0 ok, 1 I/O or transport, 2 invalid input, 3 decode
failure, 4 product not found, 5 timeout, 6 job failed.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import httpx
import uvicorn

from .barcode import BarcodeError, InvalidCode, decode_image
from .catalog import CatalogError
from .imagekit import Degradation, PgmError, RenderSpec, degrade, load_pgm, render_ean13, save_pgm
from .imagestore import HttpPhotoStore, PhotoStore, StoreError, create_store_app
from .notifier import SmsNotifier
from .server import build_service, create_app, load_config, parse_listen
from .server.wire import (
    ErrorResponse,
    JobStatusResponse,
    LookupRequest,
    LookupResponse,
    MalformedBody,
    from_json,
    from_xml,
    to_json,
    to_xml,
)

EXIT_IO = 1
EXIT_INVALID = 2
EXIT_DECODE = 3
EXIT_NOT_FOUND = 4
EXIT_TIMEOUT = 5
EXIT_JOB_FAILED = 6

_DEFAULT_SERVER = "http://127.0.0.1:8080"

_ERROR_EXITS = {
    "invalid_image": EXIT_INVALID,
    "invalid_request": EXIT_INVALID,
    "malformed_body": EXIT_INVALID,
    "decode_failed": EXIT_DECODE,
    "product_not_found": EXIT_NOT_FOUND,
    "job_not_found": EXIT_NOT_FOUND,
}


def _fail(exit_code: int, message: str) -> None:
    click.echo(message, err=True)
    sys.exit(exit_code)


def _fail_error_code(code: str, detail: str | None = None) -> None:
    message = code if not detail else f"{code}: {detail}"
    _fail(_ERROR_EXITS.get(code, EXIT_IO), message)


def _read_file(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
        raise AssertionError  # unreachable


def _make_client(base_url: str) -> httpx.Client:
    return httpx.Client(base_url=base_url, timeout=30.0)


@click.group()
@click.version_option(package_name="pervascan")
def main():
    """pervascan: read book barcodes from photos, locally or via the service."""


@main.command()
@click.argument("code")
@click.option("--module-px", "-m", default=3, show_default=True, help="pixels per module")
@click.option("--height", default=60, show_default=True, help="bar height in pixels")
@click.option("--quiet", default=9, show_default=True, help="quiet-zone width in modules")
@click.option("--out", "-o", "out_path", default=None, help="output PGM path [default: <code>.pgm]")
@click.option("--noise", default=0.0, help="Gaussian noise standard deviation")
@click.option("--blur", default=0, help="box blur radius in pixels")
@click.option("--slope", default=0.0, help="left-to-right brightness delta")
@click.option("--rotate", default=0.0, help="rotation in degrees (max +/-3)")
@click.option("--seed", default=0, help="noise seed")
def render(code, module_px, height, quiet, out_path, noise, blur, slope, rotate, seed):
    """Render CODE as a synthetic barcode photo (stands in for the camera)."""
    try:
        spec = RenderSpec(module_px=module_px, bar_height_px=height, quiet_modules=quiet)
        image = render_ean13(code, spec)
    except InvalidCode as exc:
        _fail(EXIT_INVALID, f"invalid check digit: {exc}")
    except ValueError as exc:
        _fail(EXIT_INVALID, str(exc))
    if noise or blur or slope or rotate:
        try:
            image = degrade(
                image,
                Degradation(
                    noise_stddev=noise,
                    blur_radius=blur,
                    brightness_slope=slope,
                    rotation_deg=rotate,
                    seed=seed,
                ),
            )
        except ValueError as exc:
            _fail(EXIT_INVALID, str(exc))
    target = Path(out_path) if out_path else Path(f"{code}.pgm")
    try:
        target.write_bytes(save_pgm(image))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    click.echo(f"{image.width}x{image.height} -> {target}")


@main.command()
@click.argument("image_path")
@click.option("--scanlines", default=7, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="emit a JSON report")
def decode(image_path, scanlines, as_json):
    """Decode the barcode in a PGM file and print code + confidence."""
    data = _read_file(image_path)
    try:
        image = load_pgm(data)
    except PgmError as exc:
        _fail(EXIT_INVALID, f"invalid_image: {exc}")
    try:
        report = decode_image(image, scanlines)
    except BarcodeError as exc:
        _fail(EXIT_DECODE, exc.code)
    if as_json:
        click.echo(
            json.dumps(
                {
                    "barcode": report.code.digits,
                    "scanlines_attempted": report.scanlines_attempted,
                    "scanlines_agreeing": report.scanlines_agreeing,
                    "reversed": report.reversed,
                }
            )
        )
    else:
        line = f"{report.code} {report.scanlines_agreeing}/{report.scanlines_attempted}"
        if report.reversed:
            line += " reversed"
        click.echo(line)


def _print_book(record: LookupResponse) -> None:
    click.echo(f"barcode: {record.barcode}")
    click.echo(f"title: {record.title}")
    click.echo(f"authors: {', '.join(record.authors)}")
    click.echo(f"list price: {record.list_price_cents / 100:.2f} {record.currency}")
    if record.cheapest is None:
        click.echo("cheapest: none")
    else:
        click.echo(
            f"cheapest: {record.cheapest.seller} "
            f"{record.cheapest.price_cents / 100:.2f} {record.currency}"
        )


@main.command()
@click.argument("image_path")
@click.option("--server", "server_url", default=_DEFAULT_SERVER, show_default=True)
@click.option("--encoding", type=click.Choice(["rest", "soap"]), default="rest", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="emit the REST response body verbatim")
def online(image_path, server_url, encoding, as_json):
    """Send the image to the server and print the book info (synchronous path)."""
    data = _read_file(image_path)
    try:
        with _make_client(server_url) as client:
            if encoding == "rest":
                reply = client.post(
                    "/v1/rest/lookup",
                    content=data,
                    headers={"Content-Type": "image/x-portable-graymap"},
                )
                if reply.status_code != 200:
                    err = from_json(reply.content, ErrorResponse)
                    _fail_error_code(err.error, err.detail)
                record = from_json(reply.content, LookupResponse)
            else:
                reply = client.post(
                    "/v1/soap",
                    content=to_xml(LookupRequest(image_bytes=data)),
                    headers={"Content-Type": "application/xml"},
                )
                parsed = from_xml(reply.content)
                if isinstance(parsed, ErrorResponse):
                    _fail_error_code(parsed.error, parsed.detail)
                record = parsed
    except httpx.HTTPError as exc:
        _fail(EXIT_IO, f"transport error: {exc}")
    except MalformedBody as exc:
        _fail(EXIT_IO, f"unintelligible server reply: {exc}")
    if as_json:
        click.echo(to_json(record).decode())
    else:
        _print_book(record)


@main.command()
@click.argument("image_path")
@click.option("--store", "store_target", required=True, help="store directory or base URL")
@click.option("--server", "server_url", default=_DEFAULT_SERVER, show_default=True)
@click.option("--msisdn", required=True, help="SMS recipient for the ready notification")
@click.option("--inbox", "inbox_path", default=None, help="poll this SMS inbox file for completion [default: poll job status]")
@click.option("--poll-interval", default=0.2, show_default=True)
@click.option("--timeout", default=30.0, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="emit job status + tags as JSON")
def offline(image_path, store_target, server_url, msisdn, inbox_path, poll_interval, timeout, as_json):
    """Upload to the store, submit the photo ID, await the SMS, print the tags."""
    data = _read_file(image_path)
    if store_target.startswith(("http://", "https://")):
        store = HttpPhotoStore(store_target)
    else:
        store = PhotoStore(store_target)
    try:
        photo_id = store.upload(data)
    except StoreError as exc:
        _fail(EXIT_INVALID, f"{exc.code}: {exc}")
    except httpx.HTTPError as exc:
        _fail(EXIT_IO, f"store unreachable: {exc}")

    try:
        with _make_client(server_url) as client:
            reply = client.post(
                "/v1/rest/jobs", json={"photo_id": photo_id, "msisdn": msisdn}
            )
            if reply.status_code != 202:
                err = from_json(reply.content, ErrorResponse)
                _fail_error_code(err.error, err.detail)
            job_id = reply.json()["job_id"]

            deadline = time.monotonic() + timeout
            notifier = SmsNotifier(inbox_path) if inbox_path else None
            status: JobStatusResponse | None = None
            while True:
                if notifier is not None:
                    signal = any(
                        f"photo {photo_id}" in m.body for m in notifier.inbox(msisdn)
                    )
                    if signal:
                        status = _get_status(client, job_id)
                        break
                else:
                    status = _get_status(client, job_id)
                    if status.state in ("DONE", "FAILED"):
                        break
                if time.monotonic() >= deadline:
                    _fail(EXIT_TIMEOUT, f"timed out after {timeout:.0f}s waiting for job {job_id}")
                time.sleep(poll_interval)
    except httpx.HTTPError as exc:
        _fail(EXIT_IO, f"transport error: {exc}")

    if status.state == "FAILED":
        _fail(EXIT_JOB_FAILED, status.error_code or "job_failed")
    try:
        tags = store.get_tags(photo_id)
    except (StoreError, httpx.HTTPError) as exc:
        _fail(EXIT_IO, f"cannot read tags back: {exc}")
    if as_json:
        click.echo(json.dumps({"job": json.loads(to_json(status)), "tags": tags}))
    else:
        for tag in tags:
            click.echo(tag)


def _get_status(client: httpx.Client, job_id: str) -> JobStatusResponse:
    reply = client.get(f"/v1/rest/jobs/{job_id}")
    if reply.status_code != 200:
        err = from_json(reply.content, ErrorResponse)
        _fail_error_code(err.error, err.detail)
    return from_json(reply.content, JobStatusResponse)


@main.command()
@click.option("--config", "config_path", default=None, help="JSON config file")
@click.option("--listen", default=None, help="host:port to bind")
@click.option("--catalog", "catalog_path", default=None)
@click.option("--store-dir", default=None)
@click.option("--store-url", default=None)
@click.option("--inbox", "inbox_path", default=None)
@click.option("--journal", "journal_path", default=None)
@click.option("--workers", "worker_count", type=int, default=None)
@click.option("--queue-capacity", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--scanlines", type=int, default=None)
def serve(config_path, **overrides):
    """Run the computation server (REST + XML endpoints)."""
    try:
        config = load_config(config_path, **overrides)
        host, port = parse_listen(config.listen)
        service = build_service(config)
    except CatalogError as exc:
        _fail(EXIT_IO, f"{exc.code}: {exc}")
    except (OSError, ValueError) as exc:
        _fail(EXIT_IO, str(exc))
    click.echo(f"pervascan server listening on {host}:{port}")
    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")


@main.command()
@click.argument("directory")
@click.option("--listen", default="127.0.0.1:8081", show_default=True)
@click.option("--seed", type=int, default=None)
def store(directory, listen, seed):
    """Run the standalone image-store mock server."""
    try:
        host, port = parse_listen(listen)
        photo_store = PhotoStore(directory, seed=seed)
    except (OSError, ValueError) as exc:
        _fail(EXIT_IO, str(exc))
    click.echo(f"image store on {host}:{port}, backed by {directory}")
    uvicorn.run(create_store_app(photo_store), host=host, port=port, log_level="warning")


@main.command()
@click.argument("msisdn")
@click.option("--inbox", "inbox_path", default="inbox.jsonl", show_default=True)
def inbox(msisdn, inbox_path):
    """Print the SMS messages recorded for MSISDN, oldest first."""
    for message in SmsNotifier(inbox_path).inbox(msisdn):
        click.echo(message.body)


if __name__ == "__main__":
    main()
