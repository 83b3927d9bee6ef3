"""Directory-backed photo store with tags, its HTTP mock server, and a client.

Stands in for a public image database: each photo lives as `<id>.pgm` next
to `<id>.tags.json` (a JSON array of strings), so fixtures stay inspectable
and diff-able. The FastAPI wrapper and the HTTP client expose the same
four-call surface as the in-process store, letting the computation server
run against either.
"""

from __future__ import annotations

import json
import re
import threading
from pathlib import Path

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .imagekit import PgmError, load_pgm
from .rng import SplitMix64, token_hex


class StoreError(Exception):
    code = "store_error"


class InvalidImage(StoreError):
    code = "invalid_image"


class PhotoNotFound(StoreError):
    code = "photo_not_found"


class InvalidTag(StoreError):
    code = "invalid_tag"


_PHOTO_ID_RE = re.compile(r"[A-Za-z0-9._~-]+$")
_TAG_LIMIT = 128

PGM_CONTENT_TYPE = "image/x-portable-graymap"


def valid_photo_id(photo_id: str) -> bool:
    """Non-empty and URL-safe (unreserved characters only)."""
    return bool(_PHOTO_ID_RE.match(photo_id))


def _check_tag(tag: str) -> None:
    if not tag or len(tag) > _TAG_LIMIT:
        raise InvalidTag(f"tags must be 1..{_TAG_LIMIT} characters")
    if any(ord(c) < 0x20 or ord(c) == 0x7F for c in tag):
        raise InvalidTag("tags must not contain control characters")


class PhotoStore:
    """Filesystem store; every call round-trips through the directory.

    Image bytes are write-once; tag writes are serialized by a lock. With a
    seed, photo IDs come from the deterministic stream, otherwise from
    system entropy.
    """

    def __init__(self, root: str | Path, seed: int | None = None):
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)
        self._rng = SplitMix64(seed) if seed is not None else None
        self._lock = threading.Lock()

    def _image_path(self, photo_id: str) -> Path:
        if not valid_photo_id(photo_id):
            raise PhotoNotFound(photo_id)
        return self._root / f"{photo_id}.pgm"

    def _tags_path(self, photo_id: str) -> Path:
        return self._root / f"{photo_id}.tags.json"

    def upload(self, image_bytes: bytes) -> str:
        """Store the bytes under a fresh 16-hex-char photo ID."""
        try:
            load_pgm(image_bytes)
        except PgmError as exc:
            raise InvalidImage(str(exc)) from exc
        with self._lock:
            while True:
                photo_id = token_hex(self._rng, 8)
                if not (self._root / f"{photo_id}.pgm").exists():
                    break
            (self._root / f"{photo_id}.pgm").write_bytes(bytes(image_bytes))
            self._write_tags(photo_id, [])
        return photo_id

    def fetch(self, photo_id: str) -> bytes:
        try:
            return self._image_path(photo_id).read_bytes()
        except FileNotFoundError:
            raise PhotoNotFound(photo_id) from None

    def add_tags(self, photo_id: str, tags: list[str]) -> list[str]:
        """Append in order, dropping duplicates; repeat calls are idempotent."""
        for tag in tags:
            _check_tag(tag)
        with self._lock:
            current = self._read_tags(photo_id)
            for tag in tags:
                if tag not in current:
                    current.append(tag)
            self._write_tags(photo_id, current)
            return list(current)

    def get_tags(self, photo_id: str) -> list[str]:
        with self._lock:
            return self._read_tags(photo_id)

    def _read_tags(self, photo_id: str) -> list[str]:
        if not self._image_path(photo_id).exists():
            raise PhotoNotFound(photo_id)
        try:
            return json.loads(self._tags_path(photo_id).read_text("utf-8"))
        except FileNotFoundError:
            return []

    def _write_tags(self, photo_id: str, tags: list[str]) -> None:
        self._tags_path(photo_id).write_text(
            json.dumps(tags, ensure_ascii=False), "utf-8"
        )


def create_store_app(store: PhotoStore) -> FastAPI:
    """REST wrapper for running the store as a standalone mock server."""
    app = FastAPI(title="pervascan image store")

    @app.post("/store/photos", status_code=201)
    async def upload(request: Request):
        body = await request.body()
        try:
            photo_id = store.upload(bytes(body))
        except InvalidImage:
            return JSONResponse({"error": "invalid_image"}, status_code=400)
        return {"photo_id": photo_id}

    @app.get("/store/photos/{photo_id}")
    def fetch(photo_id: str):
        try:
            data = store.fetch(photo_id)
        except PhotoNotFound:
            return JSONResponse({"error": "photo_not_found"}, status_code=404)
        return Response(content=data, media_type=PGM_CONTENT_TYPE)

    @app.post("/store/photos/{photo_id}/tags")
    async def add_tags(photo_id: str, request: Request):
        try:
            payload = json.loads(await request.body())
            tags = payload["tags"]
            if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
                raise KeyError("tags")
        except (ValueError, KeyError, TypeError):
            return JSONResponse({"error": "invalid_request"}, status_code=400)
        try:
            merged = store.add_tags(photo_id, tags)
        except PhotoNotFound:
            return JSONResponse({"error": "photo_not_found"}, status_code=404)
        except InvalidTag:
            return JSONResponse({"error": "invalid_tag"}, status_code=400)
        return {"tags": merged}

    @app.get("/store/photos/{photo_id}/tags")
    def get_tags(photo_id: str):
        try:
            return {"tags": store.get_tags(photo_id)}
        except PhotoNotFound:
            return JSONResponse({"error": "photo_not_found"}, status_code=404)

    return app


class HttpPhotoStore:
    """PhotoStore surface spoken over the mock server's REST interface."""

    def __init__(self, base_url: str, client: httpx.Client | None = None):
        self._client = client or httpx.Client(base_url=base_url, timeout=10.0)

    def upload(self, image_bytes: bytes) -> str:
        r = self._client.post(
            "/store/photos",
            content=image_bytes,
            headers={"Content-Type": PGM_CONTENT_TYPE},
        )
        if r.status_code == 400:
            raise InvalidImage(r.text)
        r.raise_for_status()
        return r.json()["photo_id"]

    def fetch(self, photo_id: str) -> bytes:
        r = self._client.get(f"/store/photos/{photo_id}")
        if r.status_code == 404:
            raise PhotoNotFound(photo_id)
        r.raise_for_status()
        return r.content

    def add_tags(self, photo_id: str, tags: list[str]) -> list[str]:
        r = self._client.post(f"/store/photos/{photo_id}/tags", json={"tags": tags})
        if r.status_code == 404:
            raise PhotoNotFound(photo_id)
        if r.status_code == 400:
            raise InvalidTag(r.text)
        r.raise_for_status()
        return r.json()["tags"]

    def get_tags(self, photo_id: str) -> list[str]:
        r = self._client.get(f"/store/photos/{photo_id}/tags")
        if r.status_code == 404:
            raise PhotoNotFound(photo_id)
        r.raise_for_status()
        return r.json()["tags"]

    def close(self) -> None:
        self._client.close()
