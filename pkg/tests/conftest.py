"""Shared helpers: deterministic codes, catalog fixtures, a wired service."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import pytest

from pervascan.barcode import checksum_digit
from pervascan.catalog import Catalog, load_catalog
from pervascan.imagestore import PhotoStore
from pervascan.notifier import SmsNotifier
from pervascan.server import PervascanService, create_app

KNR_BOOK = {
    "barcode": "9780131103627",
    "title": "The C Programming Language",
    "authors": ["Brian W. Kernighan", "Dennis M. Ritchie"],
    "currency": "USD",
    "list_price_cents": 6699,
    "offers": [
        {"seller": "pageturner", "price_cents": 950},
        {"seller": "bookbarn", "price_cents": 1299},
    ],
}


def make_code(rng: random.Random) -> str:
    payload = "".join(rng.choice("0123456789") for _ in range(12))
    return payload + str(checksum_digit(payload))


def book_record(code: str, n: int = 0) -> dict:
    return {
        "barcode": code,
        "title": f"Fixture Book {n}",
        "authors": [f"Author {n}"],
        "currency": "USD",
        "list_price_cents": 1000 + n,
        "offers": [
            {"seller": "alpha", "price_cents": 500 + n},
            {"seller": "beta", "price_cents": 700 + n},
        ],
    }


def write_fixture(path: Path, records: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), "utf-8")
    return path


@dataclass
class ServiceBundle:
    service: PervascanService
    store: PhotoStore
    notifier: SmsNotifier
    catalog: Catalog
    catalog_path: Path
    inbox_path: Path
    journal_path: Path


def make_bundle(tmp_path: Path, records: list[dict] | None = None, **service_kwargs) -> ServiceBundle:
    records = [KNR_BOOK] if records is None else records
    tmp_path.mkdir(parents=True, exist_ok=True)
    catalog_path = write_fixture(tmp_path / "books.jsonl", records)
    catalog = load_catalog(catalog_path)
    store = PhotoStore(tmp_path / "photos", seed=11)
    inbox_path = tmp_path / "inbox.jsonl"
    journal_path = tmp_path / "jobs.jsonl"
    service_kwargs.setdefault("seed", 22)
    service = PervascanService(
        catalog,
        store,
        SmsNotifier(inbox_path),
        journal_path=journal_path,
        **service_kwargs,
    )
    return ServiceBundle(
        service=service,
        store=store,
        notifier=SmsNotifier(inbox_path),
        catalog=catalog,
        catalog_path=catalog_path,
        inbox_path=inbox_path,
        journal_path=journal_path,
    )


@pytest.fixture
def bundle(tmp_path) -> ServiceBundle:
    return make_bundle(tmp_path)


@pytest.fixture
def app(bundle):
    return create_app(bundle.service)
