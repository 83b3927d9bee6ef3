"""Book catalog keyed by barcode, loaded from a JSON-lines fixture file.

One record per line:
{"barcode":"9780131103627","title":"...","authors":["..."],"currency":"USD",
 "list_price_cents":4999,"offers":[{"seller":"...","price_cents":950}]}

Prices are integer cents throughout; offers inherit the book's currency.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .barcode import BadLength, Ean13, validate


class CatalogError(Exception):
    code = "catalog_error"


class FileUnreadable(CatalogError):
    code = "file_unreadable"


class MalformedRecord(CatalogError):
    code = "malformed_record"


class DuplicateBarcode(CatalogError):
    code = "duplicate_barcode"


class InvalidBarcode(CatalogError):
    code = "invalid_barcode"


class ProductNotFound(CatalogError):
    code = "product_not_found"


_CURRENCY_RE = re.compile(r"[A-Z]{3}$")


@dataclass(frozen=True)
class Offer:
    seller: str
    price_cents: int
    currency: str


@dataclass(frozen=True)
class BookInfo:
    barcode: str
    title: str
    authors: tuple[str, ...]
    currency: str
    list_price_cents: int
    offers: tuple[Offer, ...]

    @property
    def list_price(self) -> Offer:
        return Offer("list", self.list_price_cents, self.currency)


def cheapest_offer(book: BookInfo) -> Offer | None:
    """Minimum-price offer; ties break by seller name ascending; None if no offers."""
    if not book.offers:
        return None
    return min(book.offers, key=lambda o: (o.price_cents, o.seller))


class Catalog:
    """Immutable barcode -> BookInfo index; safe for concurrent reads."""

    def __init__(self, books: dict[str, BookInfo]):
        self._books = dict(books)

    def lookup(self, code: Ean13 | str) -> BookInfo:
        key = str(code)
        try:
            return self._books[key]
        except KeyError:
            raise ProductNotFound(key) from None

    def __len__(self) -> int:
        return len(self._books)

    def __contains__(self, code) -> bool:
        return str(code) in self._books


def _parse_record(obj: dict, line_no: int) -> BookInfo:
    def bad(reason: str) -> MalformedRecord:
        return MalformedRecord(f"line {line_no}: {reason}")

    if not isinstance(obj, dict):
        raise bad("record must be a JSON object")
    barcode = obj.get("barcode")
    title = obj.get("title")
    authors = obj.get("authors", [])
    currency = obj.get("currency")
    list_price = obj.get("list_price_cents")
    offers_raw = obj.get("offers", [])
    if not isinstance(barcode, str):
        raise bad("barcode must be a string")
    if not isinstance(title, str) or not title:
        raise bad("title must be a non-empty string")
    if not isinstance(authors, list) or not all(isinstance(a, str) for a in authors):
        raise bad("authors must be a list of strings")
    if not isinstance(currency, str) or not _CURRENCY_RE.match(currency):
        raise bad("currency must be a 3-letter uppercase code")
    if not isinstance(list_price, int) or isinstance(list_price, bool) or list_price < 0:
        raise bad("list_price_cents must be a non-negative integer")
    if not isinstance(offers_raw, list):
        raise bad("offers must be a list")
    offers = []
    for entry in offers_raw:
        if not isinstance(entry, dict):
            raise bad("each offer must be an object")
        seller = entry.get("seller")
        price = entry.get("price_cents")
        if not isinstance(seller, str) or not seller:
            raise bad("offer seller must be a non-empty string")
        if not isinstance(price, int) or isinstance(price, bool) or price < 0:
            raise bad("offer price_cents must be a non-negative integer")
        if "currency" in entry and entry["currency"] != currency:
            raise bad("offers must share the book's currency")
        offers.append(Offer(seller, price, currency))
    return BookInfo(barcode, title, tuple(authors), currency, list_price, tuple(offers))


def load_catalog(path: str | Path) -> Catalog:
    """Parse the fixture into an in-memory index, validating every barcode."""
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise FileUnreadable(str(exc)) from exc
    books: dict[str, BookInfo] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except ValueError as exc:
            raise MalformedRecord(f"line {line_no}: {exc}") from None
        book = _parse_record(obj, line_no)
        try:
            ok = validate(book.barcode)
        except BadLength:
            ok = False
        if not ok:
            raise InvalidBarcode(f"line {line_no}: {book.barcode}")
        if book.barcode in books:
            raise DuplicateBarcode(f"line {line_no}: {book.barcode}")
        books[book.barcode] = book
    return Catalog(books)
