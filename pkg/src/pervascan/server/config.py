"""Service configuration: defaults, then JSON file, then env, then flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from ..catalog import load_catalog
from ..imagestore import HttpPhotoStore, PhotoStore
from ..notifier import SmsNotifier
from .core import PervascanService


@dataclass
class ServerConfig:
    listen: str = "127.0.0.1:8080"
    catalog_path: str = "books.jsonl"
    store_dir: str | None = "photos"
    store_url: str | None = None
    inbox_path: str = "inbox.jsonl"
    journal_path: str | None = "jobs.jsonl"
    worker_count: int = 2
    queue_capacity: int = 64
    seed: int | None = None
    scanlines: int = 7


_ENV_VARS = {
    "listen": "PERVASCAN_LISTEN",
    "catalog_path": "PERVASCAN_CATALOG",
    "store_dir": "PERVASCAN_STORE_DIR",
    "store_url": "PERVASCAN_STORE_URL",
    "inbox_path": "PERVASCAN_INBOX",
    "journal_path": "PERVASCAN_JOURNAL",
    "worker_count": "PERVASCAN_WORKERS",
    "queue_capacity": "PERVASCAN_QUEUE_CAPACITY",
    "seed": "PERVASCAN_SEED",
    "scanlines": "PERVASCAN_SCANLINES",
}

_INT_FIELDS = {"worker_count", "queue_capacity", "seed", "scanlines"}


def load_config(
    path: str | Path | None = None,
    env: dict[str, str] | None = None,
    **overrides,
) -> ServerConfig:
    """Resolve the effective configuration.

    Precedence, lowest to highest: dataclass defaults, the JSON config
    file, PERVASCAN_* environment variables, keyword overrides (flags).
    None-valued overrides are ignored so CLI flags pass through untouched.
    """
    env = os.environ if env is None else env
    names = {f.name for f in fields(ServerConfig)}
    values: dict = {}

    if path is not None:
        try:
            raw = json.loads(Path(path).read_text("utf-8"))
        except OSError as exc:
            raise ValueError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(raw) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)

    for name, var in _ENV_VARS.items():
        if var in env:
            values[name] = env[var]

    for name, value in overrides.items():
        if name not in names:
            raise ValueError(f"unknown config override: {name}")
        if value is not None:
            values[name] = value

    for name in _INT_FIELDS & set(values):
        if values[name] is not None:
            try:
                values[name] = int(values[name])
            except (TypeError, ValueError):
                raise ValueError(f"{name} must be an integer") from None

    config = ServerConfig(**values)
    if config.store_url and values.get("store_dir"):
        raise ValueError("configure either store_dir or store_url, not both")
    if config.store_url:
        config.store_dir = None
    if not config.store_url and not config.store_dir:
        raise ValueError("one of store_dir or store_url is required")
    if config.worker_count < 1 or config.queue_capacity < 1 or config.scanlines < 1:
        raise ValueError("worker_count, queue_capacity and scanlines must be >= 1")
    return config


def parse_listen(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"listen address must be host:port, got {listen!r}")
    return host, int(port)


def build_service(config: ServerConfig) -> PervascanService:
    """Assemble the service from a resolved configuration.

    Propagates FileUnreadable and the other catalog errors so callers can
    report them before binding a socket.
    """
    catalog = load_catalog(config.catalog_path)
    if config.store_url:
        store = HttpPhotoStore(config.store_url)
    else:
        store = PhotoStore(config.store_dir, seed=config.seed)
    notifier = SmsNotifier(config.inbox_path)
    return PervascanService(
        catalog,
        store,
        notifier,
        worker_count=config.worker_count,
        queue_capacity=config.queue_capacity,
        seed=config.seed,
        scanlines=config.scanlines,
        journal_path=config.journal_path,
    )
