"""Computation server: core service, job pipeline, wire codecs, HTTP app."""

from .app import create_app
from .config import ServerConfig, build_service, load_config, parse_listen
from .core import DecodeFailed, InvalidRequest, PervascanService, book_tags, job_view
from .jobs import JobNotFound, JobState, JobStore, OfflineJob, TERMINAL_STATES, state_rank
from .wire import WireMetrics

__all__ = [
    "DecodeFailed",
    "InvalidRequest",
    "JobNotFound",
    "JobState",
    "JobStore",
    "OfflineJob",
    "PervascanService",
    "ServerConfig",
    "TERMINAL_STATES",
    "WireMetrics",
    "book_tags",
    "build_service",
    "create_app",
    "job_view",
    "load_config",
    "parse_listen",
    "state_rank",
]
