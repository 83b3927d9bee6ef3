"""SMS gateway stand-in: an append-only JSON-lines inbox.

Each send appends one complete line {"to","body","sent_at"} (RFC 3339 UTC),
so the log is durable and the inbox operation is a replay filtered by
recipient. Appends are serialized; one message is one write.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

_MSISDN_RE = re.compile(r"\+?[0-9]{7,15}$")
_BODY_LIMIT = 480


class NotifierError(Exception):
    code = "notifier_error"


class InvalidRecipient(NotifierError):
    code = "invalid_recipient"


class EmptyBody(NotifierError):
    code = "empty_body"


def valid_msisdn(value: str) -> bool:
    """Digits of length 7..15 with an optional leading '+'."""
    return isinstance(value, str) and bool(_MSISDN_RE.match(value))


@dataclass(frozen=True)
class SmsMessage:
    to: str
    body: str
    sent_at: str


def _now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


class SmsNotifier:
    def __init__(self, inbox_path: str | Path):
        self._path = Path(inbox_path)
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def send(self, to: str, body: str) -> SmsMessage:
        if not valid_msisdn(to):
            raise InvalidRecipient(repr(to))
        if not body:
            raise EmptyBody("message body must be non-empty")
        if len(body) > _BODY_LIMIT:
            raise ValueError(f"message body exceeds {_BODY_LIMIT} characters")
        message = SmsMessage(to, body, _now_rfc3339())
        line = json.dumps(
            {"to": message.to, "body": message.body, "sent_at": message.sent_at},
            ensure_ascii=False,
        )
        with self._lock:
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        return message

    def inbox(self, to: str) -> list[SmsMessage]:
        """Messages to the recipient, in send order; empty for unknown numbers."""
        try:
            text = self._path.read_text("utf-8")
        except FileNotFoundError:
            return []
        out = []
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj["to"] == to:
                out.append(SmsMessage(obj["to"], obj["body"], obj["sent_at"]))
        return out
