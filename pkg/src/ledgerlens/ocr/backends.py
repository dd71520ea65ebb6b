"""Fixture-driven and HTTP recognition backends."""

from __future__ import annotations

import base64
import io
import json
import logging
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

import numpy as np

from ..errors import BackendUnavailableError, ProtocolError
from ..imagecore import as_gray

log = logging.getLogger(__name__)


class MockBackend:
    """Answers from a ``{key: (text, confidence)}`` fixture table.

    Unknown keys return ``default`` or raise KeyError when no default is set.
    ``word_boxes`` may be given as a list of (text, (x, y, w, h)).
    """

    def __init__(self, answers: dict | None = None, default: tuple[str, float] | None = None,
                 word_boxes: list | None = None):
        self.answers = dict(answers or {})
        self.default = default
        self._boxes = word_boxes
        self.capabilities = {"recognize_cell": True, "word_boxes": word_boxes is not None, "concurrent": True}

    def recognize_cell(self, cell, key: str = "") -> tuple[str, float]:
        if key in self.answers:
            return self.answers[key]
        if self.default is None:
            raise KeyError(f"no fixture answer for {key!r}")
        return self.default

    def word_boxes(self, img):
        return list(self._boxes or [])


@dataclass(frozen=True)
class RemoteOcrConfig:
    endpoint: str
    timeout: float = 10.0
    max_retries: int = 3
    backoff_base: float = 0.5
    rate_limit: float = 5.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not self.rate_limit > 0:
            raise ValueError("rate_limit must be > 0")
        if self.timeout <= 0 or self.backoff_base < 0:
            raise ValueError("timeout must be positive and backoff_base non-negative")


class RateLimiter:
    """Token bucket holding one token, refilled at ``rate`` per second.

    The first request goes out immediately; later ones are spaced 1/rate
    apart.
    """

    def __init__(self, rate: float, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._next = None
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            slot = now if self._next is None else max(now, self._next)
            self._next = slot + self.interval
        wait = slot - now
        if wait > 0:
            self._sleep(wait)


_LIMITERS: dict[tuple[str, float], RateLimiter] = {}
_LIMITERS_LOCK = threading.Lock()


def shared_limiter(endpoint: str, rate: float) -> RateLimiter:
    """The process-wide limiter for ``endpoint``."""
    with _LIMITERS_LOCK:
        key = (endpoint.rstrip("/"), float(rate))
        lim = _LIMITERS.get(key)
        if lim is None:
            lim = _LIMITERS[key] = RateLimiter(rate)
        return lim


def encode_png(img) -> str:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(as_gray(img)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _parse_response(body: bytes) -> tuple[str, float]:
    try:
        payload = json.loads(body.decode("utf-8"))
        text = payload["text"]
        conf = payload["confidence"]
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"malformed OCR response: {exc}") from exc
    if not isinstance(text, str) or isinstance(conf, bool) or not isinstance(conf, (int, float)):
        raise ProtocolError("OCR response fields have the wrong types")
    if not 0.0 <= float(conf) <= 1.0:
        raise ProtocolError(f"confidence {conf} outside [0, 1]")
    return text, float(conf)


class RemoteBackend:
    """Client for ``POST {endpoint}/recognize``.

    Non-200 replies and transport errors are retried up to ``max_retries``
    times; retry k (k = 1, 2, ...) first sleeps ``backoff_base * 2**(k - 1)``.
    Every request, retries included, passes through the endpoint's shared
    rate limiter. ``attempt_log`` records one entry per HTTP request.
    """

    capabilities = {"recognize_cell": True, "word_boxes": False, "concurrent": True}

    def __init__(self, config: RemoteOcrConfig, limiter: RateLimiter | None = None, sleep=time.sleep):
        self.config = config
        self.limiter = limiter or shared_limiter(config.endpoint, config.rate_limit)
        self._sleep = sleep
        self.attempt_log: list[dict] = []
        self._log_lock = threading.Lock()

    def _post(self, body: bytes) -> tuple[int, bytes]:
        req = urllib.request.Request(
            self.config.endpoint.rstrip("/") + "/recognize", data=body,
            headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.config.timeout) as resp:
                return resp.status, resp.read()
        except urllib.error.HTTPError as exc:
            return exc.code, b""

    def recognize_cell(self, cell, key: str = "") -> tuple[str, float]:
        body = json.dumps({"image_png_base64": encode_png(cell), "hint": "digits"}).encode("utf-8")
        last = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            self.limiter.acquire()
            try:
                status, payload = self._post(body)
            except (urllib.error.URLError, OSError) as exc:
                status, payload, last = None, b"", f"{type(exc).__name__}: {exc}"
            with self._log_lock:
                self.attempt_log.append({"key": key, "attempt": attempt + 1, "status": status})
            if status == 200:
                return _parse_response(payload)
            if status is not None:
                last = f"HTTP {status}"
            log.warning("OCR request for %s failed (%s), attempt %d", key, last, attempt + 1)
        raise BackendUnavailableError(f"{self.config.endpoint}: gave up after "
                                      f"{self.config.max_retries + 1} attempts ({last})")
