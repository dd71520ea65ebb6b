import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from ledgerlens.errors import BackendUnavailableError, InvalidCharactersError, ProtocolError
from ledgerlens.ocr import (
    GlyphCorrelationBackend,
    MockBackend,
    OcrFailure,
    OcrPrediction,
    RateLimiter,
    RemoteBackend,
    RemoteOcrConfig,
    batch_recognize,
    confidence_filter,
    normalize_prediction,
    normalize_text,
    read_predictions_csv,
    recognize,
    retained_count,
    split_results,
    write_predictions_csv,
)
from ledgerlens.synth.cards import render_cell_text


@pytest.fixture(scope="module")
def builtin():
    return GlyphCorrelationBackend()


def _pred(conf, doc="d", row=0, text="1"):
    return OcrPrediction(doc, "BUILDINGS", row, text, conf)


def test_blank_cell_reads_empty(builtin):
    p = recognize(builtin, np.full((64, 200), 250, np.uint8))
    assert p.text == "" and p.confidence == 0.0


def test_self_font_reads_exactly(builtin):
    p = recognize(builtin, render_cell_text("3085"))
    assert p.text == "3085"
    assert p.confidence >= 0.99


def test_mock_passthrough():
    m = MockBackend({"cell42": ("1250", 0.8)})
    p = recognize(m, np.zeros((4, 4), np.uint8), key="cell42")
    assert (p.text, p.confidence) == ("1250", 0.8)


@pytest.mark.parametrize("text,want", [("", 0), ("1,250", 1250), ("$ 3.085", 3085), ("007", 7)])
def test_normalize(text, want):
    assert normalize_text(text) == want
    assert normalize_prediction(_pred(0.5, text=text)) == want


def test_normalize_rejects_letters():
    with pytest.raises(InvalidCharactersError):
        normalize_text("12a4")
    with pytest.raises(ProtocolError):
        _pred(0.5, text="12a4")
    with pytest.raises(ProtocolError):
        _pred(1.5)


def test_filter_counts():
    preds = [_pred(i / 1000, row=i) for i in range(1000)]
    kept, dropped = confidence_filter(preds, 0.90)
    assert len(kept) == 900 and len(dropped) == 100
    assert min(p.confidence for p in kept) >= max(p.confidence for p in dropped)
    kept, dropped = confidence_filter(preds, 1.0)
    assert len(kept) == 1000 and dropped == []
    with pytest.raises(ValueError):
        confidence_filter(preds, 0.0)


def test_filter_tie_break():
    preds = [_pred(0.5, "b"), _pred(0.9, "c"), _pred(0.5, "a"), _pred(0.1, "d")]
    kept, _ = confidence_filter(preds, 0.5)
    assert [(p.doc_id, p.confidence) for p in kept] == [("c", 0.9), ("a", 0.5)]


@pytest.mark.parametrize("n", [1, 7, 10, 99, 100, 353, 1000])
@pytest.mark.parametrize("f", [0.90, 0.95, 0.99, 1.0])
def test_retained_count_is_ceil(n, f):
    # exact rational ceiling, free of float products
    num = round(f * 100)
    assert retained_count(n, f) == -(-num * n // 100)


def test_batch_order_and_failures():
    answers = {f"d_C_{i}": (str(i), 0.5) for i in range(10)}
    cells = [(("d", "C", i), np.zeros((2, 2), np.uint8)) for i in range(10)]
    for workers in (1, 4):
        out = batch_recognize(MockBackend(answers), cells, workers=workers)
        assert [p.text for p in out] == [str(i) for i in range(10)]
    out = batch_recognize(MockBackend({}), cells[:2])
    preds, fails = split_results(out)
    assert preds == [] and all(isinstance(f, OcrFailure) for f in fails)


def test_predictions_csv_roundtrip(tmp_path):
    preds = [_pred(0.25, row=1, text="12"), _pred(0.75, row=2, text="")]
    p = tmp_path / "p.csv"
    write_predictions_csv(p, preds)
    assert read_predictions_csv(p) == preds


class _Script(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802
        srv = self.server
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        assert body["hint"] == "digits" and body["image_png_base64"]
        with srv.lock:
            srv.hits += 1
            status = srv.statuses.pop(0) if srv.statuses else 200
        self.send_response(status)
        self.end_headers()
        if status == 200:
            self.wfile.write(json.dumps({"text": "1250", "confidence": 0.8}).encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def fake_server():
    srv = ThreadingHTTPServer(("127.0.0.1", 0), _Script)
    srv.lock = threading.Lock()
    srv.hits = 0
    srv.statuses = []
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def _endpoint(srv):
    return f"http://127.0.0.1:{srv.server_address[1]}"


def test_remote_retries_then_succeeds(fake_server):
    fake_server.statuses = [503, 500]
    naps = []
    cfg = RemoteOcrConfig(_endpoint(fake_server), rate_limit=1000.0, backoff_base=0.5)
    be = RemoteBackend(cfg, limiter=RateLimiter(1000.0), sleep=naps.append)
    out = batch_recognize(be, [(("d", "C", 0), np.zeros((8, 8), np.uint8))])
    assert len(out) == 1 and out[0].text == "1250" and out[0].confidence == 0.8
    assert [a["status"] for a in be.attempt_log] == [503, 500, 200]
    assert naps == [0.5, 1.0]


def test_remote_gives_up(fake_server):
    fake_server.statuses = [500] * 10
    cfg = RemoteOcrConfig(_endpoint(fake_server), max_retries=2, rate_limit=1000.0)
    be = RemoteBackend(cfg, limiter=RateLimiter(1000.0), sleep=lambda s: None)
    with pytest.raises(BackendUnavailableError):
        be.recognize_cell(np.zeros((8, 8), np.uint8), "k")
    assert fake_server.hits == 3


def test_remote_rate_limit_wall_time(fake_server):
    cfg = RemoteOcrConfig(_endpoint(fake_server), rate_limit=5.0)
    be = RemoteBackend(cfg, limiter=RateLimiter(5.0))
    cells = [(("d", "C", i), np.zeros((8, 8), np.uint8)) for i in range(20)]
    t0 = time.monotonic()
    out = batch_recognize(be, cells, workers=4)
    assert time.monotonic() - t0 >= 3.8
    assert len(out) == 20 and fake_server.hits == 20


def test_rate_limiter_spacing_with_fake_clock():
    now = [0.0]
    slept = []

    def sleep(s):
        slept.append(s)

    lim = RateLimiter(4.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(5):
        lim.acquire()
    assert slept == pytest.approx([0.25, 0.5, 0.75, 1.0])


def test_remote_config_validation():
    with pytest.raises(ValueError):
        RemoteOcrConfig("http://x", rate_limit=0)
    with pytest.raises(ValueError):
        RemoteOcrConfig("http://x", max_retries=-1)
