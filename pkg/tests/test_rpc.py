import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from xbeth.errors import RpcError, TransportError
from xbeth.rpc import RpcClient


class Flaky:
    """Loopback endpoint that fails with HTTP 503 a set number of times."""

    def __init__(self, failures=0, reply=None):
        self.failures = failures
        self.requests = []
        self.reply = reply
        owner = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                owner.requests.append(body)
                if owner.failures > 0:
                    owner.failures -= 1
                    self.send_response(503)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                out = owner.reply(body) if owner.reply else {"jsonrpc": "2.0", "id": body["id"], "result": "0x1"}
                data = json.dumps(out).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *a):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=self.server.serve_forever, daemon=True).start()
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def flaky():
    made = []

    def make(**kw):
        f = Flaky(**kw)
        made.append(f)
        return f

    yield make
    for f in made:
        f.close()


def test_retries_then_succeeds(flaky):
    node = flaky(failures=3)
    waits = []
    with RpcClient(node.url, sleep=waits.append) as c:
        assert c.call("eth_blockNumber") == "0x1"
    assert waits == [0.5, 1.0, 2.0]
    assert len(node.requests) == 4


def test_gives_up_after_five_attempts(flaky):
    node = flaky(failures=10)
    waits = []
    with RpcClient(node.url, sleep=waits.append) as c, pytest.raises(TransportError):
        c.call("eth_blockNumber")
    assert waits == [0.5, 1.0, 2.0, 4.0]
    assert len(node.requests) == 5


def test_unreachable_endpoint():
    waits = []
    with RpcClient("http://127.0.0.1:9", sleep=waits.append, timeout=1) as c, pytest.raises(TransportError):
        c.call("eth_blockNumber")
    assert len(waits) == 4


def test_rpc_error_is_not_retried(flaky):
    node = flaky(reply=lambda b: {"jsonrpc": "2.0", "id": b["id"], "error": {"code": -32601, "message": "nope"}})
    waits = []
    with RpcClient(node.url, sleep=waits.append) as c, pytest.raises(RpcError) as info:
        c.call("foo_bar")
    assert info.value.code == -32601 and not waits


def test_batch_results_in_call_order(flaky):
    def reply(batch):
        return [{"jsonrpc": "2.0", "id": r["id"], "result": r["method"]} for r in reversed(batch)]

    node = flaky(reply=reply)
    with RpcClient(node.url) as c:
        assert c.batch([("a", []), ("b", []), ("c", [])]) == ["a", "b", "c"]
    assert len(node.requests) == 1
