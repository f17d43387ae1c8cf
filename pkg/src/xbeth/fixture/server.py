"""Loopback JSON-RPC endpoint that serves a generated archive.

It answers the handful of methods the ingest layer uses, in the wire
encoding, so the whole export path can run against a fixture.  Token
metadata calls are answered from the ledger.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from ..core import BlockBundle
from ..decode import METADATA_SELECTORS, encode_bytes32_string, encode_string, encode_uint
from ..ingest import read_raw

log = logging.getLogger(__name__)

REVERT = 3


class RpcFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class FixtureNode:
    """In-memory view of an archive plus ledger token metadata."""

    def __init__(self, bundles: list[BlockBundle], tokens: list[dict]):
        self.bundles = {b.number: b for b in bundles}
        self.head = max(self.bundles, default=-1)
        self.tokens = {t["address"]: t for t in tokens}
        self.selectors = {"0x" + sel.hex(): key for key, sel in METADATA_SELECTORS.items()}

    @classmethod
    def load(cls, archive: Path, ledger: Path) -> "FixtureNode":
        tokens = json.loads(Path(ledger).read_text(encoding="utf-8")).get("tokens", [])
        return cls(list(read_raw(Path(archive))), tokens)

    def _height(self, tag) -> int:
        if tag in ("latest", "pending", "safe", "finalized"):
            return self.head
        if tag == "earliest":
            return 0
        if not isinstance(tag, str) or not tag.startswith("0x"):
            raise RpcFailure(-32602, f"invalid block tag {tag!r}")
        return int(tag, 16)

    def _bundle(self, params) -> BlockBundle | None:
        if not params:
            raise RpcFailure(-32602, "missing block parameter")
        return self.bundles.get(self._height(params[0]))

    def eth_blockNumber(self, params):
        return hex(self.head)

    def eth_getBlockByNumber(self, params):
        b = self._bundle(params)
        return None if b is None else b.block.to_json(wire=True)

    def parity_getBlockReceipts(self, params):
        b = self._bundle(params)
        return None if b is None else [r.to_json(wire=True) for r in b.receipts]

    def trace_block(self, params):
        b = self._bundle(params)
        return None if b is None else [t.to_json(wire=True) for t in b.traces]

    def eth_call(self, params):
        if not params or not isinstance(params[0], dict):
            raise RpcFailure(-32602, "missing call object")
        call = params[0]
        at = self._height(params[1] if len(params) > 1 else "latest")
        token = self.tokens.get(str(call.get("to", "")).lower())
        key = self.selectors.get(str(call.get("data", "")).lower())
        if token is None or key is None or at < token["created_block"] or at > self.head:
            raise RpcFailure(REVERT, "execution reverted")
        value = token.get(key)
        if value is None:
            raise RpcFailure(REVERT, "execution reverted")
        if key in ("name", "symbol"):
            data = encode_bytes32_string(value) if token.get("bytes32_text") else encode_string(value)
        else:
            data = encode_uint(int(value))
        return "0x" + data.hex()

    METHODS = ("eth_blockNumber", "eth_getBlockByNumber", "parity_getBlockReceipts", "trace_block", "eth_call")

    def handle(self, req) -> dict:
        rid = req.get("id") if isinstance(req, dict) else None
        try:
            if not isinstance(req, dict) or not isinstance(req.get("method"), str):
                raise RpcFailure(-32600, "invalid request")
            if req["method"] not in self.METHODS:
                raise RpcFailure(-32601, f"method not found: {req['method']}")
            result = getattr(self, req["method"])(req.get("params") or [])
            return {"jsonrpc": "2.0", "id": rid, "result": result}
        except RpcFailure as exc:
            return {"jsonrpc": "2.0", "id": rid, "error": {"code": exc.code, "message": exc.message}}
        except (ValueError, TypeError, KeyError) as exc:
            return {"jsonrpc": "2.0", "id": rid, "error": {"code": -32602, "message": str(exc)}}


def _handler(node: FixtureNode):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        disable_nagle_algorithm = True  # headers and body go out as separate writes

        def do_POST(self):
            length = int(self.headers.get("Content-Length") or 0)
            try:
                payload = json.loads(self.rfile.read(length))
            except ValueError:
                body = {"jsonrpc": "2.0", "id": None, "error": {"code": -32700, "message": "parse error"}}
            else:
                if isinstance(payload, list):
                    body = [node.handle(r) for r in payload]
                else:
                    body = node.handle(payload)
            data = json.dumps(body).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, fmt, *args):
            log.debug("rpc %s", fmt % args)

    return Handler


def make_server(archive: Path, ledger: Path, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bind a server (port 0 picks a free one); the caller runs ``serve_forever``."""
    node = FixtureNode.load(archive, ledger)
    server = ThreadingHTTPServer((host, port), _handler(node))
    server.daemon_threads = True
    return server


def start_background(archive: Path, ledger: Path, port: int = 0) -> tuple[ThreadingHTTPServer, str]:
    """Start a server on a daemon thread; returns it and its URL."""
    server = make_server(archive, ledger, port)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    host, bound = server.server_address[:2]
    return server, f"http://{host}:{bound}"


def serve(archive: Path, ledger: Path, port: int = 8545) -> None:
    server = make_server(archive, ledger, port)
    log.info("serving fixture on http://127.0.0.1:%d", server.server_address[1])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
