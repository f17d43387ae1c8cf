"""JSON-RPC 2.0 over HTTP with bounded exponential-backoff retries."""

from __future__ import annotations

import itertools
import logging
import time
from typing import Any, Callable, Sequence

import requests

from .errors import RpcError, TransportError

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 5
BASE_DELAY = 0.5
BACKOFF_FACTOR = 2.0


class RpcClient:
    """Thin client for one endpoint.

    Transport failures (connection errors, timeouts, HTTP 5xx) are retried up
    to ``max_attempts`` times with delays of ``base_delay * factor**k``;
    afterwards :class:`TransportError` is raised.  JSON-RPC error objects are
    not retried and surface as :class:`RpcError`.
    """

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        max_attempts: int = MAX_ATTEMPTS,
        base_delay: float = BASE_DELAY,
        factor: float = BACKOFF_FACTOR,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = url
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self.factor = factor
        self._sleep = sleep
        self._ids = itertools.count(1)
        self._session = requests.Session()

    def close(self) -> None:
        self._session.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, payload: Any) -> Any:
        delay = self.base_delay
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self._session.post(self.url, json=payload, timeout=self.timeout)
                if resp.status_code >= 500:
                    raise TransportError(f"HTTP {resp.status_code} from {self.url}")
                resp.raise_for_status()
                return resp.json()
            except (requests.ConnectionError, requests.Timeout, TransportError) as exc:
                if attempt == self.max_attempts:
                    raise TransportError(f"{self.url}: {exc}") from exc
                log.warning("rpc attempt %d/%d failed (%s); retrying in %.2fs",
                            attempt, self.max_attempts, exc, delay)
                self._sleep(delay)
                delay *= self.factor
            except (requests.RequestException, ValueError) as exc:
                raise TransportError(f"{self.url}: {exc}") from exc
        raise AssertionError("unreachable")

    @staticmethod
    def _unwrap(reply: dict[str, Any]) -> Any:
        if "error" in reply and reply["error"] is not None:
            err = reply["error"]
            raise RpcError(int(err.get("code", -32000)), str(err.get("message", "")))
        return reply.get("result")

    def call(self, method: str, params: Sequence[Any] = ()) -> Any:
        reply = self._post({"jsonrpc": "2.0", "id": next(self._ids), "method": method, "params": list(params)})
        return self._unwrap(reply)

    def batch(self, calls: Sequence[tuple[str, Sequence[Any]]]) -> list[Any]:
        """Send several calls in one request; results come back in call order.

        An RPC error in any member raises for the whole batch.
        """
        ids = [next(self._ids) for _ in calls]
        payload = [
            {"jsonrpc": "2.0", "id": i, "method": m, "params": list(p)} for i, (m, p) in zip(ids, calls)
        ]
        replies = self._post(payload)
        if not isinstance(replies, list):
            return [self._unwrap(replies)] * len(calls)
        by_id = {r.get("id"): r for r in replies}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise TransportError(f"batch reply missing ids {missing}")
        return [self._unwrap(by_id[i]) for i in ids]
