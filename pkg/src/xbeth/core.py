"""Domain types shared by ingestion, decoding, dataset building and statistics.

Values are held in their binary form (``bytes`` for hashes and code, ``int``
for amounts); hex text only appears at I/O edges.  Every record type can be
encoded in two JSON shapes:

* the *wire* shape, matching what an Ethereum client returns over JSON-RPC
  (hex quantities), and
* the *archive* shape, the same field names with canonical encodings
  (plain integers for quantities, decimal strings for amounts).

Decoders accept either shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from typing import Any, Union

from .errors import AmountOverflowError, IntegrityError, ParseError

UINT256_MAX = 2**256 - 1
WEI_PER_ETHER = 10**18
_HEXDIGITS = frozenset("0123456789abcdefABCDEF")


def _parse_hex_body(text: str, field_name: str) -> bytes:
    if not isinstance(text, str) or not text[:2] in ("0x", "0X"):
        raise ParseError(f"{field_name}: expected 0x-prefixed hex, got {text!r}")
    body = text[2:]
    if len(body) % 2:
        raise ParseError(f"{field_name}: odd hex length {len(body)}")
    if not _HEXDIGITS.issuperset(body):
        raise ParseError(f"{field_name}: non-hex character in {text!r}")
    return bytes.fromhex(body)


class _FixedBytes(bytes):
    size = 0

    def __new__(cls, value: bytes):
        if len(value) != cls.size:
            raise ParseError(f"{cls.__name__} needs {cls.size} bytes, got {len(value)}")
        return super().__new__(cls, value)

    @classmethod
    def parse(cls, text: str, field_name: str = "value"):
        if isinstance(text, str) and text[:2] in ("0x", "0X") and len(text) - 2 != cls.size * 2:
            raise ParseError(
                f"{field_name}: length {len(text) - 2} != {cls.size * 2} hex characters"
            )
        return cls(_parse_hex_body(text, field_name))

    def __str__(self) -> str:
        return "0x" + self.hex()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self})"


class Address(_FixedBytes):
    """20-byte account identifier; prints as lowercase 0x-hex."""

    size = 20


class Hash32(_FixedBytes):
    """32-byte identifier (block hash, transaction hash, log topic)."""

    size = 32


ZERO_ADDRESS = Address(bytes(20))


def canonicalize_address(text: str, field_name: str = "address") -> Address:
    return Address.parse(text, field_name)


class Amount256(int):
    """Unsigned 256-bit integer.

    Addition, subtraction and multiplication between amounts stay in the type
    and raise :class:`AmountOverflowError` when the result leaves
    ``[0, 2**256 - 1]``.
    """

    def __new__(cls, value: int = 0):
        value = int(value)
        if value < 0 or value > UINT256_MAX:
            raise AmountOverflowError(f"{value} outside unsigned 256-bit range")
        return super().__new__(cls, value)

    @classmethod
    def parse(cls, text: str | int, field_name: str = "amount") -> "Amount256":
        if isinstance(text, int):
            return cls(text)
        if not isinstance(text, str) or not text:
            raise ParseError(f"{field_name}: expected amount text, got {text!r}")
        try:
            if text[:2] in ("0x", "0X"):
                return cls(int(text, 16))
            if not text.isdigit():
                raise ValueError(text)
            return cls(int(text, 10))
        except ValueError:
            raise ParseError(f"{field_name}: malformed amount {text!r}") from None

    def __add__(self, other):
        return Amount256(int(self) + int(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Amount256(int(self) - int(other))

    def __rsub__(self, other):
        return Amount256(int(other) - int(self))

    def __mul__(self, other):
        return Amount256(int(self) * int(other))

    __rmul__ = __mul__

    def __str__(self) -> str:
        return int.__repr__(self)

    def __repr__(self) -> str:
        return f"Amount256({int.__repr__(self)})"


def wei_to_ether(wei: int) -> Decimal:
    """Exact Ether value of ``wei``; no precision is lost."""
    with localcontext() as ctx:
        ctx.prec = 100
        return Decimal(int(wei)).scaleb(-18)


def format_ether(wei: int, places: int = 2) -> str:
    """Ether text rounded half-even to ``places`` decimals."""
    with localcontext() as ctx:
        ctx.prec = 100
        return str(wei_to_ether(wei).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_EVEN))


# --- encodings -------------------------------------------------------------


def hex_bytes(data: bytes) -> str:
    return "0x" + data.hex()


def parse_bytes(text: str, field_name: str = "data") -> bytes:
    return _parse_hex_body(text, field_name)


def parse_quantity(value: str | int, field_name: str = "quantity") -> int:
    if isinstance(value, bool):
        raise ParseError(f"{field_name}: boolean is not a quantity")
    if isinstance(value, int):
        if value < 0:
            raise ParseError(f"{field_name}: negative quantity")
        return value
    if isinstance(value, str) and value[:2] in ("0x", "0X"):
        try:
            return int(value, 16)
        except ValueError:
            pass
    elif isinstance(value, str) and value.isdigit():
        return int(value)
    raise ParseError(f"{field_name}: malformed quantity {value!r}")


def _q(value: int, wire: bool) -> int | str:
    return hex(value) if wire else value


def _amt(value: int, wire: bool) -> str:
    return hex(value) if wire else str(int(value))


def _opt(value, fn):
    return None if value is None else fn(value)


# --- records ---------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RawTransaction:
    hash: Hash32
    index: int
    from_: Address
    to: Address | None
    value: Amount256
    gas_limit: int
    gas_price: Amount256
    input: bytes
    nonce: int

    @property
    def is_deployment(self) -> bool:
        return self.to is None

    def to_json(self, wire: bool = False) -> dict[str, Any]:
        return {
            "hash": str(self.hash),
            "transactionIndex": _q(self.index, wire),
            "from": str(self.from_),
            "to": _opt(self.to, str),
            "value": _amt(self.value, wire),
            "gas": _q(self.gas_limit, wire),
            "gasPrice": _amt(self.gas_price, wire),
            "input": hex_bytes(self.input),
            "nonce": _q(self.nonce, wire),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "RawTransaction":
        return cls(
            hash=Hash32.parse(obj["hash"], "transaction.hash"),
            index=parse_quantity(obj["transactionIndex"], "transactionIndex"),
            from_=Address.parse(obj["from"], "transaction.from"),
            to=_opt(obj.get("to"), lambda t: Address.parse(t, "transaction.to")),
            value=Amount256.parse(obj["value"], "transaction.value"),
            gas_limit=parse_quantity(obj["gas"], "transaction.gas"),
            gas_price=Amount256.parse(obj["gasPrice"], "transaction.gasPrice"),
            input=parse_bytes(obj["input"], "transaction.input"),
            nonce=parse_quantity(obj["nonce"], "transaction.nonce"),
        )


@dataclass(frozen=True, slots=True)
class RawBlock:
    number: int
    hash: Hash32
    parent_hash: Hash32
    miner: Address
    timestamp: int
    gas_limit: int
    gas_used: int
    size: int
    extra_data: bytes
    transactions: tuple[RawTransaction, ...] = ()

    def __post_init__(self):
        if len(self.extra_data) > 32:
            raise IntegrityError(f"block {self.number}: extra_data longer than 32 bytes")
        for i, tx in enumerate(self.transactions):
            if tx.index != i:
                raise IntegrityError(
                    f"block {self.number}: transaction at position {i} has index {tx.index}"
                )

    def to_json(self, wire: bool = False) -> dict[str, Any]:
        return {
            "number": _q(self.number, wire),
            "hash": str(self.hash),
            "parentHash": str(self.parent_hash),
            "miner": str(self.miner),
            "timestamp": _q(self.timestamp, wire),
            "gasLimit": _q(self.gas_limit, wire),
            "gasUsed": _q(self.gas_used, wire),
            "size": _q(self.size, wire),
            "extraData": hex_bytes(self.extra_data),
            "transactions": [tx.to_json(wire) for tx in self.transactions],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "RawBlock":
        return cls(
            number=parse_quantity(obj["number"], "block.number"),
            hash=Hash32.parse(obj["hash"], "block.hash"),
            parent_hash=Hash32.parse(obj["parentHash"], "block.parentHash"),
            miner=Address.parse(obj["miner"], "block.miner"),
            timestamp=parse_quantity(obj["timestamp"], "block.timestamp"),
            gas_limit=parse_quantity(obj["gasLimit"], "block.gasLimit"),
            gas_used=parse_quantity(obj["gasUsed"], "block.gasUsed"),
            size=parse_quantity(obj["size"], "block.size"),
            extra_data=parse_bytes(obj["extraData"], "block.extraData"),
            transactions=tuple(RawTransaction.from_json(t) for t in obj["transactions"]),
        )


CALL_TYPES = ("call", "delegatecall", "staticcall", "callcode")


@dataclass(frozen=True, slots=True)
class CreateAction:
    from_: Address
    value: Amount256
    init_code: bytes
    result_address: Address | None = None
    deployed_code: bytes | None = None
    gas_used: int = 0

    kind = "create"


@dataclass(frozen=True, slots=True)
class CallAction:
    call_type: str
    from_: Address
    to: Address
    value: Amount256
    input: bytes = b""
    gas_used: int = 0
    output: bytes = b""

    kind = "call"

    def __post_init__(self):
        if self.call_type not in CALL_TYPES:
            raise ParseError(f"callType: unknown call type {self.call_type!r}")


@dataclass(frozen=True, slots=True)
class SuicideAction:
    address: Address
    refund_address: Address
    balance: Amount256

    kind = "suicide"


@dataclass(frozen=True, slots=True)
class RewardAction:
    author: Address
    value: Amount256
    reward_type: str = "block"

    kind = "reward"

    def __post_init__(self):
        if self.reward_type not in ("block", "uncle"):
            raise ParseError(f"rewardType: unknown reward type {self.reward_type!r}")


Action = Union[CreateAction, CallAction, SuicideAction, RewardAction]
_ACTIONS = {a.kind: a for a in (CreateAction, CallAction, SuicideAction, RewardAction)}


@dataclass(frozen=True, slots=True)
class TraceRecord:
    """One execution trace in the Parity ``trace_block`` shape.

    The variant is carried by the type of ``action``; ``kind`` reads it back.
    """

    block_number: int
    tx_hash: Hash32 | None
    tx_position: int | None
    trace_address: tuple[int, ...]
    action: Action
    subtraces: int = 0
    error: str | None = None

    def __post_init__(self):
        if isinstance(self.action, RewardAction):
            if self.tx_hash is not None or self.trace_address:
                raise IntegrityError(
                    f"block {self.block_number}: reward trace must be top level without tx hash"
                )
        elif self.tx_hash is None:
            raise IntegrityError(f"block {self.block_number}: {self.kind} trace without tx hash")

    @property
    def kind(self) -> str:
        return self.action.kind

    def to_json(self, wire: bool = False) -> dict[str, Any]:
        a = self.action
        result: dict[str, Any] | None = None
        if isinstance(a, CallAction):
            action = {
                "callType": a.call_type,
                "from": str(a.from_),
                "to": str(a.to),
                "value": _amt(a.value, wire),
                "input": hex_bytes(a.input),
            }
            result = {"gasUsed": _q(a.gas_used, wire), "output": hex_bytes(a.output)}
        elif isinstance(a, CreateAction):
            action = {"from": str(a.from_), "value": _amt(a.value, wire), "init": hex_bytes(a.init_code)}
            result = {
                "address": _opt(a.result_address, str),
                "code": _opt(a.deployed_code, hex_bytes),
                "gasUsed": _q(a.gas_used, wire),
            }
        elif isinstance(a, SuicideAction):
            action = {
                "address": str(a.address),
                "refundAddress": str(a.refund_address),
                "balance": _amt(a.balance, wire),
            }
        else:
            action = {"author": str(a.author), "value": _amt(a.value, wire), "rewardType": a.reward_type}
        obj: dict[str, Any] = {
            "action": action,
            "blockNumber": self.block_number,
            "result": result,
            "subtraces": self.subtraces,
            "traceAddress": list(self.trace_address),
            "transactionHash": _opt(self.tx_hash, str),
            "transactionPosition": self.tx_position,
            "type": a.kind,
        }
        if self.error is not None:
            obj["error"] = self.error
        return obj

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "TraceRecord":
        kind = obj.get("type")
        if kind not in _ACTIONS:
            raise ParseError(f"trace.type: unknown trace type {kind!r}")
        a = obj["action"]
        res = obj.get("result") or {}
        if kind == "call":
            action: Action = CallAction(
                call_type=a.get("callType", "call"),
                from_=Address.parse(a["from"], "action.from"),
                to=Address.parse(a["to"], "action.to"),
                value=Amount256.parse(a["value"], "action.value"),
                input=parse_bytes(a.get("input", "0x"), "action.input"),
                gas_used=parse_quantity(res.get("gasUsed", 0), "result.gasUsed"),
                output=parse_bytes(res.get("output") or "0x", "result.output"),
            )
        elif kind == "create":
            action = CreateAction(
                from_=Address.parse(a["from"], "action.from"),
                value=Amount256.parse(a["value"], "action.value"),
                init_code=parse_bytes(a.get("init", "0x"), "action.init"),
                result_address=_opt(res.get("address"), lambda t: Address.parse(t, "result.address")),
                deployed_code=_opt(res.get("code"), lambda t: parse_bytes(t, "result.code")),
                gas_used=parse_quantity(res.get("gasUsed", 0), "result.gasUsed"),
            )
        elif kind == "suicide":
            action = SuicideAction(
                address=Address.parse(a["address"], "action.address"),
                refund_address=Address.parse(a["refundAddress"], "action.refundAddress"),
                balance=Amount256.parse(a["balance"], "action.balance"),
            )
        else:
            action = RewardAction(
                author=Address.parse(a["author"], "action.author"),
                value=Amount256.parse(a["value"], "action.value"),
                reward_type=a.get("rewardType", "block"),
            )
        pos = obj.get("transactionPosition")
        return cls(
            block_number=parse_quantity(obj["blockNumber"], "trace.blockNumber"),
            tx_hash=_opt(obj.get("transactionHash"), lambda t: Hash32.parse(t, "trace.transactionHash")),
            tx_position=None if pos is None else parse_quantity(pos, "trace.transactionPosition"),
            trace_address=tuple(int(i) for i in obj.get("traceAddress", ())),
            action=action,
            subtraces=int(obj.get("subtraces", 0)),
            error=obj.get("error"),
        )


@dataclass(frozen=True, slots=True)
class LogEntry:
    address: Address
    topics: tuple[Hash32, ...]
    data: bytes
    log_index: int

    def __post_init__(self):
        if len(self.topics) > 4:
            raise IntegrityError(f"log {self.log_index}: {len(self.topics)} topics (max 4)")

    def to_json(self, wire: bool = False) -> dict[str, Any]:
        return {
            "address": str(self.address),
            "topics": [str(t) for t in self.topics],
            "data": hex_bytes(self.data),
            "logIndex": _q(self.log_index, wire),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "LogEntry":
        return cls(
            address=Address.parse(obj["address"], "log.address"),
            topics=tuple(Hash32.parse(t, "log.topics") for t in obj["topics"]),
            data=parse_bytes(obj["data"], "log.data"),
            log_index=parse_quantity(obj["logIndex"], "log.logIndex"),
        )


@dataclass(frozen=True, slots=True)
class ReceiptRecord:
    tx_hash: Hash32
    block_number: int
    gas_used: int
    cumulative_gas_used: int
    contract_address: Address | None = None
    logs: tuple[LogEntry, ...] = ()

    def to_json(self, wire: bool = False) -> dict[str, Any]:
        return {
            "transactionHash": str(self.tx_hash),
            "blockNumber": _q(self.block_number, wire),
            "gasUsed": _q(self.gas_used, wire),
            "cumulativeGasUsed": _q(self.cumulative_gas_used, wire),
            "contractAddress": _opt(self.contract_address, str),
            "logs": [log.to_json(wire) for log in self.logs],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ReceiptRecord":
        return cls(
            tx_hash=Hash32.parse(obj["transactionHash"], "receipt.transactionHash"),
            block_number=parse_quantity(obj["blockNumber"], "receipt.blockNumber"),
            gas_used=parse_quantity(obj["gasUsed"], "receipt.gasUsed"),
            cumulative_gas_used=parse_quantity(obj["cumulativeGasUsed"], "receipt.cumulativeGasUsed"),
            contract_address=_opt(
                obj.get("contractAddress"), lambda t: Address.parse(t, "receipt.contractAddress")
            ),
            logs=tuple(LogEntry.from_json(log) for log in obj.get("logs", ())),
        )


@dataclass(frozen=True, slots=True)
class BlockBundle:
    """A block with its receipts and traces, as archived per height."""

    block: RawBlock
    receipts: tuple[ReceiptRecord, ...] = ()
    traces: tuple[TraceRecord, ...] = field(default=())

    @property
    def number(self) -> int:
        return self.block.number

    def validate(self) -> None:
        """Raise :class:`IntegrityError` unless receipts and traces line up with the block."""
        n = self.block.number
        txs = self.block.transactions
        if len(self.receipts) != len(txs):
            raise IntegrityError(
                f"block {n}: {len(self.receipts)} receipts for {len(txs)} transactions"
            )
        cumulative = 0
        for tx, receipt in zip(txs, self.receipts):
            if receipt.tx_hash != tx.hash:
                raise IntegrityError(f"block {n}: receipt {receipt.tx_hash} out of order")
            if receipt.cumulative_gas_used < cumulative:
                raise IntegrityError(f"block {n}: cumulative gas decreases at {receipt.tx_hash}")
            cumulative = receipt.cumulative_gas_used
        hashes = {tx.hash for tx in txs}
        for trace in self.traces:
            if trace.block_number != n:
                raise IntegrityError(f"block {n}: trace for block {trace.block_number}")
            if trace.tx_hash is not None and trace.tx_hash not in hashes:
                raise IntegrityError(f"block {n}: orphan trace for tx {trace.tx_hash}")

    def to_json(self, wire: bool = False) -> dict[str, Any]:
        return {
            "block": self.block.to_json(wire),
            "receipts": [r.to_json(wire) for r in self.receipts],
            "traces": [t.to_json(wire) for t in self.traces],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "BlockBundle":
        return cls(
            block=RawBlock.from_json(obj["block"]),
            receipts=tuple(ReceiptRecord.from_json(r) for r in obj["receipts"]),
            traces=tuple(TraceRecord.from_json(t) for t in obj["traces"]),
        )


def trace_tree_roots(traces) -> dict[Hash32, TraceRecord]:
    """Map each transaction hash to its root trace, checking tree shape.

    Raises :class:`IntegrityError` when a transaction's traces do not form a
    single rooted tree (a missing parent or duplicate address).
    """
    by_tx: dict[Hash32, dict[tuple[int, ...], TraceRecord]] = {}
    for t in traces:
        if t.tx_hash is None:
            continue
        nodes = by_tx.setdefault(t.tx_hash, {})
        if t.trace_address in nodes:
            raise IntegrityError(f"tx {t.tx_hash}: duplicate trace address {list(t.trace_address)}")
        nodes[t.trace_address] = t
    roots = {}
    for tx_hash, nodes in by_tx.items():
        if () not in nodes:
            raise IntegrityError(f"tx {tx_hash}: no root trace")
        for addr in nodes:
            if addr and addr[:-1] not in nodes:
                raise IntegrityError(f"tx {tx_hash}: trace {list(addr)} has no parent")
        roots[tx_hash] = nodes[()]
    return roots
