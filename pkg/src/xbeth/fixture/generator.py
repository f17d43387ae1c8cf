"""Synthetic chain generator with a ground-truth ledger.

The generator scripts contract behaviour instead of executing bytecode.  While
it emits traces, receipts and logs it also records, from its own knowledge of
what each scripted action means, the rows every dataset must contain.  Those
records are never derived by decoding the emitted raw data, which is what
makes the ledger usable as an oracle for the dataset builders.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from ..core import (
    ZERO_ADDRESS,
    Address,
    Amount256,
    BlockBundle,
    CallAction,
    CreateAction,
    Hash32,
    LogEntry,
    RawBlock,
    RawTransaction,
    ReceiptRecord,
    RewardAction,
    SuicideAction,
    TraceRecord,
)
from ..datasets import (
    FILES,
    BlockRow,
    ContractCallRow,
    ContractInfoRow,
    Erc20TransferRow,
    Erc721TransferRow,
    InternalEtherTxRow,
    TokenMetadataRow,
    TxRow,
)
from ..decode import APPROVAL_TOPIC, TRANSFER_TOPIC, function_selector
from .rng import CounterRng

ETHER = 10**18
GWEI = 10**9
BLOCK_REWARD = 3 * ETHER
UNCLE_REWARD = 2_625 * 10**15
NEPHEW_BONUS = 93_750 * 10**12
BLOCK_GAS_LIMIT = 10_000_000
MAX_TXS_PER_BLOCK = 24

SCENARIOS = (
    "plain_transfer",
    "contract_deploy",
    "contract_call_tree",
    "erc20_lifecycle",
    "erc721_lifecycle",
    "suicide_storm",
    "error_burst",
)

DEFAULT_MIX = {
    "plain_transfer": 0.34,
    "contract_deploy": 0.08,
    "contract_call_tree": 0.22,
    "erc20_lifecycle": 0.18,
    "erc721_lifecycle": 0.09,
    "suicide_storm": 0.03,
    "error_burst": 0.06,
}

# (extra data, the words a reader of that tag would pick out)
MINER_TAGS = (
    (b"nanopool.org", ("nanopool", "org")),
    (b"ethermine-eu1", ("ethermine", "eu1")),
    (b"sparkpool-eth-cn-hz2", ("sparkpool", "eth", "cn", "hz2")),
    (b"Huobi Pool", ("huobi", "pool")),
    (b"PPYE f2pool_1", ("ppye", "f2pool", "1")),
    (b"\xd8\x83\x01\x08\x0b\x84geth\x88go1.10.4\x85linux", ("geth", "go1", "10", "4", "linux")),
    (bytes(32), ()),
)
MINER_WEIGHTS = (30, 26, 18, 10, 8, 5, 3)

ERROR_LABELS = (
    "Out of gas", "out of gas", "Reverted", "Bad instruction", "Bad jump destination",
    "Stack underflow", "Mutable Call In Static Context",
)
ERROR_WEIGHTS = (40, 5, 30, 10, 8, 4, 3)

FUNCTIONS = (
    "transfer(address,uint256)", "balanceOf(address)", "transferFrom(address,address,uint256)",
    "approve(address,uint256)", "allowance(address,address)", "deposit()", "withdraw(uint256)",
    "execute(address,uint256,bytes)", "getReward()", "multisend(address[],uint256[])",
    "buy()", "claim(uint256)", "setOwner(address)", "vote(uint256,bool)",
)
FUNCTION_WEIGHTS = (120, 90, 60, 30, 20, 18, 15, 10, 8, 6, 5, 4, 3, 2)

NAME_WORDS = ("Chain", "Coin", "Share", "Test", "Token", "Gold", "Smart", "Cash", "Bit", "Net",
              "Crypto", "Pay", "Fund", "Game", "Data")
NAME_WEIGHTS = (20, 19, 15, 12, 11, 6, 5, 5, 4, 4, 4, 3, 3, 2, 2)

CODE_SIZE_CLUSTERS = (86, 245, 512, 958, 1203, 2400, 4096)
CODE_SIZE_WEIGHTS = (10, 14, 16, 24, 18, 12, 6)

CALL_TYPE_WEIGHTS = (("call", 60), ("delegatecall", 25), ("staticcall", 12), ("callcode", 3))


@dataclass
class FixtureSpec:
    seed: int
    n_blocks: int
    mean_txs_per_block: float = 6.0
    scenario_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_MIX))

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be at least 1")
        unknown = set(self.scenario_mix) - set(SCENARIOS)
        if unknown:
            raise ValueError(f"unknown scenarios: {sorted(unknown)}")
        weights = [self.scenario_mix.get(s, 0.0) for s in SCENARIOS]
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("scenario weights must be non-negative and sum to 1")

    @classmethod
    def only(cls, scenario: str, seed: int, n_blocks: int, **kw) -> "FixtureSpec":
        return cls(seed, n_blocks, scenario_mix={s: float(s == scenario) for s in SCENARIOS}, **kw)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "n_blocks": self.n_blocks,
            "mean_txs_per_block": self.mean_txs_per_block,
            "scenario_mix": {s: self.scenario_mix.get(s, 0.0) for s in SCENARIOS},
        }


@dataclass
class Token:
    address: Address
    standard: str  # erc20 | erc20_nonstandard | erc721
    created_block: int
    name: str | None
    name_words: tuple[str, ...]
    symbol: str | None
    decimals: int | None
    total_supply: int
    bytes32_text: bool = False
    holders: dict[Address, int] = field(default_factory=dict)
    owners: dict[int, Address] = field(default_factory=dict)
    next_id: int = 1

    def to_json(self) -> dict:
        return {
            "address": str(self.address),
            "standard": self.standard,
            "created_block": self.created_block,
            "name": self.name,
            "name_words": list(self.name_words),
            "symbol": self.symbol,
            "decimals": self.decimals,
            "total_supply": str(self.total_supply),
            "bytes32_text": self.bytes32_text,
        }


@dataclass
class Truth:
    """Ground-truth rows per dataset, recorded while scripting."""

    blocks: list[BlockRow] = field(default_factory=list)
    txs: list[TxRow] = field(default_factory=list)
    ether: list[InternalEtherTxRow] = field(default_factory=list)
    contracts: list[ContractInfoRow] = field(default_factory=list)
    calls: list[ContractCallRow] = field(default_factory=list)
    erc20: list[Erc20TransferRow] = field(default_factory=list)
    erc721: list[Erc721TransferRow] = field(default_factory=list)
    miner_words: list[tuple[str, ...]] = field(default_factory=list)
    rewards: list[tuple[Address, int]] = field(default_factory=list)


@dataclass
class FixtureChain:
    spec: FixtureSpec
    bundles: list[BlockBundle]
    genesis: dict[Address, int]
    final_balances: dict[Address, int]
    tokens: list[Token]
    truth: Truth


class _Frame:
    """One scripted call frame; collects child traces in depth-first order."""

    __slots__ = ("trace_address", "action", "error", "children")

    def __init__(self, trace_address, action, error=None):
        self.trace_address = trace_address
        self.action = action
        self.error = error
        self.children: list[_Frame] = []


class _TxScript:
    def __init__(self, block_number: int, index: int, tx_hash: Hash32, sender: Address):
        self.block_number = block_number
        self.index = index
        self.hash = tx_hash
        self.sender = sender
        self.root: _Frame | None = None
        self.logs: list[LogEntry] = []
        self.contract_address: Address | None = None


class Generator:
    def __init__(self, spec: FixtureSpec):
        self.spec = spec
        self.rng = CounterRng(spec.seed)
        self.used: set[bytes] = set()
        self.balances: dict[Address, int] = {}
        self.genesis: dict[Address, int] = {}
        self.truth = Truth()
        self.users: list[Address] = []
        self.plain_contracts: list[Address] = []
        self.tokens: dict[Address, Token] = {}
        self.erc20_tokens: list[Address] = []
        self.erc721_tokens: list[Address] = []
        self.open_contract_rows: dict[Address, int] = {}
        self.block_logs = 0
        self.mix_weights = [round(spec.scenario_mix.get(s, 0.0) * 10**9) for s in SCENARIOS]
        self.gas_base = 20 * GWEI
        self.spike = 0

    # -- primitives ---------------------------------------------------------

    def fresh_address(self) -> Address:
        while True:
            raw = self.rng.bytes(20)
            if raw not in self.used and any(raw):
                self.used.add(raw)
                return Address(raw)

    def fresh_hash(self) -> Hash32:
        while True:
            raw = self.rng.bytes(32)
            if raw not in self.used:
                self.used.add(raw)
                return Hash32(raw)

    def move(self, src: Address, dst: Address, value: int) -> None:
        if value > self.balances.get(src, 0):
            raise AssertionError(f"fixture bug: {src} overdraws")
        self.balances[src] -= value
        self.balances[dst] = self.balances.get(dst, 0) + value

    def ether_value(self) -> int:
        """Values spread over decades from 1e-8 to 1e4 Ether."""
        decade = self.rng.weighted(range(-8, 5), (2, 3, 5, 8, 10, 12, 14, 16, 12, 8, 5, 3, 2))
        mantissa = self.rng.randint(1000, 9999)
        return mantissa * 10 ** (18 + decade - 3)

    def error_label(self) -> str:
        return self.rng.weighted(ERROR_LABELS, ERROR_WEIGHTS)

    def calldata(self) -> bytes:
        sig = self.rng.weighted(FUNCTIONS, FUNCTION_WEIGHTS)
        nargs = sig.count(",") + (0 if sig.endswith("()") else 1)
        return function_selector(sig) + self.rng.bytes(32 * nargs)

    def code(self) -> bytes:
        size = self.rng.weighted(CODE_SIZE_CLUSTERS, CODE_SIZE_WEIGHTS) + self.rng.randint(-40, 40)
        return b"\x60\x80\x60\x40" + self.rng.bytes(max(size, 8) - 4)

    # -- genesis --------------------------------------------------------------

    def make_genesis(self) -> None:
        for _ in range(60):
            a = self.fresh_address()
            self.users.append(a)
            self.genesis[a] = 1_000_000 * ETHER
        whale = self.fresh_address()
        self.users.append(whale)
        self.genesis[whale] = 500_000_000 * ETHER
        self.whale = whale
        # contracts whose creation predates the range
        for _ in range(4):
            c = self.fresh_address()
            self.plain_contracts.append(c)
            self.genesis[c] = self.rng.randint(1, 50) * ETHER
        self.miners = [(self.fresh_address(), tag, words) for tag, words in MINER_TAGS]
        self.balances = dict(self.genesis)

    # -- frames ---------------------------------------------------------------

    def _call(self, tx: _TxScript, parent: _Frame | None, call_type: str, src: Address, dst: Address,
              value: int, data: bytes, ok_parent: bool, error: str | None = None) -> tuple[_Frame, bool]:
        address = () if parent is None else parent.trace_address + (len(parent.children),)
        gas_used = 0 if error else self.rng.randint(300, 60_000)
        action = CallAction(call_type, src, dst, Amount256(value), data, gas_used, b"")
        frame = _Frame(address, action, error)
        if parent is None:
            tx.root = frame
        else:
            parent.children.append(frame)
        ok = ok_parent and error is None
        self.truth.calls.append(
            ContractCallRow(tx.block_number, tx.hash, address, call_type, src, dst,
                            data[:4] if len(data) >= 4 else None, len(data), Amount256(value), gas_used, error)
        )
        if ok and value > 0:
            self.move(src, dst, value)
            self.truth.ether.append(
                InternalEtherTxRow(tx.block_number, tx.hash, address, "call_value", src, dst, Amount256(value))
            )
        return frame, ok

    def _create(self, tx: _TxScript, parent: _Frame | None, src: Address, error: str | None = None,
                code: bytes | None = None) -> tuple[_Frame, Address | None]:
        address = () if parent is None else parent.trace_address + (len(parent.children),)
        init = b"\x60\x80\x60\x40\x52" + self.rng.bytes(self.rng.randint(20, 120))
        if error is None:
            new = self.fresh_address()
            code = self.code() if code is None else code
            action = CreateAction(src, Amount256(0), init, new, code, self.rng.randint(50_000, 900_000))
        else:
            new = None
            action = CreateAction(src, Amount256(0), init, None, None, 0)
        frame = _Frame(address, action, error)
        if parent is None:
            tx.root = frame
        else:
            parent.children.append(frame)
        if new is not None:
            self.balances.setdefault(new, 0)
            self.open_contract_rows[new] = len(self.truth.contracts)
            self.truth.contracts.append(
                ContractInfoRow(new, src, tx.block_number, tx.hash, Amount256(0), init, code, len(code),
                                False, None, None, None, None)
            )
        return frame, new

    def _suicide(self, tx: _TxScript, parent: _Frame, contract: Address, refund: Address) -> None:
        address = parent.trace_address + (len(parent.children),)
        balance = self.balances.get(contract, 0)
        parent.children.append(_Frame(address, SuicideAction(contract, refund, Amount256(balance))))
        if balance:
            self.move(contract, refund, balance)
            self.truth.ether.append(
                InternalEtherTxRow(tx.block_number, tx.hash, address, "suicide_refund", contract, refund,
                                   Amount256(balance))
            )
        idx = self.open_contract_rows.pop(contract, None)
        if idx is None:
            self.truth.contracts.append(
                ContractInfoRow(contract, None, None, None, None, None, None, None, True, tx.block_number,
                                refund, Amount256(balance), "unseen_creation")
            )
        else:
            r = self.truth.contracts[idx]
            self.truth.contracts[idx] = ContractInfoRow(
                r.contract_address, r.creator, r.creation_block, r.creation_tx_hash, r.initial_value,
                r.creation_code, r.deployed_code, r.deployed_code_size_bytes, True, tx.block_number,
                refund, Amount256(balance), None,
            )
        if contract in self.plain_contracts:
            self.plain_contracts.remove(contract)

    def _log(self, tx: _TxScript, emitter: Address, topics: tuple[bytes, ...], data: bytes) -> int:
        index = self.block_logs
        self.block_logs += 1
        tx.logs.append(LogEntry(emitter, tuple(Hash32(t) for t in topics), data, index))
        return index

    def _token_transfer_log(self, tx: _TxScript, token: Token, src: Address, dst: Address, amount: int) -> None:
        w = lambda a: bytes(12) + a  # noqa: E731
        amt = amount.to_bytes(32, "big")
        if token.standard == "erc721":
            idx = self._log(tx, token.address, (TRANSFER_TOPIC, w(src), w(dst), amt), b"")
            self.truth.erc721.append(
                Erc721TransferRow(token.address, src, dst, Amount256(amount), tx.block_number, tx.hash, idx)
            )
            return
        if token.standard == "erc20":
            idx = self._log(tx, token.address, (TRANSFER_TOPIC, w(src), w(dst)), amt)
        else:
            idx = self._log(tx, token.address, (TRANSFER_TOPIC,), w(src) + w(dst) + amt)
        self.truth.erc20.append(
            Erc20TransferRow(token.address, src, dst, Amount256(amount), tx.block_number, tx.hash, idx)
        )

    def _noise_log(self, tx: _TxScript, emitter: Address) -> None:
        """Logs that share a token's address but must not become transfer rows."""
        kind = self.rng.below(4)
        w = lambda: bytes(12) + self.rng.bytes(20)  # noqa: E731
        if kind == 0:
            self._log(tx, emitter, (APPROVAL_TOPIC, w(), w()), self.rng.bytes(32))
        elif kind == 1:
            self._log(tx, emitter, (TRANSFER_TOPIC, w()), self.rng.bytes(32))
        elif kind == 2:
            self._log(tx, emitter, (TRANSFER_TOPIC, w(), w()), self.rng.bytes(64))
        else:
            self._log(tx, emitter, (TRANSFER_TOPIC, b"\x01" + self.rng.bytes(31), w()), self.rng.bytes(32))

    # -- call trees -----------------------------------------------------------

    def _subtree(self, tx: _TxScript, frame: _Frame, context: Address, ok: bool, depth: int,
                 allow_errors: bool = True) -> None:
        """Script children of ``frame`` executing as ``context``."""
        n_children = self.rng.weighted((0, 1, 2, 3), (4, 4, 2, 1) if depth < 3 else (1, 0, 0, 0))
        for _ in range(n_children):
            r = self.rng.below(20)
            if r == 0 and ok:
                _, new = self._create(tx, frame, context)
                if new is not None:
                    self.plain_contracts.append(new)
                continue
            call_type = self.rng.weighted([c for c, _ in CALL_TYPE_WEIGHTS], [w for _, w in CALL_TYPE_WEIGHTS])
            to_contract = call_type != "call" or self.rng.chance(1, 2)
            if to_contract:
                candidates = [c for c in self.plain_contracts if c != context]
                if not candidates:
                    continue
                dst = self.rng.choice(candidates)
            else:
                dst = self.rng.choice(self.users) if self.rng.chance(3, 4) else self.fresh_address()
            value = 0
            if call_type == "call" and self.balances.get(context, 0) > 0 and self.rng.chance(1, 3):
                value = self.rng.randint(1, self.balances[context] // 2 or 1)
            error = self.error_label() if allow_errors and self.rng.chance(1, 10) else None
            data = self.calldata() if to_contract else b""
            child, child_ok = self._call(tx, frame, call_type, context, dst, value, data, ok, error)
            if not to_contract:
                continue
            inner = context if call_type in ("delegatecall", "callcode") else dst
            if call_type == "call" and child_ok and self.rng.chance(1, 25):
                refund = self.rng.choice(self.users) if self.rng.chance(1, 2) else self.fresh_address()
                self._suicide(tx, child, dst, refund)
                continue
            self._subtree(tx, child, inner, child_ok, depth + 1, allow_errors)

    # -- scenarios --------------------------------------------------------------

    def plain_transfer(self, tx: _TxScript):
        dst = self.rng.choice(self.users) if self.rng.chance(2, 3) else self.fresh_address()
        while dst == tx.sender:
            dst = self.fresh_address()
        value = self.ether_value()
        if tx.sender == self.whale and self.rng.chance(1, 3):
            value = self.rng.randint(1, 30) * 10**23  # 1e5..3e6 Ether
        data = self.rng.bytes(self.rng.randint(1, 3)) if self.rng.chance(1, 20) else b""
        self._call(tx, None, "call", tx.sender, dst, value, data, True)
        return dst, value, data, 21_000 + 68 * len(data), None

    def contract_deploy(self, tx: _TxScript):
        error = "Out of gas" if self.rng.chance(1, 10) else None
        frame, new = self._create(tx, None, tx.sender, error)
        if new is not None:
            self.plain_contracts.append(new)
            tx.contract_address = new
        return None, 0, frame.action.init_code, 53_000 + frame.action.gas_used // 4, error

    def contract_call_tree(self, tx: _TxScript):
        if not self.plain_contracts:
            return self.contract_deploy(tx)
        dst = self.rng.choice(self.plain_contracts)
        value = self.ether_value() if self.rng.chance(1, 3) else 0
        data = self.calldata() if (value == 0 or self.rng.chance(1, 2)) else b""
        error = self.error_label() if self.rng.chance(1, 12) else None
        root, ok = self._call(tx, None, "call", tx.sender, dst, value, data, True, error)
        self._subtree(tx, root, dst, ok, 1)
        return dst, value, data, 21_000 + self.rng.randint(5_000, 200_000), error

    def _new_token(self, tx: _TxScript, standard: str) -> Token:
        frame, address = self._create(tx, None, tx.sender)
        tx.contract_address = address
        words = tuple(self.rng.weighted(NAME_WORDS, NAME_WEIGHTS) for _ in range(self.rng.randint(1, 3)))
        sep = self.rng.choice((" ", "-", "_", " "))
        name = sep.join(words)
        symbol = "".join(w[0] for w in words).upper() + str(self.rng.below(100))
        decimals = self.rng.choice((18, 18, 18, 8, 6, 0)) if standard != "erc721" else 0
        token = Token(address, standard, tx.block_number, name, tuple(w.lower() for w in words), symbol, decimals, 0)
        r = self.rng.below(12)
        if r == 0:
            token.name, token.name_words = None, ()
        elif r == 1:
            token.symbol = None
        elif r == 2:
            token.decimals = None
        elif r == 3 and len(name.encode()) <= 32:
            token.bytes32_text = True
        self.tokens[address] = token
        if standard == "erc721":
            self.erc721_tokens.append(address)
        else:
            supply = self.rng.randint(1, 10**6) * 10 ** (decimals or 0)
            token.total_supply = supply
            token.holders[tx.sender] = supply
            self._token_transfer_log(tx, token, ZERO_ADDRESS, tx.sender, supply)
            self.erc20_tokens.append(address)
        return token

    def _pick(self, tokens: list[Address]) -> Token:
        # earlier tokens are more popular
        weights = [max(1, 1000 // (i + 1)) for i in range(len(tokens))]
        return self.tokens[self.rng.weighted(tokens, weights)]

    def erc20_lifecycle(self, tx: _TxScript):
        if not self.erc20_tokens or self.rng.chance(1, 10):
            standard = "erc20_nonstandard" if self.rng.chance(1, 6) else "erc20"
            token = self._new_token(tx, standard)
            return None, 0, tx.root.action.init_code, 300_000, None
        token = self._pick(self.erc20_tokens)
        holders = [h for h, bal in token.holders.items() if bal > 0 and h in self._user_set]
        mode = self.rng.below(10)
        if tx.sender not in token.holders or token.holders[tx.sender] == 0:
            if holders:
                tx.sender = self.rng.choice(holders)
            else:
                mode = 9
        transfer_sel = function_selector("transfer(address,uint256)")
        if mode < 6:  # direct transfer
            dst = self.rng.choice(self.users)
            amount = self.rng.randint(1, token.holders[tx.sender])
            data = transfer_sel + bytes(12) + dst + amount.to_bytes(32, "big")
            error = "Reverted" if self.rng.chance(1, 15) else None
            _, ok = self._call(tx, None, "call", tx.sender, token.address, 0, data, True, error)
            if ok:
                self._move_token(token, tx.sender, dst, amount)
                self._token_transfer_log(tx, token, tx.sender, dst, amount)
                if self.rng.chance(1, 8):
                    self._noise_log(tx, token.address)
            return token.address, 0, data, 51_000, error
        if mode < 8 and self.plain_contracts:  # routed through a contract
            router = self.rng.choice(self.plain_contracts)
            dst = self.rng.choice(self.users)
            amount = self.rng.randint(1, token.holders[tx.sender])
            data = function_selector("execute(address,uint256,bytes)") + self.rng.bytes(96)
            root, ok = self._call(tx, None, "call", tx.sender, router, 0, data, True)
            inner = (function_selector("transferFrom(address,address,uint256)") + bytes(12) + tx.sender
                     + bytes(12) + dst + amount.to_bytes(32, "big"))
            error = "Reverted" if self.rng.chance(1, 10) else None
            _, child_ok = self._call(tx, root, "call", router, token.address, 0, inner, ok, error)
            if child_ok:
                self._move_token(token, tx.sender, dst, amount)
                self._token_transfer_log(tx, token, tx.sender, dst, amount)
            return router, 0, data, 80_000, None
        # airdrop from a holder to fresh addresses
        if token.holders.get(tx.sender, 0) == 0:
            return self.plain_transfer(tx)
        data = function_selector("multisend(address[],uint256[])") + self.rng.bytes(128)
        self._call(tx, None, "call", tx.sender, token.address, 0, data, True)
        for _ in range(self.rng.randint(2, 6)):
            if token.holders[tx.sender] == 0:
                break
            dst = self.fresh_address()
            amount = self.rng.randint(1, max(1, token.holders[tx.sender] // 10))
            self._move_token(token, tx.sender, dst, amount)
            self._token_transfer_log(tx, token, tx.sender, dst, amount)
        return token.address, 0, data, 150_000, None

    def _move_token(self, token: Token, src: Address, dst: Address, amount: int) -> None:
        if token.holders.get(src, 0) < amount:
            raise AssertionError("fixture bug: token overdraw")
        token.holders[src] -= amount
        token.holders[dst] = token.holders.get(dst, 0) + amount

    def erc721_lifecycle(self, tx: _TxScript):
        if not self.erc721_tokens or self.rng.chance(1, 12):
            self._new_token(tx, "erc721")
            return None, 0, tx.root.action.init_code, 400_000, None
        token = self._pick(self.erc721_tokens)
        owned = [(i, o) for i, o in token.owners.items() if o in self._user_set]
        if owned and self.rng.chance(3, 5):
            token_id, owner = self.rng.choice(owned)
            tx.sender = owner
            dst = self.rng.choice(self.users) if self.rng.chance(4, 5) else self.fresh_address()
            data = (function_selector("transferFrom(address,address,uint256)") + bytes(12) + owner
                    + bytes(12) + dst + token_id.to_bytes(32, "big"))
            error = "Reverted" if self.rng.chance(1, 20) else None
            _, ok = self._call(tx, None, "call", owner, token.address, 0, data, True, error)
            if ok:
                token.owners[token_id] = dst
                self._token_transfer_log(tx, token, owner, dst, token_id)
            return token.address, 0, data, 60_000, error
        data = function_selector("claim(uint256)") + self.rng.bytes(32)
        value = self.rng.randint(1, 100) * 10**15
        self._call(tx, None, "call", tx.sender, token.address, value, data, True)
        token_id = token.next_id
        token.next_id += 1
        token.owners[token_id] = tx.sender
        token.total_supply += 1
        self._token_transfer_log(tx, token, ZERO_ADDRESS, tx.sender, token_id)
        return token.address, value, data, 120_000, None

    def suicide_storm(self, tx: _TxScript):
        if not self.plain_contracts:
            return self.contract_deploy(tx)
        attacker = self.rng.choice(self.plain_contracts)
        value = self.rng.randint(1, 100) * 10**16
        data = function_selector("execute(address,uint256,bytes)") + self.rng.bytes(96)
        root, _ = self._call(tx, None, "call", tx.sender, attacker, value, data, True)
        for _ in range(self.rng.randint(3, 10)):
            victims = [c for c in self.plain_contracts if c != attacker]
            refund = self.fresh_address()
            if victims and self.rng.chance(1, 2):
                victim = self.rng.choice(victims)
                bal = self.balances.get(attacker, 0)
                v = self.rng.randint(0, bal // 4) if bal > 3 else 0
                child, _ = self._call(tx, root, "call", attacker, victim, v, b"", True)
                self._suicide(tx, child, victim, refund)
            else:
                child, new = self._create(tx, root, attacker)
                self._suicide(tx, child, new, refund)
        return attacker, value, data, 21_000 + self.rng.randint(100_000, 600_000), None

    def error_burst(self, tx: _TxScript):
        if not self.plain_contracts:
            return self.contract_deploy(tx)
        dst = self.rng.choice(self.plain_contracts)
        value = self.ether_value() if self.rng.chance(1, 2) else 0
        data = self.calldata()
        error = self.error_label()
        root, ok = self._call(tx, None, "call", tx.sender, dst, value, data, True, error)
        # children ran before the failure and are rolled back with it
        for _ in range(self.rng.randint(1, 3)):
            to = self.rng.choice(self.users)
            bal = self.balances.get(dst, 0)
            v = self.rng.randint(1, bal) if bal else 0
            self._call(tx, root, "call", dst, to, v, b"", ok)
        gas = 21_000 + self.rng.randint(10_000, 300_000)
        return dst, value, data, gas, error

    # -- blocks -------------------------------------------------------------------

    def _flatten(self, tx: _TxScript) -> list[TraceRecord]:
        out: list[TraceRecord] = []

        def walk(frame: _Frame):
            out.append(TraceRecord(tx.block_number, tx.hash, tx.index, frame.trace_address, frame.action,
                                   len(frame.children), frame.error))
            for child in frame.children:
                walk(child)

        walk(tx.root)
        return out

    def _gas_price(self) -> int:
        if self.spike:
            self.spike -= 1
        elif self.rng.chance(1, 150):
            self.spike = self.rng.randint(3, 12)
        drift = self.rng.randint(-40, 40)
        self.gas_base = min(max(self.gas_base * (1000 + drift) // 1000, GWEI), 300 * GWEI)
        return self.gas_base * (self.rng.randint(5, 10) if self.spike else 1)

    def make_block(self, number: int, parent: Hash32, timestamp: int) -> BlockBundle:
        miner, tag, words = self.rng.weighted(self.miners, MINER_WEIGHTS)
        base = self._gas_price()
        scale = int(self.spec.mean_txs_per_block * 1000)
        n_txs = 0 if number == 0 else min((self.rng.randint(0, 2 * scale) + 500) // 1000, MAX_TXS_PER_BLOCK)
        self.block_logs = 0
        txs, receipts, traces = [], [], []
        cumulative = 0
        block_hash = self.fresh_hash()
        for i in range(n_txs):
            sender = self.rng.choice(self.users)
            tx = _TxScript(number, i, self.fresh_hash(), sender)
            scenario = self.rng.weighted(SCENARIOS, self.mix_weights)
            to, value, data, gas_used, error = getattr(self, scenario)(tx)
            if tx.root is None:
                raise AssertionError(f"fixture bug: {scenario} produced no root trace")
            price = base * self.rng.randint(80, 250) // 100
            gas_limit = gas_used if error and "gas" in error.lower() else gas_used + self.rng.randint(0, 50_000)
            fee = gas_used * price
            self.move(tx.sender, miner, fee)
            cumulative += gas_used
            raw = RawTransaction(tx.hash, i, tx.sender, to, Amount256(value), gas_limit, Amount256(price), data,
                                 self.rng.below(10_000))
            txs.append(raw)
            receipts.append(ReceiptRecord(tx.hash, number, gas_used, cumulative, tx.contract_address,
                                          tuple(tx.logs)))
            traces.extend(self._flatten(tx))
            self.truth.txs.append(
                TxRow(tx.hash, number, i, tx.sender, to, Amount256(value), Amount256(price), gas_used,
                      Amount256(fee), len(data), error)
            )
        reward = BLOCK_REWARD
        if n_txs and self.rng.chance(1, 15):
            uncle_miner = self.rng.choice(self.miners)[0]
            reward += NEPHEW_BONUS
        else:
            uncle_miner = None
        traces.append(TraceRecord(number, None, None, (), RewardAction(miner, Amount256(reward), "block")))
        self._mint(miner, reward)
        if uncle_miner is not None:
            traces.append(TraceRecord(number, None, None, (), RewardAction(uncle_miner, Amount256(UNCLE_REWARD), "uncle")))
            self._mint(uncle_miner, UNCLE_REWARD)
        prices = [t.gas_price for t in txs]
        size = 540 + sum(110 + len(t.input) for t in txs)
        block = RawBlock(number, block_hash, parent, miner, timestamp, BLOCK_GAS_LIMIT, cumulative, size, tag,
                         tuple(txs))
        self.truth.blocks.append(
            BlockRow(number, block_hash, miner, timestamp, BLOCK_GAS_LIMIT, cumulative, size, tag, len(txs),
                     min(prices) if prices else None,
                     Fraction(sum(prices), len(prices)) if prices else None,
                     max(prices) if prices else None)
        )
        self.truth.miner_words.append(words)
        return BlockBundle(block, tuple(receipts), tuple(traces))

    def _mint(self, author: Address, value: int) -> None:
        self.balances[author] = self.balances.get(author, 0) + value
        self.truth.rewards.append((author, value))

    def run(self) -> FixtureChain:
        self.make_genesis()
        self._user_set = frozenset(self.users)
        bundles = []
        parent = Hash32(bytes(32))
        timestamp = 1_438_269_973
        for number in range(self.spec.n_blocks):
            if number:
                timestamp += self.rng.randint(1, 29)
            bundle = self.make_block(number, parent, timestamp)
            bundles.append(bundle)
            parent = bundle.block.hash
        supply_before = sum(self.genesis.values()) + sum(v for _, v in self.truth.rewards)
        if sum(self.balances.values()) != supply_before:
            raise AssertionError("fixture bug: Ether not conserved")
        if any(v < 0 for v in self.balances.values()):
            raise AssertionError("fixture bug: negative balance")
        final = {a: v for a, v in self.balances.items() if v or a in self.genesis}
        return FixtureChain(self.spec, bundles, dict(self.genesis), final, list(self.tokens.values()), self.truth)


def generate_chain(spec: FixtureSpec) -> FixtureChain:
    """Generate a chain in memory; same spec, same chain."""
    return Generator(spec).run()


# --- ledger -----------------------------------------------------------------------


def expected_tables(chain: FixtureChain) -> dict[str, list]:
    t = chain.truth
    with_transfers = {r.token for r in t.erc20}
    meta = []
    for tok in sorted((tok for tok in chain.tokens if tok.address in with_transfers), key=lambda k: k.address):
        meta.append(TokenMetadataRow(tok.address, tok.name, tok.symbol, tok.decimals,
                                     Amount256(tok.total_supply)))
    return {
        "dataset1_blocks": t.blocks,
        "dataset1_txs": t.txs,
        "dataset2_internal_eth": t.ether,
        "dataset3_contracts": t.contracts,
        "dataset4_calls": t.calls,
        "dataset5_erc20": t.erc20,
        "dataset5_tokens": meta,
        "dataset6_erc721": t.erc721,
    }


def build_ledger(chain: FixtureChain, archive_digest: str | None = None) -> dict:
    from .oracle import expected_stats

    tables = expected_tables(chain)
    token_words = {str(tok.address): list(tok.name_words) for tok in chain.tokens if tok.name is not None}
    return {
        "seed": chain.spec.seed,
        "spec": chain.spec.to_json(),
        "archive_digest": archive_digest,
        "genesis_allocations": {str(a): str(v) for a, v in sorted(chain.genesis.items())},
        "final_balances": {str(a): str(v) for a, v in sorted(chain.final_balances.items())},
        "tokens": [tok.to_json() for tok in sorted(chain.tokens, key=lambda k: k.address)],
        "expected_row_counts": {name: len(rows) for name, rows in tables.items()},
        "expected_rows": {
            name: {"header": FILES[name].header(), "rows": [r.to_csv() for r in rows]}
            for name, rows in tables.items()
        },
        "expected_stats": expected_stats(chain.truth, tables, token_words),
    }


def ledger_bytes(ledger: dict) -> bytes:
    return (json.dumps(ledger, separators=(",", ":")) + "\n").encode("utf-8")


def generate(spec: FixtureSpec, out: Path, gz: bool = False) -> dict:
    """Write the raw archive and ``ledger-<seed>.json`` into ``out``; return a summary."""
    from ..ingest import archive_digest, write_bundles

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    chain = generate_chain(spec)
    write_bundles(out, chain.bundles, gz=gz)
    digest = archive_digest(out)
    ledger = build_ledger(chain, digest)
    data = ledger_bytes(ledger)
    ledger_path = out / f"ledger-{spec.seed}.json"
    ledger_path.write_bytes(data)
    return {
        "blocks": len(chain.bundles),
        "archive_digest": digest,
        "ledger": str(ledger_path),
        "ledger_digest": hashlib.sha256(data).hexdigest(),
        "row_counts": ledger["expected_row_counts"],
    }
