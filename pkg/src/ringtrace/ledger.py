"""Ring-confidential ledger state machine.

Ground-truth chains know owners, amounts, and which ring member is real; the
adversary sees only the projection produced by :func:`public_view`.  Chain
construction is strictly sequential; a built chain and its public view are
immutable by convention and safe for concurrent readers.
"""

import bisect
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DoubleSpend, InsufficientFunds, InvalidRing, PoolTooSmall
from .rng import Rng

FORMAT_VERSION = 1

COINBASE = "coinbase"
TRANSFER = "transfer"


@dataclass
class Output:
    output_id: int
    created_by_tx: int
    owner: int
    amount: int
    block_height: int
    timestamp: int
    is_coinbase: bool
    spent_by: int | None = None


@dataclass
class RingInput:
    members: list[int]
    real_index: int

    @property
    def ring_size(self) -> int:
        return len(self.members)


@dataclass
class Transaction:
    tx_id: int
    timestamp: int
    block_height: int
    inputs: list[RingInput]
    outputs: list[int]
    fee: int
    sender: int | None
    receiver: int | None
    intended_amount: int | None
    kind: str


@dataclass
class Block:
    height: int
    timestamp: int
    miner: int
    tx_ids: list[int]


@dataclass
class DecoyPolicy:
    """How decoys are drawn from the eligible pool.

    uniform: every eligible output equally likely.
    recency_weighted: weight proportional to age_rank**-recency_shape with
    age_rank 1 for the newest eligible output, biasing recent history the way
    deployed wallets do.
    """

    kind: str = "uniform"
    recency_shape: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "recency_weighted"):
            raise ValueError(f"unknown decoy policy kind {self.kind!r}")
        if self.recency_shape <= 0:
            raise ValueError("recency_shape must be positive")


@dataclass
class Violation:
    code: str
    subject: int
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, subject: int, message: str) -> None:
        self.violations.append(Violation(code, subject, message))


class Chain:
    """Ground-truth ledger plus the indexes the simulator samples from."""

    def __init__(self, block_interval: int = 120, coinbase_maturity: int = 60,
                 seed: int = 0):
        self.block_interval = block_interval
        self.coinbase_maturity = coinbase_maturity
        self.seed = seed
        self.blocks: list[Block] = []
        self.transactions: dict[int, Transaction] = {}
        self.outputs: dict[int, Output] = {}
        self._next_tx_id = 0
        self._next_output_id = 0
        # creation-ordered ids and heights, split by coinbase maturity rule
        self._plain_ids: list[int] = []
        self._plain_heights: list[int] = []
        self._cb_ids: list[int] = []
        self._cb_heights: list[int] = []
        # pending outputs per built-but-unapplied transaction
        self._staged_outputs: dict[int, list[Output]] = {}

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    @property
    def next_height(self) -> int:
        return len(self.blocks)

    def new_tx_id(self) -> int:
        tx_id = self._next_tx_id
        self._next_tx_id += 1
        return tx_id

    def new_output_id(self) -> int:
        oid = self._next_output_id
        self._next_output_id += 1
        return oid

    def is_mature(self, out: Output, height: int) -> bool:
        if not out.is_coinbase:
            return out.block_height < height
        return out.block_height + self.coinbase_maturity <= height

    def eligible_decoy_count(self, spend_height: int) -> int:
        """Outputs usable as ring members at spend_height (real not excluded)."""
        n_plain = bisect.bisect_left(self._plain_heights, spend_height)
        n_cb = bisect.bisect_right(self._cb_heights, spend_height - self.coinbase_maturity)
        return n_plain + n_cb

    def _eligible_at(self, index: int, spend_height: int):
        """Map a rank in the merged eligible pool to an output id.

        Plain outputs come first, then mature coinbase; both slices are
        creation-ordered so uniform sampling over ranks is uniform over the
        eligible pool.
        """
        n_plain = bisect.bisect_left(self._plain_heights, spend_height)
        if index < n_plain:
            return self._plain_ids[index]
        return self._cb_ids[index - n_plain]

    def eligible_ids_chronological(self, spend_height: int) -> list[int]:
        """All eligible ids ordered by (creating height, output_id)."""
        n_plain = bisect.bisect_left(self._plain_heights, spend_height)
        n_cb = bisect.bisect_right(self._cb_heights, spend_height - self.coinbase_maturity)
        merged = sorted(
            self._plain_ids[:n_plain] + self._cb_ids[:n_cb],
            key=lambda oid: (self.outputs[oid].block_height, oid),
        )
        return merged

    def _register_output(self, out: Output) -> None:
        self.outputs[out.output_id] = out
        if out.is_coinbase:
            self._cb_ids.append(out.output_id)
            self._cb_heights.append(out.block_height)
        else:
            self._plain_ids.append(out.output_id)
            self._plain_heights.append(out.block_height)


def _order_ring(chain: Chain, members: list[int], real: int) -> RingInput:
    ordered = sorted(members, key=lambda oid: (chain.outputs[oid].block_height, oid))
    return RingInput(members=ordered, real_index=ordered.index(real))


def select_decoys(chain: Chain, real: int, ring_size: int, policy: DecoyPolicy,
                  rng: Rng, spend_height: int | None = None,
                  pool: list[int] | None = None) -> RingInput:
    """Hide `real` among ring_size-1 decoys drawn from the eligible pool.

    Eligible means created strictly below spend_height and, for coinbase,
    mature.  Members come back ordered ascending by (creating height, id);
    real_index is the real output's rank after ordering.
    """
    if ring_size < 1:
        raise ValueError("ring_size must be >= 1")
    if spend_height is None:
        spend_height = chain.next_height
    if real not in chain.outputs:
        raise InvalidRing(f"real output {real} does not exist")

    need = ring_size - 1
    if need == 0:
        return RingInput(members=[real], real_index=0)

    if pool is not None:
        eligible = [
            oid for oid in pool
            if oid != real and oid in chain.outputs
            and chain.outputs[oid].block_height < spend_height
            and chain.is_mature(chain.outputs[oid], spend_height)
        ]
        # drop duplicates, keep first occurrence
        seen: set[int] = set()
        eligible = [o for o in eligible if not (o in seen or seen.add(o))]
        if len(eligible) < need:
            raise PoolTooSmall(
                f"{len(eligible)} eligible decoys, ring of {ring_size} needs {need}")
        if policy.kind == "uniform":
            decoys = rng.sample(eligible, need)
        else:
            decoys = _weighted_decoys(chain, eligible, need, policy, rng)
        return _order_ring(chain, decoys + [real], real)

    # fast path against the chain's own creation-ordered indexes
    total = chain.eligible_decoy_count(spend_height)
    real_out = chain.outputs[real]
    real_eligible = (real_out.block_height < spend_height
                     and chain.is_mature(real_out, spend_height))
    avail = total - (1 if real_eligible else 0)
    if avail < need:
        raise PoolTooSmall(f"{avail} eligible decoys, ring of {ring_size} needs {need}")

    chosen: set[int] = set()
    decoys: list[int] = []
    if policy.kind == "uniform":
        while len(decoys) < need:
            oid = chain._eligible_at(rng.randrange(total), spend_height)
            if oid != real and oid not in chosen:
                chosen.add(oid)
                decoys.append(oid)
    else:
        ordered = chain.eligible_ids_chronological(spend_height)
        decoys = _weighted_decoys(chain, [o for o in ordered if o != real],
                                  need, policy, rng)
    return _order_ring(chain, decoys + [real], real)


def _weighted_decoys(chain: Chain, eligible: list[int], need: int,
                     policy: DecoyPolicy, rng: Rng) -> list[int]:
    """Rank-weighted sampling without replacement; rank 1 is the newest."""
    ordered = sorted(eligible, key=lambda oid: (chain.outputs[oid].block_height, oid))
    n = len(ordered)
    weights = [(n - i) ** -policy.recency_shape for i in range(n)]
    cum = []
    acc = 0.0
    for w in weights:
        acc += w
        cum.append(acc)
    chosen: set[int] = set()
    decoys: list[int] = []
    while len(decoys) < need:
        u = rng.random() * acc
        i = bisect.bisect_left(cum, u)
        i = min(i, n - 1)
        if i not in chosen:
            chosen.add(i)
            decoys.append(ordered[i])
    return decoys


def build_transaction(chain: Chain, wallet: list[Output], amount: int, dest: int,
                      fee: int, height: int, time: int, ring_size: int,
                      policy: DecoyPolicy, rng: Rng) -> Transaction:
    """Assemble a transfer spending the wallet's oldest mature outputs.

    Consumes outputs oldest-first until amount+fee is covered, wraps each in
    its own ring, and stages a payment output plus change when positive.  The
    staged outputs materialize when apply_block accepts the transaction.
    """
    if amount <= 0:
        raise ValueError("amount must be positive")
    spendable = [o for o in wallet if o.spent_by is None and chain.is_mature(o, height)]
    spendable.sort(key=lambda o: (o.block_height, o.output_id))
    needed = amount + fee
    picked: list[Output] = []
    covered = 0
    for out in spendable:
        if covered >= needed:
            break
        picked.append(out)
        covered += out.amount
    if covered < needed:
        raise InsufficientFunds(f"spendable {covered} < amount+fee {needed}")

    sender = picked[0].owner
    rings = [
        select_decoys(chain, out.output_id, ring_size, policy, rng,
                      spend_height=height)
        for out in picked
    ]

    tx_id = chain.new_tx_id()
    change = covered - needed
    staged = [Output(chain.new_output_id(), tx_id, dest, amount, height, time, False)]
    if change > 0:
        staged.append(Output(chain.new_output_id(), tx_id, sender, change, height, time, False))
    tx = Transaction(
        tx_id=tx_id, timestamp=time, block_height=height, inputs=rings,
        outputs=[o.output_id for o in staged], fee=fee, sender=sender,
        receiver=dest, intended_amount=amount, kind=TRANSFER,
    )
    chain._staged_outputs[tx_id] = staged
    return tx


def apply_block(chain: Chain, pending_txs: list[Transaction], miner: int,
                time: int, block_reward: int) -> Block:
    """Append a block: coinbase first, then the pending transfers.

    Fees are recycled into the coinbase so total supply is the sum of block
    rewards.  Real inputs get their spent_by mark here.
    """
    height = chain.next_height
    # validate before mutating anything
    spent_now: set[int] = set()
    for tx in pending_txs:
        for ring in tx.inputs:
            for oid in ring.members:
                if oid not in chain.outputs:
                    raise InvalidRing(f"tx {tx.tx_id}: ring member {oid} does not exist")
                if chain.outputs[oid].block_height >= height:
                    raise InvalidRing(f"tx {tx.tx_id}: member {oid} not below height {height}")
            real = ring.members[ring.real_index]
            if chain.outputs[real].spent_by is not None or real in spent_now:
                raise DoubleSpend(f"tx {tx.tx_id}: output {real} already spent")
            spent_now.add(real)

    fees = sum(tx.fee for tx in pending_txs)
    cb_id = chain.new_tx_id()
    cb_out = Output(chain.new_output_id(), cb_id, miner, block_reward + fees,
                    height, time, True)
    coinbase = Transaction(
        tx_id=cb_id, timestamp=time, block_height=height, inputs=[],
        outputs=[cb_out.output_id], fee=0, sender=None, receiver=miner,
        intended_amount=None, kind=COINBASE,
    )
    chain.transactions[cb_id] = coinbase
    chain._register_output(cb_out)

    for tx in pending_txs:
        tx.block_height = height
        for ring in tx.inputs:
            real = ring.members[ring.real_index]
            chain.outputs[real].spent_by = tx.tx_id
        for out in chain._staged_outputs.pop(tx.tx_id):
            out.block_height = height
            chain._register_output(out)
        chain.transactions[tx.tx_id] = tx

    block = Block(height=height, timestamp=time, miner=miner,
                  tx_ids=[cb_id] + [tx.tx_id for tx in pending_txs])
    chain.blocks.append(block)
    return block


# Public (adversary) projection -------------------------------------------------

@dataclass
class PublicOutput:
    output_id: int
    created_by_tx: int | None
    block_height: int
    timestamp: int
    is_coinbase: bool


@dataclass
class PublicTx:
    tx_id: int
    timestamp: int
    block_height: int
    rings: list[list[int]]
    outputs: list[int]
    fee: int
    kind: str


class PublicChain:
    """What the adversary can see: structure and timing, no secrets."""

    def __init__(self, blocks: list[Block], transactions: dict[int, PublicTx],
                 outputs: dict[int, PublicOutput], seed: int = 0):
        self.blocks = blocks
        self.transactions = transactions
        self.outputs = outputs
        self.seed = seed

    def creating_tx(self, output_id: int) -> PublicTx | None:
        tx_id = self.outputs[output_id].created_by_tx
        return None if tx_id is None else self.transactions[tx_id]

    def transfer_ids(self) -> list[int]:
        return sorted(t for t, tx in self.transactions.items() if tx.kind == TRANSFER)


def public_view(chain: Chain) -> PublicChain:
    """Strip every secret field; everything else is preserved bit for bit."""
    txs = {
        tx.tx_id: PublicTx(
            tx_id=tx.tx_id, timestamp=tx.timestamp, block_height=tx.block_height,
            rings=[list(r.members) for r in tx.inputs], outputs=list(tx.outputs),
            fee=tx.fee, kind=tx.kind,
        )
        for tx in chain.transactions.values()
    }
    outs = {
        o.output_id: PublicOutput(
            output_id=o.output_id, created_by_tx=o.created_by_tx,
            block_height=o.block_height, timestamp=o.timestamp,
            is_coinbase=o.is_coinbase,
        )
        for o in chain.outputs.values()
    }
    blocks = [Block(b.height, b.timestamp, b.miner, list(b.tx_ids)) for b in chain.blocks]
    return PublicChain(blocks=blocks, transactions=txs, outputs=outs, seed=chain.seed)


def validate_chain(chain: Chain) -> ValidationReport:
    """Structural and conservation audit; violations are data, not errors."""
    report = ValidationReport()

    for i, block in enumerate(chain.blocks):
        if block.height != i:
            report.add("height_gap", block.height, f"block at index {i} has height {block.height}")
        if i > 0 and block.timestamp < chain.blocks[i - 1].timestamp:
            report.add("time_regression", block.height, "block timestamp decreased")
        if not block.tx_ids:
            report.add("empty_block", block.height, "block has no transactions")
            continue
        first = chain.transactions.get(block.tx_ids[0])
        if first is None or first.kind != COINBASE:
            report.add("missing_coinbase", block.height, "first tx is not a coinbase")
        for tx_id in block.tx_ids[1:]:
            tx = chain.transactions.get(tx_id)
            if tx is not None and tx.kind == COINBASE:
                report.add("extra_coinbase", block.height, f"tx {tx_id} is a second coinbase")

    spenders: dict[int, int] = {}
    for tx_id in sorted(chain.transactions):
        tx = chain.transactions[tx_id]
        if tx.kind == COINBASE and tx.inputs:
            report.add("coinbase_inputs", tx_id, "coinbase has ring inputs")
        if tx.kind == TRANSFER and not tx.inputs:
            report.add("no_inputs", tx_id, "transfer has no ring inputs")
        for ring_i, ring in enumerate(tx.inputs):
            if len(set(ring.members)) != len(ring.members):
                report.add("dup_members", tx_id, f"ring {ring_i} repeats a member")
            if not (0 <= ring.real_index < len(ring.members)):
                report.add("real_index_range", tx_id,
                           f"ring {ring_i} real_index {ring.real_index} out of range")
                continue
            keys = []
            for oid in ring.members:
                out = chain.outputs.get(oid)
                if out is None:
                    report.add("dangling_member", tx_id, f"ring {ring_i} member {oid} missing")
                    continue
                keys.append((out.block_height, oid))
                if out.block_height >= tx.block_height:
                    report.add("future_member", tx_id,
                               f"ring {ring_i} member {oid} not below spending height")
                if out.is_coinbase and not chain.is_mature(out, tx.block_height):
                    report.add("immature_member", tx_id,
                               f"ring {ring_i} references immature coinbase {oid}")
            if keys != sorted(keys):
                report.add("ring_order", tx_id, f"ring {ring_i} not age-ordered")
            real = ring.members[ring.real_index]
            if real in chain.outputs:
                prev = spenders.get(real)
                if prev is not None:
                    report.add("double_spend", tx_id,
                               f"output {real} spent by {prev} and {tx_id}")
                spenders[real] = tx_id
        # conservation over ground truth
        if tx.kind == TRANSFER:
            in_sum = 0
            resolvable = True
            for ring in tx.inputs:
                if not (0 <= ring.real_index < len(ring.members)):
                    resolvable = False
                    break
                real_out = chain.outputs.get(ring.members[ring.real_index])
                if real_out is None:
                    resolvable = False
                    break
                in_sum += real_out.amount
            out_sum = sum(chain.outputs[o].amount for o in tx.outputs if o in chain.outputs)
            if resolvable and in_sum != out_sum + tx.fee:
                report.add("conservation", tx_id,
                           f"inputs {in_sum} != outputs {out_sum} + fee {tx.fee}")

    for oid in sorted(chain.outputs):
        out = chain.outputs[oid]
        if out.amount <= 0:
            report.add("nonpositive_amount", oid, f"output {oid} amount {out.amount}")
        if out.block_height < 0:
            report.add("negative_height", oid, f"output {oid} height {out.block_height}")
        if out.spent_by is not None:
            spender = chain.transactions.get(out.spent_by)
            if spender is None:
                report.add("dangling_spender", oid, f"spent_by {out.spent_by} missing")
            elif spender.block_height <= out.block_height:
                report.add("same_height_spend", oid,
                           f"output {oid} spent at height {spender.block_height}")
            if spenders.get(oid) != out.spent_by:
                report.add("spender_mismatch", oid,
                           f"spent_by {out.spent_by} disagrees with ring evidence")

    return report


# Serialization -----------------------------------------------------------------

def _dump_json(payload: dict, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def chain_to_dict(chain: Chain) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "seed": chain.seed,
        "block_interval": chain.block_interval,
        "coinbase_maturity": chain.coinbase_maturity,
        "blocks": [
            {"height": b.height, "timestamp": b.timestamp, "miner": b.miner,
             "tx_ids": b.tx_ids}
            for b in chain.blocks
        ],
        "transactions": [
            {"tx_id": tx.tx_id, "timestamp": tx.timestamp,
             "block_height": tx.block_height,
             "inputs": [{"members": r.members, "real_index": r.real_index}
                        for r in tx.inputs],
             "outputs": tx.outputs, "fee": tx.fee, "sender": tx.sender,
             "receiver": tx.receiver, "intended_amount": tx.intended_amount,
             "kind": tx.kind}
            for tx_id, tx in sorted(chain.transactions.items())
        ],
        "outputs": [
            {"output_id": o.output_id, "created_by_tx": o.created_by_tx,
             "owner": o.owner, "amount": o.amount, "block_height": o.block_height,
             "timestamp": o.timestamp, "is_coinbase": o.is_coinbase,
             "spent_by": o.spent_by}
            for oid, o in sorted(chain.outputs.items())
        ],
    }


def chain_from_dict(payload: dict) -> Chain:
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {payload.get('format_version')!r}")
    chain = Chain(block_interval=payload["block_interval"],
                  coinbase_maturity=payload["coinbase_maturity"],
                  seed=payload["seed"])
    chain.blocks = [Block(b["height"], b["timestamp"], b["miner"], list(b["tx_ids"]))
                    for b in payload["blocks"]]
    for t in payload["transactions"]:
        tx = Transaction(
            tx_id=t["tx_id"], timestamp=t["timestamp"], block_height=t["block_height"],
            inputs=[RingInput(list(r["members"]), r["real_index"]) for r in t["inputs"]],
            outputs=list(t["outputs"]), fee=t["fee"], sender=t["sender"],
            receiver=t["receiver"], intended_amount=t["intended_amount"], kind=t["kind"],
        )
        chain.transactions[tx.tx_id] = tx
    for o in payload["outputs"]:
        chain._register_output(Output(
            output_id=o["output_id"], created_by_tx=o["created_by_tx"],
            owner=o["owner"], amount=o["amount"], block_height=o["block_height"],
            timestamp=o["timestamp"], is_coinbase=o["is_coinbase"],
            spent_by=o["spent_by"],
        ))
    if chain.transactions:
        chain._next_tx_id = max(chain.transactions) + 1
    if chain.outputs:
        chain._next_output_id = max(chain.outputs) + 1
    return chain


def save_chain(chain: Chain, path: Path) -> None:
    _dump_json(chain_to_dict(chain), path)


def load_chain(path: Path) -> Chain:
    return chain_from_dict(json.loads(Path(path).read_text()))


def public_chain_to_dict(pub: PublicChain) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "seed": pub.seed,
        "blocks": [
            {"height": b.height, "timestamp": b.timestamp, "miner": b.miner,
             "tx_ids": b.tx_ids}
            for b in pub.blocks
        ],
        "transactions": [
            {"tx_id": tx.tx_id, "timestamp": tx.timestamp,
             "block_height": tx.block_height, "rings": tx.rings,
             "outputs": tx.outputs, "fee": tx.fee, "kind": tx.kind}
            for tx_id, tx in sorted(pub.transactions.items())
        ],
        "outputs": [
            {"output_id": o.output_id, "created_by_tx": o.created_by_tx,
             "block_height": o.block_height, "timestamp": o.timestamp,
             "is_coinbase": o.is_coinbase}
            for oid, o in sorted(pub.outputs.items())
        ],
    }


def public_chain_from_dict(payload: dict) -> PublicChain:
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {payload.get('format_version')!r}")
    blocks = [Block(b["height"], b["timestamp"], b["miner"], list(b["tx_ids"]))
              for b in payload["blocks"]]
    txs = {
        t["tx_id"]: PublicTx(
            tx_id=t["tx_id"], timestamp=t["timestamp"], block_height=t["block_height"],
            rings=[list(r) for r in t["rings"]], outputs=list(t["outputs"]),
            fee=t["fee"], kind=t["kind"],
        )
        for t in payload["transactions"]
    }
    outs = {
        o["output_id"]: PublicOutput(
            output_id=o["output_id"], created_by_tx=o["created_by_tx"],
            block_height=o["block_height"], timestamp=o["timestamp"],
            is_coinbase=o["is_coinbase"],
        )
        for o in payload["outputs"]
    }
    return PublicChain(blocks=blocks, transactions=txs, outputs=outs, seed=payload["seed"])


def save_public_chain(pub: PublicChain, path: Path) -> None:
    _dump_json(public_chain_to_dict(pub), path)


def load_public_chain(path: Path) -> PublicChain:
    return public_chain_from_dict(json.loads(Path(path).read_text()))
