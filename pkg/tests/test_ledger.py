"""Ledger state machine: rings, blocks, projection, validation."""

import json
import math

import pytest

from ringtrace.errors import DoubleSpend, InsufficientFunds, PoolTooSmall
from ringtrace.ledger import (
    Chain,
    DecoyPolicy,
    apply_block,
    build_transaction,
    chain_from_dict,
    chain_to_dict,
    public_chain_from_dict,
    public_chain_to_dict,
    public_view,
    select_decoys,
    validate_chain,
)
from ringtrace.rng import Rng

from conftest import UNIFORM, mine_empty, send, wallet_of


# select_decoys -------------------------------------------------------------


def test_ring_contains_real_ordered_distinct(funded_chain):
    rng = Rng(1)
    pool = sorted(funded_chain.outputs)
    real = pool[5]
    ring = select_decoys(funded_chain, real, 11, UNIFORM, rng, pool=pool)
    assert ring.ring_size == 11
    assert len(set(ring.members)) == 11
    assert real in ring.members
    keys = [(funded_chain.outputs[o].block_height, o) for o in ring.members]
    assert keys == sorted(keys)
    assert ring.members[ring.real_index] == real


def test_degenerate_ring_size_one(funded_chain):
    real = sorted(funded_chain.outputs)[0]
    ring = select_decoys(funded_chain, real, 1, UNIFORM, Rng(2))
    assert ring.members == [real]
    assert ring.real_index == 0


def test_pool_too_small(funded_chain):
    pool = sorted(funded_chain.outputs)[:11]  # real + 10 others
    real = pool[0]
    with pytest.raises(PoolTooSmall):
        select_decoys(funded_chain, real, 12, UNIFORM, Rng(3), pool=pool)
    # boundary: exactly enough is fine
    select_decoys(funded_chain, real, 11, UNIFORM, Rng(3), pool=pool)


def test_uniform_sampling_chi_square_oracle():
    # 100-output pool, ring 11: each of the 99 decoys should appear with
    # frequency 10/99; check every output within 5 sigma plus a chi-square.
    chain = Chain(block_interval=10, coinbase_maturity=0, seed=0)
    mine_empty(chain, 100, reward=100, miners=[0])
    pool = sorted(chain.outputs)
    assert len(pool) == 100
    real = pool[50]
    rng = Rng(12345)
    n_rings = 100_000
    counts = {oid: 0 for oid in pool}
    for _ in range(n_rings):
        ring = select_decoys(chain, real, 11, UNIFORM, rng)
        for m in ring.members:
            if m != real:
                counts[m] += 1
    assert counts[real] == 0
    p = 10 / 99
    sigma = math.sqrt(n_rings * p * (1 - p))
    chi2 = 0.0
    for oid in pool:
        if oid == real:
            continue
        assert abs(counts[oid] - n_rings * p) < 5 * sigma
        chi2 += (counts[oid] - n_rings * p) ** 2 / (n_rings * p)
    # 98 df: mean 98, sd sqrt(196)
    assert chi2 < 98 + 6 * math.sqrt(2 * 98)


def test_decoys_never_immature_coinbase():
    chain = Chain(block_interval=10, coinbase_maturity=50, seed=0)
    mine_empty(chain, 60, reward=100)
    rng = Rng(9)
    real = sorted(chain.outputs)[0]
    h = chain.next_height
    for _ in range(200):
        ring = select_decoys(chain, real, 5, UNIFORM, rng)
        for m in ring.members:
            out = chain.outputs[m]
            assert out.block_height + 50 <= h or m == real


def test_recency_weighted_prefers_young_outputs():
    chain = Chain(block_interval=10, coinbase_maturity=0, seed=0)
    mine_empty(chain, 200, reward=100)
    real = sorted(chain.outputs)[0]
    uni, rec = Rng(4), Rng(4)
    heavy = DecoyPolicy("recency_weighted", recency_shape=2.0)
    mean_h = lambda rings: sum(
        chain.outputs[m].block_height for r in rings for m in r.members if m != real
    ) / sum(len(r.members) - 1 for r in rings)
    uni_rings = [select_decoys(chain, real, 11, UNIFORM, uni) for _ in range(300)]
    rec_rings = [select_decoys(chain, real, 11, heavy, rec) for _ in range(300)]
    assert mean_h(rec_rings) > mean_h(uni_rings)


# build_transaction ----------------------------------------------------------


def test_build_single_input_with_change(funded_chain):
    rng = Rng(5)
    h = funded_chain.next_height
    wallet = wallet_of(funded_chain, 0)[:1]
    wallet[0].amount = 60
    tx = build_transaction(funded_chain, wallet, 50, dest=1, fee=1, height=h,
                           time=h * 10, ring_size=3, policy=UNIFORM, rng=rng)
    assert len(tx.inputs) == 1
    staged = funded_chain._staged_outputs[tx.tx_id]
    assert [(o.amount, o.owner) for o in staged] == [(50, 1), (9, 0)]
    assert tx.intended_amount == 50 and tx.sender == 0 and tx.receiver == 1


def test_build_multi_ring_oldest_first(funded_chain):
    rng = Rng(6)
    h = funded_chain.next_height
    wallet = wallet_of(funded_chain, 0)[:3]
    wallet[0].amount = 30
    wallet[1].amount = 30
    wallet[2].amount = 500
    tx = build_transaction(funded_chain, wallet, 50, dest=1, fee=1, height=h,
                           time=h * 10, ring_size=3, policy=UNIFORM, rng=rng)
    # oldest-first coin selection stops after the two 30s cover 51
    assert len(tx.inputs) == 2
    reals = {r.members[r.real_index] for r in tx.inputs}
    assert reals == {wallet[0].output_id, wallet[1].output_id}
    staged = funded_chain._staged_outputs[tx.tx_id]
    assert [(o.amount, o.owner) for o in staged] == [(50, 1), (9, 0)]


def test_build_insufficient_funds(funded_chain):
    wallet = wallet_of(funded_chain, 0)[:1]
    wallet[0].amount = 10
    with pytest.raises(InsufficientFunds):
        build_transaction(funded_chain, wallet, 50, dest=1, fee=1,
                          height=funded_chain.next_height, time=0, ring_size=3,
                          policy=UNIFORM, rng=Rng(7))


def test_no_change_output_when_exact(funded_chain):
    rng = Rng(8)
    h = funded_chain.next_height
    wallet = wallet_of(funded_chain, 0)[:1]
    wallet[0].amount = 51
    tx = build_transaction(funded_chain, wallet, 50, dest=1, fee=1, height=h,
                           time=h * 10, ring_size=3, policy=UNIFORM, rng=rng)
    staged = funded_chain._staged_outputs[tx.tx_id]
    assert [(o.amount, o.owner) for o in staged] == [(50, 1)]


# apply_block ----------------------------------------------------------------


def test_empty_block_has_only_coinbase():
    chain = Chain(seed=1)
    block = apply_block(chain, [], miner=3, time=0, block_reward=700)
    assert len(block.tx_ids) == 1
    cb = chain.transactions[block.tx_ids[0]]
    assert cb.kind == "coinbase" and cb.inputs == []
    out = chain.outputs[cb.outputs[0]]
    assert out.amount == 700 and out.owner == 3


def test_double_spend_rejected(funded_chain):
    rng = Rng(10)
    h = funded_chain.next_height
    wallet = wallet_of(funded_chain, 0)[:1]
    tx1 = build_transaction(funded_chain, wallet, 10, 1, 1, h, h * 10, 3, UNIFORM, rng)
    tx2 = build_transaction(funded_chain, wallet, 10, 1, 1, h, h * 10, 3, UNIFORM, rng)
    with pytest.raises(DoubleSpend):
        apply_block(funded_chain, [tx1, tx2], 0, h * 10, 1000)


def test_nonexistent_ring_member_rejected(funded_chain):
    from ringtrace.errors import InvalidRing
    rng = Rng(22)
    h = funded_chain.next_height
    tx = build_transaction(funded_chain, wallet_of(funded_chain, 0), 10, 1, 1,
                           h, h * 10, 3, UNIFORM, rng)
    tx.inputs[0].members[0] = 999_999
    with pytest.raises(InvalidRing):
        apply_block(funded_chain, [tx], 0, h * 10, 1000)


def test_n_blocks_reach_height_n_minus_1():
    chain = Chain(seed=2)
    mine_empty(chain, 238, reward=10)
    assert chain.height == 237
    assert [b.height for b in chain.blocks] == list(range(238))


def test_fees_recycle_into_coinbase(funded_chain):
    rng = Rng(11)
    h = funded_chain.next_height
    tx = build_transaction(funded_chain, wallet_of(funded_chain, 0), 10, 1, 7,
                           h, h * 10, 3, UNIFORM, rng)
    block = apply_block(funded_chain, [tx], miner=1, time=h * 10, block_reward=1000)
    cb = funded_chain.transactions[block.tx_ids[0]]
    assert funded_chain.outputs[cb.outputs[0]].amount == 1007


# public_view ----------------------------------------------------------------


def test_public_view_of_coinbase_chain():
    chain = Chain(seed=3)
    mine_empty(chain, 1, reward=5)
    pub = public_view(chain)
    tx = list(pub.transactions.values())[0]
    assert tx.rings == [] and len(tx.outputs) == 1
    assert not hasattr(tx, "intended_amount")


def test_public_view_preserves_structure(funded_chain):
    rng = Rng(12)
    send(funded_chain, 0, 1, 25, rng)
    pub = public_view(funded_chain)
    assert set(pub.transactions) == set(funded_chain.transactions)
    assert len(pub.blocks) == len(funded_chain.blocks)
    for tx_id, tx in funded_chain.transactions.items():
        ptx = pub.transactions[tx_id]
        assert ptx.timestamp == tx.timestamp
        assert ptx.rings == [r.members for r in tx.inputs]
        assert len(ptx.outputs) == len(tx.outputs)


def test_public_serialization_contains_no_secret_fields(funded_chain):
    # schema-scan oracle: the serialized public view must not mention any
    # secret field name anywhere
    send(funded_chain, 0, 1, 25, Rng(13))
    blob = json.dumps(public_chain_to_dict(public_view(funded_chain)))
    for secret in ("owner", "amount", "real_index", "sender", "receiver", "spent_by"):
        assert secret not in blob


def test_public_view_idempotent_round_trip(funded_chain):
    send(funded_chain, 0, 1, 25, Rng(14))
    pub = public_view(funded_chain)
    d1 = public_chain_to_dict(pub)
    d2 = public_chain_to_dict(public_chain_from_dict(d1))
    assert d1 == d2


# validate_chain -------------------------------------------------------------


def test_valid_chain_produces_empty_report(funded_chain):
    rng = Rng(15)
    for i in range(5):
        send(funded_chain, i % 2, (i + 1) % 2, 10 + i, rng)
    assert validate_chain(funded_chain).ok


def test_tampered_real_index_detected(funded_chain):
    tx = send(funded_chain, 0, 1, 25, Rng(16))
    tx.inputs[0].real_index = 99
    report = validate_chain(funded_chain)
    assert any(v.code == "real_index_range" for v in report.violations)


def test_mutated_amount_breaks_conservation(funded_chain):
    # mutate-and-detect oracle: corrupt one spent output's amount and expect a
    # conservation violation on the spending transaction
    tx = send(funded_chain, 0, 1, 25, Rng(17))
    real = tx.inputs[0].members[tx.inputs[0].real_index]
    funded_chain.outputs[real].amount += 13
    report = validate_chain(funded_chain)
    bad = [v for v in report.violations if v.code == "conservation"]
    assert len(bad) == 1 and bad[0].subject == tx.tx_id


def test_unsorted_ring_detected(funded_chain):
    tx = send(funded_chain, 0, 1, 25, Rng(18))
    ring = tx.inputs[0]
    real = ring.members[ring.real_index]
    ring.members.reverse()
    ring.real_index = ring.members.index(real)
    report = validate_chain(funded_chain)
    assert any(v.code == "ring_order" for v in report.violations)


# serialization --------------------------------------------------------------


def test_chain_round_trip(funded_chain):
    send(funded_chain, 0, 1, 25, Rng(19))
    d1 = chain_to_dict(funded_chain)
    d2 = chain_to_dict(chain_from_dict(d1))
    assert d1 == d2
    assert d1["format_version"] == 1 and d1["seed"] == 42


def test_loaded_chain_can_keep_building(funded_chain):
    send(funded_chain, 0, 1, 25, Rng(20))
    clone = chain_from_dict(chain_to_dict(funded_chain))
    send(clone, 1, 0, 5, Rng(21))
    assert validate_chain(clone).ok
