"""Featurization against independent oracles."""

import datetime
import statistics

import numpy as np
import pytest

from ringtrace.economy import gen_economy, run_simulation
from ringtrace.errors import EmptyChain, NoRings, NoTwoRingTxs
from ringtrace.features import (
    CANDIDATE_NAMES,
    FEATURE_NAMES,
    ONE_HOP_NAMES,
    ZERO_HOP_NAMES,
    candidate_features,
    candidate_table,
    featurize_chain,
    invert_normalization,
    one_hop,
    ring_pair_correlation,
    zero_hop,
)
from ringtrace.ledger import PublicChain, PublicOutput, PublicTx, public_view
from ringtrace.rng import Rng

from test_economy import small_spec


def build_public(creator_times, ring_lists, tx_times):
    """Hand-built public chain: creators own one output each, then ring txs."""
    n = len(creator_times)
    order = sorted(range(n), key=lambda i: creator_times[i])
    txs, outs = {}, {}
    for height, idx in enumerate(order):
        t = creator_times[idx]
        txs[idx] = PublicTx(tx_id=idx, timestamp=t, block_height=height,
                            rings=[], outputs=[idx], fee=0, kind="coinbase")
        outs[idx] = PublicOutput(output_id=idx, created_by_tx=idx,
                                 block_height=height, timestamp=t, is_coinbase=True)
    for k, (rings, t) in enumerate(zip(ring_lists, tx_times)):
        tx_id = n + k
        ordered = [sorted(r, key=lambda oid: (outs[oid].block_height, oid))
                   for r in rings]
        txs[tx_id] = PublicTx(tx_id=tx_id, timestamp=t, block_height=n + k,
                              rings=ordered, outputs=[], fee=1, kind="transfer")
    return PublicChain(blocks=[], transactions=txs, outputs=outs, seed=0)


@pytest.fixture(scope="module")
def sim_public():
    spec = small_spec(target=150, seed=3)
    files = gen_economy(spec, Rng(spec.seed))
    chain, _ = run_simulation(files, spec)
    return public_view(chain)


# zero_hop --------------------------------------------------------------------


def test_zero_hop_two_rings_of_eleven():
    # 90 061 s past a Monday-midnight epoch: Tuesday 01:01:01
    chain = build_public(list(range(22)), [[list(range(11)),
                                            list(range(11, 22))]], [90_061])
    tx = chain.transactions[22]
    assert list(zero_hop(tx)) == [90_061, 2, 11, 1, 1, 1, 1]


def test_zero_hop_against_datetime_oracle():
    # epoch is Monday 1973-01-01-like; use any Monday-midnight anchored base
    base = datetime.datetime(2024, 1, 1)  # a Monday
    rng = Rng(17)
    chain = build_public([0], [], [])
    for _ in range(300):
        t = rng.randrange(40 * 86_400)
        moment = base + datetime.timedelta(seconds=t)
        tx = PublicTx(tx_id=1, timestamp=t, block_height=1, rings=[[0]],
                      outputs=[], fee=0, kind="transfer")
        vec = zero_hop(tx)
        assert vec[3] == moment.weekday()
        assert vec[4] == moment.hour
        assert vec[5] == moment.minute
        assert vec[6] == moment.second


def test_zero_hop_coinbase_zeroes():
    tx = PublicTx(tx_id=0, timestamp=0, block_height=0, rings=[], outputs=[0],
                  fee=0, kind="coinbase")
    assert list(zero_hop(tx)) == [0, 0, 0, 0, 0, 0, 0]


def test_num_rings_is_a_zero_hop_column():
    assert "num_rings" in ZERO_HOP_NAMES


# one_hop ---------------------------------------------------------------------


def naive_one_hop(tx, chain):
    """Independent double-loop recomputation with stdlib statistics."""
    ring_stats = []
    for ring in tx.rings:
        vecs = []
        for oid in ring:
            ct = chain.creating_tx(oid)
            t = ct.timestamp
            nr = len(ct.rings)
            rs = sum(len(r) for r in ct.rings) / nr if nr else 0.0
            vecs.append([float(t), float(nr), rs, float((t // 86_400) % 7),
                         float((t % 86_400) // 3600), float((t % 3600) // 60),
                         float(t % 60)])
        cols = list(zip(*vecs))
        k = len(vecs)
        stats = {}
        for f, col in enumerate(cols):
            m = sum(col) / k
            var = sum((x - m) ** 2 for x in col) / k
            stats[f] = {"min": min(col), "max": max(col), "mean": m,
                        "std": var ** 0.5, "sum": sum(col)}
        ring_stats.append(stats)
    out = []
    for f in range(7):
        for s in ("min", "max", "mean", "std", "sum"):
            vals = [rs[f][s] for rs in ring_stats]
            r = len(vals)
            out.extend([
                min(vals), max(vals), sum(vals) / r,
                statistics.median(vals), sum(vals),
            ])
    return out


def test_one_hop_single_member_ring():
    chain = build_public([100], [[[0]]], [500])
    tx = chain.transactions[1]
    vec = one_hop(tx, chain)
    member = zero_hop(chain.transactions[0])
    named = dict(zip(ONE_HOP_NAMES, vec))
    for f_i, f in enumerate(ZERO_HOP_NAMES):
        for s in ("min", "max", "mean", "sum"):
            for c in ("min", "max", "mean", "median", "sum"):
                assert named[f"cross_{c}_ring_{s}_{f}"] == member[f_i]
        for c in ("min", "max", "mean", "median", "sum"):
            assert named[f"cross_{c}_ring_std_{f}"] == 0.0


def test_two_ring_sum_of_means():
    # the "sum of average input minutes" construction
    chain = build_public([65, 125, 185, 245], [[[0, 1], [2, 3]]], [1000])
    tx = chain.transactions[4]
    named = dict(zip(ONE_HOP_NAMES, one_hop(tx, chain)))
    m1 = ((65 % 3600) // 60 + (125 % 3600) // 60) / 2
    m2 = ((185 % 3600) // 60 + (245 % 3600) // 60) / 2
    assert named["cross_sum_ring_mean_minute_of_hour"] == m1 + m2
    assert named["cross_mean_ring_mean_minute_of_hour"] == (m1 + m2) / 2


def test_one_hop_matches_naive_oracle_exactly(sim_public):
    # exact equality on a simulated chain (ring size <= 7 keeps float
    # summation order identical between numpy and the left-fold oracle)
    checked = 0
    for tx_id in sim_public.transfer_ids()[:60]:
        tx = sim_public.transactions[tx_id]
        assert list(one_hop(tx, sim_public)) == naive_one_hop(tx, sim_public)
        checked += 1
    assert checked >= 50


def test_one_hop_rejects_coinbase(sim_public):
    cb = next(tx for tx in sim_public.transactions.values() if tx.kind == "coinbase")
    with pytest.raises(NoRings):
        one_hop(cb, sim_public)


# featurize_chain -------------------------------------------------------------


def test_featurize_has_exactly_182_columns(sim_public):
    fm = featurize_chain(sim_public)
    assert len(FEATURE_NAMES) == 182
    assert fm.raw.shape[1] == 182
    assert fm.normalized.shape == fm.raw.shape
    assert len(fm.tx_ids) == len(sim_public.transfer_ids())


def test_normalization_contract(sim_public):
    fm = featurize_chain(sim_public)
    const = fm.norm_stds == 0
    nz = ~const
    assert np.all(np.abs(fm.normalized[:, nz].mean(axis=0)) < 1e-9)
    assert np.all(np.abs(fm.normalized[:, nz].std(axis=0) - 1) < 1e-9)
    assert np.all(fm.normalized[:, const] == 0)


def test_normalization_inverts(sim_public):
    fm = featurize_chain(sim_public)
    nz = fm.norm_stds > 0
    restored = invert_normalization(fm.normalized, fm.norm_means, fm.norm_stds)
    scale = np.abs(fm.raw[:, nz]).max(axis=0) + 1
    err = np.abs(restored[:, nz] - fm.raw[:, nz]) / scale
    assert err.max() < 1e-12


def test_identical_txs_identical_rows():
    chain = build_public([10, 20, 30], [[[0, 1]], [[0, 1]]], [400, 400])
    fm = featurize_chain(chain)
    assert np.array_equal(fm.raw[0], fm.raw[1])


def test_block_order_does_not_matter(sim_public):
    fm1 = featurize_chain(sim_public)
    # permute tx order within each block of a structural copy
    shuffled = PublicChain(
        blocks=[type(b)(b.height, b.timestamp, b.miner, list(reversed(b.tx_ids)))
                for b in sim_public.blocks],
        transactions=sim_public.transactions,
        outputs=sim_public.outputs,
        seed=sim_public.seed,
    )
    fm2 = featurize_chain(shuffled)
    assert fm1.tx_ids == fm2.tx_ids
    assert np.array_equal(fm1.raw, fm2.raw)


def test_featurize_jobs_identical(sim_public):
    fm1 = featurize_chain(sim_public, jobs=1)
    fm2 = featurize_chain(sim_public, jobs=4)
    assert np.array_equal(fm1.raw, fm2.raw)
    assert np.array_equal(fm1.normalized, fm2.normalized)


def test_featurize_empty_chain():
    chain = build_public([5], [], [])
    with pytest.raises(EmptyChain):
        featurize_chain(chain)


def test_featurize_on_round_tripped_public_chain(sim_public):
    from ringtrace.ledger import public_chain_from_dict, public_chain_to_dict
    clone = public_chain_from_dict(public_chain_to_dict(sim_public))
    fm1 = featurize_chain(sim_public)
    fm2 = featurize_chain(clone)
    assert np.array_equal(fm1.raw, fm2.raw)


# candidate_features ----------------------------------------------------------


def test_candidate_rows_one_per_member(sim_public):
    tx_id = sim_public.transfer_ids()[10]
    tx = sim_public.transactions[tx_id]
    rows = candidate_features(tx, 0, sim_public)
    assert rows.shape == (len(tx.rings[0]), len(CANDIDATE_NAMES))
    names = list(CANDIDATE_NAMES)
    delta = rows[:, names.index("delta_time")]
    assert np.all(delta > 0)
    assert list(rows[:, names.index("age_rank")]) == list(range(len(tx.rings[0])))


def test_candidate_table_covers_every_ring(sim_public):
    table = candidate_table(sim_public)
    n_rings = sum(len(sim_public.transactions[t].rings)
                  for t in sim_public.transfer_ids())
    ring_keys = {(k[0], k[1]) for k in table.keys}
    assert len(ring_keys) == n_rings
    assert table.raw.shape[0] == len(table.keys)


# ring_pair_correlation ---------------------------------------------------------


def test_identical_timestamps_give_unit_diagonal():
    rng = Rng(5)
    creators, rings, times = [], [], []
    oid = 0
    for k in range(50):
        t = 1000 * (k + 1)
        ids = []
        for _ in range(3):  # shared timestamps across both rings
            creators.append(t)
            ids.append(oid)
            oid += 1
        rings.append([ids, list(ids)])
        times.append(t + 500)
    chain = build_public(creators, rings, times)
    mat = ring_pair_correlation(chain, binning="by_rank", bins=3)
    for i in range(3):
        assert mat.support[i, i] == 50
        assert mat.values[i, i] == pytest.approx(1.0)


def test_low_support_cells_are_missing():
    chain = build_public([10, 20], [[[0], [1]]], [100])
    mat = ring_pair_correlation(chain, binning="by_rank", bins=1)
    assert mat.support[0, 0] == 1
    assert np.isnan(mat.values[0, 0])


def test_null_hypothesis_monte_carlo():
    # independent uniform creator timestamps: every cell's correlation ~ 0
    rng = Rng(99)
    n_txs = 10_000
    creators, rings, times = [], [], []
    oid = 0
    for _ in range(n_txs):
        r1, r2 = [], []
        for ring in (r1, r2):
            for _ in range(3):
                creators.append(rng.randrange(30 * 86_400))
                ring.append(oid)
                oid += 1
        rings.append([r1, r2])
        times.append(31 * 86_400)
    chain = build_public(creators, rings, times)
    mat = ring_pair_correlation(chain, binning="by_rank", bins=3)
    assert mat.support.min() == n_txs
    assert np.nanmax(np.abs(mat.values)) < 0.05
    hours = ring_pair_correlation(chain, binning="by_hour_of_day", bins=4)
    assert np.nanmax(np.abs(hours.values)) < 0.05


def test_no_two_ring_txs():
    chain = build_public([10, 20], [[[0, 1]]], [100])
    with pytest.raises(NoTwoRingTxs):
        ring_pair_correlation(chain)
