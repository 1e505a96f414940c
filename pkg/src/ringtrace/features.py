"""Per-transaction featurization of the public chain.

Everything here is a pure function of the adversary-visible projection: 7
intrinsic features per transaction, plus 175 aggregates over the transactions
that created its ring members (5 within-ring statistics crossed with 5
across-ring statistics for each base feature).  Feature rows never depend on
storage order, so extraction parallelizes freely.
"""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyChain, NoRings, NoTwoRingTxs
from .ledger import TRANSFER, PublicChain, PublicTx

FORMAT_VERSION = 1

ZERO_HOP_NAMES = (
    "epoch_time",
    "num_rings",
    "ring_size",
    "day_of_week",
    "hour_of_day",
    "minute_of_hour",
    "second_of_minute",
)

RING_STATS = ("min", "max", "mean", "std", "sum")
CROSS_STATS = ("min", "max", "mean", "median", "sum")

ONE_HOP_NAMES = tuple(
    f"cross_{c}_ring_{s}_{f}"
    for f in ZERO_HOP_NAMES
    for s in RING_STATS
    for c in CROSS_STATS
)

FEATURE_NAMES = ZERO_HOP_NAMES + ONE_HOP_NAMES
N_FEATURES = len(FEATURE_NAMES)  # 182

CANDIDATE_NAMES = (
    tuple(f"member_{f}" for f in ZERO_HOP_NAMES)
    + ("delta_time", "age_rank")
    + tuple(f"member_{f}" for f in ONE_HOP_NAMES)
)

_DAY = 86_400


def time_of_day_fields(t: int) -> tuple[int, int, int, int]:
    """(day_of_week, hour, minute, second); epoch is a Monday midnight."""
    return ((t // _DAY) % 7, (t % _DAY) // 3600, (t % 3600) // 60, t % 60)


def zero_hop(tx: PublicTx) -> np.ndarray:
    """The 7 intrinsic features; coinbase rows carry zero ring structure."""
    dow, hour, minute, second = time_of_day_fields(tx.timestamp)
    n_rings = len(tx.rings)
    ring_size = (sum(len(r) for r in tx.rings) / n_rings) if n_rings else 0.0
    return np.array(
        [tx.timestamp, n_rings, ring_size, dow, hour, minute, second], dtype=np.float64
    )


def _member_zero_hop(chain: PublicChain, output_id: int) -> np.ndarray:
    creator = chain.creating_tx(output_id)
    if creator is None:  # dangling reference in a partial dump
        return np.zeros(7, dtype=np.float64)
    return zero_hop(creator)


def one_hop(tx: PublicTx, chain: PublicChain) -> np.ndarray:
    """175 aggregates over the ring members' creating transactions.

    Within each ring the members' zero-hop vectors reduce with
    min/max/mean/std/sum (population std); the per-ring values then reduce
    across rings with min/max/mean/median/sum.  Output order is (base
    feature, ring stat, cross stat), matching ONE_HOP_NAMES.
    """
    if not tx.rings:
        raise NoRings(f"tx {tx.tx_id} has no ring inputs")
    per_ring = np.empty((len(tx.rings), 5, 7), dtype=np.float64)
    for r, members in enumerate(tx.rings):
        vecs = np.stack([_member_zero_hop(chain, oid) for oid in members])
        per_ring[r, 0] = vecs.min(axis=0)
        per_ring[r, 1] = vecs.max(axis=0)
        per_ring[r, 2] = vecs.mean(axis=0)
        per_ring[r, 3] = vecs.std(axis=0)
        per_ring[r, 4] = vecs.sum(axis=0)
    cross = np.stack([
        per_ring.min(axis=0),
        per_ring.max(axis=0),
        per_ring.mean(axis=0),
        np.median(per_ring, axis=0),
        per_ring.sum(axis=0),
    ])  # (5 cross, 5 ring, 7 feature)
    return cross.transpose(2, 1, 0).reshape(-1)


def ring_coverage(tx: PublicTx, chain: PublicChain) -> float:
    """Fraction of ring members whose creating transaction is known."""
    members = [oid for ring in tx.rings for oid in ring]
    if not members:
        return 1.0
    known = sum(1 for oid in members if chain.creating_tx(oid) is not None)
    return known / len(members)


@dataclass
class FeatureMatrix:
    tx_ids: list[int]
    names: tuple[str, ...]
    raw: np.ndarray
    normalized: np.ndarray
    norm_means: np.ndarray
    norm_stds: np.ndarray
    coverage: np.ndarray | None = None


def normalize_columns(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise Z-normalization; constant columns are zeroed with std 0."""
    means = raw.mean(axis=0)
    means = means + (raw - means).mean(axis=0)  # second pass kills residual
    centered = raw - means
    stds = np.sqrt((centered * centered).mean(axis=0))
    out = np.zeros_like(raw)
    nz = stds > 0
    out[:, nz] = centered[:, nz] / stds[nz]
    return out, means, stds


def apply_normalization(raw: np.ndarray, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    out = np.zeros_like(raw, dtype=np.float64)
    nz = stds > 0
    out[:, nz] = (raw[:, nz] - means[nz]) / stds[nz]
    return out


def invert_normalization(normalized: np.ndarray, means: np.ndarray,
                         stds: np.ndarray) -> np.ndarray:
    return normalized * stds + means


def featurize_chain(chain: PublicChain, include_coinbase: bool = False,
                    jobs: int = 1) -> FeatureMatrix:
    """Full 182-column matrix over transfer rows (coinbase rows optional).

    Rows are ordered by tx_id.  Coinbase rows, when requested, zero-fill the
    one-hop block.  Worker count never changes the result: rows are pure
    per-transaction functions and the Z-statistics are a single fixed-order
    pass at the end.
    """
    tx_ids = sorted(
        t for t, tx in chain.transactions.items()
        if tx.kind == TRANSFER or include_coinbase
    )
    if not tx_ids:
        raise EmptyChain("no transactions to featurize")

    def row(tx_id: int) -> np.ndarray:
        tx = chain.transactions[tx_id]
        zh = zero_hop(tx)
        oh = one_hop(tx, chain) if tx.rings else np.zeros(175, dtype=np.float64)
        return np.concatenate([zh, oh])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(row, tx_ids))
    else:
        rows = [row(t) for t in tx_ids]
    raw = np.stack(rows)
    cov = np.array([ring_coverage(chain.transactions[t], chain) for t in tx_ids])
    normalized, means, stds = normalize_columns(raw)
    return FeatureMatrix(tx_ids=tx_ids, names=FEATURE_NAMES, raw=raw,
                         normalized=normalized, norm_means=means, norm_stds=stds,
                         coverage=cov)


def candidate_features(tx: PublicTx, ring_index: int, chain: PublicChain,
                       one_hop_cache: dict | None = None) -> np.ndarray:
    """One row per ring member: its creating tx's profile, age, and context.

    Columns: the member's zero-hop vector, delta_time (spend minus creation),
    age_rank (0 = oldest member), then the member's own one-hop block
    (zero-filled when the creating tx has no rings or is unknown).
    """
    members = tx.rings[ring_index]
    rows = np.empty((len(members), len(CANDIDATE_NAMES)), dtype=np.float64)
    for rank, oid in enumerate(members):
        creator = chain.creating_tx(oid)
        zh = _member_zero_hop(chain, oid)
        delta = float(tx.timestamp - creator.timestamp) if creator is not None else 0.0
        if creator is not None and creator.rings:
            if one_hop_cache is not None and creator.tx_id in one_hop_cache:
                oh = one_hop_cache[creator.tx_id]
            else:
                oh = one_hop(creator, chain)
                if one_hop_cache is not None:
                    one_hop_cache[creator.tx_id] = oh
        else:
            oh = np.zeros(175, dtype=np.float64)
        rows[rank] = np.concatenate([zh, [delta, rank], oh])
    return rows


@dataclass
class CandidateTable:
    """Stacked candidate rows for every ring of every transfer."""

    keys: list[tuple[int, int, int]]  # (tx_id, ring_index, candidate_index)
    names: tuple[str, ...]
    raw: np.ndarray


def candidate_table(chain: PublicChain, jobs: int = 1) -> CandidateTable:
    cache: dict[int, np.ndarray] = {}
    keys: list[tuple[int, int, int]] = []
    blocks: list[np.ndarray] = []
    for tx_id in chain.transfer_ids():
        tx = chain.transactions[tx_id]
        for ring_i in range(len(tx.rings)):
            rows = candidate_features(tx, ring_i, chain, one_hop_cache=cache)
            blocks.append(rows)
            keys.extend((tx_id, ring_i, c) for c in range(rows.shape[0]))
    if not blocks:
        raise EmptyChain("no rings to build candidates from")
    return CandidateTable(keys=keys, names=CANDIDATE_NAMES, raw=np.vstack(blocks))


@dataclass
class RingCorrelationMatrix:
    binning: str
    bins: int
    values: np.ndarray  # NaN where support < 2 or variance vanishes
    support: np.ndarray


def ring_pair_correlation(chain: PublicChain, binning: str = "by_rank",
                          bins: int | None = None) -> RingCorrelationMatrix:
    """Correlation of member timestamps over transactions with exactly two rings.

    For each such transaction, every (i-th oldest of ring one, j-th oldest of
    ring two) pair contributes its two creating-transaction timestamps to one
    cell; by_rank bins on (i, j), by_hour_of_day on the members' hours.  Each
    cell reports the Pearson correlation of its accumulated pairs.
    """
    if binning not in ("by_rank", "by_hour_of_day"):
        raise ValueError(f"unknown binning {binning!r}")
    two_ring = [tx for _, tx in sorted(chain.transactions.items())
                if len(tx.rings) == 2]
    if not two_ring:
        raise NoTwoRingTxs("chain has no two-ring transactions")
    if bins is None:
        bins = 24 if binning == "by_hour_of_day" else max(
            max(len(r) for r in tx.rings) for tx in two_ring)

    cells: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for tx in two_ring:
        times = [
            [float(chain.creating_tx(oid).timestamp) if chain.creating_tx(oid) else None
             for oid in ring]
            for ring in tx.rings
        ]
        for i, ti in enumerate(times[0]):
            if ti is None:
                continue
            for j, tj in enumerate(times[1]):
                if tj is None:
                    continue
                if binning == "by_rank":
                    if i >= bins or j >= bins:
                        continue
                    key = (i, j)
                else:
                    key = (int(ti) % _DAY * bins // _DAY,
                           int(tj) % _DAY * bins // _DAY)
                cells.setdefault(key, []).append((ti, tj))

    values = np.full((bins, bins), np.nan)
    support = np.zeros((bins, bins), dtype=np.int64)
    for (i, j), pairs in cells.items():
        support[i, j] = len(pairs)
        if len(pairs) < 2:
            continue
        arr = np.asarray(pairs)
        x, y = arr[:, 0], arr[:, 1]
        sx, sy = x.std(), y.std()
        if sx == 0 or sy == 0:
            # degenerate but fully aligned pairs count as perfect correlation
            values[i, j] = 1.0 if np.array_equal(x, y) else np.nan
            continue
        values[i, j] = float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))
    return RingCorrelationMatrix(binning=binning, bins=bins, values=values,
                                 support=support)


# File formats --------------------------------------------------------------------

def _write_csv(path: Path, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_feature_matrix(fm: FeatureMatrix, out_dir: Path,
                         include_coverage: bool = False) -> dict[str, Path]:
    """features.csv (normalized), features_raw.csv, norm_stats.json.

    include_coverage appends the per-row neighbor-coverage fraction as a
    trailing column outside the feature contract (partial external dumps).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = ["tx_id"] + list(fm.names)
    extra = None
    if include_coverage and fm.coverage is not None:
        header = header + ["coverage"]
        extra = fm.coverage
    paths = {}
    for fname, mat in (("features.csv", fm.normalized), ("features_raw.csv", fm.raw)):
        rows = (
            [tx_id] + [float(v) for v in row]
            + ([float(extra[i])] if extra is not None else [])
            for i, (tx_id, row) in enumerate(zip(fm.tx_ids, mat))
        )
        _write_csv(out_dir / fname, header, rows)
        paths[fname] = out_dir / fname
    stats = {
        "format_version": FORMAT_VERSION,
        "columns": [
            {"name": n, "mean": float(m), "std": float(s)}
            for n, m, s in zip(fm.names, fm.norm_means, fm.norm_stds)
        ],
    }
    sp = out_dir / "norm_stats.json"
    sp.write_text(json.dumps(stats, sort_keys=True, separators=(",", ":")) + "\n")
    paths["norm_stats.json"] = sp
    return paths


def read_feature_matrix(out_dir: Path) -> FeatureMatrix:
    out_dir = Path(out_dir)
    stats = json.loads((out_dir / "norm_stats.json").read_text())
    names = tuple(c["name"] for c in stats["columns"])
    means = np.array([c["mean"] for c in stats["columns"]])
    stds = np.array([c["std"] for c in stats["columns"]])

    def load(fname):
        with (out_dir / fname).open() as fh:
            r = csv.reader(fh)
            header = next(r)
            assert header[0] == "tx_id"
            # select exactly the contracted columns; trailing extras such as
            # coverage are not part of the matrix
            cols = [header.index(n) for n in names]
            ids, rows = [], []
            for line in r:
                ids.append(int(line[0]))
                rows.append([float(line[c]) for c in cols])
        return ids, np.array(rows)

    tx_ids, raw = load("features_raw.csv")
    _, normalized = load("features.csv")
    return FeatureMatrix(tx_ids=tx_ids, names=names, raw=raw, normalized=normalized,
                         norm_means=means, norm_stds=stds)


def write_candidates(table: CandidateTable, path: Path) -> None:
    header = ["tx_id", "ring_index", "candidate_index"] + list(table.names)
    rows = (list(key) + [float(v) for v in row]
            for key, row in zip(table.keys, table.raw))
    _write_csv(path, header, rows)


def read_candidates(path: Path) -> CandidateTable:
    with Path(path).open() as fh:
        r = csv.reader(fh)
        header = next(r)
        names = tuple(header[3:])
        keys, rows = [], []
        for line in r:
            keys.append((int(line[0]), int(line[1]), int(line[2])))
            rows.append([float(v) for v in line[3:]])
    return CandidateTable(keys=keys, names=names, raw=np.array(rows))


def write_correlation(mat: RingCorrelationMatrix, path: Path) -> None:
    rows = []
    for i in range(mat.bins):
        for j in range(mat.bins):
            v = mat.values[i, j]
            rows.append([i, j, "" if np.isnan(v) else float(v),
                         int(mat.support[i, j])])
    _write_csv(path, ["bin_i", "bin_j", "value", "support"], rows)
