#!/usr/bin/env python3
"""Simulate a small agent economy into a ring-confidential ledger.

Agents draw Poisson wait times and amounts, trade only inside their pool,
and fund themselves by round-robin mining.  The simulator produces both the
ground-truth chain (owners, amounts, real spend indices) and the public view
an adversary would see.
"""

from ringtrace import (
    AgentProfile,
    EconomySpec,
    Rng,
    SimParams,
    gen_economy,
    public_view,
    run_simulation,
    validate_chain,
)

agents = [
    AgentProfile(agent_id=i, pool_id=0, wait_lambda=40.0 * (i + 1),
                 amount_lambda=60.0)
    for i in range(6)
]
spec = EconomySpec("demo", agents, target_tx_count=400, ring_size=5, seed=42,
                   sim=SimParams(block_interval=15, warmup_blocks=30,
                                 coinbase_maturity=10))

files = gen_economy(spec, Rng(spec.seed))
print("scheduled transfers per agent:",
      {a: len(s) for a, s in sorted(files.items())})

chain, truth = run_simulation(files, spec)
transfers = [t for t in chain.transactions.values() if t.kind == "transfer"]
print(f"\nchain: {len(chain.blocks)} blocks, {len(transfers)} transfers, "
      f"{len(chain.outputs)} outputs")

report = validate_chain(chain)
print(f"validation violations: {len(report.violations)}")

tx = transfers[len(transfers) // 2]
print(f"\na transfer, ground truth view:")
print(f"  sender={tx.sender} receiver={tx.receiver} value={tx.intended_amount}")
for i, ring in enumerate(tx.inputs):
    print(f"  ring {i}: members={ring.members} real_index={ring.real_index}")

pub = public_view(chain)
ptx = pub.transactions[tx.tx_id]
print(f"\nthe same transfer as the adversary sees it:")
print(f"  timestamp={ptx.timestamp} fee={ptx.fee} rings={ptx.rings}")
print("  (no owner, no value, no real index)")
