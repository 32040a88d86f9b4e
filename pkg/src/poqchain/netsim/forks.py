"""Validation-fork scenarios: one stakeholder wrongly rejects one block.

Under the strict policy the rejected block poisons every path through it, so
the stakeholder can only follow its own fork and never rejoins. Under the
basic policy the block merely costs work, and the stakeholder comes back
once the majority chain outgrows its fork.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ledger import BlockTree
from .config import SimConfig
from .run import miner_for_event, run_chain


def tip_history(tree: BlockTree, stakeholder) -> np.ndarray:
    """Strongest tip after each broadcast, from the stakeholder's final view.

    Cumulative work of a block never changes once recorded, so the tip after
    broadcast e is the earliest maximum of the first e + 1 entries.
    """
    cum = tree.cumulative(stakeholder)
    prev_max = np.maximum.accumulate(cum)[:-1]
    new = np.concatenate([[True], cum[1:] > prev_max])
    return np.maximum.accumulate(np.where(new, np.arange(len(cum)), 0))


@dataclass(frozen=True)
class ForkOutcome:
    policy: str
    seed: int
    victim: int
    block: int
    agreement: tuple  # per broadcast from the rejected one on: victim tip == majority tip
    lag: int | None  # broadcasts until the victim first agrees again

    @property
    def rejoined(self) -> bool:
        return self.lag is not None

    @property
    def converged(self) -> bool:
        """Agrees with the majority at the final broadcast."""
        return bool(self.agreement) and self.agreement[-1]


def fork_trial(policy: str, seed: int, *, n_miners: int = 20, after: int = 200,
               block: int = 3, victim: int = 0, n_zeros: int = 8, source=None) -> ForkOutcome:
    """Zero-noise exact chain with one forced false negative by ``victim``."""
    base = SimConfig(length=block + after, n_miners=n_miners, policy=policy, n_zeros=n_zeros,
                     oracle="exact", chain={"n_h": n_zeros}, seed=seed)
    # the victim must not have mined the block it rejects
    while miner_for_event(base, block) == victim:
        victim = (victim + 1) % n_miners
    cfg = base.replace(forced_rejections=[[victim, block]])
    res = run_chain(cfg, source=source)
    hist = {m: tip_history(res.tree, m) for m in range(n_miners)}
    agree = []
    for e in range(block, block + after + 1):
        tips = [int(hist[m][e]) for m in range(n_miners) if m != victim]
        major = max(set(tips), key=lambda t: (tips.count(t), -t))
        agree.append(int(hist[victim][e]) == major)
    lag = next((k for k, a in enumerate(agree) if a), None)
    return ForkOutcome(policy, seed, victim, block, tuple(agree), lag)
