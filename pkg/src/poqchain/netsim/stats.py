"""Efficiency, pair-delay and transaction-delay statistics."""

from __future__ import annotations

import csv
import math

import numpy as np

from ..errors import DomainError
from ..ledger import CONTENDED, FRONTIER, IMMUTABLE, REJECTED, BlockTree

CSV_FIELDS = ("broadcast", "miner", "efficiency", "depth", "draws", "implied_hashes",
              "immutable", "contended", "rejected", "frontier")


def efficiency(series, discard: float = 0.5) -> float:
    """Mean of the per-broadcast estimates after dropping the first ``discard`` share."""
    s = np.asarray(series, dtype=float)
    if s.size < 2:
        raise DomainError("efficiency needs at least two broadcasts")
    start = int(math.floor(discard * s.size))
    return float(s[start:].mean())


def prefix_efficiency(tree: BlockTree, stakeholder) -> np.ndarray:
    """Estimate after each broadcast n: depth of the best node among the first n
    blocks divided by n. Valid offline because indices are topological."""
    cum = np.asarray(tree.view(stakeholder).cum)
    depths = np.asarray(tree.depths)
    out = np.empty(len(cum) - 1)
    best, best_val = 0, cum[0]
    for n in range(1, len(cum)):
        if cum[n] > best_val:
            best, best_val = n, cum[n]
        out[n - 1] = depths[best] / n
    return out


def delay_quantile(samples, q: float = 0.95) -> int:
    s = np.asarray(samples)
    if s.size == 0:
        return 0
    return int(np.quantile(s, q, method="inverted_cdf"))


def finish_stats(config, run, eff, delays, rows, counts, tips, n_panel):
    from .run import ChainStats

    tree = run.tree
    n_blocks = len(tree) - 1
    status = []
    tipset = set(tips)
    for k in range(len(tree)):
        c = counts[k]
        if k in tipset:
            status.append(FRONTIER)
        elif c == n_panel:
            status.append(IMMUTABLE)
        elif c == 0:
            status.append(REJECTED)
        else:
            status.append(CONTENDED)
    st_counts = {s: status[1:].count(s) for s in (IMMUTABLE, CONTENDED, REJECTED, FRONTIER)}
    immutable = int(np.count_nonzero(counts[1:] == n_panel))
    start = int(math.floor(config.efficiency_discard * len(delays)))
    flat = [d for row in delays[start:] for d in row]
    hashes = [row["implied_hashes"] for row in rows]
    stats = ChainStats(
        efficiency=efficiency(eff, config.efficiency_discard) if len(eff) >= 2 else float("nan"),
        efficiency_series=list(eff),
        pair_delays=flat,
        transaction_delay_95=delay_quantile(flat, config.delay_quantile),
        hashes_per_broadcast=float(np.mean(hashes)) if hashes else float("nan"),
        mining_rate=run.rate.p_hat(config.n_zeros),
        status_counts=st_counts,
        immutable_fraction=immutable / n_blocks if n_blocks else 1.0,
        validations=run.validations,
        observer_validations=run.observer_validations,
        draws=run.rate.draws,
        saturated=run.rate.saturated,
        bit_validation_rate=1.0 - run.bit_mismatches / max(run.bit_checks, 1),
        rows=rows,
    )
    return stats, status


def write_stats_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in CSV_FIELDS})


def read_stats_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
