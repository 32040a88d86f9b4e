"""Policy sweeps over hardness: paired runs, summaries and CSV output."""

from __future__ import annotations

import csv
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import SimConfig
from .run import run_chain

SWEEP_FIELDS = ("n_zeros", "policy", "n_max", "seed", "efficiency", "transaction_delay_95",
                "immutable_fraction", "mining_rate", "hashes_per_broadcast", "validations")


def sweep_row(config: SimConfig) -> dict:
    st = run_chain(config).stats
    return {"n_zeros": config.n_zeros, "policy": config.policy, "n_max": config.n_max,
            "seed": config.seed, "efficiency": st.efficiency,
            "transaction_delay_95": st.transaction_delay_95,
            "immutable_fraction": st.immutable_fraction, "mining_rate": st.mining_rate,
            "hashes_per_broadcast": st.hashes_per_broadcast, "validations": st.validations}


def run_sweep(configs, jobs: int = 1) -> list[dict]:
    configs = list(configs)
    if jobs <= 1:
        return [sweep_row(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(sweep_row, configs))


def summarize(rows, slack: float = 0.02) -> dict:
    """Per hardness: mean basic efficiency, best mean over confidence n_max, and
    whether the best confidence setting beats basic on every seed (within slack)."""
    by = defaultdict(lambda: defaultdict(dict))
    for r in rows:
        key = "basic" if r["policy"] == "basic" else f"confidence:{float(r['n_max']):g}"
        by[int(r["n_zeros"])][key][int(r["seed"])] = float(r["efficiency"])
    out = {}
    for n in sorted(by):
        groups = by[n]
        basic = groups.get("basic", {})
        conf = {k: v for k, v in groups.items() if k.startswith("confidence")}
        entry = {"basic": float(np.mean(list(basic.values()))) if basic else float("nan")}
        if conf:
            best = max(conf, key=lambda k: np.mean(list(conf[k].values())))
            entry["confidence"] = float(np.mean(list(conf[best].values())))
            entry["best_n_max"] = float(best.split(":")[1])
            seeds = sorted(set(basic) & set(conf[best]))
            entry["paired"] = all(conf[best][s] >= basic[s] - slack for s in seeds)
        out[n] = entry
    return out


def dominance_holds(summary: dict) -> bool:
    return all(e.get("paired", False) for e in summary.values())


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in SWEEP_FIELDS})


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
