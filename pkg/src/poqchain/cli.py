"""Command line entry point: ``poq {hash,derive,simulate,verify,presets}``.

Exit codes: 0 success, 2 usage or bad input, 3 resource guard, 4 integrity.
Set POQ_LOG (DEBUG, INFO, WARNING, ...) for log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .chainio import ChainFile, ChainFormatError, chain_file, check_links, to_dot, tree_from_file
from .errors import IntegrityError, PoqError, ResourceError
from .hashcore import (BlockHeader, WitnessReport, bits_to_hex, compute_witnesses,
                       derive_instance, hex_to_bits, miner_confidence)
from .ledger import IMMUTABLE, STATUSES, work_array
from .netsim.adversary import run_adversary
from .netsim.config import SimConfig
from .netsim.mining import accelerated_rate, brute_force_rate
from .netsim.run import ChainRun, observer_id, run_chain
from .netsim.stats import write_stats_csv
from .netsim.sweep import dominance_holds, run_sweep, summarize, write_sweep_csv
from .oracle.devices import DeviceModel, sample_witnesses
from .oracle.quench import AnnealSchedule, CorrelationCache
from .presets import PRESETS, get_preset
from .topology import make_topology

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_INTEGRITY = 0, 2, 3, 4

log = logging.getLogger("poqchain")


class UsageError(PoqError):
    pass


def _load_json(source: str):
    """JSON from an inline string, a file path, or '-' for stdin."""
    try:
        if source == "-":
            return json.load(sys.stdin)
        if source.lstrip().startswith("{"):
            return json.loads(source)
        with open(source, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read JSON from {source!r}: {exc}") from exc


def _sim_config(args) -> SimConfig:
    data = _load_json(args.config) if getattr(args, "config", None) else {}
    cfg = SimConfig.from_dict(data)
    return _apply_overrides(cfg, args)


def _overrides(args) -> dict:
    out = {}
    for flag, key in (("seed", "seed"), ("oracle", "oracle"), ("policy", "policy"),
                      ("nmax", "n_max"), ("nzeros", "n_zeros")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def _apply_overrides(cfg: SimConfig, args) -> SimConfig:
    over = _overrides(args)
    return cfg.replace(**over) if over else cfg


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# -- hash / derive -------------------------------------------------------------


def cmd_hash(args) -> int:
    cfg = _sim_config(args)
    header = BlockHeader.from_dict(_load_json(args.header))
    chain = cfg.chain_config()
    inst = derive_instance(header, chain)
    cache = CorrelationCache(make_topology(chain.topology), AnnealSchedule.linear(chain.anneal_time))
    V = cache.correlations(inst.couplings)[0]
    if cfg.oracle == "noisy":
        r = cfg.devices
        dev = DeviceModel(0, r.noise_sigma, r.offset_sigma, r.scale, r.seed)
        rng = np.random.default_rng([cfg.seed, 0x4A54])
        report = sample_witnesses(inst, dev, V, r.n_reads, rng)
    else:
        sigma = cfg.delta_w or 0.0
        report = WitnessReport.from_witnesses(compute_witnesses(V, inst), sigma, inst.thresholds)
    summary = miner_confidence(report)
    print(_dumps({"id": header.id_hex, "bits": bits_to_hex(report.bits), "n_bits": inst.n_h,
                  "witnesses": [float(w) for w in report.witnesses],
                  # zero width gives infinite distance; JSON has no infinity
                  "distances": [float(d) if np.isfinite(d) else None for d in report.distances],
                  "n_miner": float(summary.n_bits) + 0.0,
                  "oracle": "noisy" if cfg.oracle == "noisy" else "exact"}))
    return EXIT_OK


def cmd_derive(args) -> int:
    cfg = _sim_config(args)
    header = BlockHeader.from_dict(_load_json(args.header))
    print(_dumps(derive_instance(header, cfg.chain_config()).to_dict()))
    return EXIT_OK


# -- simulate ------------------------------------------------------------------


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_chain_outputs(out: Path, result, stem: str) -> None:
    tree = result.tree
    cfg = result.config
    panel = [observer_id(j) for j in range(cfg.n_observers)]
    if not cfg.many_miner:
        panel += list(range(cfg.n_miners))
    write_stats_csv(out / f"{stem}.csv", result.stats.rows)
    chain_file(tree, cfg.to_dict(), panel).save(out / f"{stem}.jsonl")
    (out / f"{stem}.dot").write_text(to_dot(tree, result.status, result.stats.transfers),
                                     encoding="utf-8")
    (out / f"{stem}.summary.json").write_text(_dumps(result.stats.to_dict()) + "\n",
                                              encoding="utf-8")


def check_invariants(result) -> list[str]:
    """Status partition, prefix-closed immutable set and Chainwork additivity."""
    tree = result.tree
    problems = []
    if len(result.status) != len(tree) or any(s not in STATUSES for s in result.status):
        problems.append("statuses do not partition the blocks")
    imm = [k for k, s in enumerate(result.status) if s == IMMUTABLE]
    if imm:
        deepest = max(imm, key=lambda k: tree.depths[k])
        if not set(imm) <= set(tree.path(deepest)):
            problems.append("immutable blocks are not one root path")
    for s, v in tree.views.items():
        cum = np.asarray(v.cum)
        par = np.asarray(tree.parents[1:v.n_known])
        want = cum[par] + np.asarray(v.work[1:])
        fin = np.isfinite(want)
        if not (np.array_equal(cum[1:][fin], want[fin]) and np.all(np.isneginf(cum[1:][~fin]))):
            problems.append(f"Chainwork not additive for stakeholder {s}")
            break
    return problems


def _simulate_chain(configs, out: Path) -> int:
    for cfg in configs:
        result = run_chain(cfg)
        stem = f"chain_s{cfg.seed}"
        _write_chain_outputs(out, result, stem)
        problems = check_invariants(result)
        if problems:
            for msg in problems:
                print(f"invariant violated: {msg}", file=sys.stderr)
            return EXIT_INTEGRITY
        st = result.stats
        print(f"efficiency={st.efficiency:.4f} delay_95={st.transaction_delay_95} "
              f"broadcasts={cfg.length} immutable={st.immutable_fraction:.3f} file={stem}.jsonl")
    return EXIT_OK


def _simulate_sweep(configs, out: Path, jobs: int) -> int:
    rows = run_sweep(configs, jobs)
    write_sweep_csv(out / "sweep.csv", rows)
    summary = summarize(rows)
    (out / "sweep_summary.json").write_text(_dumps({str(k): v for k, v in summary.items()}) + "\n",
                                            encoding="utf-8")
    for n, e in summary.items():
        print(f"n_zeros={n} basic={e['basic']:.4f} confidence={e.get('confidence', float('nan')):.4f} "
              f"n_max={e.get('best_n_max')} paired={e.get('paired')}")
    print(f"dominance={'pass' if dominance_holds(summary) else 'fail'} runs={len(rows)}")
    return EXIT_OK


def _simulate_mining_rate(preset, args, out: Path) -> int:
    base = {**preset.base, **_overrides(args)}
    grid = preset.grid
    rows = []
    for n in grid["n_zeros"]:
        cfg = SimConfig.from_dict({**{k: v for k, v in base.items() if k != "n_max"},
                                   "n_zeros": n, "policy": "confidence",
                                   "n_max": base.get("n_max", 2.0)})
        run = ChainRun(cfg)
        common = dict(seed=cfg.seed, n_zeros=n, n_max=cfg.n_max, delta_w=run.delta_w)
        k, m = brute_force_rate(run.source, nonces=grid["nonces"], **common)
        acc, err = accelerated_rate(run.source, draws=grid["draws"], **common)
        rows.append({"n_zeros": n, "brute_rate": k / m, "brute_se": np.sqrt(k * (1 - k / m)) / m,
                     "accelerated_rate": acc, "accelerated_se": err, "basic_rate": 2.0 ** -n})
        print(f"n_zeros={n} brute={k / m:.3e} accelerated={acc:.3e} basic={2.0 ** -n:.3e}")
    with open(out / "mining_rate.csv", "w", encoding="utf-8") as fh:
        keys = list(rows[0])
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(r[k])) if k != "n_zeros" else str(r[k]) for k in keys) + "\n")
    return EXIT_OK


def _simulate_attacks(preset, args, out: Path) -> int:
    over = {"seed": args.seed} if args.seed is not None else {}
    reports = [run_adversary(a).to_dict() for a in preset.attack_configs(**over)]
    (out / "attack_report.json").write_text(_dumps(reports) + "\n", encoding="utf-8")
    for r in reports:
        print(f"strategy={r['strategy']} acceptance={r['acceptance_rate']:.4g} "
              f"baseline={r['honest_rate']:.4g} landed={r['landed']} trials={r['trials']}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    if args.preset:
        preset = get_preset(args.preset)
        over = _overrides(args)
        if args.length is not None:
            over["length"] = args.length
        if preset.kind == "chain":
            return _simulate_chain(preset.sim_configs(**over), out)
        if preset.kind == "sweep":
            return _simulate_sweep(preset.sim_configs(**over), out, args.jobs)
        if preset.kind == "mining-rate":
            return _simulate_mining_rate(preset, args, out)
        return _simulate_attacks(preset, args, out)
    cfg = _sim_config(args)
    if args.length is not None:
        cfg = cfg.replace(length=args.length)
    return _simulate_chain([cfg], out)


# -- verify --------------------------------------------------------------------


def verify_chain(cf: ChainFile, config: SimConfig | None = None) -> dict:
    """Link check plus recomputed validations for every recorded stakeholder.

    Returns a JSON-able verdict: flagged blocks (id mismatch, broken link and
    their descendants) and outcome divergences.
    """
    links = check_links(cf)
    verdict = {"blocks": len(cf.records), "id_mismatch": list(links.id_mismatch),
               "broken": list(links.broken), "flagged": list(links.tainted), "divergent": []}
    if not links.ok:
        return verdict
    cfg = config or SimConfig.from_dict(cf.meta.get("config") or {})
    tree = tree_from_file(cf)
    run = ChainRun(cfg)
    for k, rec in enumerate(cf.records, start=1):
        block = tree.blocks[k]
        bw = run.source.block_witness(block.header.timestamp, int(rec.get("attempt", 0)),
                                      block.header)
        run._grow(k + 1)
        run.mean[k], run.sigma[k], run.p_one[k] = bw.mean, bw.sigma, bw.p_one
        run.signs[k] = block.signs
        run.claim[k] = hex_to_bits(block.claimed, cfg.n_zeros)
        run.attempt[k] = int(rec.get("attempt", 0))
    stakeholders = sorted({s for rec in cf.records for s in rec.get("outcomes", {})}, key=int)
    idx = np.arange(1, len(cf.records) + 1)
    accepts = np.zeros(len(idx), dtype=np.int64)
    for j, s in enumerate(stakeholders):
        n_val, mism = run.validate_many(int(s), idx)
        accepts += work_array(tree.policy, n_val, mism) > 0
        if j == 0:
            # Chainwork as recomputed by the first recorded stakeholder
            tree.record(s, n_val, mism)
            verdict["reference"] = int(s)
            verdict["chainwork"] = [float(c) for c in tree.cumulative(s)[1:]]
        for k, nv, mm in zip(idx, n_val, mism):
            rec = cf.records[k - 1].get("outcomes", {}).get(s)
            # a miner's own block is recorded from mining, not validated
            if rec is None or tree.blocks[k].miner == int(s):
                continue
            if int(mm) != rec["mismatches"] or abs(float(nv) - rec["n_validator"]) > 1e-9:
                verdict["divergent"].append({"block": int(k), "stakeholder": int(s),
                                             "recorded": rec, "recomputed":
                                             {"n_validator": float(nv), "mismatches": int(mm)}})
    verdict["flagged"] = sorted(set(verdict["flagged"]) | {d["block"] for d in verdict["divergent"]})
    verdict["accepted_by"] = [int(a) for a in accepts]
    verdict["validators"] = len(stakeholders)
    return verdict


def cmd_verify(args) -> int:
    cf = ChainFile.load(args.chain)
    cfg = _sim_config(args) if args.config else None
    verdict = verify_chain(cf, cfg)
    work = verdict.get("chainwork")
    for k in range(1, verdict["blocks"] + 1):
        line = f"block {k} {'FLAGGED' if k in verdict['flagged'] else 'ok'}"
        if work is not None:
            line += (f" accepted={verdict['accepted_by'][k - 1]}/{verdict['validators']}"
                     f" chainwork={work[k - 1]:g}")
        print(line)
    brief = ("blocks", "id_mismatch", "broken", "flagged", "reference", "validators")
    print(_dumps({k: verdict[k] for k in brief if k in verdict}
                 | {"divergent": len(verdict["divergent"])}))
    if verdict["id_mismatch"] or verdict["broken"]:
        first = min(verdict["id_mismatch"] + verdict["broken"])
        print(f"integrity failure at block {first}", file=sys.stderr)
        return EXIT_INTEGRITY
    return EXIT_INTEGRITY if verdict["divergent"] else EXIT_OK


def cmd_presets(args) -> int:
    if args.name:
        print(_dumps(get_preset(args.name).to_dict()))
    else:
        for name, p in PRESETS.items():
            print(f"{name}\t{p.kind}\t{p.description}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poq", description="Proof-of-quantum-work chain tools")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="SimConfig JSON file or inline object")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--oracle", choices=("exact", "noisy", "resampled"))
        sp.add_argument("--policy", choices=("strict", "basic", "confidence"))
        sp.add_argument("--nmax", type=float)
        sp.add_argument("--nzeros", type=int)

    sp = sub.add_parser("hash", help="hash one header and report confidences")
    sp.add_argument("header", help="header JSON (inline, path or -)")
    common(sp)
    sp.set_defaults(func=cmd_hash)

    sp = sub.add_parser("derive", help="print the problem instance of a header")
    sp.add_argument("header")
    common(sp)
    sp.set_defaults(func=cmd_derive)

    sp = sub.add_parser("simulate", help="run a preset or config")
    common(sp)
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--length", type=int, help="override the number of broadcasts")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="check links and recompute validations of a chain file")
    sp.add_argument("chain")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("presets", help="list presets or show one")
    sp.add_argument("name", nargs="?")
    sp.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    level = os.environ.get("POQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except IntegrityError as exc:
        print(f"integrity: {exc} (block {exc.block_id})", file=sys.stderr)
        return EXIT_INTEGRITY
    except (PoqError, ChainFormatError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
