import csv
import json

import pytest

from poqchain import presets
from poqchain.chainio import ChainFile
from poqchain.cli import EXIT_INTEGRITY, EXIT_OK, EXIT_RESOURCE, EXIT_USAGE, main
from poqchain.ledger import STATUSES
from poqchain.netsim.adversary import validate_report
from poqchain.netsim.sweep import dominance_holds, read_sweep_csv, summarize

HEADER = {"prev_hash": "00" * 32, "merkle_root": "11" * 32, "timestamp": 7, "nonce": 42,
          "version": 1, "hardness": 32}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_hash_is_deterministic(capsys):
    h = json.dumps(HEADER)
    a = run(capsys, "hash", h, "--oracle", "exact")
    b = run(capsys, "hash", h, "--oracle", "exact")
    assert a[0] == EXIT_OK and a[1] == b[1]
    doc = json.loads(a[1])
    assert doc["n_bits"] == 32 and len(doc["bits"]) == 8 and len(doc["distances"]) == 32
    n1 = run(capsys, "hash", h, "--oracle", "noisy", "--seed", 3)
    n2 = run(capsys, "hash", h, "--oracle", "noisy", "--seed", 3)
    assert n1[1] == n2[1] and json.loads(n1[1])["oracle"] == "noisy"
    assert all(d is not None for d in json.loads(n1[1])["distances"])


def test_flipping_a_header_bit_changes_the_hash(capsys):
    base = json.loads(run(capsys, "hash", json.dumps(HEADER))[1])["bits"]
    changed = 0
    for bit in range(16):
        h = dict(HEADER, nonce=HEADER["nonce"] ^ (1 << bit))
        changed += json.loads(run(capsys, "hash", json.dumps(h))[1])["bits"] != base
    assert changed == 16


def test_derive_prints_instance(capsys):
    code, out, _ = run(capsys, "derive", json.dumps(HEADER))
    doc = json.loads(out)
    assert code == EXIT_OK and doc  # an instance object


@pytest.mark.parametrize("argv", [
    ["hash", "{not json"],
    ["hash", json.dumps({"nonce": 1})],
    ["hash", json.dumps(HEADER), "--oracle", "qpu"],
    ["simulate", "--preset", "nope"],
    ["frobnicate"],
    [],
    ["presets", "nope"],
    ["verify", "/nonexistent/chain.jsonl"],
    ["simulate", "--config", json.dumps({"length": 0})],
])
def test_usage_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_resource_guard_exits_3(capsys, tmp_path):
    cfg = json.dumps({"length": 30, "n_miners": 5, "n_zeros": 12, "max_validations": 10,
                      "calibration": {"n_rows": 32}})
    code, _, err = run(capsys, "simulate", "--config", cfg, "--out", tmp_path)
    assert code == EXIT_RESOURCE and "resource" in err


def test_presets_listing(capsys):
    code, out, _ = run(capsys, "presets")
    names = [ln.split("\t")[0] for ln in out.strip().splitlines()]
    assert code == EXIT_OK
    assert {"fig3", "fig4-sweep", "fig10-mining-rate", "attack-suite"} <= set(names)
    doc = json.loads(run(capsys, "presets", "fig3")[1])
    assert doc["base"]["n_zeros"] == 28 and doc["base"]["n_miners"] == 100
    assert doc["base"]["policy"] == "basic" and doc["schema_version"] == 1


@pytest.fixture(scope="module")
def fig3_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig3")
    assert main(["simulate", "--preset", "fig3", "--length", "64", "--out", str(out)]) == EXIT_OK
    return out


def test_fig3_smoke(fig3_out):
    rows = list(csv.DictReader(open(fig3_out / "chain_s0.csv")))
    assert len(rows) == 64
    last = rows[-1]
    sizes = sum(int(last[s]) for s in STATUSES)
    assert sizes == 64  # every non-genesis block has exactly one status
    cf = ChainFile.load(fig3_out / "chain_s0.jsonl")
    assert len(cf.records) == 64
    assert (fig3_out / "chain_s0.jsonl").read_text() == cf.dumps()
    assert (fig3_out / "chain_s0.dot").read_text().startswith("digraph")
    summary = json.loads((fig3_out / "chain_s0.summary.json").read_text())
    assert 0 < summary["efficiency"] <= 1


def test_verify_round_trip(capsys, fig3_out):
    code, out, _ = run(capsys, "verify", fig3_out / "chain_s0.jsonl")
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert len(lines) == 65 and all(" ok " in ln for ln in lines[:-1])
    assert json.loads(lines[-1])["divergent"] == 0
    assert "chainwork=" in lines[0] and "accepted=" in lines[0]


def tampered(fig3_out, tmp_path, edit):
    cf = ChainFile.load(fig3_out / "chain_s0.jsonl")
    edit(cf.records)
    path = tmp_path / "t.jsonl"
    cf.save(path)
    return path, cf


def flagged(out):
    return {int(ln.split()[1]) for ln in out.splitlines() if "FLAGGED" in ln}


def descendants(cf, k):
    ids = {cf.records[k - 1]["id"]}
    out = {k}
    for j, rec in enumerate(cf.records, start=1):
        if rec["header"]["prev_hash"] in ids:
            ids.add(rec["id"])
            out.add(j)
    return out


def test_verify_tampered_nonce(capsys, fig3_out, tmp_path):
    def edit(recs):
        recs[9]["header"]["nonce"] += 1
    path, cf = tampered(fig3_out, tmp_path, edit)
    code, out, err = run(capsys, "verify", path)
    assert code == EXIT_INTEGRITY and "block 10" in err
    assert 10 in flagged(out)


@pytest.mark.parametrize("keep_id", [True, False])
def test_verify_tampered_root_flags_descendants(capsys, fig3_out, tmp_path, keep_id):
    orig = ChainFile.load(fig3_out / "chain_s0.jsonl")
    want = descendants(orig, 20)
    assert len(want) > 1

    def edit(recs):
        recs[19]["header"]["merkle_root"] = "ab" * 32
        if not keep_id:
            recs[19]["id"] = None  # skip the id check: only the broken links remain
    path, _ = tampered(fig3_out, tmp_path, edit)
    code, out, err = run(capsys, "verify", path)
    assert code == EXIT_INTEGRITY
    assert flagged(out) == (want if keep_id else want - {20})
    assert f"block {20 if keep_id else min(want - {20})}" in err


def test_verify_tampered_outcome(capsys, fig3_out, tmp_path):
    def edit(recs):
        rec = recs[29]["outcomes"]
        key = next(k for k in rec if int(k) != recs[29]["miner"])
        rec[key]["mismatches"] += 1
    path, _ = tampered(fig3_out, tmp_path, edit)
    code, out, _ = run(capsys, "verify", path)
    assert code == EXIT_INTEGRITY and flagged(out) == {30}


def test_reduced_sweep_csv(capsys, tmp_path, monkeypatch):
    full = presets.PRESETS["fig4-sweep"]
    small = presets.ExperimentPreset(
        "fig4-sweep", "sweep", full.description, base={**full.base, "length": 96},
        grid={"n_zeros": [20, 40], "policies": [["basic", 0.0], ["confidence", 0.5]]},
        seeds=(0,))
    monkeypatch.setitem(presets.PRESETS, "fig4-sweep", small)
    code, out, _ = run(capsys, "simulate", "--preset", "fig4-sweep", "--out", tmp_path)
    assert code == EXIT_OK and "dominance=pass" in out
    rows = read_sweep_csv(tmp_path / "sweep.csv")
    assert len(rows) == 4
    assert dominance_holds(summarize(rows))


def test_reduced_attack_suite_schema(capsys, tmp_path, monkeypatch):
    small = presets.ExperimentPreset("attack-suite", "attack", "reduced", grid={"attacks": [
        {"strategy": "no-work", "n_zeros": 4, "trials": 200},
        {"strategy": "filter", "n_zeros": 4, "trials": 50, "candidates": 4,
         "chain": {"hyperplanes": "j-orthogonal"}},
        {"strategy": "partial-quantum", "n_zeros": 4, "trials": 50},
        {"strategy": "multi-block", "n_zeros": 16, "trials": 1, "sim": {"length": 150}}]})
    monkeypatch.setitem(presets.PRESETS, "attack-suite", small)
    code, _, _ = run(capsys, "simulate", "--preset", "attack-suite", "--out", tmp_path)
    assert code == EXIT_OK
    reports = json.loads((tmp_path / "attack_report.json").read_text())
    assert [r["strategy"] for r in reports] == ["no-work", "filter", "partial-quantum",
                                               "multi-block"]
    for r in reports:
        validate_report(r)


def test_log_env(capsys, monkeypatch):
    monkeypatch.setenv("POQ_LOG", "debug")
    assert run(capsys, "presets")[0] == EXIT_OK
