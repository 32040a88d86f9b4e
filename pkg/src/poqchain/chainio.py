"""Chain persistence (JSON lines) and Graphviz DOT export.

File layout: one meta line, then one record per non-genesis block in
broadcast order. Every line is compact JSON with sorted keys, so a parsed
file re-serializes byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrityError, PoqError
from .hashcore import BlockHeader
from .ledger import CONTENDED, FRONTIER, IMMUTABLE, REJECTED, Block, BlockTree, ChainworkPolicy

SCHEMA_VERSION = 1

STATUS_COLORS = {IMMUTABLE: "blue", REJECTED: "orange", CONTENDED: "gray", FRONTIER: "black"}


class ChainFormatError(PoqError):
    """Malformed or unsupported chain file."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class ChainFile:
    meta: dict
    records: list = field(default_factory=list)

    @property
    def genesis(self) -> BlockHeader:
        return BlockHeader.from_dict(self.meta["genesis"])

    def dumps(self) -> str:
        lines = [_dumps({"kind": "meta", "schema_version": SCHEMA_VERSION, **self.meta})]
        lines += [_dumps({"kind": "block", **r}) for r in self.records]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ChainFile":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ChainFormatError("empty chain file")
        try:
            docs = [json.loads(ln) for ln in lines]
        except json.JSONDecodeError as exc:
            raise ChainFormatError(f"bad JSON: {exc}") from exc
        meta = docs[0]
        if not isinstance(meta, dict) or meta.get("kind") != "meta":
            raise ChainFormatError("first line must be the meta record")
        if meta.get("schema_version") != SCHEMA_VERSION:
            raise ChainFormatError(f"unsupported schema {meta.get('schema_version')!r}")
        if "genesis" not in meta:
            raise ChainFormatError("meta record lacks the genesis header")
        meta = {k: v for k, v in meta.items() if k not in ("kind", "schema_version")}
        records = []
        for k, d in enumerate(docs[1:], start=2):
            if not isinstance(d, dict) or d.get("kind") != "block" or "header" not in d:
                raise ChainFormatError(f"line {k} is not a block record")
            records.append({key: v for key, v in d.items() if key != "kind"})
        return cls(meta, records)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "ChainFile":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def block_record(block: Block, index: int, outcomes: dict | None = None) -> dict:
    rec = {
        "index": index,
        "id": block.block_id.hex(),
        "header": block.header.to_dict(),
        "miner": int(block.miner),
        "signs": [] if block.signs is None else [int(s) for s in np.asarray(block.signs)],
        "claimed": block.claimed,
        "implied_hashes": float(block.implied_hashes),
        "attempt": int(block.extension.get("attempt", 0)),
    }
    if outcomes:
        rec["outcomes"] = outcomes
    return rec


def chain_file(tree: BlockTree, config: dict | None = None, stakeholders=()) -> ChainFile:
    """Snapshot of ``tree``; outcomes are stored for the listed stakeholders."""
    meta = {"genesis": tree.blocks[0].header.to_dict(), "policy": tree.policy.to_dict(),
            "config": config or {}}
    records = []
    views = [(s, tree.views[s]) for s in stakeholders if s in tree.views]
    for k in range(1, len(tree)):
        out = {str(s): {"n_validator": float(v.n_validator[k]), "mismatches": int(v.mismatches[k]),
                        "work": float(v.work[k])}
               for s, v in views if k < v.n_known}
        records.append(block_record(tree.blocks[k], k, out))
    return ChainFile(meta, records)


def record_block(rec: dict) -> Block:
    header = BlockHeader.from_dict(rec["header"])
    signs = np.asarray(rec.get("signs", []), dtype=np.int8)
    return Block(header, int(rec.get("miner", -1)), signs if signs.size else None,
                 rec.get("claimed", ""), float(rec.get("implied_hashes", 1.0)),
                 {"attempt": int(rec.get("attempt", 0))})


@dataclass(frozen=True)
class LinkReport:
    """Integrity of a chain file: bad ids, broken links, and their descendants."""

    id_mismatch: tuple = ()
    broken: tuple = ()
    tainted: tuple = ()

    @property
    def ok(self) -> bool:
        return not (self.id_mismatch or self.broken)


def check_links(cf: ChainFile) -> LinkReport:
    """Recompute every block id and parent link; taint descendants of bad blocks.

    A record whose stored id differs from its header hash is an id mismatch;
    a record whose prev_hash names no earlier record is broken. Indices are
    file positions (genesis is 0).
    """
    known = {cf.genesis.classical_id(): 0}
    parent_of = {}
    bad_id, broken = [], []
    for k, rec in enumerate(cf.records, start=1):
        header = BlockHeader.from_dict(rec["header"])
        bid = header.classical_id()
        if rec.get("id") is not None and rec["id"] != bid.hex():
            bad_id.append(k)
        p = known.get(header.prev_hash)
        if p is None:
            broken.append(k)
        parent_of[k] = p
        known.setdefault(bid, k)
    bad = set(bad_id) | set(broken)
    tainted = []
    for k in range(1, len(cf.records) + 1):
        p = parent_of[k]
        if k in bad or (p is not None and p in bad):
            bad.add(k)
            tainted.append(k)
    return LinkReport(tuple(bad_id), tuple(broken), tuple(tainted))


def tree_from_file(cf: ChainFile, policy: ChainworkPolicy | None = None) -> BlockTree:
    """Rebuild the block tree; raises IntegrityError on the first broken link."""
    policy = policy or ChainworkPolicy.from_dict(cf.meta["policy"])
    tree = BlockTree(cf.genesis, policy)
    for k, rec in enumerate(cf.records, start=1):
        block = record_block(rec)
        if block.parent_id not in tree.index:
            raise IntegrityError(f"block {k} references unknown parent", block.block_id.hex())
        tree.insert(block)
    return tree


def to_dot(tree: BlockTree, status, transfers=None, name: str = "chain") -> str:
    """DOT digraph with nodes colored by status and edges carrying transfer counts."""
    transfers = transfers or {}
    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=circle style=filled fontcolor=white];"]
    for k in range(len(tree)):
        color = STATUS_COLORS.get(status[k], "white")
        lines.append(f'  n{k} [label="{k}" fillcolor={color} status={status[k]}];')
    for k in range(1, len(tree)):
        t = int(transfers.get(k, 0))
        lines.append(f"  n{tree.parents[k]} -> n{k} [transfers={t} penwidth={1 + t}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
