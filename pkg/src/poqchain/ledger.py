"""Block tree, Chainwork policies, strongest-chain selection and block status.

Blocks get a broadcast index when inserted (genesis is 0). Parents always
have smaller indices than children, so index order is a topological order
and every per-stakeholder quantity can live in append-only arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, DomainError, OrphanError
from .hashcore import BlockHeader

POLICY_KINDS = ("strict", "basic", "confidence")

IMMUTABLE, REJECTED, CONTENDED, FRONTIER = "immutable", "rejected", "contended", "frontier"
STATUSES = (IMMUTABLE, REJECTED, CONTENDED, FRONTIER)


@dataclass(frozen=True)
class ChainworkPolicy:
    """How per-block validation outcomes turn into work.

    strict:     2^N if the hash matches exactly, otherwise the path is invalid.
    basic:      +2^N on an exact match, -2^N otherwise.
    confidence: 2^(N - N_validator) if N_validator <= n_max, otherwise -2^N.

    ``normalized`` divides every weight by 2^N (the +-1 variant of basic).
    """

    kind: str
    hardness: int
    n_max: float = 0.0
    normalized: bool = False

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy {self.kind!r}")
        if not self.n_max >= 0:
            raise ConfigError("n_max must be nonnegative")
        if self.hardness < 0:
            raise ConfigError("hardness must be nonnegative")

    @property
    def unit(self) -> float:
        return 1.0 if self.normalized else 2.0 ** self.hardness

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hardness": self.hardness, "n_max": self.n_max,
                "normalized": self.normalized}

    @classmethod
    def from_dict(cls, data: dict) -> "ChainworkPolicy":
        return cls(data["kind"], int(data["hardness"]), float(data.get("n_max", 0.0)),
                   bool(data.get("normalized", False)))


@dataclass(frozen=True)
class ValidationOutcome:
    n_validator: float
    accepted: bool
    work: float
    kind: str
    hardness: int
    mismatches: int = 0


def block_work(outcome: ValidationOutcome, policy: ChainworkPolicy) -> float:
    if outcome.kind != policy.kind or outcome.hardness != policy.hardness:
        raise ContractError("outcome was computed under a different policy or hardness")
    unit = policy.unit
    if policy.kind == "strict":
        return unit if outcome.mismatches == 0 else -math.inf
    if policy.kind == "basic":
        return unit if outcome.mismatches == 0 else -unit
    if outcome.n_validator <= policy.n_max:
        return unit * 2.0 ** (-outcome.n_validator)
    return -unit


def evaluate(policy: ChainworkPolicy, n_validator: float, mismatches: int) -> ValidationOutcome:
    """Build the outcome of one validation and its work under ``policy``."""
    if n_validator < 0 or mismatches < 0:
        raise DomainError("n_validator and mismatches must be nonnegative")
    if policy.kind == "confidence":
        accepted = n_validator <= policy.n_max
    else:
        accepted = mismatches == 0
    draft = ValidationOutcome(float(n_validator), bool(accepted), 0.0, policy.kind,
                              policy.hardness, int(mismatches))
    return ValidationOutcome(draft.n_validator, draft.accepted, block_work(draft, policy),
                             policy.kind, policy.hardness, draft.mismatches)


def work_array(policy: ChainworkPolicy, n_validator, mismatches) -> np.ndarray:
    """Vectorized :func:`block_work` for batches of validations."""
    n_val = np.asarray(n_validator, dtype=float)
    mm = np.asarray(mismatches)
    unit = policy.unit
    if policy.kind == "strict":
        return np.where(mm == 0, unit, -np.inf)
    if policy.kind == "basic":
        return np.where(mm == 0, unit, -unit)
    return np.where(n_val <= policy.n_max, unit * np.exp2(-np.minimum(n_val, 1e4)), -unit)


@dataclass(eq=False)
class Block:
    header: BlockHeader
    miner: int = -1
    signs: np.ndarray | None = None  # hyperplane signs chosen by the miner
    claimed: str = ""  # broadcast quantum hash, hex MSB-first
    implied_hashes: float = 1.0
    extension: dict = field(default_factory=dict)  # reserved block extension, unused

    @property
    def block_id(self) -> bytes:
        return self.header.classical_id()

    @property
    def parent_id(self) -> bytes:
        return self.header.prev_hash


class StakeholderView:
    """One stakeholder's validation outcomes and cumulative work, by index."""

    def __init__(self, stakeholder, genesis_work: float = 0.0):
        self.stakeholder = stakeholder
        self.n_validator: list[float] = [0.0]
        self.mismatches: list[int] = [0]
        self.work: list[float] = [genesis_work]
        self.cum: list[float] = [genesis_work]
        self.best = 0

    @property
    def n_known(self) -> int:
        return len(self.work)

    def extend(self, tree: "BlockTree", n_validator, mismatches, work) -> None:
        parents = tree.parents
        cum = self.cum
        start = len(self.work)
        best, best_val = self.best, self.cum[self.best]
        for k, (nv, mm, w) in enumerate(zip(n_validator, mismatches, work)):
            idx = start + k
            c = cum[parents[idx]] + float(w)
            cum.append(c)
            # strict comparison keeps the earliest broadcast on ties
            if c > best_val:
                best, best_val = idx, c
            self.n_validator.append(float(nv))
            self.mismatches.append(int(mm))
            self.work.append(float(w))
        self.best = best

    def outcome(self, index: int, policy: ChainworkPolicy) -> ValidationOutcome:
        return ValidationOutcome(self.n_validator[index], self._accepted(index, policy),
                                 self.work[index], policy.kind, policy.hardness,
                                 self.mismatches[index])

    def _accepted(self, index, policy):
        if policy.kind == "confidence":
            return self.n_validator[index] <= policy.n_max
        return self.mismatches[index] == 0


class BlockTree:
    def __init__(self, genesis: BlockHeader | Block, policy: ChainworkPolicy):
        block = genesis if isinstance(genesis, Block) else Block(genesis)
        self.policy = policy
        self.blocks: list[Block] = [block]
        self.parents: list[int] = [-1]
        self.depths: list[int] = [0]
        self.index: dict[bytes, int] = {block.block_id: 0}
        self.orphans: dict[bytes, list[Block]] = {}
        self.views: dict = {}

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def genesis_id(self) -> bytes:
        return self.blocks[0].block_id

    def insert(self, block: Block) -> int:
        """Append ``block``; returns its broadcast index.

        Duplicates return the existing index. A block whose parent is unknown
        is parked and :class:`OrphanError` raised; it is inserted once the
        parent arrives.
        """
        bid = block.block_id
        if bid in self.index:
            return self.index[bid]
        parent = self.index.get(block.parent_id)
        if parent is None:
            parked = self.orphans.setdefault(block.parent_id, [])
            if all(b.block_id != bid for b in parked):
                parked.append(block)
            raise OrphanError(block.parent_id.hex())
        idx = len(self.blocks)
        self.blocks.append(block)
        self.parents.append(parent)
        self.depths.append(self.depths[parent] + 1)
        self.index[bid] = idx
        for child in self.orphans.pop(bid, []):
            self.insert(child)
        return idx

    def children(self) -> list[list[int]]:
        out = [[] for _ in self.blocks]
        for k, p in enumerate(self.parents):
            if p >= 0:
                out[p].append(k)
        return out

    def path(self, index: int) -> list[int]:
        """Indices from genesis to ``index``."""
        out = []
        while index >= 0:
            out.append(index)
            index = self.parents[index]
        return out[::-1]

    def view(self, stakeholder) -> StakeholderView:
        v = self.views.get(stakeholder)
        if v is None:
            v = self.views[stakeholder] = StakeholderView(stakeholder)
        return v

    def record(self, stakeholder, n_validator, mismatches) -> StakeholderView:
        """Append outcomes for the next blocks (in index order) of a stakeholder."""
        v = self.view(stakeholder)
        if v.n_known + len(n_validator) > len(self.blocks):
            raise ContractError("outcomes recorded for blocks not in the tree")
        v.extend(self, n_validator, mismatches, work_array(self.policy, n_validator, mismatches))
        return v

    def cumulative(self, stakeholder) -> np.ndarray:
        return np.asarray(self.view(stakeholder).cum)

    def best_tip(self, stakeholder) -> int:
        v = self.view(stakeholder)
        if v.n_known < len(self.blocks):
            raise ContractError("stakeholder has not validated every block")
        return v.best


def insert_block(tree: BlockTree, block: Block, parent_id: bytes | None = None) -> BlockTree:
    if parent_id is not None and bytes(parent_id) != block.parent_id:
        raise ContractError("parent id disagrees with the header's prev_hash")
    tree.insert(block)
    return tree


def strongest_chain(tree: BlockTree, stakeholder) -> list[int]:
    """Root path (genesis first) to the stakeholder's maximum-Chainwork node."""
    if len(tree) == 1:
        return [0]
    return tree.path(tree.best_tip(stakeholder))


def membership_counts(tree: BlockTree, stakeholders) -> tuple[np.ndarray, list[int]]:
    """How many stakeholders' strongest chains contain each block; and their tips."""
    counts = np.zeros(len(tree), dtype=np.int64)
    tips = []
    for s in stakeholders:
        tip = tree.best_tip(s) if len(tree) > 1 else 0
        tips.append(tip)
        counts[tree.path(tip)] += 1
    return counts, tips


def classify_blocks(tree: BlockTree, stakeholders) -> list[str]:
    """Status per block index; frontier overrides immutable/contended."""
    stakeholders = list(stakeholders)
    if not stakeholders:
        raise DomainError("need at least one stakeholder")
    counts, tips = membership_counts(tree, stakeholders)
    n = len(stakeholders)
    status = [IMMUTABLE if c == n else REJECTED if c == 0 else CONTENDED for c in counts]
    for t in tips:
        status[t] = FRONTIER
    return status


def pair_delay(tree: BlockTree, a, b) -> int:
    """Blocks on a's strongest chain absent from b's."""
    pa = strongest_chain(tree, a)
    pb = set(strongest_chain(tree, b))
    return sum(1 for k in pa if k not in pb)
