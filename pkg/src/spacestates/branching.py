"""Macro-branch tracking over a time series of wavefunctionals.

At each epoch the support is partitioned into connected components of the
associability graph (edges wherever two states are not completely
dissociated) and sub-partitioned by macro label; the resulting nodes are
linked across epochs by maximal key overlap, falling back to associability
overlap when no keys survive, and branching/merging events are recorded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dynamics import RewriteRule, evolve, expand_reachable
from .macrostates import MacroPartition
from .spacegraph import AssocKind, SpaceState, classify_cached
from .wavefunctional import EntryKey, Wavefunctional


class EmptySupport(Exception):
    """Raised when a tracked series contains an empty wavefunctional."""


@dataclass
class BranchNode:
    node_id: int
    epoch: int
    macro_label: str
    member_keys: frozenset[EntryKey]
    weight: float
    parent: "BranchNode | None" = None
    children: list["BranchNode"] = field(default_factory=list)

    def sort_signature(self) -> tuple:
        return (self.macro_label, min(self.member_keys))


@dataclass
class BranchEvent:
    epoch: int
    kind: str  # "branch" or "merge"
    parent_ids: list[int]
    child_ids: list[int]
    weights: list[float]
    irreversible: bool | None = None
    horizon: int | None = None


@dataclass
class BranchTree:
    nodes: list[BranchNode]
    roots: list[BranchNode]
    events: list[BranchEvent]
    epochs: int
    states: dict[EntryKey, SpaceState]
    k_min: int

    def state_for(self, ckey: bytes) -> SpaceState:
        index = self.__dict__.get("_by_ckey")
        if index is None:
            index = {}
            for (ck, _cell), state in sorted(self.states.items()):
                index.setdefault(ck, state)
            self.__dict__["_by_ckey"] = index
        return index[ckey]

    def nodes_at(self, epoch: int) -> list[BranchNode]:
        return [n for n in self.nodes if n.epoch == epoch]

    def node(self, node_id: int) -> BranchNode:
        return self.nodes[node_id]

    def branch_counts(self) -> list[int]:
        return [len(self.nodes_at(e)) for e in range(self.epochs)]

    def entropies(self) -> list[float]:
        out = []
        for e in range(self.epochs):
            weights = [n.weight for n in self.nodes_at(e)]
            total = sum(weights)
            h = 0.0
            for w in weights:
                p = w / total
                if p > 0:
                    h -= p * math.log(p)
            out.append(h)
        return out


def _associable(a: SpaceState, b: SpaceState, k_min: int) -> bool:
    return classify_cached(a, b, k_min).kind is not AssocKind.COMPLETELY_DISSOCIATED


def _components(states: dict[bytes, SpaceState], k_min: int) -> dict[bytes, int]:
    """Connected components of the associability graph over canonical keys."""
    keys = sorted(states)
    parent = {k: k for k in keys}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for i, ka in enumerate(keys):
        for kb in keys[i + 1 :]:
            if find(ka) == find(kb):
                continue
            if _associable(states[ka], states[kb], k_min):
                ra, rb = find(ka), find(kb)
                parent[max(ra, rb)] = min(ra, rb)
    roots = sorted({find(k) for k in keys})
    rank = {r: i for i, r in enumerate(roots)}
    return {k: rank[find(k)] for k in keys}


def track(
    psi_series: list[Wavefunctional], partition: MacroPartition, k_min: int = 2
) -> BranchTree:
    """Build the branch tree for a series of wavefunctionals."""
    if not psi_series:
        raise EmptySupport("empty series")
    nodes: list[BranchNode] = []
    events: list[BranchEvent] = []
    all_states: dict[EntryKey, SpaceState] = {}
    seen_ckeys: dict[bytes, SpaceState] = {}
    previous: list[BranchNode] = []
    roots: list[BranchNode] = []

    for epoch, psi in enumerate(psi_series):
        if len(psi) == 0:
            raise EmptySupport(f"empty support at epoch {epoch}")
        by_ckey: dict[bytes, SpaceState] = {}
        for key in psi.sorted_keys():
            state = psi.entries[key][0]
            all_states.setdefault(key, state)
            seen_ckeys.setdefault(key[0], state)
            by_ckey.setdefault(key[0], state)
        comp = _components(by_ckey, k_min)

        grouped: dict[tuple[int, str], list[EntryKey]] = {}
        for key in psi.sorted_keys():
            state = psi.entries[key][0]
            group = (comp[key[0]], partition.label_of(state))
            grouped.setdefault(group, []).append(key)

        current: list[BranchNode] = []
        for (comp_id, label), keys in grouped.items():
            weight = sum(abs(psi.entries[k][1]) ** 2 for k in keys)
            current.append(
                BranchNode(-1, epoch, label, frozenset(keys), weight)
            )
        current.sort(key=BranchNode.sort_signature)
        for node in current:
            node.node_id = len(nodes)
            nodes.append(node)

        if epoch == 0:
            roots.extend(current)
        else:
            for child in current:
                positive: list[tuple[int, BranchNode]] = []
                for parent_node in previous:
                    ov = len(child.member_keys & parent_node.member_keys)
                    if ov > 0:
                        positive.append((ov, parent_node))
                if not positive:
                    # No surviving keys: link by associability overlap instead.
                    for parent_node in previous:
                        ov = _assoc_overlap(child, parent_node, seen_ckeys, k_min)
                        if ov > 0:
                            positive.append((ov, parent_node))
                if not positive:
                    roots.append(child)
                    continue
                # Maximal overlap wins; ties break on canonical key order.
                top = max(ov for ov, _ in positive)
                parent_node = sorted(
                    (p for ov, p in positive if ov == top),
                    key=lambda p: sorted(p.member_keys),
                )[0]
                child.parent = parent_node
                parent_node.children.append(child)
                if len(positive) >= 2:
                    parents = sorted({p.node_id for _, p in positive})
                    events.append(
                        BranchEvent(
                            epoch=epoch,
                            kind="merge",
                            parent_ids=parents,
                            child_ids=[child.node_id],
                            weights=[child.weight],
                        )
                    )
            for parent_node in previous:
                if len(parent_node.children) >= 2:
                    children = sorted(parent_node.children, key=lambda c: c.node_id)
                    events.append(
                        BranchEvent(
                            epoch=epoch,
                            kind="branch",
                            parent_ids=[parent_node.node_id],
                            child_ids=[c.node_id for c in children],
                            weights=[c.weight for c in children],
                        )
                    )
        previous = current

    return BranchTree(nodes, roots, events, len(psi_series), all_states, k_min)


def _assoc_overlap(
    child: BranchNode, parent: BranchNode, by_ckey: dict[bytes, SpaceState], k_min: int
) -> int:
    count = 0
    child_ckeys = {k[0] for k in child.member_keys}
    parent_ckeys = {k[0] for k in parent.member_keys}
    for ck in sorted(child_ckeys):
        for pk in sorted(parent_ckeys):
            if _associable(by_ckey[ck], by_ckey[pk], k_min):
                count += 1
    return count


def _descendants_at(node: BranchNode, epoch: int) -> list[BranchNode]:
    if node.epoch == epoch:
        return [node]
    if node.epoch > epoch:
        return []
    out = []
    for child in node.children:
        out.extend(_descendants_at(child, epoch))
    return out


def irreversibility_scan(tree: BranchTree, horizon: int) -> BranchTree:
    """Mark each branching event irreversible when no pair of keys from
    different child branches is associable at any epoch within `horizon`
    epochs after the event. Horizon 0 is vacuously irreversible."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    for event in tree.events:
        if event.kind != "branch":
            continue
        children = [tree.node(cid) for cid in event.child_ids]
        reversible = False
        for later in range(event.epoch + 1, min(event.epoch + horizon, tree.epochs - 1) + 1):
            member_sets = []
            for child in children:
                ckeys = set()
                for node in _descendants_at(child, later):
                    ckeys.update(k[0] for k in node.member_keys)
                member_sets.append(sorted(ckeys))
            for i in range(len(member_sets)):
                for j in range(i + 1, len(member_sets)):
                    for ck_a in member_sets[i]:
                        for ck_b in member_sets[j]:
                            sa = tree.state_for(ck_a)
                            sb = tree.state_for(ck_b)
                            if _associable(sa, sb, tree.k_min):
                                reversible = True
                                break
                        if reversible:
                            break
                    if reversible:
                        break
                if reversible:
                    break
            if reversible:
                break
        event.irreversible = not reversible
        event.horizon = horizon
    return tree


def branch_events_jsonl(tree: BranchTree) -> str:
    lines = []
    for event in tree.events:
        record = {
            "epoch": event.epoch,
            "event": event.kind,
            "parent_id": event.parent_ids[0] if event.parent_ids else None,
            "parent_ids": event.parent_ids,
            "child_ids": event.child_ids,
            "weights": event.weights,
            "irreversible": event.irreversible,
            "horizon": event.horizon,
        }
        lines.append(json.dumps(record, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Degenerate initial state and the branching-asymmetry experiment.
# ---------------------------------------------------------------------------


def degenerate_initial_state(
    n_vertices: int = 2, species_tag: int = 1, matter: int = 1
) -> SpaceState:
    """The unique maximally degenerate state: a path with all edge lengths
    zero and identical fields on every vertex."""
    fields = {v: (species_tag, Fraction(matter), Fraction(0)) for v in range(n_vertices)}
    edges = [(v, v + 1, 0) for v in range(n_vertices - 1)]
    return SpaceState.build(fields, edges)


def is_degenerate(state: SpaceState) -> bool:
    lengths_zero = all(length == 0 for _u, _v, length in state.geometry.edges)
    return lengths_zero and state.fields.is_homogeneous()


@dataclass
class DirectionStats:
    branch_counts: list[int]
    entropies: list[float]
    branch_events: int
    merge_events: int


@dataclass
class AsymmetrySummary:
    seed: int
    forward: DirectionStats
    backward: DirectionStats


def _direction_stats(tree: BranchTree) -> DirectionStats:
    return DirectionStats(
        branch_counts=tree.branch_counts(),
        entropies=tree.entropies(),
        branch_events=sum(1 for e in tree.events if e.kind == "branch"),
        merge_events=sum(1 for e in tree.events if e.kind == "merge"),
    )


def asymmetry_experiment(
    rules: list[RewriteRule],
    partition: MacroPartition,
    epochs: int,
    seed: int,
    *,
    initial_state: SpaceState | None = None,
    dt: float = 0.25,
    steps: int = 1,
    max_dim: int = 96,
    k_min: int = 2,
    coupling_jitter: float = 0.1,
) -> AsymmetrySummary:
    """Run the branching experiment forward from the degenerate initial state
    and backward from the final support, reporting per-epoch branch counts,
    branch entropies, and merge (reassociation) counts for both directions.

    The seed perturbs each rule coupling by up to +-coupling_jitter
    (multiplicatively) through a counter-based generator, modeling ignorance
    of the microscopic couplings; the initial state itself is always the
    exact degenerate state, so the forward run has a unique root.
    """
    if initial_state is None:
        initial_state = degenerate_initial_state()
    if not is_degenerate(initial_state):
        raise ValueError("initial state must be degenerate (zero lengths, homogeneous fields)")
    rng = np.random.Generator(np.random.Philox(seed))
    jittered = [
        rule.with_coupling(rule.coupling * (1.0 + coupling_jitter * (2.0 * rng.random() - 1.0)))
        for rule in sorted(rules, key=lambda r: r.rule_id)
    ]
    psi0 = Wavefunctional.from_states([(initial_state, 1.0 + 0j)])
    gen = expand_reachable(psi0, jittered, max_dim, accept_truncation=True)

    forward = [psi0]
    for _ in range(epochs):
        forward.append(evolve(forward[-1], gen, dt, steps, allow_boundary_leak=True))
    backward = [forward[-1]]
    for _ in range(epochs):
        backward.append(evolve(backward[-1], gen, -dt, steps, allow_boundary_leak=True))

    tree_f = track(forward, partition, k_min)
    tree_b = track(backward, partition, k_min)
    return AsymmetrySummary(seed, _direction_stats(tree_f), _direction_stats(tree_b))
