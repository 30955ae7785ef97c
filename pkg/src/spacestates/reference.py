"""Slow brute-force reference implementations.

These are deliberately independent of the canonical-labeling and subgraph
search machinery: isomorphism is decided by backtracking over vertex
bijections on the raw structure, and common subgraphs by enumerating
connected induced vertex subsets. The verification suite and the test
oracles compare the fast paths against these.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np

from .spacegraph import AssocKind, SpaceState


def _labels(state: SpaceState) -> dict[int, tuple]:
    return {v: state.fields.get(v).label() for v in state.geometry.vertices}


def _edge_map(state: SpaceState) -> dict[tuple[int, int], Fraction]:
    out = {}
    for u, v, length in state.geometry.edges:
        out[(u, v)] = length
        out[(v, u)] = length
    return out


def brute_force_isomorphic(a: SpaceState, b: SpaceState) -> bool:
    """Backtracking search over vertex bijections preserving all labels."""
    if a.n != b.n or len(a.geometry.edges) != len(b.geometry.edges):
        return False
    la, lb = _labels(a), _labels(b)
    ea, eb = _edge_map(a), _edge_map(b)
    verts_a = list(a.geometry.vertices)
    verts_b = list(b.geometry.vertices)

    def extend(i: int, mapping: dict[int, int], used: set[int]) -> bool:
        if i == len(verts_a):
            return True
        v = verts_a[i]
        for w in verts_b:
            if w in used or la[v] != lb[w]:
                continue
            ok = all(ea.get((v, g)) == eb.get((w, h)) for g, h in mapping.items())
            if ok:
                mapping[v] = w
                used.add(w)
                if extend(i + 1, mapping, used):
                    return True
                used.discard(w)
                del mapping[v]
        return False

    return extend(0, {}, set())


def _induced(state: SpaceState, subset: tuple[int, ...]) -> SpaceState:
    keep = set(subset)
    edges = [(u, v, w) for u, v, w in state.geometry.edges if u in keep and v in keep]
    fields = {v: tuple(state.fields.get(v).label()) for v in subset}
    return SpaceState.build(
        {v: (s, m, p) for v, (s, m, p) in fields.items()}, edges
    )


def _connected_subsets(state: SpaceState, size: int) -> list[tuple[int, ...]]:
    adj = state.geometry.adjacency()
    out = []
    for subset in combinations(state.geometry.vertices, size):
        keep = set(subset)
        seen = {subset[0]}
        stack = [subset[0]]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u in keep and u not in seen:
                    seen.add(u)
                    stack.append(u)
        if len(seen) == size:
            out.append(subset)
    return out


def brute_force_common_subgraph_size(a: SpaceState, b: SpaceState) -> int:
    """Largest common connected induced labeled subgraph, by enumerating
    connected vertex subsets of both graphs and testing isomorphism."""
    la, lb = _labels(a), _labels(b)
    shared = set(la.values()) & set(lb.values())
    if not shared:
        return 0
    for size in range(min(a.n, b.n), 0, -1):
        subs_a = _connected_subsets(a, size)
        subs_b = _connected_subsets(b, size)
        if not subs_a or not subs_b:
            continue
        pieces_a = [(_sorted_labels(la, s), _induced(a, s)) for s in subs_a]
        pieces_b = [(_sorted_labels(lb, s), _induced(b, s)) for s in subs_b]
        for sig_a, frag_a in pieces_a:
            for sig_b, frag_b in pieces_b:
                if sig_a == sig_b and brute_force_isomorphic(frag_a, frag_b):
                    return size
    return 0


def _sorted_labels(labels: dict[int, tuple], subset: tuple[int, ...]) -> tuple:
    return tuple(sorted(labels[v] for v in subset))


def brute_force_globally_associable(a: SpaceState, b: SpaceState) -> bool:
    """Isomorphism up to a constant charged-phase offset, by trying every
    candidate offset between charged vertices of the two states."""
    if brute_force_isomorphic(a, b):
        return True
    ca, cb = a.charged_vertices(), b.charged_vertices()
    if not ca or not cb:
        return False
    offsets = {
        (b.fields.get(w).u1_phase.turns - a.fields.get(v).u1_phase.turns) % 1
        for v in ca
        for w in cb
    }
    return any(brute_force_isomorphic(a.gauge_rotated(delta), b) for delta in offsets)


def brute_force_assoc_kind(a: SpaceState, b: SpaceState, k_min: int) -> AssocKind:
    if brute_force_globally_associable(a, b):
        return AssocKind.GLOBALLY_ASSOCIABLE
    if brute_force_common_subgraph_size(a, b) >= k_min:
        return AssocKind.PARTIALLY_DISSOCIATED
    return AssocKind.COMPLETELY_DISSOCIATED


def dense_inner_product(a, b) -> complex:
    """Inner product via explicitly aligned dense vectors over the union of
    the two supports."""
    keys = sorted(set(a.entries) | set(b.entries))
    va = np.array([a.entries.get(k, (None, 0j))[1] for k in keys], dtype=complex)
    vb = np.array([b.entries.get(k, (None, 0j))[1] for k in keys], dtype=complex)
    return complex(np.vdot(va, vb))
