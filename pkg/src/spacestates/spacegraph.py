"""Discrete space geometries as labeled graphs.

A space-state is a finite labeled graph (geometry) together with per-vertex
field labels (matter amplitude, U(1) phase, species tag) and an optional
dyadic cell index. All labels are exact rationals, so canonical forms,
isomorphism, and gauge orbits are exact and platform-independent. Phases are
stored as fractions of a full turn; the global U(1) action adds a constant
turn fraction to every charged vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

TWO_PI = 2.0 * math.pi

# Species tag 0 is the neutral species; any other tag carries U(1) charge.
NEUTRAL_SPECIES = 0

# Exact maximum-common-subgraph search is used up to this many vertices on
# the larger graph; beyond it a greedy seed-and-extend lower bound is used.
EXACT_SUBGRAPH_LIMIT = 8


def as_fraction(value) -> Fraction:
    """Coerce an exact numeric label to Fraction. Floats are rejected."""
    if isinstance(value, float):
        raise TypeError(f"labels are exact; got float {value!r} (pass Fraction, int, or str)")
    return value if isinstance(value, Fraction) else Fraction(value)


@dataclass(frozen=True)
class Phase:
    """U(1) angle, stored exactly as a fraction of a full turn in [0, 1)."""

    turns: Fraction

    def __post_init__(self):
        turns = as_fraction(self.turns)
        if turns < 0 or turns >= 1:
            turns %= 1
        object.__setattr__(self, "turns", turns)

    @classmethod
    def zero(cls) -> "Phase":
        return cls(Fraction(0))

    @classmethod
    def from_turns(cls, turns) -> "Phase":
        return cls(as_fraction(turns))

    @classmethod
    def from_radians(cls, radians: float) -> "Phase":
        # Fraction(float) is exact, so the resulting turn count is an exact
        # dyadic rational and shift/unshift round-trips are bit-exact.
        return cls(Fraction(radians / TWO_PI) % 1)

    @property
    def radians(self) -> float:
        return float(self.turns) * TWO_PI

    def shifted(self, delta_turns: Fraction) -> "Phase":
        total = self.turns + delta_turns
        if total >= 1:
            total -= 1
        elif total < 0:
            total += 1
        return Phase(total if 0 <= total < 1 else total % 1)


Edge = tuple[int, int, Fraction]


@dataclass(frozen=True)
class SpaceGraph:
    """Finite undirected graph with non-negative rational edge lengths.

    Vertex identifiers are arbitrary integers and carry no physical meaning;
    edges are stored as (u, v, length) with u < v, sorted.
    """

    vertices: tuple[int, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        verts = tuple(sorted(self.vertices))
        if len(verts) == 0:
            raise ValueError("a space graph needs at least one vertex")
        if len(set(verts)) != len(verts):
            raise ValueError("duplicate vertex identifiers")
        vert_set = set(verts)
        norm_edges = []
        seen = set()
        for u, v, length in self.edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if u not in vert_set or v not in vert_set:
                raise ValueError(f"edge ({u},{v}) references unknown vertex")
            a, b = (u, v) if u < v else (v, u)
            if (a, b) in seen:
                raise ValueError(f"duplicate edge ({a},{b})")
            seen.add((a, b))
            length = as_fraction(length)
            if length < 0:
                raise ValueError(f"negative edge length on ({a},{b})")
            norm_edges.append((a, b, length))
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", tuple(sorted(norm_edges)))

    @classmethod
    def build(cls, vertices: Iterable[int], edges: Iterable[tuple[int, int, object]]) -> "SpaceGraph":
        return cls(tuple(vertices), tuple((u, v, as_fraction(w)) for u, v, w in edges))

    @property
    def n(self) -> int:
        return len(self.vertices)

    def adjacency(self) -> dict[int, dict[int, Fraction]]:
        adj: dict[int, dict[int, Fraction]] = {v: {} for v in self.vertices}
        for u, v, length in self.edges:
            adj[u][v] = length
            adj[v][u] = length
        return adj

    def degree_histogram(self) -> tuple[int, ...]:
        adj = self.adjacency()
        return tuple(sorted(len(adj[v]) for v in self.vertices))


@dataclass(frozen=True)
class VertexField:
    """Classical field labels at one vertex."""

    species_tag: int
    matter_amplitude: Fraction
    u1_phase: Phase

    def __post_init__(self):
        matter = as_fraction(self.matter_amplitude)
        if matter < 0:
            raise ValueError("matter_amplitude must be non-negative")
        object.__setattr__(self, "matter_amplitude", matter)
        if not isinstance(self.u1_phase, Phase):
            object.__setattr__(self, "u1_phase", Phase.from_turns(self.u1_phase))

    @property
    def charged(self) -> bool:
        return self.species_tag != NEUTRAL_SPECIES

    def label(self) -> tuple:
        return (self.species_tag, self.matter_amplitude, self.u1_phase.turns)


@dataclass(frozen=True)
class FieldConfig:
    """Per-vertex field records, keyed by vertex identifier."""

    fields: tuple[tuple[int, VertexField], ...]

    def __post_init__(self):
        entries = tuple(sorted(self.fields))
        if len({v for v, _ in entries}) != len(entries):
            raise ValueError("duplicate vertex in field configuration")
        object.__setattr__(self, "fields", entries)

    @classmethod
    def build(cls, mapping: Mapping[int, VertexField]) -> "FieldConfig":
        return cls(tuple(mapping.items()))

    @classmethod
    def homogeneous(cls, vertices: Iterable[int], record: VertexField) -> "FieldConfig":
        return cls(tuple((v, record) for v in vertices))

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.fields)

    def get(self, vertex: int) -> VertexField:
        for v, rec in self.fields:
            if v == vertex:
                return rec
        raise KeyError(vertex)

    def as_dict(self) -> dict[int, VertexField]:
        return dict(self.fields)

    def charged_vertices(self) -> tuple[int, ...]:
        return tuple(v for v, rec in self.fields if rec.charged)

    def rotated(self, delta_turns: Fraction) -> "FieldConfig":
        """Global gauge action: shift every charged vertex's phase by delta."""
        delta = as_fraction(delta_turns)
        memo: dict[VertexField, VertexField] = {}
        out = []
        for v, rec in self.fields:
            if rec.charged:
                shifted = memo.get(rec)
                if shifted is None:
                    shifted = VertexField(
                        rec.species_tag, rec.matter_amplitude, rec.u1_phase.shifted(delta)
                    )
                    memo[rec] = shifted
                rec = shifted
            out.append((v, rec))
        # Rotation preserves vertex order and coverage, so skip revalidation.
        config = object.__new__(FieldConfig)
        object.__setattr__(config, "fields", tuple(out))
        return config

    def is_homogeneous(self) -> bool:
        records = {rec for _, rec in self.fields}
        return len(records) == 1


# Keys are pure functions of the labeled structure, so they are shared
# across all SpaceState instances with equal geometry and fields.
_CANONICAL_CACHE: dict[tuple, bytes] = {}
_GAUGE_CACHE: dict[tuple, bytes] = {}
_KEY_CACHE_MAX = 500_000


@dataclass(frozen=True, eq=False)
class SpaceState:
    """A labeled-graph geometry with its classical fields and cell index.

    Equality and hashing are by canonical form plus cell index, so any
    relabeling of the vertices yields an equal state.
    """

    geometry: SpaceGraph
    fields: FieldConfig
    cell_index: tuple[int, ...] = ()

    def __post_init__(self):
        if self.fields.vertices != self.geometry.vertices:
            raise ValueError("field configuration must cover exactly the graph's vertices")
        cell = tuple(self.cell_index)
        if any(b not in (0, 1) for b in cell):
            raise ValueError("cell_index must be a sequence of bits")
        object.__setattr__(self, "cell_index", cell)

    @classmethod
    def build(
        cls,
        fields: Mapping[int, tuple[int, object, object]],
        edges: Iterable[tuple[int, int, object]] = (),
        cell_index: Sequence[int] = (),
    ) -> "SpaceState":
        """Assemble a state from {vertex: (species, matter, phase_turns)} plus edges."""
        config = FieldConfig.build(
            {v: VertexField(s, as_fraction(m), Phase.from_turns(p)) for v, (s, m, p) in fields.items()}
        )
        graph = SpaceGraph.build(fields.keys(), edges)
        return cls(graph, config, tuple(cell_index))

    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def canonical_key(self) -> bytes:
        cached = self.__dict__.get("_ckey")
        if cached is None:
            struct = (self.geometry, self.fields)
            cached = _CANONICAL_CACHE.get(struct)
            if cached is None:
                cached = _canonical_bytes(self)
                if len(_CANONICAL_CACHE) >= _KEY_CACHE_MAX:
                    _CANONICAL_CACHE.clear()
                _CANONICAL_CACHE[struct] = cached
            object.__setattr__(self, "_ckey", cached)
        return cached

    @property
    def gauge_key(self) -> bytes:
        cached = self.__dict__.get("_gkey")
        if cached is None:
            struct = (self.geometry, self.fields)
            cached = _GAUGE_CACHE.get(struct)
            if cached is None:
                cached = _gauge_canonical_bytes(self)
                if len(_GAUGE_CACHE) >= _KEY_CACHE_MAX:
                    _GAUGE_CACHE.clear()
                _GAUGE_CACHE[struct] = cached
            object.__setattr__(self, "_gkey", cached)
        return cached

    def charged_vertices(self) -> tuple[int, ...]:
        return self.fields.charged_vertices()

    def gauge_rotated(self, delta_turns: Fraction) -> "SpaceState":
        # Geometry and cell are unchanged and the rotated fields cover the
        # same vertices, so construction can skip revalidation.
        state = object.__new__(SpaceState)
        object.__setattr__(state, "geometry", self.geometry)
        object.__setattr__(state, "fields", self.fields.rotated(delta_turns))
        object.__setattr__(state, "cell_index", self.cell_index)
        return state

    def with_cell_index(self, cell_index: Sequence[int]) -> "SpaceState":
        twin = SpaceState(self.geometry, self.fields, tuple(cell_index))
        # Canonical keys ignore the cell index, so the caches carry over.
        for attr in ("_ckey", "_gkey"):
            if attr in self.__dict__:
                object.__setattr__(twin, attr, self.__dict__[attr])
        return twin

    def __eq__(self, other):
        if not isinstance(other, SpaceState):
            return NotImplemented
        return self.cell_index == other.cell_index and self.canonical_key == other.canonical_key

    def __hash__(self):
        return hash((self.canonical_key, self.cell_index))


def canonicalize(state: SpaceState) -> bytes:
    """Canonical byte key: equal for all vertex relabelings of the same
    labeled graph, distinct for non-isomorphic ones. Ignores cell_index."""
    return state.canonical_key


def is_isomorphic(a: SpaceState, b: SpaceState) -> bool:
    """True iff some vertex bijection preserves edges, edge lengths, and all
    vertex field labels exactly (cell indices are ignored)."""
    if a.n != b.n or len(a.geometry.edges) != len(b.geometry.edges):
        return False
    return a.canonical_key == b.canonical_key


def gauge_equivalent(a: SpaceState, b: SpaceState) -> bool:
    """Isomorphic up to a constant phase shift on all charged vertices."""
    if a.n != b.n or len(a.geometry.edges) != len(b.geometry.edges):
        return False
    return a.gauge_key == b.gauge_key


# ---------------------------------------------------------------------------
# Canonical labeling: iterated color refinement with edge labels, followed by
# individualization over the smallest ambiguous color class; the canonical
# form is the minimum byte string over all branches.
# ---------------------------------------------------------------------------


def _initial_colors(state: SpaceState) -> dict[int, int]:
    labels = {v: state.fields.get(v).label() for v in state.geometry.vertices}
    ranking = {lab: i for i, lab in enumerate(sorted(set(labels.values())))}
    return {v: ranking[labels[v]] for v in state.geometry.vertices}


def _refine(colors: dict[int, int], adj: dict[int, dict[int, Fraction]]) -> dict[int, int]:
    n_colors = len(set(colors.values()))
    while True:
        keys = {
            v: (colors[v], tuple(sorted((length, colors[u]) for u, length in adj[v].items())))
            for v in colors
        }
        ranking = {key: i for i, key in enumerate(sorted(set(keys.values())))}
        colors = {v: ranking[keys[v]] for v in colors}
        new_n = len(ranking)
        if new_n == n_colors:
            return colors
        n_colors = new_n


def _bytes_for_order(state: SpaceState, order: Sequence[int]) -> bytes:
    pos = {v: i for i, v in enumerate(order)}
    parts = [str(state.n)]
    for v in order:
        rec = state.fields.get(v)
        parts.append(f"{rec.species_tag},{rec.matter_amplitude},{rec.u1_phase.turns}")
    edge_lines = sorted(
        (min(pos[u], pos[v]), max(pos[u], pos[v]), length) for u, v, length in state.geometry.edges
    )
    parts.extend(f"{i},{j},{length}" for i, j, length in edge_lines)
    return ";".join(parts).encode("ascii")


def _canonical_bytes(state: SpaceState) -> bytes:
    adj = state.geometry.adjacency()

    def search(colors: dict[int, int]) -> bytes:
        colors = _refine(colors, adj)
        cells: dict[int, list[int]] = {}
        for v, c in colors.items():
            cells.setdefault(c, []).append(v)
        ambiguous = [(len(vs), c, vs) for c, vs in cells.items() if len(vs) > 1]
        if not ambiguous:
            order = sorted(colors, key=colors.get)
            return _bytes_for_order(state, order)
        # Branch over the smallest ambiguous class; the choice of class is
        # isomorphism-invariant because colors are canonically ranked.
        _, _, target = min(ambiguous, key=lambda item: (item[0], item[1]))
        fresh = len(cells)
        best = None
        for v in target:
            child = dict(colors)
            child[v] = fresh
            cand = search(child)
            if best is None or cand < best:
                best = cand
        return best

    return search(_initial_colors(state))


def _gauge_canonical_bytes(state: SpaceState) -> bytes:
    charged = state.charged_vertices()
    if not charged:
        return state.canonical_key
    # Rotating every charged phase so that some charged vertex sits at zero
    # produces a finite orbit-invariant candidate set; the minimum canonical
    # key over it identifies the gauge class exactly.
    offsets = {state.fields.get(v).u1_phase.turns for v in charged}
    return min(state.gauge_rotated(-delta).canonical_key for delta in sorted(offsets))


# ---------------------------------------------------------------------------
# Associability: how much of two geometries can be matched region-to-region.
# ---------------------------------------------------------------------------


class AssocKind(Enum):
    GLOBALLY_ASSOCIABLE = "globally_associable"
    PARTIALLY_DISSOCIATED = "partially_dissociated"
    COMPLETELY_DISSOCIATED = "completely_dissociated"


@dataclass(frozen=True)
class Associability:
    kind: AssocKind
    overlap_fraction: Fraction
    overlap_exact: bool = True

    @property
    def interference_weight(self) -> float:
        """Cross-term weight: 1 if globally associable, the overlap fraction
        if partially dissociated, 0 if completely dissociated."""
        if self.kind is AssocKind.GLOBALLY_ASSOCIABLE:
            return 1.0
        if self.kind is AssocKind.COMPLETELY_DISSOCIATED:
            return 0.0
        return float(self.overlap_fraction)


def _vertex_labels(state: SpaceState) -> dict[int, tuple]:
    return {v: state.fields.get(v).label() for v in state.geometry.vertices}


def common_subgraph_size(a: SpaceState, b: SpaceState, exact_limit: int = EXACT_SUBGRAPH_LIMIT) -> tuple[int, bool]:
    """Size of the largest common connected induced labeled subgraph.

    Exact up to `exact_limit` vertices on the larger graph; above that a
    greedy seed-and-extend search returns a lower bound (flagged False).
    """
    la, lb = _vertex_labels(a), _vertex_labels(b)
    adj_a, adj_b = a.geometry.adjacency(), b.geometry.adjacency()
    compat = {
        v: tuple(w for w in b.geometry.vertices if lb[w] == la[v]) for v in a.geometry.vertices
    }
    if all(len(ws) == 0 for ws in compat.values()):
        return 0, True
    if max(a.n, b.n) <= exact_limit:
        return _exact_mcs(a, b, la, lb, adj_a, adj_b, compat), True
    size = _greedy_mcs(a, b, adj_a, adj_b, compat)
    return size, size >= min(a.n, b.n)


def _consistent(adj_a, adj_b, mapping: dict[int, int], v: int, w: int) -> bool:
    for g, h in mapping.items():
        if adj_a[v].get(g) != adj_b[w].get(h):
            return False
    return True


def _exact_mcs(a, b, la, lb, adj_a, adj_b, compat) -> int:
    verts_a = a.geometry.vertices
    best = 0

    def class_bound(unused_a: set[int], used_b: set[int]) -> int:
        counts_a: dict[tuple, int] = {}
        counts_b: dict[tuple, int] = {}
        for v in unused_a:
            counts_a[la[v]] = counts_a.get(la[v], 0) + 1
        for w in b.geometry.vertices:
            if w not in used_b:
                counts_b[lb[w]] = counts_b.get(lb[w], 0) + 1
        return sum(min(c, counts_b.get(lab, 0)) for lab, c in counts_a.items())

    def extend(mapping: dict[int, int], used_b: set[int], banned: set[int]):
        nonlocal best
        if len(mapping) > best:
            best = len(mapping)
        frontier = sorted(
            v
            for v in verts_a
            if v not in mapping
            and v not in banned
            and any(g in mapping for g in adj_a[v])
        )
        if not frontier:
            return
        usable = {v for v in verts_a if v not in mapping and v not in banned}
        if len(mapping) + class_bound(usable, used_b) <= best:
            return
        v = frontier[0]
        for w in compat[v]:
            if w in used_b:
                continue
            if _consistent(adj_a, adj_b, mapping, v, w):
                mapping[v] = w
                used_b.add(w)
                extend(mapping, used_b, banned)
                used_b.discard(w)
                del mapping[v]
        banned.add(v)
        extend(mapping, used_b, banned)
        banned.discard(v)

    for i, v in enumerate(verts_a):
        # Every connected subgraph has a minimal seed vertex; ban the earlier
        # ones to avoid revisiting the same subgraphs from multiple seeds.
        banned = set(verts_a[:i])
        for w in compat[v]:
            extend({v: w}, {w}, banned)
    return best


def _greedy_mcs(a, b, adj_a, adj_b, compat) -> int:
    best = 0
    for v0 in a.geometry.vertices:
        for w0 in compat[v0]:
            mapping = {v0: w0}
            used_b = {w0}
            while True:
                grown = False
                for v in sorted(a.geometry.vertices):
                    if v in mapping or not any(g in mapping for g in adj_a[v]):
                        continue
                    for w in compat[v]:
                        if w not in used_b and _consistent(adj_a, adj_b, mapping, v, w):
                            mapping[v] = w
                            used_b.add(w)
                            grown = True
                            break
                    if grown:
                        break
                if not grown:
                    break
            best = max(best, len(mapping))
    return best


def classify_associability(a: SpaceState, b: SpaceState, k_min: int = 2) -> Associability:
    """Classify how two space-states can be matched.

    Globally associable means isomorphic up to a global U(1) phase offset on
    the charged vertices; partially dissociated means a shared connected
    region of at least k_min vertices exists; completely dissociated
    otherwise. Cell indices never enter the classification.
    """
    if k_min < 1:
        raise ValueError("k_min must be >= 1")
    if gauge_equivalent(a, b):
        return Associability(AssocKind.GLOBALLY_ASSOCIABLE, Fraction(1))
    size, exact = common_subgraph_size(a, b)
    min_n = min(a.n, b.n)
    frac = Fraction(size, min_n)
    if size >= k_min:
        return Associability(AssocKind.PARTIALLY_DISSOCIATED, frac, exact)
    return Associability(AssocKind.COMPLETELY_DISSOCIATED, frac, exact)


_ASSOC_CACHE: dict[tuple, Associability] = {}
_ASSOC_CACHE_MAX = 200_000


def classify_cached(a: SpaceState, b: SpaceState, k_min: int = 2) -> Associability:
    """Memoized classify_associability; the result depends only on the two
    canonical keys (symmetrically) and k_min."""
    ka, kb = a.canonical_key, b.canonical_key
    key = (ka, kb, k_min) if ka <= kb else (kb, ka, k_min)
    hit = _ASSOC_CACHE.get(key)
    if hit is None:
        if len(_ASSOC_CACHE) >= _ASSOC_CACHE_MAX:
            _ASSOC_CACHE.clear()
        hit = classify_associability(a, b, k_min)
        _ASSOC_CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# SSG1: versioned text serialization for a labeled graph with fields.
# Phases are written as exact fractions of a full turn.
# ---------------------------------------------------------------------------


def ssg1_dumps(state: SpaceState) -> str:
    lines = ["SSG1"]
    for v, rec in state.fields.fields:
        lines.append(f"v {v} {rec.species_tag} {rec.matter_amplitude} {rec.u1_phase.turns}")
    for u, v, length in state.geometry.edges:
        lines.append(f"e {u} {v} {length}")
    return "\n".join(lines) + "\n"


def ssg1_loads(text: str) -> SpaceState:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "SSG1":
        raise ValueError("missing SSG1 header")
    fields: dict[int, VertexField] = {}
    edges: list[tuple[int, int, Fraction]] = []
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "v" and len(parts) == 5:
            fields[int(parts[1])] = VertexField(
                int(parts[2]), Fraction(parts[3]), Phase.from_turns(Fraction(parts[4]))
            )
        elif parts[0] == "e" and len(parts) == 4:
            edges.append((int(parts[1]), int(parts[2]), Fraction(parts[3])))
        else:
            raise ValueError(f"bad SSG1 record: {ln!r}")
    graph = SpaceGraph.build(fields.keys(), edges)
    return SpaceState(graph, FieldConfig.build(fields))
