"""Local dynamics from graph rewrite rules.

A rewrite rule couples two space-states when its pattern fragment matches a
site (an injective induced subgraph match with exact field and edge-length
labels) and the replacement updates that site. Each application contributes
a symmetric coupling between the source and result states, so the assembled
generator is Hermitian by construction. Evolution applies the exact matrix
exponential on a breadth-first truncated basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .spacegraph import (
    FieldConfig,
    SpaceGraph,
    SpaceState,
    classify_cached,
    ssg1_dumps,
    ssg1_loads,
)
from .wavefunctional import EntryKey, Wavefunctional, entry_key

BOUNDARY_LEAK_TOLERANCE = 1e-8


class TruncationExceeded(Exception):
    """The reachable closure would pass max_dim and truncation was not accepted."""


class SupportEscape(Exception):
    """Amplitude leaked onto the truncated boundary beyond tolerance."""


class RuleFileError(Exception):
    """A rule file could not be parsed."""


def _is_connected(graph: SpaceGraph) -> bool:
    adj = graph.adjacency()
    start = graph.vertices[0]
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == graph.n


@dataclass(frozen=True)
class RewriteRule:
    """Pattern fragment -> replacement fragment with a real coupling strength.

    Pattern vertices match state vertices whose field labels are exactly
    equal; the match is induced, so edges between matched vertices must agree
    with the pattern (including lengths) and non-edges must be non-edges.
    Pattern vertex i corresponds to replacement vertex i for the shared
    prefix; extra pattern vertices are deleted (only if no outside edges
    dangle), extra replacement vertices are created fresh.
    """

    rule_id: int
    pattern: SpaceState
    replacement: SpaceState
    coupling: float

    def __post_init__(self):
        if not np.isfinite(self.coupling):
            raise ValueError("coupling must be finite")
        for frag, name in ((self.pattern, "pattern"), (self.replacement, "replacement")):
            if not _is_connected(frag.geometry):
                raise ValueError(f"{name} fragment must be connected")
            if frag.cell_index != ():
                raise ValueError(f"{name} fragment must have an empty cell index")

    def with_coupling(self, coupling: float) -> "RewriteRule":
        return RewriteRule(self.rule_id, self.pattern, self.replacement, coupling)


def find_matches(rule: RewriteRule, state: SpaceState) -> list[tuple[int, ...]]:
    """All injective induced matches of the pattern into the state, as tuples
    of state vertices aligned with the pattern's vertex order. The list is
    sorted, which fixes the site order for generator assembly."""
    pat = rule.pattern
    pat_adj = pat.geometry.adjacency()
    st_adj = state.geometry.adjacency()
    pat_fields = pat.fields.as_dict()
    st_fields = state.fields.as_dict()

    order = [pat.geometry.vertices[0]]
    remaining = [v for v in pat.geometry.vertices[1:]]
    while remaining:
        nxt = next(v for v in remaining if any(u in order for u in pat_adj[v]))
        order.append(nxt)
        remaining.remove(nxt)

    matches: list[tuple[int, ...]] = []

    def extend(i: int, mapping: dict[int, int], used: set[int]):
        if i == len(order):
            by_pattern_order = tuple(mapping[v] for v in pat.geometry.vertices)
            matches.append(by_pattern_order)
            return
        pv = order[i]
        want = pat_fields[pv].label()
        for sv in state.geometry.vertices:
            if sv in used or st_fields[sv].label() != want:
                continue
            ok = True
            for qv, qm in mapping.items():
                if pat_adj[pv].get(qv) != st_adj[sv].get(qm):
                    ok = False
                    break
            if ok:
                mapping[pv] = sv
                used.add(sv)
                extend(i + 1, mapping, used)
                used.discard(sv)
                del mapping[pv]

    extend(0, {}, set())
    return sorted(matches)


def apply_rule(rule: RewriteRule, state: SpaceState, match: tuple[int, ...]) -> SpaceState | None:
    """Rewrite one matched site; returns None when a deleted vertex still has
    edges outside the match (the application would dangle)."""
    pat_verts = rule.pattern.geometry.vertices
    rep_verts = rule.replacement.geometry.vertices
    shared = min(len(pat_verts), len(rep_verts))
    matched = set(match)
    site = {pat_verts[i]: match[i] for i in range(len(pat_verts))}
    deleted = {site[pat_verts[i]] for i in range(shared, len(pat_verts))}

    st_adj = state.geometry.adjacency()
    for d in deleted:
        if any(u not in matched for u in st_adj[d]):
            return None

    fields = {v: rec for v, rec in state.fields.fields if v not in deleted}
    rep_fields = rule.replacement.fields.as_dict()
    rep_map: dict[int, int] = {}
    fresh = max(state.geometry.vertices) + 1
    for i, rv in enumerate(rep_verts):
        if i < shared:
            rep_map[rv] = site[pat_verts[i]]
        else:
            rep_map[rv] = fresh
            fresh += 1
    for rv in rep_verts:
        fields[rep_map[rv]] = rep_fields[rv]

    edges = [
        (u, v, w)
        for u, v, w in state.geometry.edges
        if not (u in matched and v in matched) and u not in deleted and v not in deleted
    ]
    for u, v, w in rule.replacement.geometry.edges:
        edges.append((rep_map[u], rep_map[v], w))

    renumber = {v: i for i, v in enumerate(sorted(fields))}
    new_fields = FieldConfig.build({renumber[v]: rec for v, rec in fields.items()})
    new_graph = SpaceGraph.build(
        renumber.values(), [(renumber[u], renumber[v], w) for u, v, w in edges]
    )
    return SpaceState(new_graph, new_fields, state.cell_index)


def rule_applications(rule: RewriteRule, state: SpaceState) -> list[tuple[tuple[int, ...], SpaceState]]:
    out = []
    for match in find_matches(rule, state):
        result = apply_rule(rule, state, match)
        if result is not None:
            out.append((match, result))
    return out


@dataclass(frozen=True)
class Generator:
    """Hermitian coupling matrix on a truncated space-state basis."""

    basis: tuple[SpaceState, ...]
    matrix: np.ndarray
    boundary: frozenset[int]
    truncated: bool

    def index(self) -> dict[EntryKey, int]:
        cached = self.__dict__.get("_index")
        if cached is None:
            cached = {entry_key(s): i for i, s in enumerate(self.basis)}
            object.__setattr__(self, "_index", cached)
        return cached

    def propagator(self, dt: float) -> np.ndarray:
        """exp(-i * matrix * dt), memoized per time step."""
        cache = self.__dict__.setdefault("_propagators", {})
        u = cache.get(dt)
        if u is None:
            u = expm(-1j * dt * self.matrix)
            cache[dt] = u
        return u

    @property
    def dim(self) -> int:
        return len(self.basis)


def expand_reachable(
    seed: Wavefunctional,
    rules: list[RewriteRule],
    max_dim: int,
    accept_truncation: bool = False,
) -> Generator:
    """Breadth-first closure of the seed support under single rule
    applications, truncated at max_dim states. Each BFS level enters the
    basis in canonical-key order, so the basis is deterministic."""
    if len(seed) == 0:
        raise ValueError("seed wavefunctional is empty")
    if max_dim < len(seed):
        raise ValueError("max_dim must cover the seed support")

    ordered_rules = sorted(rules, key=lambda r: r.rule_id)
    basis: list[SpaceState] = [seed.entries[k][0] for k in seed.sorted_keys()]
    index = {entry_key(s): i for i, s in enumerate(basis)}

    frontier = list(basis)
    while frontier:
        discovered: dict[EntryKey, SpaceState] = {}
        for state in frontier:
            for rule in ordered_rules:
                for _match, result in rule_applications(rule, state):
                    key = entry_key(result)
                    if key not in index:
                        discovered.setdefault(key, result)
        fresh = [discovered[k] for k in sorted(discovered)]
        room = max_dim - len(basis)
        if len(fresh) > room and not accept_truncation:
            raise TruncationExceeded(f"closure exceeds max_dim={max_dim}")
        admitted = fresh[:room]
        for s in admitted:
            index[entry_key(s)] = len(basis)
            basis.append(s)
        frontier = admitted
        if len(fresh) > room:
            break

    # With the basis fixed, assemble the generator: each application at each
    # site adds one Hermitian term g(|result><source| + |source><result|).
    matrix = np.zeros((len(basis), len(basis)), dtype=complex)
    boundary: set[int] = set()
    truncated = False
    for src, state in enumerate(basis):
        for rule in ordered_rules:
            for _match, result in rule_applications(rule, state):
                dst = index.get(entry_key(result))
                if dst is None:
                    truncated = True
                    boundary.add(src)
                    continue
                matrix[src, dst] += rule.coupling
                matrix[dst, src] += rule.coupling
    if truncated and not accept_truncation:
        raise TruncationExceeded(f"closure exceeds max_dim={max_dim}")
    return Generator(tuple(basis), matrix, frozenset(boundary), truncated)


def evolve(
    psi: Wavefunctional,
    gen: Generator,
    dt: float,
    steps: int,
    allow_boundary_leak: bool = False,
) -> Wavefunctional:
    """Apply exp(-i * gen * dt) `steps` times on the truncated basis."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    index = gen.index()
    for key in psi.entries:
        if key not in index:
            raise ValueError("wavefunctional support escapes the generator basis")
    v = np.zeros(gen.dim, dtype=complex)
    for key, (state, amp) in psi.entries.items():
        v[index[key]] = amp
    if steps > 0 and gen.dim > 0:
        u = gen.propagator(dt)
        boundary = sorted(gen.boundary)
        for _ in range(steps):
            v = u @ v
            if gen.truncated and not allow_boundary_leak and boundary:
                leak = float(np.max(np.abs(v[boundary])))
                if leak > BOUNDARY_LEAK_TOLERANCE:
                    raise SupportEscape(
                        f"boundary amplitude {leak:.3e} exceeds {BOUNDARY_LEAK_TOLERANCE}"
                    )
    return Wavefunctional.from_states(zip(gen.basis, v), epoch=psi.epoch + 1)


@dataclass(frozen=True)
class LocalObservable:
    """Hermitian observable on an explicit space-state basis."""

    basis: tuple[SpaceState, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if not np.allclose(m, m.conj().T, atol=0, rtol=0):
            raise ValueError("observable matrix must be exactly Hermitian")
        object.__setattr__(self, "matrix", m)


def interference_term(
    psi: Wavefunctional, obs: LocalObservable, k_min: int = 2
) -> tuple[float, float]:
    """Expectation of the observable with and without dissociation masking.

    The masked value multiplies each cross term by the interference weight of
    the pair: 1 when globally associable, the overlap fraction when partially
    dissociated, 0 when completely dissociated.
    """
    index = {entry_key(s): i for i, s in enumerate(obs.basis)}
    for key in psi.entries:
        if key not in index:
            raise ValueError("wavefunctional support escapes the observable basis")
    v = np.zeros(len(obs.basis), dtype=complex)
    for key, (state, amp) in psi.entries.items():
        v[index[key]] = amp
    full = float(np.vdot(v, obs.matrix @ v).real)

    support = [i for i in range(len(obs.basis)) if v[i] != 0]
    masked = 0.0
    for i in support:
        masked += (abs(v[i]) ** 2) * obs.matrix[i, i].real
    for ai, i in enumerate(support):
        for j in support[ai + 1 :]:
            o = obs.matrix[i, j]
            if o == 0:
                continue
            weight = classify_cached(obs.basis[i], obs.basis[j], k_min).interference_weight
            if weight == 0.0:
                continue
            masked += 2.0 * weight * (v[i].conjugate() * v[j] * o).real
    return full, masked


# ---------------------------------------------------------------------------
# RUL1: versioned rule-file format. Each rule block holds the coupling and
# the pattern and replacement fragments as SSG1 blocks.
# ---------------------------------------------------------------------------


def rul1_dumps(rules: list[RewriteRule]) -> str:
    lines = ["RUL1"]
    for rule in sorted(rules, key=lambda r: r.rule_id):
        lines.append(f"rule {rule.rule_id} {rule.coupling!r}")
        lines.append("pattern")
        lines.append(ssg1_dumps(rule.pattern).rstrip("\n"))
        lines.append("replacement")
        lines.append(ssg1_dumps(rule.replacement).rstrip("\n"))
        lines.append("end")
    return "\n".join(lines) + "\n"


def rul1_loads(text: str) -> list[RewriteRule]:
    lines = [ln.rstrip() for ln in text.splitlines()]
    stripped = [ln for ln in lines if ln.strip()]
    if not stripped or stripped[0] != "RUL1":
        raise RuleFileError("missing RUL1 header")
    rules: list[RewriteRule] = []
    i = lines.index("RUL1") + 1
    try:
        while i < len(lines):
            if not lines[i].strip():
                i += 1
                continue
            head = lines[i].split()
            if head[0] != "rule" or len(head) != 3:
                raise RuleFileError(f"bad rule header: {lines[i]!r}")
            rule_id, coupling = int(head[1]), float(head[2])
            i += 1
            if lines[i].strip() != "pattern":
                raise RuleFileError("expected pattern block")
            i += 1
            pat_lines = []
            while lines[i].strip() != "replacement":
                pat_lines.append(lines[i])
                i += 1
            i += 1
            rep_lines = []
            while lines[i].strip() != "end":
                rep_lines.append(lines[i])
                i += 1
            i += 1
            rules.append(
                RewriteRule(
                    rule_id,
                    ssg1_loads("\n".join(pat_lines)),
                    ssg1_loads("\n".join(rep_lines)),
                    coupling,
                )
            )
    except (IndexError, ValueError) as exc:
        raise RuleFileError(f"malformed RUL1 file: {exc}") from exc
    return rules
