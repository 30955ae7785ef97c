from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spacestates import (
    AssocKind,
    Phase,
    SpaceGraph,
    SpaceState,
    canonicalize,
    classify_associability,
    common_subgraph_size,
    gauge_equivalent,
    is_isomorphic,
    ssg1_dumps,
    ssg1_loads,
)
from spacestates.corpus import random_relabeling, random_space_state
from spacestates.reference import (
    brute_force_assoc_kind,
    brute_force_common_subgraph_size,
    brute_force_isomorphic,
)

from conftest import path_state, uniform_path


class TestSpaceGraphValidation:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            SpaceGraph.build([0, 1], [(0, 0, 1)])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(ValueError, match="duplicate edge"):
            SpaceGraph.build([0, 1], [(0, 1, 1), (1, 0, 2)])

    def test_rejects_negative_length(self):
        with pytest.raises(ValueError, match="negative"):
            SpaceGraph.build([0, 1], [(0, 1, -1)])

    def test_rejects_empty_graph(self):
        with pytest.raises(ValueError, match="at least one vertex"):
            SpaceGraph.build([], [])

    def test_rejects_float_labels(self):
        with pytest.raises(TypeError, match="exact"):
            SpaceGraph.build([0, 1], [(0, 1, 0.5)])

    def test_zero_lengths_allowed(self):
        g = SpaceGraph.build([0, 1], [(0, 1, 0)])
        assert g.edges[0][2] == 0


class TestCanonicalKey:
    def test_relabeling_of_path_gives_identical_key(self):
        a = path_state([(1, 1, 0)] * 3, [1, 2])
        b = SpaceState.build(
            {0: (1, 1, 0), 1: (1, 1, 0), 2: (1, 1, 0)}, [(2, 1, 1), (1, 0, 2)]
        )
        assert canonicalize(a) == canonicalize(b)

    def test_changing_one_edge_length_changes_key(self):
        a = path_state([(1, 1, 0)] * 3, [1, 2])
        b = path_state([(1, 1, 0)] * 3, [3, 2])
        assert canonicalize(a) != canonicalize(b)

    def test_key_ignores_cell_index(self):
        a = uniform_path(3)
        assert canonicalize(a) == canonicalize(a.with_cell_index((0, 1)))

    def test_key_agrees_with_permutation_oracle_on_1000_random_pairs(self, rng):
        # Half the pairs are planted relabelings, half independent draws.
        for trial in range(1000):
            a = random_space_state(rng, n_min=3, n_max=8)
            if trial % 2 == 0:
                b = random_relabeling(rng, a)
            else:
                b = random_space_state(rng, n_min=3, n_max=8)
            assert (canonicalize(a) == canonicalize(b)) == brute_force_isomorphic(a, b)

    def test_key_invariant_under_sampled_permutations(self, rng):
        for _ in range(40):
            a = random_space_state(rng, n_min=4, n_max=8)
            key = canonicalize(a)
            for _ in range(5):
                assert canonicalize(random_relabeling(rng, a)) == key

    def test_exhaustive_on_all_four_vertex_uniform_graphs(self):
        # Every pair among all 64 edge subsets on 4 uniform-label vertices;
        # uniform labels give the refinement nothing to work with, so this
        # exercises the individualization search exhaustively.
        import itertools

        fields = {v: (1, 1, 0) for v in range(4)}
        all_edges = list(itertools.combinations(range(4), 2))
        graphs = []
        for mask in range(64):
            edges = [(u, v, 1) for i, (u, v) in enumerate(all_edges) if mask >> i & 1]
            graphs.append(SpaceState.build(fields, edges))
        for i in range(64):
            for j in range(i, 64):
                fast = canonicalize(graphs[i]) == canonicalize(graphs[j])
                assert fast == brute_force_isomorphic(graphs[i], graphs[j])

    def test_symmetric_graphs_get_exact_keys(self):
        # A 6-cycle with uniform labels forces the individualization search.
        fields = {v: (1, 1, 0) for v in range(6)}
        cyc = SpaceState.build(fields, [(v, (v + 1) % 6, 1) for v in range(6)])
        rotated = SpaceState.build(fields, [((v + 2) % 6, (v + 3) % 6, 1) for v in range(6)])
        assert canonicalize(cyc) == canonicalize(rotated)
        chord = SpaceState.build(
            fields, [(v, (v + 1) % 6, 1) for v in range(5)] + [(0, 2, 1)]
        )
        assert canonicalize(cyc) != canonicalize(chord)


class TestIsomorphism:
    def test_identical_states_isomorphic(self):
        a = uniform_path(4)
        assert is_isomorphic(a, a)

    def test_different_vertex_counts_not_isomorphic(self):
        assert not is_isomorphic(uniform_path(3), uniform_path(4))

    def test_randomized_relabelings_all_match(self, rng):
        a = random_space_state(rng, n_min=7, n_max=7)
        for _ in range(500):
            assert is_isomorphic(a, random_relabeling(rng, a))

    def test_equivalence_relation_on_sampled_triples(self, rng):
        for _ in range(30):
            a = random_space_state(rng, n_min=4, n_max=7)
            b = random_relabeling(rng, a)
            c = random_relabeling(rng, b)
            assert is_isomorphic(a, a)
            assert is_isomorphic(a, b) == is_isomorphic(b, a)
            assert is_isomorphic(a, b) and is_isomorphic(b, c) and is_isomorphic(a, c)

    def test_phase_difference_breaks_isomorphism(self):
        a = uniform_path(3)
        b = a.gauge_rotated(Fraction(1, 4))
        assert not is_isomorphic(a, b)
        assert gauge_equivalent(a, b)


class TestAssociability:
    def test_state_with_itself_globally_associable_for_any_k(self):
        a = uniform_path(5)
        for k in range(1, 6):
            res = classify_associability(a, a, k)
            assert res.kind is AssocKind.GLOBALLY_ASSOCIABLE
            assert res.overlap_fraction == 1

    def test_global_phase_offset_still_globally_associable(self):
        a = path_state([(1, 2, Fraction(1, 8)), (2, 1, Fraction(3, 4))], [2])
        b = a.gauge_rotated(Fraction(5, 8))
        res = classify_associability(a, b, 2)
        assert res.kind is AssocKind.GLOBALLY_ASSOCIABLE

    def test_neutral_species_phase_is_not_gauge(self):
        a = path_state([(0, 1, 0), (0, 1, 0)], [1])
        b = path_state([(0, 1, Fraction(1, 2)), (0, 1, Fraction(1, 2))], [1])
        assert not gauge_equivalent(a, b)

    def test_six_vertex_pair_sharing_four_vertex_region(self):
        # Shared region: a labeled 4-path; each state adds a distinct 2-arm.
        core = [(1, 1, 0), (1, 2, 0), (2, 1, 0), (2, 2, 0)]
        a = SpaceState.build(
            {**{i: core[i] for i in range(4)}, 4: (7, 1, 0), 5: (7, 2, 0)},
            [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (4, 5, 1)],
        )
        b = SpaceState.build(
            {**{i: core[i] for i in range(4)}, 4: (8, 1, 0), 5: (8, 2, 0)},
            [(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 4, 1), (4, 5, 1)],
        )
        assert brute_force_common_subgraph_size(a, b) == 4
        res = classify_associability(a, b, k_min=3)
        assert res.kind is AssocKind.PARTIALLY_DISSOCIATED
        assert res.overlap_fraction == Fraction(4, 6)

    def test_disjoint_species_alphabets_completely_dissociated(self):
        a = path_state([(1, 1, 0), (2, 1, 0), (1, 1, 0)])
        b = path_state([(3, 1, 0), (4, 1, 0), (3, 1, 0)])
        res = classify_associability(a, b, k_min=2)
        assert res.kind is AssocKind.COMPLETELY_DISSOCIATED
        assert res.overlap_fraction <= Fraction(1, 3)

    def test_symmetric_in_arguments(self, rng):
        for _ in range(50):
            a = random_space_state(rng, n_min=3, n_max=7)
            b = random_space_state(rng, n_min=3, n_max=7)
            ra = classify_associability(a, b, 2)
            rb = classify_associability(b, a, 2)
            assert ra.kind is rb.kind
            assert ra.overlap_fraction == rb.overlap_fraction

    def test_agrees_with_brute_force_on_random_corpus(self, rng):
        for trial in range(120):
            a = random_space_state(rng, n_min=3, n_max=7)
            if trial % 3 == 0:
                b = random_relabeling(rng, a.gauge_rotated(Fraction(trial % 8, 8)))
            else:
                b = random_space_state(rng, n_min=3, n_max=7)
            fast = classify_associability(a, b, 2)
            assert fast.kind is brute_force_assoc_kind(a, b, 2)
            if fast.kind is not AssocKind.GLOBALLY_ASSOCIABLE:
                size, exact = common_subgraph_size(a, b)
                assert exact
                assert size == brute_force_common_subgraph_size(a, b)

    def test_greedy_fallback_reports_lower_bound(self, rng):
        a = uniform_path(12)
        b = uniform_path(10)
        size, exact = common_subgraph_size(a, b)
        assert size <= 10
        assert size >= 2
        res = classify_associability(a, b, 2)
        assert res.kind in (AssocKind.PARTIALLY_DISSOCIATED, AssocKind.GLOBALLY_ASSOCIABLE)

    def test_k_min_validation(self):
        a = uniform_path(2)
        with pytest.raises(ValueError):
            classify_associability(a, a, 0)


class TestSerialization:
    def test_round_trip_is_bit_exact(self, rng):
        for _ in range(50):
            a = random_space_state(rng)
            text = ssg1_dumps(a)
            back = ssg1_loads(text)
            assert back == a
            assert ssg1_dumps(back) == text
            assert back.geometry == a.geometry
            assert back.fields == a.fields

    def test_header_required(self):
        with pytest.raises(ValueError, match="SSG1"):
            ssg1_loads("v 0 1 1 0\n")

    def test_format_shape(self):
        text = ssg1_dumps(path_state([(1, Fraction(3, 2), Fraction(1, 4)), (2, 1, 0)], [Fraction(1, 3)]))
        lines = text.splitlines()
        assert lines[0] == "SSG1"
        assert lines[1] == "v 0 1 3/2 1/4"
        assert lines[2] == "v 1 2 1 0"
        assert lines[3] == "e 0 1 1/3"


@st.composite
def small_states(draw):
    n = draw(st.integers(min_value=1, max_value=5))
    fields = {}
    for v in range(n):
        fields[v] = (
            draw(st.integers(min_value=0, max_value=2)),
            draw(st.integers(min_value=0, max_value=2)),
            Fraction(draw(st.integers(min_value=0, max_value=7)), 8),
        )
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if draw(st.booleans()):
                edges.append((u, v, draw(st.integers(min_value=0, max_value=2))))
    return SpaceState.build(fields, edges)


class TestProperties:
    @given(small_states(), st.permutations(list(range(5))))
    @settings(max_examples=60, deadline=None)
    def test_canonical_key_relabeling_invariant(self, state, perm):
        mapping = {v: perm[v] for v in state.geometry.vertices}
        relabeled = SpaceState.build(
            {
                mapping[v]: (rec.species_tag, rec.matter_amplitude, rec.u1_phase.turns)
                for v, rec in state.fields.fields
            },
            [(mapping[u], mapping[v], w) for u, v, w in state.geometry.edges],
        )
        assert canonicalize(relabeled) == canonicalize(state)

    @given(small_states(), st.integers(min_value=0, max_value=15))
    @settings(max_examples=40, deadline=None)
    def test_gauge_rotation_round_trip_exact(self, state, sixteenth):
        delta = Fraction(sixteenth, 16)
        assert state.gauge_rotated(delta).gauge_rotated(-delta) == state

    @given(st.floats(min_value=-10, max_value=10, allow_nan=False))
    @settings(max_examples=60, deadline=None)
    def test_phase_from_radians_in_range(self, radians):
        p = Phase.from_radians(radians)
        assert 0 <= p.turns < 1
