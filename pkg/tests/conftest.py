import random

import pytest

from spacestates import SpaceState


@pytest.fixture
def rng():
    return random.Random(20260808)


def path_state(labels, lengths=None, cell=()):
    """Path graph with per-vertex (species, matter, phase_turns) labels."""
    lengths = lengths or [1] * (len(labels) - 1)
    fields = {i: lab for i, lab in enumerate(labels)}
    edges = [(i, i + 1, lengths[i]) for i in range(len(labels) - 1)]
    return SpaceState.build(fields, edges, cell)


def uniform_path(n, species=1, matter=1, phase=0, length=1, cell=()):
    return path_state([(species, matter, phase)] * n, [length] * (n - 1), cell)
