"""Sparse wavefunctional over space-state basis elements.

Entries are keyed by (canonical graph key, cell index), so equal physical
basis states never occupy two entries. Amplitudes below the prune tolerance
are dropped after every construction. Gauge absorption rewrites each complex
amplitude r*e^{i theta} as a non-negative density r on the state whose
charged phases have been shifted by theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from .macrostates import MacroPartition
from .spacegraph import TWO_PI, Phase, SpaceState, canonicalize

PRUNE_TOLERANCE = 1e-14

EntryKey = tuple[bytes, tuple[int, ...]]


class ZeroState(Exception):
    """Raised when an operation needs a nonzero state."""


class NoChargedField(Exception):
    """Raised when a basis state has no charged vertex to absorb a phase."""


class UnknownLabel(Exception):
    """Raised when a macro label is not part of the partition."""


def entry_key(state: SpaceState) -> EntryKey:
    return (canonicalize(state), state.cell_index)


@dataclass(frozen=True)
class Wavefunctional:
    """Sparse map from basis keys to (state, complex amplitude).

    Instances are treated as immutable; every operation returns a new value.
    """

    entries: dict[EntryKey, tuple[SpaceState, complex]]
    epoch: int = 0

    @classmethod
    def from_states(
        cls, pairs: Iterable[tuple[SpaceState, complex]], epoch: int = 0
    ) -> "Wavefunctional":
        acc: dict[EntryKey, tuple[SpaceState, complex]] = {}
        for state, amp in pairs:
            key = entry_key(state)
            if key in acc:
                acc[key] = (acc[key][0], acc[key][1] + complex(amp))
            else:
                acc[key] = (state, complex(amp))
        pruned = {k: v for k, v in sorted(acc.items()) if abs(v[1]) > PRUNE_TOLERANCE}
        return cls(pruned, epoch)

    def sorted_keys(self) -> list[EntryKey]:
        return sorted(self.entries)

    def amplitude(self, state: SpaceState) -> complex:
        hit = self.entries.get(entry_key(state))
        return hit[1] if hit else 0j

    def states(self) -> Iterator[SpaceState]:
        for key in self.sorted_keys():
            yield self.entries[key][0]

    def __len__(self) -> int:
        return len(self.entries)


def inner_product(a: Wavefunctional, b: Wavefunctional) -> complex:
    """Hermitian scalar product; summation runs in sorted key order so the
    result is independent of construction and thread count."""
    total = 0j
    for key in sorted(set(a.entries) & set(b.entries)):
        total += a.entries[key][1].conjugate() * b.entries[key][1]
    return total


def norm(psi: Wavefunctional) -> float:
    return math.sqrt(sum(abs(psi.entries[k][1]) ** 2 for k in psi.sorted_keys()))


def normalize(psi: Wavefunctional) -> Wavefunctional:
    n = norm(psi)
    if n == 0.0:
        raise ZeroState("cannot normalize the zero state")
    scaled = {k: (s, amp / n) for k, (s, amp) in psi.entries.items()}
    return Wavefunctional(scaled, psi.epoch)


def gauge_rotate(psi: Wavefunctional, theta: float) -> Wavefunctional:
    """Multiply every amplitude by e^{i theta} and shift every charged phase
    by theta: the same physical state in a different gauge representative."""
    turns = Phase.from_radians(theta).turns
    factor = complex(math.cos(theta), math.sin(theta))
    out = {}
    for key in psi.sorted_keys():
        state, amp = psi.entries[key]
        if not state.charged_vertices():
            raise NoChargedField("state has no charged vertex to absorb the phase")
        rotated = state.gauge_rotated(turns)
        out[entry_key(rotated)] = (rotated, amp * factor)
    return Wavefunctional(dict(sorted(out.items())), psi.epoch)


@dataclass(frozen=True)
class DensitizedView:
    """The wavefunctional as non-negative densities on gauge-shifted states.

    Keys match the source wavefunctional entry for entry; gauge_log records
    the absorbed phase, so reconstruct() reproduces the source exactly.
    """

    entries: dict[EntryKey, tuple[SpaceState, float]]
    gauge_log: dict[EntryKey, float]
    epoch: int = 0

    def sorted_keys(self) -> list[EntryKey]:
        return sorted(self.entries)

    def total_sq_weight(self) -> float:
        return sum(self.entries[k][1] ** 2 for k in self.sorted_keys())

    def __len__(self) -> int:
        return len(self.entries)


def gauge_absorb(psi: Wavefunctional) -> DensitizedView:
    """Rewrite each entry's amplitude in polar form and push the phase into
    the charged field configuration."""
    entries: dict[EntryKey, tuple[SpaceState, float]] = {}
    gauge_log: dict[EntryKey, float] = {}
    for key in psi.sorted_keys():
        state, amp = psi.entries[key]
        r = abs(amp)
        if r == 0.0:
            continue
        if not state.charged_vertices():
            raise NoChargedField("state has no charged vertex to absorb the phase")
        theta = math.atan2(amp.imag, amp.real) % TWO_PI
        rotated = state.gauge_rotated(Phase.from_radians(theta).turns)
        entries[key] = (rotated, r)
        gauge_log[key] = theta
    return DensitizedView(entries, gauge_log, psi.epoch)


def reconstruct(view: DensitizedView) -> Wavefunctional:
    """Inverse of gauge_absorb: amplitude r*e^{i theta} on the back-rotated
    state. States round-trip bit-exactly; amplitudes to ~1e-16."""
    pairs = {}
    for key in view.sorted_keys():
        state, r = view.entries[key]
        theta = view.gauge_log[key]
        amp = complex(r * math.cos(theta), r * math.sin(theta))
        original = state.gauge_rotated(-Phase.from_radians(theta).turns)
        pairs[key] = (original, amp)
    return Wavefunctional(pairs, view.epoch)


def _check_label(partition: MacroPartition, alpha: str) -> None:
    if partition.labels is not None and alpha not in partition.labels:
        raise UnknownLabel(f"{alpha!r} is not a label of partition {partition.name}")


def project(psi: Wavefunctional, partition: MacroPartition, alpha: str) -> Wavefunctional:
    """Keep exactly the entries whose macro label is alpha. Idempotent."""
    _check_label(partition, alpha)
    kept = {
        k: (s, amp) for k, (s, amp) in psi.entries.items() if partition.label_of(s) == alpha
    }
    return Wavefunctional(dict(sorted(kept.items())), psi.epoch)


def macro_weight(psi: Wavefunctional, partition: MacroPartition, alpha: str) -> float:
    """Squared norm of the projection onto the macro label alpha."""
    _check_label(partition, alpha)
    return sum(
        abs(psi.entries[k][1]) ** 2
        for k in psi.sorted_keys()
        if partition.label_of(psi.entries[k][0]) == alpha
    )


def macro_weights(psi: Wavefunctional, partition: MacroPartition) -> dict[str, float]:
    out: dict[str, float] = {}
    for k in psi.sorted_keys():
        state, amp = psi.entries[k]
        lab = partition.label_of(state)
        out[lab] = out.get(lab, 0.0) + abs(amp) ** 2
    return dict(sorted(out.items()))


def restricted_sq_norm(view: DensitizedView, partition: MacroPartition, alpha: str) -> float:
    """Squared norm of the density-weighted state restricted to one macro
    label; equals macro_weight of the source wavefunctional."""
    _check_label(partition, alpha)
    return sum(
        view.entries[k][1] ** 2
        for k in view.sorted_keys()
        if partition.label_of(view.entries[k][0]) == alpha
    )


# ---------------------------------------------------------------------------
# WFN1: versioned state dump. One record per entry: canonical key (hex), cell
# bits, amplitude as decimal strings, then the SSG1 block of the state.
# ---------------------------------------------------------------------------


def wfn1_dumps(psi: Wavefunctional) -> str:
    from .spacegraph import ssg1_dumps

    lines = [f"WFN1 epoch={psi.epoch} entries={len(psi.entries)}"]
    for key in psi.sorted_keys():
        state, amp = psi.entries[key]
        ckey, cell = key
        bits = "".join(str(b) for b in cell) or "-"
        lines.append(f"entry {ckey.hex()} {bits} {amp.real!r} {amp.imag!r}")
        lines.append(ssg1_dumps(state).rstrip("\n"))
        lines.append("end")
    return "\n".join(lines) + "\n"


def wfn1_loads(text: str) -> Wavefunctional:
    from .spacegraph import ssg1_loads

    lines = text.splitlines()
    if not lines or not lines[0].startswith("WFN1"):
        raise ValueError("missing WFN1 header")
    header = dict(part.split("=") for part in lines[0].split()[1:])
    epoch = int(header.get("epoch", 0))
    pairs = []
    i = 1
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        parts = lines[i].split()
        if parts[0] != "entry" or len(parts) != 5:
            raise ValueError(f"bad WFN1 record: {lines[i]!r}")
        bits = () if parts[2] == "-" else tuple(int(c) for c in parts[2])
        amp = complex(float(parts[3]), float(parts[4]))
        block = []
        i += 1
        while i < len(lines) and lines[i].strip() != "end":
            block.append(lines[i])
            i += 1
        i += 1
        state = ssg1_loads("\n".join(block)).with_cell_index(bits)
        pairs.append((state, amp))
    return Wavefunctional.from_states(pairs, epoch=epoch)
