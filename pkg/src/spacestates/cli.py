"""Experiment runner: config parsing, pipeline orchestration, file emission.

Configs are single JSON files with a strict key schema (unknown keys are
rejected). Identical config and seed produce byte-identical artifacts: all
floats are serialized as shortest round-trip decimals, every collection is
emitted in sorted order, and no timestamps enter any file.

Exit codes: 0 ok, 1 config error, 2 rule file error, 3 truncation refused,
4 numerical failure, 5 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .born import build_refinement, count_estimate, sample_selflocation
from .branching import branch_events_jsonl, irreversibility_scan, track
from .corpus import random_space_state, random_wavefunctional
from .dynamics import (
    Generator,
    RuleFileError,
    SupportEscape,
    TruncationExceeded,
    evolve,
    expand_reachable,
    rul1_loads,
)
from .macrostates import MacroPartition, builtin_classifiers, partition_by_name, verify_projector_algebra
from .reference import brute_force_assoc_kind
from .spacegraph import classify_associability, ssg1_loads
from .wavefunctional import (
    Wavefunctional,
    gauge_absorb,
    macro_weights,
    norm,
    normalize,
    reconstruct,
    wfn1_dumps,
)

ENV_PREFIX = "SPACESTATES_"
NORM_DRIFT_LIMIT = 1e-8


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    pass


_SCHEMA: dict[str, tuple[type, object]] = {
    # key: (type, default); None default means required.
    "rules_file": (str, None),
    "initial_state_file": (str, None),
    "partition": (dict, None),
    "k_min": (int, 2),
    "dt": ((int, float), 0.1),
    "steps": (int, 1),
    "epochs": (int, 4),
    "depth_max": (int, 10),
    "samples": (int, 100_000),
    "seed": (int, 0),
    "out_dir": (str, "out"),
    "max_dim": (int, 128),
    "accept_truncation": (bool, False),
    "horizon": (int, None),
    "verify_corpus": (int, 200),
}


@dataclass
class ExperimentConfig:
    rules_file: str
    initial_state_file: str
    partition_name: str
    partition_params: dict
    k_min: int
    dt: float
    steps: int
    epochs: int
    depth_max: int
    samples: int
    seed: int
    out_dir: str
    max_dim: int
    accept_truncation: bool
    horizon: int
    verify_corpus: int
    base_dir: Path

    @classmethod
    def from_file(cls, path: str, overrides: dict | None = None) -> "ExperimentConfig":
        p = Path(path)
        try:
            raw = json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(raw) - set(_SCHEMA))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values: dict = {}
        for key, (typ, default) in _SCHEMA.items():
            if key in raw:
                value = raw[key]
                if typ is int and isinstance(value, bool):
                    raise ConfigError(f"bad type for {key}")
                if not isinstance(value, typ):
                    raise ConfigError(f"bad type for {key}: expected {typ}, got {type(value).__name__}")
                values[key] = value
            elif default is not None or key == "horizon":
                values[key] = default
            else:
                raise ConfigError(f"missing required config key: {key}")
        for key, value in (overrides or {}).items():
            values[key] = value

        part = values["partition"]
        unknown_part = sorted(set(part) - {"name", "params"})
        if unknown_part:
            raise ConfigError(f"unknown partition keys: {', '.join(unknown_part)}")
        if "name" not in part or not isinstance(part["name"], str):
            raise ConfigError("partition.name is required")
        params = part.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("partition.params must be an object")

        cfg = cls(
            rules_file=values["rules_file"],
            initial_state_file=values["initial_state_file"],
            partition_name=part["name"],
            partition_params=params,
            k_min=values["k_min"],
            dt=float(values["dt"]),
            steps=values["steps"],
            epochs=values["epochs"],
            depth_max=values["depth_max"],
            samples=values["samples"],
            seed=values["seed"],
            out_dir=values["out_dir"],
            max_dim=values["max_dim"],
            accept_truncation=values["accept_truncation"],
            horizon=values["horizon"] if values["horizon"] is not None else values["epochs"],
            verify_corpus=values["verify_corpus"],
            base_dir=p.parent,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        checks = [
            (self.k_min >= 1, "k_min must be >= 1"),
            (math.isfinite(self.dt) and self.dt != 0, "dt must be finite and nonzero"),
            (self.steps >= 1, "steps must be >= 1"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (0 <= self.depth_max <= 24, "depth_max must be in [0, 24]"),
            (self.samples >= 1, "samples must be >= 1"),
            (self.max_dim >= 1, "max_dim must be >= 1"),
            (self.horizon >= 0, "horizon must be >= 0"),
            (self.verify_corpus >= 0, "verify_corpus must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def partition(self) -> MacroPartition:
        try:
            return partition_by_name(self.partition_name, self.partition_params)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad partition: {exc}") from exc

    def resolved(self) -> dict:
        return {
            "rules_file": self.rules_file,
            "initial_state_file": self.initial_state_file,
            "partition": {"name": self.partition_name, "params": self.partition_params},
            "k_min": self.k_min,
            "dt": repr(self.dt),
            "steps": self.steps,
            "epochs": self.epochs,
            "depth_max": self.depth_max,
            "samples": self.samples,
            "seed": self.seed,
            "max_dim": self.max_dim,
            "accept_truncation": self.accept_truncation,
            "horizon": self.horizon,
            "verify_corpus": self.verify_corpus,
        }

    def sha256(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def resolve_path(self, relative: str) -> Path:
        p = Path(relative)
        return p if p.is_absolute() else self.base_dir / p


def _load_inputs(config: ExperimentConfig):
    try:
        initial_text = config.resolve_path(config.initial_state_file).read_text()
        initial = ssg1_loads(initial_text)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load initial state: {exc}") from exc
    try:
        rules = rul1_loads(config.resolve_path(config.rules_file).read_text())
    except OSError as exc:
        raise RuleFileError(f"cannot read rules file: {exc}") from exc
    return initial, rules


def run(config: ExperimentConfig, threads: int = 1) -> dict[str, str]:
    """Execute the pipeline and write all artifacts; returns {filename: sha256}."""
    partition = config.partition()
    initial, rules = _load_inputs(config)
    psi0 = normalize(Wavefunctional.from_states([(initial, 1.0 + 0j)]))
    gen = expand_reachable(psi0, rules, config.max_dim, config.accept_truncation)

    series = [psi0]
    for _ in range(config.epochs):
        nxt = evolve(
            series[-1], gen, config.dt, config.steps, allow_boundary_leak=config.accept_truncation
        )
        drift = abs(norm(nxt) - 1.0)
        if drift > NORM_DRIFT_LIMIT:
            raise NumericalFailure(f"norm drift {drift:.3e} exceeds {NORM_DRIFT_LIMIT}")
        series.append(nxt)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, str] = {}

    def emit(name: str, text: str) -> None:
        data = text.encode("utf-8")
        (out_dir / name).write_bytes(data)
        artifacts[name] = hashlib.sha256(data).hexdigest()

    weight_rows = ["epoch,label,weight"]
    for epoch, psi in enumerate(series):
        for label, weight in macro_weights(psi, partition).items():
            weight_rows.append(f"{epoch},{label},{weight!r}")
    emit("weights.csv", "\n".join(weight_rows) + "\n")

    tree = track(series, partition, config.k_min)
    irreversibility_scan(tree, config.horizon)
    emit("branches.jsonl", branch_events_jsonl(tree))
    summary_rows = ["epoch,branch_count,entropy"]
    entropies = tree.entropies()
    for epoch, count in enumerate(tree.branch_counts()):
        summary_rows.append(f"{epoch},{count},{entropies[epoch]!r}")
    emit("branch_summary.csv", "\n".join(summary_rows) + "\n")

    view = gauge_absorb(normalize(series[-1]))
    refinement = build_refinement(view, config.depth_max, partition)
    count_rows = ["depth,label,n_alpha,straddlers,estimate,exact,bound"]
    for depth in range(config.depth_max + 1):
        report = count_estimate(refinement, partition, depth)
        for lc in report.per_label:
            count_rows.append(
                f"{depth},{lc.label},{lc.n_alpha},{report.straddlers},"
                f"{float(lc.estimate)!r},{float(lc.exact)!r},{float(lc.bound)!r}"
            )
    emit("count_report.csv", "\n".join(count_rows) + "\n")

    freqs = sample_selflocation(view, partition, config.samples, config.seed)
    sampler_rows = ["label,frequency"]
    sampler_rows.extend(f"{label},{freq!r}" for label, freq in freqs.items())
    emit("sampler.csv", "\n".join(sampler_rows) + "\n")

    emit("initial_state.wfn", wfn1_dumps(psi0))
    emit("final_state.wfn", wfn1_dumps(series[-1]))

    manifest = {
        "config_sha256": config.sha256(),
        "files": dict(sorted(artifacts.items())),
        "seed": config.seed,
        "tool_version": __version__,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return artifacts


# ---------------------------------------------------------------------------
# Verification suite.
# ---------------------------------------------------------------------------


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def verify(
    config: ExperimentConfig, threads: int = 1, inject_faults: frozenset[str] = frozenset()
) -> tuple[list[str], bool]:
    """Run the invariant suite; returns (report lines, all_passed)."""
    lines: list[str] = []
    ok = True

    def record(name: str, status: str, detail: str = "") -> None:
        nonlocal ok
        if status == "FAIL":
            ok = False
        lines.append(f"{status} {name}" + (f": {detail}" if detail else ""))

    rng = random.Random(config.seed)
    corpus = [random_space_state(rng) for _ in range(config.verify_corpus)]

    # Projector algebra on every builtin partition.
    if not corpus:
        record("projector-algebra", "SKIP", "empty corpus")
    else:
        bad = []
        for partition in builtin_classifiers():
            report = verify_projector_algebra(partition, corpus)
            if not report.passed:
                bad.append(f"{partition.name}: {report.violations}")
        record("projector-algebra", "FAIL" if bad else "PASS", "; ".join(bad))

    # Unitarity of evolution on a synthetic 64-dimensional generator.
    states = []
    seen = set()
    while len(states) < 64:
        s = random_space_state(rng, n_min=4, n_max=7)
        if s.canonical_key not in seen:
            seen.add(s.canonical_key)
            states.append(s)
    nrng = np.random.Generator(np.random.Philox(config.seed))
    a = nrng.normal(size=(64, 64)) + 1j * nrng.normal(size=(64, 64))
    h = a + a.conj().T
    gen = Generator(tuple(states), h, frozenset(), False)
    amps = nrng.normal(size=64) + 1j * nrng.normal(size=64)
    psi = normalize(Wavefunctional.from_states(zip(states, amps)))
    evolved = evolve(psi, gen, dt=0.02, steps=100)
    drift = abs(norm(evolved) - 1.0)
    if "unitarity-norm" in inject_faults:
        drift += 1e-6
    record(
        "unitarity",
        "PASS" if drift < 1e-10 else "FAIL",
        f"norm drift {drift:.3e}",
    )

    # Gauge absorption round trip.
    worst = 0.0
    for _ in range(10):
        psi = random_wavefunctional(rng, n_entries=8)
        view = gauge_absorb(psi)
        if any(r < 0 for _s, r in view.entries.values()):
            record("gauge-roundtrip", "FAIL", "negative density")
            break
        back = reconstruct(view)
        if set(back.entries) != set(psi.entries):
            record("gauge-roundtrip", "FAIL", "support changed")
            break
        worst = max(
            worst,
            max(abs(back.entries[k][1] - psi.entries[k][1]) for k in psi.entries),
        )
    else:
        record(
            "gauge-roundtrip",
            "PASS" if worst <= 1e-15 else "FAIL",
            f"max amplitude error {worst:.3e}",
        )

    # Refinement cell weights.
    partition = config.partition()
    psi = random_wavefunctional(rng, n_entries=24)
    tree = build_refinement(gauge_absorb(psi), 8, partition)
    worst = 0.0
    for depth in range(tree.depth + 1):
        target = tree.total_weight() / 2**depth
        for i in range(2**depth):
            worst = max(worst, abs(float(tree.cell_weight(depth, i) - target)))
    record(
        "refinement-weights",
        "PASS" if worst <= 1e-12 else "FAIL",
        f"max cell deviation {worst:.3e}",
    )

    # Associability classifier against the brute-force oracle.
    if not corpus:
        record("oracle-equivalence", "SKIP", "empty corpus")
    else:
        pairs = min(len(corpus) // 2, 40)
        sample = [(corpus[2 * i], corpus[2 * i + 1]) for i in range(pairs)]

        def agree(pair):
            a, b = pair
            fast = classify_associability(a, b, config.k_min).kind
            slow = brute_force_assoc_kind(a, b, config.k_min)
            return fast is slow

        results = _pmap(agree, sample, threads)
        bad = results.count(False)
        record(
            "oracle-equivalence",
            "PASS" if bad == 0 else "FAIL",
            f"{len(results) - bad}/{len(results)} agree",
        )

    return lines, ok


# ---------------------------------------------------------------------------
# Entry point.
# ---------------------------------------------------------------------------


def _env_overrides() -> dict:
    overrides = {}
    if os.environ.get(ENV_PREFIX + "SEED"):
        overrides["seed"] = int(os.environ[ENV_PREFIX + "SEED"])
    if os.environ.get(ENV_PREFIX + "OUT"):
        overrides["out_dir"] = os.environ[ENV_PREFIX + "OUT"]
    return overrides


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(ENV_PREFIX + "THREADS")
    return int(env) if env else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="spacestates",
        description="Branching-wavefunctional experiments on labeled-graph geometries. "
        f"Environment overrides: {ENV_PREFIX}SEED, {ENV_PREFIX}OUT, {ENV_PREFIX}THREADS "
        "(command-line flags win).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "verify"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default 1)")
        p.add_argument("--out", default=None, help="override the output directory")
        if name == "verify":
            p.add_argument(
                "--inject-fault",
                action="append",
                default=[],
                help="testing hook: inject a named fault (e.g. unitarity-norm)",
            )
    args = parser.parse_args(argv)

    overrides = _env_overrides()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out

    try:
        config = ExperimentConfig.from_file(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            artifacts = run(config, threads=_threads(args))
            print(f"wrote {len(artifacts) + 1} artifacts to {config.out_dir}")
            return 0
        lines, ok = verify(
            config, threads=_threads(args), inject_faults=frozenset(args.inject_fault)
        )
        for line in lines:
            print(line)
        return 0 if ok else 5
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except RuleFileError as exc:
        print(f"rule file error: {exc}", file=sys.stderr)
        return 2
    except TruncationExceeded as exc:
        print(f"truncation refused: {exc}", file=sys.stderr)
        return 3
    except (NumericalFailure, SupportEscape) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
