"""Seeded experiment loops shared by the CLI and the test suites.

Every driver derives one independent stream per (master seed, purpose,
trial index), so trials are order-independent and each artifact can name
the exact stream that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from concurrent.futures import ProcessPoolExecutor

from . import subsetstate
from .circuit import Circuit, ccx_equivalent_count
from .copysim import (
    CopyEnsemble,
    apply_circuit,
    apply_circuit_recording,
    round_probes,
    sample_initial_copies,
)
from .f2linalg import (
    MonteCarloEstimate,
    is_full_row_rank,
    rank,
    sample_bernoulli_matrix,
    wilson_interval,
)
from .generators import (
    GenParams,
    ceil_rounds,
    depth_opt_thermalizer,
    gate_opt_thermalizer,
    sign_thermalizer,
)
from .rng import derive_seed, stream


@dataclass
class BitBatteryResult:
    """Per-trial outcomes of a bit-thermalizer run."""

    ensembles: list[CopyEnsemble]
    x_full_rank: list[bool] = field(default_factory=list)
    x_ranks: list[int] = field(default_factory=list)
    distinct: list[bool] = field(default_factory=list)
    ccx_counts: list[int] = field(default_factory=list)

    @property
    def x_full_rank_frequency(self) -> float:
        if not self.x_full_rank:
            raise ValueError("no condition-matrix diagnostics recorded")
        return sum(self.x_full_rank) / len(self.x_full_rank)

    @property
    def all_distinct(self) -> bool:
        return all(self.distinct)


def _bit_generator(algorithm: str) -> Callable[[GenParams], Circuit]:
    if algorithm == "gate-opt":
        return gate_opt_thermalizer
    if algorithm == "depth-opt":
        return depth_opt_thermalizer
    raise ValueError(f"unknown bit thermalizer {algorithm!r}")


def run_bit_battery(
    algorithm: str,
    n: int,
    k: int,
    t: int,
    m: int,
    alpha: float,
    trials: int,
    master_seed: int,
    diagnostics: bool = True,
) -> BitBatteryResult:
    """Run `trials` independent thermalizer executions.

    Each trial draws a fresh circuit and fresh initial copies.  With
    diagnostics on (gate-opt only), the stage-1 condition matrix is
    recorded through the run and its rank checked against t.
    """
    generator = _bit_generator(algorithm)
    result = BitBatteryResult(ensembles=[])
    per_gate_ccx = max(1, 2 * m - 3)
    for i in range(trials):
        circuit = generator(
            GenParams(n=n, k=k, t=t, alpha=alpha, m=m, seed=derive_seed(master_seed, "bit-circuit", i))
        )
        copies = sample_initial_copies(n, k, t, stream(master_seed, "bit-copies", i))
        if diagnostics and "rounds" in circuit.extra:
            final, x = apply_circuit_recording(copies, circuit, round_probes(circuit, stage=1))
            result.x_ranks.append(rank(x))
            result.x_full_rank.append(is_full_row_rank(x))
        else:
            final = apply_circuit(copies, circuit)
        result.ensembles.append(final)
        result.distinct.append(final.is_distinct())
        # every gate carries m controls, so the CCX total is gate-count
        # times the ladder cost; cross-checked on the first trials
        ccx = circuit.gate_count * per_gate_ccx
        if i < 8:
            assert ccx == ccx_equivalent_count(circuit)
        result.ccx_counts.append(ccx)
    return result


@dataclass
class SignTrialResult:
    sign_vectors: list[np.ndarray]
    layer_count: int
    gate_counts: list[int]


def _fast_sign_vector(
    n: int, p: int, alpha: float, t: int, m: int, circuit_seed: int, copies: CopyEnsemble
) -> tuple[np.ndarray, int]:
    """Final signs under a sign-thermalizer circuit, without gate objects.

    Sign gates are diagonal, so each copy's final sign is just the parity
    of the gate conditions it satisfies.  This kernel consumes the same
    random stream as ``sign_thermalizer`` draw for draw (the sign window
    always equals m*p, so the generator's permutation prefix is the full
    permutation), making its output bit-identical to the modular
    generate-then-simulate path.  Single-word systems only.
    """
    if n > 64 or copies.copies.shape[1] != 1:
        raise ValueError("fast sign kernel handles single-word systems only")
    rng = stream(circuit_seed, "gen", "sign")
    n_layers = ceil_rounds(alpha * t / p)
    mp = m * p
    perms = np.empty((n_layers, mp), dtype=np.int64)
    coins = np.empty((n_layers, mp + p), dtype=np.uint8)
    for li in range(n_layers):
        perms[li] = rng.permutation(mp)
        coins[li] = rng.integers(0, 2, size=mp + p, dtype=np.uint8)
    # positions are 1 + perm value, so the packed bit index is the perm
    # value itself; conditions group m consecutive entries
    bits = (np.uint64(1) << perms.astype(np.uint64)).reshape(n_layers * p, m)
    vals = coins[:, :mp].reshape(n_layers * p, m).astype(bool)
    masks = np.bitwise_or.reduce(bits, axis=1)
    pats = np.bitwise_or.reduce(np.where(vals, bits, np.uint64(0)), axis=1)
    fired = coins[:, mp:].reshape(-1).astype(bool)
    masks, pats = masks[fired], pats[fired]
    flat = copies.copies[:, 0]
    sat = (flat[None, :] & masks[:, None]) == pats[:, None]
    parity = np.bitwise_and(sat.sum(axis=0), 1).astype(np.int8)
    return (copies.signs * (1 - 2 * parity)).astype(np.int8), int(fired.sum())


def run_sign_trials(
    n: int, p: int, alpha: float, t: int, m: int, trials: int, master_seed: int,
    fast: bool = True,
) -> SignTrialResult:
    """Sign-thermalizer sweeps: fresh circuit and fresh t distinct uniform
    copies of the full n-bit space per trial; collects final sign vectors.

    ``fast`` routes single-word systems through the stream-identical
    diagonal kernel; the modular generate-then-simulate path is kept for
    cross-checks and for systems wider than 64 sites.
    """
    vectors: list[np.ndarray] = []
    gate_counts: list[int] = []
    layer_count = ceil_rounds(alpha * t / p)
    use_fast = fast and n <= 64
    for i in range(trials):
        circuit_seed = derive_seed(master_seed, "sign-circuit", i)
        copies = sample_initial_copies(n, n, t, stream(master_seed, "sign-copies", i))
        if use_fast:
            signs, fired = _fast_sign_vector(n, p, alpha, t, m, circuit_seed, copies)
            vectors.append(signs)
            gate_counts.append(fired)
        else:
            circuit = sign_thermalizer(n, p, alpha, t, m, seed=circuit_seed)
            layer_count = len(circuit.layers)
            final = apply_circuit(copies, circuit)
            vectors.append(final.signs.copy())
            gate_counts.append(circuit.gate_count)
    return SignTrialResult(vectors, layer_count, gate_counts)


def oracle_bit_ensembles(n: int, t: int, trials: int, master_seed: int) -> list[CopyEnsemble]:
    """Direct sampler of the thermalized target: t distinct uniform
    n-bit strings per trial (no circuit involved)."""
    return [
        sample_initial_copies(n, n, t, stream(master_seed, "oracle-bits", i)) for i in range(trials)
    ]


def frozen_initial_ensembles(n: int, k: int, t: int, trials: int, master_seed: int) -> list[CopyEnsemble]:
    """Unevolved initial ensembles; the thermalization tests must fail on
    these."""
    return [
        sample_initial_copies(n, k, t, stream(master_seed, "frozen-bits", i))
        for i in range(trials)
    ]


def oracle_sign_vectors(t: int, trials: int, master_seed: int) -> list[np.ndarray]:
    """Uniform +-1 vectors, the target distribution of the sign tests."""
    out = []
    for i in range(trials):
        rng = stream(master_seed, "oracle-signs", i)
        out.append((1 - 2 * rng.integers(0, 2, size=t)).astype(np.int8))
    return out


def ensemble_subsets(ensembles: Sequence[CopyEnsemble]) -> list[tuple[int, ...]]:
    """Each ensemble's copies as a sorted tuple of basis-string ints."""
    return [tuple(sorted(e.to_ints())) for e in ensembles]


@dataclass
class MomentExperiment:
    """Trace distances of a primary state ensemble and of an always-run
    oracle baseline from the maximally random moment, in one run."""

    n: int
    k: int
    t: int
    samples: int
    primary: str
    td_primary: float
    td_oracle: float
    params: dict


def run_moment_experiment(
    n: int,
    k: int,
    t: int,
    samples: int,
    master_seed: int,
    alpha_bit: float = 16.0,
    m_bit: int = 2,
    alpha_sign: float = 24.0,
    m_sign: int = 3,
    p_sign: int = 2,
    primary: str = "algorithm",
) -> MomentExperiment:
    """Empirical t-th-moment comparison at tiny scale.

    The algorithm ensemble evolves the initial subset state through a
    serial bit thermalizer followed by a sign thermalizer; the oracle
    baseline samples uniform subsets with uniform signs directly and is
    always computed.  ``primary="oracle"`` swaps the measured ensemble
    for a second, independent oracle run (a null comparison).

    The sign conditions span m_sign >= 3 sites by default: 1- and 2-site
    sign conditions cannot cancel sign products over XOR-closed image
    quadruples, which a t = 2 moment is sensitive to.
    """
    if primary not in ("algorithm", "oracle"):
        raise ValueError("primary must be 'algorithm' or 'oracle'")
    haar = subsetstate.haar_moment(n, t)

    def alg_states():
        for i in range(samples):
            bit_circuit = gate_opt_thermalizer(
                GenParams(n=n, k=k, t=t, alpha=alpha_bit, m=m_bit,
                          seed=derive_seed(master_seed, "moment-bit", i))
            )
            sign_circuit = sign_thermalizer(
                n, p_sign, alpha_sign, t, m_sign, seed=derive_seed(master_seed, "moment-sign", i)
            )
            state = subsetstate.initial_subset_state(n, k)
            state = subsetstate.apply_circuit(state, bit_circuit)
            yield subsetstate.apply_circuit(state, sign_circuit)

    def oracle_states(tag: str):
        for i in range(samples):
            yield subsetstate.sample_oracle_state(n, k, stream(master_seed, tag, i))

    if primary == "algorithm":
        primary_states = alg_states()
    else:
        primary_states = oracle_states("moment-primary-oracle")
    td_primary = subsetstate.trace_distance(subsetstate.empirical_moment(primary_states, t), haar)
    td_oracle = subsetstate.trace_distance(
        subsetstate.empirical_moment(oracle_states("moment-oracle"), t), haar
    )
    return MomentExperiment(
        n=n,
        k=k,
        t=t,
        samples=samples,
        primary=primary,
        td_primary=td_primary,
        td_oracle=td_oracle,
        params={
            "alpha_bit": alpha_bit,
            "m_bit": m_bit,
            "alpha_sign": alpha_sign,
            "m_sign": m_sign,
            "p_sign": p_sign,
        },
    )


def _mc_rank_chunk(args: tuple[int, int, float, int, int, int]) -> int:
    """Full-rank hits over one contiguous block of trial streams."""
    rows, cols, p, master_seed, lo, hi = args
    hits = 0
    for i in range(lo, hi):
        m = sample_bernoulli_matrix(rows, cols, p, stream(master_seed, "rank-mc", i))
        if is_full_row_rank(m):
            hits += 1
    return hits


def monte_carlo_full_rank_streamed(
    rows: int, cols: int, p: float, trials: int, master_seed: int, workers: int = 1
) -> MonteCarloEstimate:
    """Full-rank frequency with one named stream per trial index.

    The per-trial streams make the result independent of chunking, so any
    worker count reproduces the single-process answer bit for bit.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if workers <= 1:
        hits = _mc_rank_chunk((rows, cols, p, master_seed, 0, trials))
    else:
        chunk = max(64, -(-trials // workers))
        spans = [(rows, cols, p, master_seed, lo, min(lo + chunk, trials))
                 for lo in range(0, trials, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(_mc_rank_chunk, spans))
    return MonteCarloEstimate(hits / trials, wilson_interval(hits, trials), hits, trials)
