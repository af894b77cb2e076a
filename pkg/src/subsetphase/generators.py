"""Random multi-controlled circuit generators.

Five constructions, all pure functions of (parameters, seed):

* ``rmc`` / ``prmc``: the primitive condition samplers (one shared
  condition per round, or p disjoint conditions for parallel rounds).
* ``gate_opt_thermalizer``: two-stage serial bit thermalizer that keeps
  the total gate count low.
* ``depth_opt_thermalizer``: staged parallel bit thermalizer that grows
  the control region geometrically to keep the depth low.
* ``sign_thermalizer``: parallel signed-MCZ rounds that randomize the
  sign bits.

Generation is fully decoupled from simulation: generators emit
``Circuit`` values (plus round/stage metadata for diagnostics) and never
touch ensemble state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import MCX, SIGNED_MCZ, Circuit, ControlTerm, Gate, Layer
from .rng import stream

_EMPTY_LAYER = Layer(())


def ceil_rounds(x: float) -> int:
    """ceil(x) with a relative epsilon guard against float fuzz like
    ceil(0.1*30) -> 4."""
    return max(1, math.ceil(x - 1e-9 * max(1.0, abs(x))))


@dataclass(frozen=True)
class GenParams:
    """Shared generator parameters.

    ``rounds`` is the ceiling of alpha*t, the number of condition rounds
    per stage.
    """

    n: int
    k: int
    t: int
    alpha: float
    m: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 1 < self.k <= self.n:
            raise ValueError("k must satisfy 1 < k <= n")
        if self.t < 1:
            raise ValueError("t must be positive")
        if self.m < 1:
            raise ValueError("m must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def rounds(self) -> int:
        return ceil_rounds(self.alpha * self.t)

    def as_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "t": self.t, "alpha": self.alpha, "m": self.m}


def rmc(
    n: int, x1: int, x2: int, m: int, rng: np.random.Generator
) -> tuple[list[ControlTerm], np.ndarray]:
    """One round of shared-condition sampling.

    Draws m distinct control positions uniformly from the window
    [x1, x2], each with an independent fair-coin required value, plus a
    uniform mask over the complementary region (one bit per candidate
    target site, in the caller's target order).
    """
    if not (1 <= x1 < x2 <= n):
        raise ValueError("window must satisfy 1 <= x1 < x2 <= n")
    window = x2 - x1 + 1
    if not 1 <= m <= window:
        raise ValueError(f"m={m} exceeds window size {window}")
    # a permutation prefix is a uniform distinct draw; one fused coin
    # vector serves both the polarities and the mask
    positions = np.sort(rng.permutation(window)[:m])
    coins = rng.integers(0, 2, size=m + n - window, dtype=np.uint8)
    controls = [ControlTerm(x1 + int(p), int(v)) for p, v in zip(positions, coins[:m])]
    return controls, coins[m:]


def _prmc_raw(
    n: int, x1: int, x2: int, m: int, p: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw arrays behind ``prmc``: (positions, values, apply_bits).

    Kept separate so cost profiling can consume the identical random
    stream without materializing control terms for unapplied groups.
    """
    if not (1 <= x1 < x2 <= n):
        raise ValueError("window must satisfy 1 <= x1 < x2 <= n")
    if m < 1 or p < 1:
        raise ValueError("m and p must be positive")
    window = x2 - x1 + 1
    if m * p > window:
        raise ValueError(f"m*p={m * p} exceeds window size {window}")
    # a permutation prefix is a uniform random arrangement, so the
    # consecutive chunks of m form a uniform partition
    positions = x1 + rng.permutation(window)[: m * p]
    coins = rng.integers(0, 2, size=m * p + p, dtype=np.uint8)
    return positions, coins[: m * p], coins[m * p :]


def _group_terms(positions: np.ndarray, values: np.ndarray, m: int, i: int) -> list[ControlTerm]:
    base = i * m
    return [ControlTerm(int(positions[base + j]), int(values[base + j])) for j in range(m)]


def prmc(
    n: int, x1: int, x2: int, m: int, p: int, rng: np.random.Generator
) -> tuple[list[list[ControlTerm]], np.ndarray]:
    """One parallel round: p disjoint m-site conditions plus apply bits.

    Samples m*p distinct positions from [x1, x2] and partitions them
    uniformly into p groups of m (groups keep their random internal
    order); control polarities are i.i.d. fair coins, and each group is
    paired with an independent fair apply bit.
    """
    positions, values, apply_bits = _prmc_raw(n, x1, x2, m, p, rng)
    groups = [_group_terms(positions, values, m, i) for i in range(p)]
    return groups, apply_bits


def _sorted_controls(terms: list[ControlTerm]) -> tuple[ControlTerm, ...]:
    return tuple(sorted(terms, key=lambda c: c.position))


def gate_opt_thermalizer(gp: GenParams) -> Circuit:
    """Two-stage serial bit thermalizer.

    Stage 1 runs ``rounds`` shared-condition rounds with controls drawn
    from [1, k]; each round emits one m-MCX per target site in [k+1, n]
    whose mask bit is set (all gates of a round share the round's
    condition).  Stage 2 mirrors the construction with controls in
    [k+1, n] and targets in [1, k].

    The serial target sweep keeps one scheduling slot (one layer, empty
    when the mask bit is 0) per candidate target, so the layer count is
    rounds * n for every seed; only gate presence is random.
    """
    n, k, m = gp.n, gp.k, gp.m
    if m > k:
        raise ValueError("gate-opt requires m <= k (stage-1 controls live in [1, k])")
    if m > n - k:
        raise ValueError("gate-opt requires m <= n-k (stage-2 controls live in [k+1, n])")
    rng = stream(gp.seed, "gen", "gate-opt")
    rounds = gp.rounds
    layers: list[Layer] = []
    rounds_meta: list[dict] = []
    for stage, x1, x2, target_first in ((1, 1, k, k + 1), (2, k + 1, n, 1)):
        width = n - (x2 - x1 + 1)
        for _ in range(rounds):
            controls, mask = rmc(n, x1, x2, m, rng)
            rounds_meta.append(
                {
                    "stage": stage,
                    "layer": len(layers),
                    "controls": [[c.position, c.required_value] for c in controls],
                }
            )
            shared = tuple(controls)
            block = [_EMPTY_LAYER] * width
            for idx in np.flatnonzero(mask):
                block[idx] = Layer((Gate(MCX, shared, target_first + int(idx)),), check=False)
            layers.extend(block)
    extra = {"rounds": rounds_meta, "stage2_first_layer": rounds * (n - k)}
    return Circuit(
        n=n,
        layers=tuple(layers),
        generator="gate-opt",
        params=gp.as_dict(),
        seed=gp.seed,
        extra=extra,
    )


def _depth_opt_stages(n: int, k: int, m: int) -> list[tuple[int, int, int, int, int]]:
    """Stage table (x1, x2, p, slots, target_base) including the closer.

    Growth stage at control size s has p = floor(s/m) groups and targets
    s+1 .. s+slots (slots truncated at n); the closing stage draws
    controls from [k+1, n] and targets 1 .. min(p, k).
    """
    if m > k:
        raise ValueError("depth-opt requires m <= k")
    if n <= k:
        raise ValueError("depth-opt requires k < n")
    if (n - k) // m < 1:
        raise ValueError("closing phase needs at least one group: n-k >= m")
    stages = []
    s = k
    while s < n:
        p = s // m
        stages.append((1, s, p, min(p, n - s), s))
        s += p
    p_close = (n - k) // m
    stages.append((k + 1, n, p_close, min(p_close, k), 0))
    return stages


def depth_opt_stage_count(n: int, k: int, m: int) -> int:
    """Number of growth stages of the staged thermalizer (deterministic)."""
    return len(_depth_opt_stages(n, k, m)) - 1


def depth_opt_thermalizer(gp: GenParams) -> Circuit:
    """Staged parallel bit thermalizer.

    Growth stages: starting from s = k, each stage partitions [1, s] into
    p = floor(s/m) disjoint m-site conditions per round and targets sites
    s+1 .. s+p in parallel (targets past n are truncated in the final
    stage); after ``rounds`` such layers, s grows to s+p.  A closing
    phase then repeats the construction with controls drawn from
    [k+1, n] and targets sweeping [1, k].

    Every round is exactly one layer (kept even when no apply bit fires),
    so the unit-cost depth is (growth stages + 1) * rounds for all seeds.
    """
    n, k, m = gp.n, gp.k, gp.m
    stages = _depth_opt_stages(n, k, m)
    rng = stream(gp.seed, "gen", "depth-opt")
    rounds = gp.rounds
    layers: list[Layer] = []
    stages_meta: list[dict] = []
    for x1, x2, p, slots, target_base in stages:
        stages_meta.append(
            {
                "s": x2 if x1 == 1 else "closing",
                "p": p,
                "targets": slots,
                "first_layer": len(layers),
            }
        )
        for _ in range(rounds):
            positions, values, apply_bits = _prmc_raw(n, x1, x2, m, p, rng)
            gates = [
                Gate(MCX, _sorted_controls(_group_terms(positions, values, m, x)), target_base + x + 1)
                for x in range(slots)
                if apply_bits[x]
            ]
            layers.append(Layer(gates, check=False) if gates else _EMPTY_LAYER)
    extra = {"stages": stages_meta, "growth_stages": len(stages) - 1}
    return Circuit(
        n=n,
        layers=tuple(layers),
        generator="depth-opt",
        params=gp.as_dict(),
        seed=gp.seed,
        extra=extra,
    )


def sign_thermalizer(n: int, p: int, alpha: float, t: int, m: int, seed: int = 0) -> Circuit:
    """Parallel sign thermalizer.

    Emits ceil(alpha*t/p) layers.  Each layer partitions [1, m*p] into p
    disjoint m-site groups; every group whose apply bit fires becomes one
    signed MCZ whose controls are the group's first m-1 members and whose
    signed target is the group's last member (position and required
    value).  With m = 1 the gate degenerates to a single-site sign-flip
    condition.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if m < 1 or p < 1:
        raise ValueError("m and p must be positive")
    if m * p > n:
        raise ValueError("sign thermalizer requires m*p <= n")
    if m * p < 2:
        raise ValueError("condition window [1, m*p] needs at least 2 sites")
    if t < 1 or alpha <= 0:
        raise ValueError("t and alpha must be positive")
    rng = stream(seed, "gen", "sign")
    n_layers = ceil_rounds(alpha * t / p)
    layers: list[Layer] = []
    for _ in range(n_layers):
        positions, values, apply_bits = _prmc_raw(n, 1, m * p, m, p, rng)
        gates = []
        for x in range(p):
            if apply_bits[x]:
                terms = _group_terms(positions, values, m, x)
                gates.append(
                    Gate(
                        SIGNED_MCZ,
                        _sorted_controls(terms[: m - 1]),
                        terms[m - 1].position,
                        target_value=terms[m - 1].required_value,
                    )
                )
        layers.append(Layer(gates, check=False) if gates else _EMPTY_LAYER)
    params = {"n": n, "p": p, "t": t, "alpha": alpha, "m": m}
    extra = {"layer_count": n_layers, "slots_per_layer": p}
    return Circuit(
        n=n,
        layers=tuple(layers),
        generator="sign",
        params=params,
        seed=seed,
        extra=extra,
    )


@dataclass(frozen=True)
class CostMeasurement:
    """Measured costs of one generated circuit."""

    gates: int
    unit_depth: int
    decomposed_depth: int
    ccx_count: int


def _ladder(condition_size: int) -> int:
    return max(1, 2 * condition_size - 3)


def gate_opt_cost_profile(gp: GenParams) -> CostMeasurement:
    """Costs of ``gate_opt_thermalizer(gp)`` without materializing gates.

    Consumes exactly the same random stream as the full generator, so
    the counts match the real circuit's metrics for every seed.
    """
    n, k, m = gp.n, gp.k, gp.m
    if m > k or m > n - k:
        raise ValueError("gate-opt requires m <= min(k, n-k)")
    rng = stream(gp.seed, "gen", "gate-opt")
    rounds = gp.rounds
    cost = _ladder(m)
    gates = 0
    for x1, x2 in ((1, k), (k + 1, n)):
        for _ in range(rounds):
            _, mask = rmc(n, x1, x2, m, rng)
            gates += int(mask.sum())
    slots = rounds * n
    return CostMeasurement(gates, slots, gates * cost + (slots - gates), gates * cost)


def depth_opt_cost_profile(gp: GenParams) -> CostMeasurement:
    """Costs of ``depth_opt_thermalizer(gp)``; same stream, no gates."""
    n, k, m = gp.n, gp.k, gp.m
    stages = _depth_opt_stages(n, k, m)
    rng = stream(gp.seed, "gen", "depth-opt")
    rounds = gp.rounds
    cost = _ladder(m)
    gates = 0
    decomposed = 0
    for x1, x2, p, slots, _base in stages:
        for _ in range(rounds):
            _, _, apply_bits = _prmc_raw(n, x1, x2, m, p, rng)
            fired = int(apply_bits[:slots].sum())
            gates += fired
            decomposed += cost if fired else 1
    return CostMeasurement(gates, len(stages) * rounds, decomposed, gates * cost)


def sign_cost_profile(n: int, p: int, alpha: float, t: int, m: int, seed: int = 0) -> CostMeasurement:
    """Costs of ``sign_thermalizer(...)``; same stream, no gates."""
    rng = stream(seed, "gen", "sign")
    n_layers = ceil_rounds(alpha * t / p)
    cost = _ladder(m)  # m-site condition: m-1 controls plus the signed target
    gates = 0
    decomposed = 0
    for _ in range(n_layers):
        _, _, apply_bits = _prmc_raw(n, 1, m * p, m, p, rng)
        fired = int(apply_bits.sum())
        gates += fired
        decomposed += cost if fired else 1
    return CostMeasurement(gates, n_layers, decomposed, gates * cost)
