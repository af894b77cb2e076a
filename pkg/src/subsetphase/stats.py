"""Statistical tests quantifying thermalization of bits, signs, subsets.

Each test folds a batch of trial outcomes into a ``TestReport`` with the
raw statistic, a p-value or total-variation value, and a pass/fail at
the configured threshold.  Defaults follow one policy: family-wise
significance 1e-3, Bonferroni-corrected across cells where a test scans
many cells.  Thresholds are recorded in the report so sweeps can be
re-decided offline.  All tests are pure folds over their inputs, so
outcomes are deterministic for seeded trial data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, sqrt
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .copysim import CopyEnsemble

DEFAULT_ALPHA = 1e-3
_MIN_EXPECTED_FOR_CHI2 = 5.0


@dataclass
class TestReport:
    """Outcome of one statistical test."""

    __test__ = False  # not a pytest class, despite the name

    name: str
    statistic: float
    samples: int
    passed: bool
    threshold: float
    p_value: float | None = None
    tv: float | None = None
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")
        if self.tv is not None and not 0.0 <= self.tv <= 1.0 + 1e-12:
            raise ValueError("tv must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "tv": self.tv,
            "samples": self.samples,
            "passed": bool(self.passed),
            "threshold": self.threshold,
            "seed": self.seed,
            "details": self.details,
        }


def tv_distance(hist: np.ndarray | dict, reference: np.ndarray | dict) -> float:
    """Total variation between an empirical histogram and a reference
    distribution over the same finite domain."""
    if isinstance(hist, dict) or isinstance(reference, dict):
        if not (isinstance(hist, dict) and isinstance(reference, dict)):
            raise ValueError("histogram and reference must use the same domain encoding")
        if set(hist) != set(reference):
            raise ValueError("histogram and reference domains differ")
        keys = list(hist)
        counts = np.array([hist[k] for k in keys], dtype=float)
        ref = np.array([reference[k] for k in keys], dtype=float)
    else:
        counts = np.asarray(hist, dtype=float)
        ref = np.asarray(reference, dtype=float)
        if counts.shape != ref.shape:
            raise ValueError("histogram and reference domains differ")
    total = counts.sum()
    if total <= 0:
        raise ValueError("histogram is empty")
    return float(0.5 * np.abs(counts / total - ref).sum())


def _bit_counts(ensembles: Sequence[CopyEnsemble]) -> tuple[np.ndarray, int, int]:
    first = ensembles[0]
    t, n = first.t, first.n
    counts = np.zeros((t, n), dtype=np.int64)
    for e in ensembles:
        if e.t != t or e.n != n:
            raise ValueError("all ensembles must share (t, n)")
        counts += e.bits()
    return counts, t, n


def marginal_bias_test(
    ensembles: Sequence[CopyEnsemble],
    alpha: float = DEFAULT_ALPHA,
    seed: int | None = None,
) -> TestReport:
    """Per-(copy, site) frequency of bit = 1 against the fair value 1/2.

    Flags any cell whose z-score exceeds the two-sided threshold at
    family-wise level ``alpha`` Bonferroni-corrected over all t*n cells
    (never below 4 sigma).  Needs at least 10^3 trials.
    """
    n_trials = len(ensembles)
    if n_trials < 1000:
        raise ValueError("marginal bias test needs at least 1000 trials")
    counts, t, n = _bit_counts(ensembles)
    cells = t * n
    sigma = 0.5 / sqrt(n_trials)
    z = (counts / n_trials - 0.5) / sigma
    z_crit = max(4.0, float(sps.norm.ppf(1.0 - alpha / (2.0 * cells))))
    flagged = np.argwhere(np.abs(z) > z_crit)
    max_abs_z = float(np.abs(z).max())
    return TestReport(
        name="marginal_bias",
        statistic=max_abs_z,
        samples=n_trials,
        passed=flagged.size == 0,
        threshold=z_crit,
        p_value=float(min(1.0, cells * 2.0 * sps.norm.sf(max_abs_z))),
        seed=seed,
        details={
            "cells": cells,
            "flagged": [
                {"copy": int(c) + 1, "site": int(s) + 1, "freq": counts[c, s] / n_trials}
                for c, s in flagged[:32]
            ],
            "flagged_count": int(flagged.shape[0]),
        },
    )


def pairwise_xor_test(
    ensembles: Sequence[CopyEnsemble],
    alpha: float = DEFAULT_ALPHA,
    seed: int | None = None,
) -> TestReport:
    """Fairness of the XOR between every copy pair at every site.

    Independent uniform copies make each pairwise XOR a fair bit; copies
    sharing one flip variable make it constant.  Aggregates one
    chi-square over all pair*site cells.  Under the null the cells are
    pairwise uncorrelated (triples are mildly dependent, inflating the
    variance a little), so the chi-square reference is approximate; the
    1e-3 threshold leaves ample slack for that.
    """
    n_trials = len(ensembles)
    if n_trials < 1000:
        raise ValueError("pairwise xor test needs at least 1000 trials")
    first = ensembles[0]
    t, n = first.t, first.n
    if t < 2:
        raise ValueError("need at least two copies for pairwise tests")
    pairs = [(p, q) for p in range(t) for q in range(p + 1, t)]
    counts = np.zeros((len(pairs), n), dtype=np.int64)
    for e in ensembles:
        if e.t != t or e.n != n:
            raise ValueError("all ensembles must share (t, n)")
        bits = e.bits()
        for idx, (p, q) in enumerate(pairs):
            counts[idx] += bits[p] ^ bits[q]
    cells = len(pairs) * n
    chi2 = float((((counts - n_trials / 2.0) ** 2) / (n_trials / 4.0)).sum())
    p_value = float(sps.chi2.sf(chi2, cells))
    return TestReport(
        name="pairwise_xor",
        statistic=chi2,
        samples=n_trials,
        passed=p_value > alpha,
        threshold=alpha,
        p_value=p_value,
        seed=seed,
        details={"cells": cells, "dof": cells},
    )


def _uniform_chi2_p(counts: np.ndarray, n_trials: int, seed: int | None) -> tuple[float, float]:
    """Chi-square p-value against the uniform distribution.

    Below 5 expected counts per cell the asymptotic reference is poor, so
    the tail is estimated from 4000 seeded multinomial draws (resolution
    ~2.5e-4, adequate around the 1e-3 decision threshold).
    """
    bins = counts.shape[0]
    expected = n_trials / bins
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    if expected >= _MIN_EXPECTED_FOR_CHI2:
        return chi2, float(sps.chi2.sf(chi2, bins - 1))
    rng = np.random.default_rng(0 if seed is None else seed)
    probs = np.full(bins, 1.0 / bins)
    n_draws, chunk = 4000, 250
    exceed = 0
    for lo in range(0, n_draws, chunk):
        draws = rng.multinomial(n_trials, probs, size=min(chunk, n_draws - lo))
        sim = ((draws - expected) ** 2 / expected).sum(axis=1)
        exceed += int((sim >= chi2).sum())
    return chi2, exceed / n_draws


def sign_vector_test(
    sign_vectors: Iterable[np.ndarray],
    t: int,
    alpha: float = DEFAULT_ALPHA,
    seed: int | None = None,
) -> TestReport:
    """Chi-square of the 2^t histogram of sign vectors against uniform.

    ``sign_vectors`` holds one +-1 vector per trial; only the first t
    entries of each are used (subsampling large ensembles is how wide
    sign registers stay testable).  Needs t <= 16 and >= 10^4 trials.
    """
    if t > 16:
        raise ValueError("sign vector test capped at t <= 16")
    counts = np.zeros(1 << t, dtype=np.int64)
    n_trials = 0
    for sv in sign_vectors:
        v = np.asarray(sv)
        if v.shape[0] < t:
            raise ValueError(f"sign vector shorter than t={t}")
        idx = 0
        for i in range(t):
            if v[i] < 0:
                idx |= 1 << i
        counts[idx] += 1
        n_trials += 1
    if n_trials < 10_000:
        raise ValueError("sign vector test needs at least 10^4 trials")
    chi2, p_value = _uniform_chi2_p(counts, n_trials, seed)
    return TestReport(
        name="sign_vector",
        statistic=chi2,
        samples=n_trials,
        passed=p_value > alpha,
        threshold=alpha,
        p_value=p_value,
        seed=seed,
        details={"bins": 1 << t, "expected_per_bin": n_trials / (1 << t)},
    )


def expected_uniform_tv(bins: int, n_trials: int) -> float:
    """Sampling-noise scale of the TV of an n-trial empirical histogram
    against the uniform distribution on ``bins`` cells."""
    return 0.5 * sqrt(2.0 * bins / (np.pi * n_trials))


def subset_uniformity_test(
    subsets: Sequence[frozenset[int] | tuple[int, ...]],
    n: int,
    t: int,
    threshold: float | None = None,
    seed: int | None = None,
) -> TestReport:
    """TV of the empirical t-subset distribution against uniform.

    The domain is every t-element subset of {0,1}^n and must stay
    enumerable (at most 10^5 subsets).  The default threshold allows
    twice the expected sampling noise plus a small floor; pass explicit
    thresholds when a criterion pins one.
    """
    domain = comb(1 << n, t)
    if domain > 100_000:
        raise ValueError(f"{domain} possible subsets; domain capped at 10^5 (shrink n or t)")
    n_trials = len(subsets)
    if n_trials < 1:
        raise ValueError("need at least one sample")
    tally: dict[tuple[int, ...], int] = {}
    for s in subsets:
        key = tuple(sorted(s))
        if len(key) != t or len(set(key)) != t:
            raise ValueError("each sample must be a t-element subset")
        tally[key] = tally.get(key, 0) + 1
    u = 1.0 / domain
    seen_mass = 0.0
    for count in tally.values():
        seen_mass += abs(count / n_trials - u)
    tv = 0.5 * (seen_mass + (domain - len(tally)) * u)
    if threshold is None:
        threshold = min(0.9, 2.0 * expected_uniform_tv(domain, n_trials) + 0.02)
    return TestReport(
        name="subset_uniformity",
        statistic=tv,
        samples=n_trials,
        passed=tv <= threshold,
        threshold=threshold,
        tv=tv,
        seed=seed,
        details={"domain": domain, "distinct_observed": len(tally)},
    )


def subset_collision_test(
    subsets: Sequence[frozenset[int] | tuple[int, ...]],
    n: int,
    t: int,
    alpha: float = DEFAULT_ALPHA,
    seed: int | None = None,
) -> TestReport:
    """Collision-rate fallback when the subset domain is too large to
    enumerate: under uniformity two independent samples collide with
    probability 1/binom(2^n, t), so the pairwise collision count among N
    samples is approximately Poisson with mean binom(N, 2)/domain."""
    domain = comb(1 << n, t)
    n_trials = len(subsets)
    if n_trials < 2:
        raise ValueError("need at least two samples")
    tally: dict[tuple[int, ...], int] = {}
    for s in subsets:
        key = tuple(sorted(s))
        tally[key] = tally.get(key, 0) + 1
    collisions = sum(c * (c - 1) // 2 for c in tally.values())
    mean = comb(n_trials, 2) / domain
    # two-sided exact Poisson tail
    lo = float(sps.poisson.cdf(collisions, mean))
    hi = float(sps.poisson.sf(collisions - 1, mean))
    p_value = min(1.0, 2.0 * min(lo, hi))
    return TestReport(
        name="subset_collision",
        statistic=float(collisions),
        samples=n_trials,
        passed=p_value > alpha,
        threshold=alpha,
        p_value=p_value,
        seed=seed,
        details={"expected_collisions": mean, "domain": domain},
    )
