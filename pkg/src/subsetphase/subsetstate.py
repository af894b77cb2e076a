"""Exact subset phase states and small-scale moment comparisons.

A subset phase state on n sites with subset exponent k is the uniform
superposition over 2^k distinct basis strings with signs attached:
amplitude sign(b) * 2^(-k/2) at basis index image(b).  The table of
(image, sign) pairs evolves under MCX/MCZ circuits exactly like a batch
of single signed copies, so circuits permute the support and flip signs
and the representation stays exact.

Everything here is real-valued: the states only ever carry +-1 phases,
so moment matrices are real symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Iterable

import numpy as np
from scipy.linalg.blas import dsyrk

from . import copysim
from .circuit import Circuit

STATEVECTOR_MAX_N = 24
MOMENT_MAX_DIM = 4096
HAAR_MAX_T = 3


@dataclass
class SubsetState:
    """Table form of a subset phase state.

    ``images[b]`` and ``signs[b]`` give the basis string and sign the
    input string b (an integer below 2^k) is carried to.  Images are
    pairwise distinct; circuits preserve that by bijectivity.
    """

    n: int
    k: int
    images: np.ndarray  # (2^k, W) uint64
    signs: np.ndarray  # (2^k,) int8

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError("k must satisfy 1 <= k <= n")
        expected = 1 << self.k
        if self.images.shape != (expected, copysim.words_needed(self.n)):
            raise ValueError("images must have shape (2^k, words_needed(n))")
        if self.signs.shape != (expected,):
            raise ValueError("signs must have one entry per table row")

    @property
    def size(self) -> int:
        return 1 << self.k

    def image_ints(self) -> list[int]:
        W = self.images.shape[1]
        return [
            sum(int(self.images[i, w]) << (64 * w) for w in range(W)) for i in range(self.size)
        ]

    def is_injective(self) -> bool:
        return len({row.tobytes() for row in self.images}) == self.size

    def clone(self) -> "SubsetState":
        return SubsetState(self.n, self.k, self.images.copy(), self.signs.copy())


def initial_subset_state(n: int, k: int) -> SubsetState:
    """Identity table: b maps to b (low k bits) with sign +1."""
    if not 1 <= k <= n:
        raise ValueError("k must satisfy 1 <= k <= n")
    if k > 22:
        raise ValueError("table of 2^k entries is too large; use k <= 22")
    size = 1 << k
    images = np.zeros((size, copysim.words_needed(n)), dtype=np.uint64)
    images[:, 0] = np.arange(size, dtype=np.uint64)
    return SubsetState(n, k, images, np.ones(size, dtype=np.int8))


def apply_circuit(s: SubsetState, c: Circuit) -> SubsetState:
    """Evolve every table entry exactly as a single signed copy."""
    if c.n != s.n:
        raise ValueError(f"circuit acts on {c.n} sites, state has {s.n}")
    out = s.clone()
    copysim.evolve_arrays(out.images, out.signs, c.layers)
    return out


def to_statevector(s: SubsetState) -> np.ndarray:
    """Dense amplitude vector: sign(b) * 2^(-k/2) at index image(b).

    Basis index of an n-bit string places site i in bit i-1.
    """
    if s.n > STATEVECTOR_MAX_N:
        raise ValueError(f"statevector export capped at n <= {STATEVECTOR_MAX_N}")
    if not s.is_injective():
        raise ValueError("table images are not distinct")
    vec = np.zeros(1 << s.n)
    amp = 2.0 ** (-s.k / 2.0)
    idx = s.images[:, 0].astype(np.int64)
    vec[idx] = amp * s.signs
    return vec


def sample_oracle_state(n: int, k: int, rng: np.random.Generator) -> SubsetState:
    """Directly sampled reference state: a uniform 2^k-subset of {0,1}^n
    with i.i.d. uniform signs.  This is the ensemble the circuit
    generators are trying to approximate, sampled without any circuit."""
    if k > 22:
        raise ValueError("table of 2^k entries is too large; use k <= 22")
    size = 1 << k
    ensemble = copysim.sample_initial_copies(n, n, size, rng)
    signs = (1 - 2 * rng.integers(0, 2, size=size)).astype(np.int8)
    return SubsetState(n, k, ensemble.copies, signs)


@dataclass(frozen=True)
class MomentMatrix:
    """Ensemble-averaged t-fold projector: real symmetric, trace 1, PSD
    up to accumulation roundoff."""

    t: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("moment matrix must be square")


def _check_moment_dim(n: int, t: int) -> int:
    dim = (1 << n) ** t
    if dim > MOMENT_MAX_DIM:
        raise ValueError(
            f"moment dimension 2^(n*t) = {dim} exceeds {MOMENT_MAX_DIM}; "
            f"shrink n or t (e.g. n <= {MOMENT_MAX_DIM.bit_length() - 1} with t = 1, n = 6 with t = 2)"
        )
    return dim


def empirical_moment(samples: Iterable[SubsetState], t: int, chunk: int = 512) -> MomentMatrix:
    """Average of the t-fold self outer products of the sample states.

    Accumulated as a Gram matrix of the t-fold tensor vectors, which
    keeps the result PSD by construction up to float64 roundoff.
    ``samples`` may be any iterable (it is consumed once).
    """
    if t < 1:
        raise ValueError("t must be positive")
    acc: np.ndarray | None = None
    n = -1
    count = 0
    block: list[np.ndarray] = []

    def flush_block():
        # rank-k update on the upper triangle only (phi.T is a free
        # F-contiguous view of the C-contiguous block)
        nonlocal acc
        if block:
            phi = np.stack(block)
            acc = dsyrk(1.0, phi.T, beta=1.0, c=acc, trans=0, lower=0, overwrite_c=1)
            block.clear()

    for s in samples:
        if acc is None:
            n = s.n
            dim = _check_moment_dim(n, t)
            acc = np.zeros((dim, dim), order="F")
        elif s.n != n:
            raise ValueError("all samples must share the same n")
        psi = to_statevector(s)
        vec = psi
        for _ in range(t - 1):
            vec = np.kron(vec, psi)
        block.append(vec)
        count += 1
        if len(block) >= chunk:
            flush_block()
    if acc is None:
        raise ValueError("need at least one sample")
    flush_block()
    full = np.triu(acc) + np.triu(acc, 1).T
    return MomentMatrix(t, full / count)


def haar_moment(n: int, t: int) -> MomentMatrix:
    """t-th moment of the maximally random state ensemble.

    The symmetrizer (1/t!) sum over tensor-factor permutations, divided
    by its trace binom(2^n + t - 1, t).
    """
    if t < 1:
        raise ValueError("t must be positive")
    if t > HAAR_MAX_T:
        raise ValueError(f"haar moment construction capped at t <= {HAAR_MAX_T}")
    dim = _check_moment_dim(n, t)
    d = 1 << n
    acc = np.zeros((dim, dim))
    cols = np.arange(dim)
    digits = [(cols // d**(t - 1 - j)) % d for j in range(t)]  # digit j = factor j's index
    for perm in permutations(range(t)):
        rows = np.zeros(dim, dtype=np.int64)
        for j in range(t):
            # factor j of the permuted state carries factor perm[j] of the input
            rows += digits[perm[j]] * d ** (t - 1 - j)
        acc[rows, cols] += 1.0
    acc /= math.factorial(t)
    return MomentMatrix(t, acc / np.trace(acc))


def trace_distance(a: MomentMatrix, b: MomentMatrix) -> float:
    """Half the sum of absolute eigenvalues of a - b."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    eig = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(0.5 * np.abs(eig).sum())


def mixed_bound(p_fail: float, td_sigma: float) -> float:
    """Convexity bound on the distance of a mixture that fails with
    probability p_fail: p_fail * 1 + (1 - p_fail) * td_sigma.

    The cruder p_fail + td_sigma is reported alongside this in the
    experiment artifacts.
    """
    if not 0.0 <= p_fail <= 1.0 or not 0.0 <= td_sigma <= 1.0:
        raise ValueError("arguments must lie in [0, 1]")
    return p_fail + (1.0 - p_fail) * td_sigma
