"""Geometry of ordered particle configurations on the chain [-L, L].

A configuration of N down spins is a strictly increasing integer tuple
``x = (x_1, ..., x_N)``.  The finite configuration graph has an edge between
``x`` and ``y`` whenever ``sum |x_i - y_i| == 1``, i.e. one particle hops to an
empty neighbouring site.

Configurations are stored as rows of an ``(dim, N)`` integer array in
lexicographic order, and the index map is a combinatorial ranking so that
``rank``/``unrank`` never need a hash table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .exceptions import CapacityError, ParameterError

__all__ = [
    "MAX_SECTOR_DIM",
    "ConfigSpace",
    "Box",
    "enumerate_configs",
    "cluster_count",
    "cluster_counts",
    "neighbors",
    "distance",
    "set_distance",
    "support_set",
    "edge_stratum",
    "edge_configs",
    "edge_config",
    "make_box",
    "hopping_pairs",
]

MAX_SECTOR_DIM = 10**6


@lru_cache(maxsize=64)
def _binom_table(n: int, k: int) -> np.ndarray:
    # table[a, b] = C(a, b) for 0 <= a <= n, 0 <= b <= k
    t = np.zeros((n + 1, k + 2), dtype=np.int64)
    for a in range(n + 1):
        for b in range(min(a, k + 1) + 1):
            t[a, b] = comb(a, b)
    t.setflags(write=False)
    return t


@dataclass(frozen=True, eq=False)
class ConfigSpace:
    """All N-particle configurations in the volume [-L, L].

    Attributes
    ----------
    N, L : int
        Particle number and half-length of the chain.
    configs : ndarray, shape (dim, N)
        Lexicographically sorted configurations (read-only).
    """

    N: int
    L: int
    configs: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.configs.shape[0]

    @property
    def n_sites(self) -> int:
        return 2 * self.L + 1

    def __len__(self):
        return self.dim

    def config(self, i: int) -> tuple:
        return tuple(int(v) for v in self.configs[i])

    def rank(self, configs) -> np.ndarray:
        """Lexicographic indices of one or many configurations.

        Uses the identity ``rank = C(n, N) - 1 - sum_j C(n-1-c_j, N-j)``
        with ``c`` the 0-based sites and ``j`` counted from 0.
        """
        c = np.asarray(configs, dtype=np.int64) + self.L
        single = c.ndim == 1
        c = np.atleast_2d(c)
        n, N = self.n_sites, self.N
        table = _binom_table(n, N)
        r = np.full(c.shape[0], comb(n, N) - 1, dtype=np.int64)
        for j in range(N):
            r -= table[n - 1 - c[:, j], N - j]
        return int(r[0]) if single else r

    def index(self, x) -> int:
        x = tuple(x)
        if len(x) != self.N or not self.contains(x):
            raise ParameterError(f"{x} is not a configuration of {self}")
        return self.rank(x)

    def contains(self, x) -> bool:
        x = tuple(x)
        return (
            len(x) == self.N
            and all(-self.L <= v <= self.L for v in x)
            and all(a < b for a, b in zip(x, x[1:]))
        )

    def __repr__(self):
        return f"ConfigSpace(N={self.N}, L={self.L}, dim={self.dim})"


def enumerate_configs(N: int, L: int) -> ConfigSpace:
    """Enumerate all strictly increasing N-tuples in [-L, L].

    Raises
    ------
    ParameterError
        If ``N`` is not in ``1..2L+1``.
    CapacityError
        If the dimension exceeds ``MAX_SECTOR_DIM``.
    """
    if L < 0 or not 1 <= N <= 2 * L + 1:
        raise ParameterError(f"need 1 <= N <= 2L+1, got N={N}, L={L}")
    dim = comb(2 * L + 1, N)
    if dim > MAX_SECTOR_DIM:
        raise CapacityError(f"sector dimension {dim} exceeds {MAX_SECTOR_DIM}")
    sites = range(-L, L + 1)
    arr = np.fromiter(
        (v for c in combinations(sites, N) for v in c), dtype=np.int64, count=dim * N
    ).reshape(dim, N)
    arr.setflags(write=False)
    return ConfigSpace(N=N, L=L, configs=arr)


def cluster_count(x) -> int:
    """Number of maximal blocks of consecutive occupied sites."""
    x = tuple(x)
    return 1 + sum(1 for a, b in zip(x, x[1:]) if b != a + 1)


def cluster_counts(configs: np.ndarray) -> np.ndarray:
    """Vectorised :func:`cluster_count` over the rows of ``configs``."""
    configs = np.atleast_2d(configs)
    if configs.shape[1] == 1:
        return np.ones(configs.shape[0], dtype=np.int64)
    return 1 + np.count_nonzero(np.diff(configs, axis=1) != 1, axis=1)


def neighbors(x, L: int | None = None) -> list[tuple]:
    """Configurations at 1-distance exactly one from ``x``.

    With ``L=None`` the chain is the whole of Z; otherwise moves leaving
    [-L, L] are dropped.
    """
    x = tuple(x)
    occupied = set(x)
    out = []
    for j, v in enumerate(x):
        for step in (-1, 1):
            w = v + step
            if w in occupied:
                continue
            if L is not None and not -L <= w <= L:
                continue
            y = list(x)
            y[j] = w
            out.append(tuple(y))
    return sorted(out)


def distance(x, y, metric: str = "one") -> int:
    """1-distance ``sum |x_i - y_i|`` or infinity-distance ``max |x_i - y_i|``."""
    x, y = np.asarray(x), np.asarray(y)
    if x.shape != y.shape:
        raise ParameterError("configurations have different particle numbers")
    d = np.abs(x - y)
    if metric == "one":
        return int(d.sum())
    if metric in ("inf", "infinity"):
        return int(d.max()) if d.size else 0
    raise ParameterError(f"unknown metric {metric!r}")


def set_distance(A, B, metric: str = "one") -> float:
    """Minimum pairwise distance between two configuration sets.

    ``A`` and ``B`` are ``(n, N)`` arrays (or sequences of tuples).  An empty
    set gives ``inf``.
    """
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if A.size == 0 or B.size == 0:
        return float("inf")
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    if A.shape[1] != B.shape[1]:
        raise ParameterError("configuration sets have different particle numbers")
    best = np.inf
    # chunk to bound memory at |A| * chunk * N
    chunk = max(1, 2_000_000 // max(1, A.shape[0] * A.shape[1]))
    for s in range(0, B.shape[0], chunk):
        diff = np.abs(A[:, None, :] - B[None, s : s + chunk, :])
        d = diff.sum(axis=2) if metric == "one" else diff.max(axis=2)
        best = min(best, d.min())
    return float(best)


def support_set(psi, space: ConfigSpace) -> np.ndarray:
    """Indices of configurations with at least one particle in ``psi``."""
    psi = np.fromiter((int(p) for p in psi), dtype=np.int64)
    mask = np.isin(space.configs, psi).any(axis=1)
    return np.flatnonzero(mask)


def edge_stratum(space: ConfigSpace, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into configurations with at most ``k`` clusters and the rest."""
    w = cluster_counts(space.configs)
    mask = w <= k
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def edge_configs(space: ConfigSpace) -> np.ndarray:
    """Indices of the fully packed configurations, ordered by first coordinate."""
    return edge_stratum(space, 1)[0]


def edge_config(x1: int, N: int) -> tuple:
    return tuple(range(x1, x1 + N))


@dataclass(frozen=True, eq=False)
class Box:
    """Edge box of half-width M around the packed configuration starting at x1.

    ``lambda_set`` holds the packed configurations whose first coordinate lies
    in ``[x1 - M, x1 + M]``; ``support`` holds every configuration with some
    particle in that window.  Both are index arrays into ``space`` and are
    truncated to the volume.
    """

    space: ConfigSpace
    x1: int
    M: int
    lambda_set: np.ndarray = field(repr=False)
    support: np.ndarray = field(repr=False)

    @property
    def window(self) -> range:
        return range(self.x1 - self.M, self.x1 + self.M + 1)

    def support_edge(self) -> np.ndarray:
        """Packed configurations inside the support, in increasing order."""
        s = self.support
        w = cluster_counts(self.space.configs[s])
        return s[w == 1]


def make_box(space: ConfigSpace, x1: int, M: int) -> Box:
    if M < 0:
        raise ParameterError("box half-width must be non-negative")
    edge = edge_configs(space)
    firsts = space.configs[edge, 0]
    lam = edge[(firsts >= x1 - M) & (firsts <= x1 + M)]
    supp = support_set(range(x1 - M, x1 + M + 1), space)
    return Box(space=space, x1=x1, M=M, lambda_set=lam, support=supp)


def hopping_pairs(space: ConfigSpace) -> tuple[np.ndarray, np.ndarray]:
    """All graph edges as index pairs ``(i, j)``, each listed once.

    Each edge is generated by the right move of a single particle.
    """
    c = space.configs
    N, L = space.N, space.L
    rows, cols = [], []
    for j in range(N):
        target = c[:, j] + 1
        ok = target <= L
        if j < N - 1:
            ok &= target < c[:, j + 1]
        src = np.flatnonzero(ok)
        moved = c[src].copy()
        moved[:, j] += 1
        rows.append(src)
        cols.append(space.rank(moved))
    return np.concatenate(rows), np.concatenate(cols)
