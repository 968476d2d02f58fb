"""Correlators of local observables and sector eigenfunction correlators.

Spin-level quantities act on the full product space of ``2L+1`` spins and use
:class:`~xxzdroplet.spectral.SpectralData` of a
:class:`~xxzdroplet.operators.SpinOperator`.  Sector quantities use spectral
data of a :class:`~xxzdroplet.operators.SectorOperator`, whose basis vectors
are particle configurations.

Energy sets are closed intervals ``(a, b)`` or explicit eigenvalue index
arrays.  Numerically degenerate eigenvalues are always handled through their
cluster projection, so no formula assumes a simple spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .exceptions import ParameterError
from .spectral import SpectralData

__all__ = [
    "ENVELOPE_CONSTANT",
    "LocalObservable",
    "BlockDecomposition",
    "CorrelatorRecord",
    "PartitionSup",
    "DynamicalSup",
    "number_observable",
    "random_observable",
    "state_correlator",
    "set_correlator",
    "partition_sup",
    "restricted_evolution",
    "default_time_grid",
    "dynamical_sup",
    "block_decompose",
    "vanishing_identity_values",
    "vanishing_identities_check",
    "clustering_envelope",
    "sector_correlator",
    "number_correlator_sum",
    "sum_identity_check",
]

# 16 block terms, each bounded with a factor of at most 4
ENVELOPE_CONSTANT = 64.0


# ---------------------------------------------------------------------------
# local observables


@dataclass(frozen=True, eq=False)
class LocalObservable:
    """Operator on the spins in ``support``, identity elsewhere.

    ``matrix`` acts on the ``2**len(support)`` local product states; the first
    support site is the most significant bit and bit value 1 is a down spin,
    matching the ordering of the full chain.
    """

    support: tuple
    matrix: np.ndarray = field(repr=False)
    L: int = 0

    def __post_init__(self):
        sites = tuple(int(s) for s in self.support)
        if len(sites) == 0:
            raise ParameterError("support must be nonempty")
        if list(sites) != sorted(set(sites)):
            raise ParameterError("support must be strictly increasing")
        if sites[0] < -self.L or sites[-1] > self.L:
            raise ParameterError(f"support {sites} leaves [-{self.L}, {self.L}]")
        m = np.array(self.matrix)
        if m.shape != (2 ** len(sites),) * 2:
            raise ParameterError(f"local matrix must be {2 ** len(sites)}-dimensional")
        m.setflags(write=False)
        object.__setattr__(self, "support", sites)
        object.__setattr__(self, "matrix", m)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    @cached_property
    def full(self) -> sp.csr_matrix:
        """Action on the full chain as a sparse ``2**(2L+1)`` square matrix."""
        n = 2 * self.L + 1
        m = len(self.support)
        bits = np.array([n - 1 - (s + self.L) for s in self.support], dtype=np.int64)
        mask = int(np.sum(np.int64(1) << bits))
        local = np.arange(2**m, dtype=np.int64)
        embed = np.zeros(2**m, dtype=np.int64)
        for k, b in enumerate(bits):
            embed |= ((local >> (m - 1 - k)) & 1) << b
        rest = np.arange(2**n, dtype=np.int64)
        rest = rest[(rest & mask) == 0]
        a, b = np.nonzero(self.matrix)
        vals = self.matrix[a, b]
        rows = (rest[:, None] | embed[a][None, :]).ravel()
        cols = (rest[:, None] | embed[b][None, :]).ravel()
        data = np.broadcast_to(vals, (rest.size, vals.size)).ravel()
        return sp.csr_matrix((data, (rows, cols)), shape=(2**n, 2**n))

    def adjoint(self) -> "LocalObservable":
        return LocalObservable(self.support, self.matrix.conj().T, self.L)


def number_observable(site: int, L: int) -> LocalObservable:
    """Down-spin projection at ``site``."""
    return LocalObservable((site,), np.diag([0.0, 1.0]), L)


def random_observable(support, L: int, rng: np.random.Generator,
                      hermitian: bool = False) -> LocalObservable:
    """Observable with i.i.d. complex Gaussian entries on ``support``."""
    d = 2 ** len(support)
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    if hermitian:
        m = (m + m.conj().T) / 2
    return LocalObservable(tuple(support), m, L)


def _full(X):
    if isinstance(X, LocalObservable):
        return X.full
    return X


def _indices(data: SpectralData, F) -> np.ndarray:
    return data.select(F)


# ---------------------------------------------------------------------------
# state and set correlators


def state_correlator(X, Y, psi) -> float:
    """``|<psi, X Y psi> - <psi, X psi><psi, Y psi>|`` for a unit vector ``psi``."""
    psi = np.asarray(psi)
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ParameterError("state must be normalized")
    Xf, Yf = _full(X), _full(Y)
    Ypsi = Yf @ psi
    xy = np.vdot(psi, Xf @ Ypsi)
    x = np.vdot(psi, Xf @ psi)
    y = np.vdot(psi, Ypsi)
    return float(abs(xy - x * y))


def set_correlator(X, Y, F, data: SpectralData) -> float:
    """``|tr(P_F X (1 - P_F) Y P_F)|`` evaluated in the eigenbasis of ``F``."""
    idx = _indices(data, F)
    if idx.size == 0:
        return 0.0
    V = data.eigenvectors[:, idx]
    Xf, Yf = _full(X), _full(Y)
    XV, YV = Xf @ V, Yf @ V
    first = np.sum(V.conj() * (Xf @ YV))
    second = np.trace((V.conj().T @ XV) @ (V.conj().T @ YV))
    return float(abs(first - second))


# ---------------------------------------------------------------------------
# partitions and restricted dynamics


class PartitionSup(NamedTuple):
    value: float
    partition: list
    exact: bool


class _Window:
    """Matrix elements of X and Y between the eigenvectors of a window."""

    def __init__(self, X, Y, I, data: SpectralData):
        self.idx = _indices(data, I)
        V = data.eigenvectors[:, self.idx]
        Xf, Yf = _full(X), _full(Y)
        XV, YV = Xf @ V, Yf @ V
        self.E = data.eigenvalues[self.idx]
        self.X = V.conj().T @ XV
        self.Y = V.conj().T @ YV
        # <psi_a, X (1 - P_I) Y psi_a>
        self.g = np.sum(V.conj() * (Xf @ YV), axis=0) - np.sum(self.X * self.Y.T, axis=1)
        labels = data.clusters[self.idx]
        starts = np.flatnonzero(np.r_[True, labels[1:] != labels[:-1]])
        self.units = np.split(np.arange(self.idx.size), starts[1:])

    def unit_sums(self, t: float):
        """Per-cluster diagonal terms and the cluster-pair matrix at time ``t``."""
        phase = np.exp(1j * t * self.E)
        M = (phase[:, None] * self.X * phase.conj()[None, :]) * self.Y.T
        c = phase * self.g + M.sum(axis=1)
        K = len(self.units)
        owner = np.empty(self.idx.size, dtype=np.int64)
        for u, members in enumerate(self.units):
            owner[members] = u
        cU = np.bincount(owner, weights=c.real, minlength=K) + 1j * np.bincount(
            owner, weights=c.imag, minlength=K)
        MU = np.zeros((K, K), dtype=complex)
        np.add.at(MU, (owner[:, None], owner[None, :]), M)
        return cU, MU


def _best_partition(cU: np.ndarray, MU: np.ndarray):
    """Maximize the sum of segment values over contiguous segmentations.

    The value of a segment ``[p, q)`` is
    ``|sum_{u in seg} cU[u] - sum_{u, v in seg} MU[u, v]|``; dynamic
    programming over the right end point makes the search exact in O(K^2).
    """
    K = cU.size
    C = np.concatenate([[0], np.cumsum(cU)])
    P = np.zeros((K + 1, K + 1), dtype=complex)
    P[1:, 1:] = MU.cumsum(axis=0).cumsum(axis=1)
    best = np.full(K + 1, -np.inf)
    best[0] = 0.0
    cut = np.zeros(K + 1, dtype=np.int64)
    for q in range(1, K + 1):
        p = np.arange(q)
        block = P[q, q] - P[p, q] - P[q, p] + P[p, p]
        vals = best[p] + np.abs(C[q] - C[p] - block)
        j = int(np.argmax(vals))
        best[q], cut[q] = vals[j], j
    segments, q = [], K
    while q > 0:
        segments.append((int(cut[q]), q))
        q = int(cut[q])
    return float(best[K]), segments[::-1]


def partition_sup(X, Y, I, data: SpectralData, t: float = 0.0) -> PartitionSup:
    """Supremum over interval partitions of ``I`` of the summed set correlators.

    Interval partitions of ``I`` induce contiguous groupings of the ordered
    eigenvalues in ``I`` (clusters kept whole), and every grouping arises this
    way.  The maximum over groupings is found exactly.  With ``t != 0`` the
    first observable is replaced by its restricted evolution.

    Returns
    -------
    PartitionSup
        ``value``, the maximizing ``partition`` (list of index arrays into
        ``data.eigenvalues``) and ``exact=True``.
    """
    w = _Window(X, Y, I, data)
    if w.idx.size == 0:
        return PartitionSup(0.0, [], True)
    cU, MU = w.unit_sums(t)
    value, segs = _best_partition(cU, MU)
    part = [w.idx[np.concatenate(w.units[p:q])] for p, q in segs]
    return PartitionSup(value, part, True)


def restricted_evolution(X, I, t: float, data: SpectralData) -> np.ndarray:
    """``exp(i t P_I H) X exp(-i t P_I H)`` as a dense matrix.

    The propagator is ``1 + V (exp(i t E) - 1) V^*`` with ``V`` the window
    eigenvectors, so only the window part of the spectrum is needed.
    """
    idx = _indices(data, I)
    Xf = _full(X)
    Xd = Xf.toarray() if sp.issparse(Xf) else np.array(Xf, dtype=complex)
    if idx.size == 0 or t == 0:
        return Xd.astype(complex)
    V = data.eigenvectors[:, idx]
    d = np.exp(1j * t * data.eigenvalues[idx]) - 1
    # U X U^* with U = 1 + V diag(d) V^*
    XV = Xd @ V
    VX = V.conj().T @ Xd
    out = Xd.astype(complex)
    out += (V * d) @ VX
    out += XV @ (d.conj()[:, None] * V.conj().T)
    out += (V * d) @ ((V.conj().T @ XV) * d.conj()[None, :]) @ V.conj().T
    return out


class DynamicalSup(NamedTuple):
    grid_max: float
    certified: float
    t_max: float
    t_grid: np.ndarray


def default_time_grid(data: SpectralData, I, n_linear: int = 64, n_log: int = 16) -> np.ndarray:
    """Linear grid over one period of the smallest in-window gap plus long times."""
    idx = _indices(data, I)
    E = np.unique(data.eigenvalues[idx])
    if E.size < 2:
        return np.zeros(1)
    gaps = np.diff(E)
    gaps = gaps[gaps > 1e-9 * data.scale]
    if gaps.size == 0:
        return np.zeros(1)
    T = 2 * np.pi / gaps.min()
    lin = np.linspace(0.0, T, n_linear)
    log = np.geomspace(T, 1e3 * T, n_log + 1)[1:]
    return np.concatenate([lin, log])


def dynamical_sup(X, Y, I, data: SpectralData, t_grid=None) -> DynamicalSup:
    """Grid maximum of the partition supremum under restricted evolution.

    ``certified`` bounds the supremum over all real ``t``: the time
    dependence sits in phases, and the triangle inequality with every cluster
    in its own segment maximizes the phase-free bound.
    """
    w = _Window(X, Y, I, data)
    grid = default_time_grid(data, I) if t_grid is None else np.asarray(t_grid, dtype=float)
    if w.idx.size == 0:
        return DynamicalSup(0.0, 0.0, 0.0, grid)
    best, t_best = -1.0, 0.0
    for t in grid:
        cU, MU = w.unit_sums(float(t))
        v, _ = _best_partition(cU, MU)
        if v > best:
            best, t_best = v, float(t)
    A = np.abs(w.X * w.Y.T)
    same = np.zeros_like(A, dtype=bool)
    for members in w.units:
        same[np.ix_(members, members)] = True
    certified = float(np.abs(w.g).sum() + A[~same].sum())
    return DynamicalSup(best, certified, t_best, grid)


# ---------------------------------------------------------------------------
# block decomposition


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    """Split of a local observable by the no-particle projection of its support.

    ``P_plus`` projects onto the local all-up state; ``blocks[(a, b)]`` is
    ``P_a X P_b`` for ``a, b`` in ``"+-"`` and ``blocks[("+", "+")] = zeta P_plus``.
    All matrices are local.
    """

    observable: LocalObservable
    P_plus: np.ndarray = field(repr=False)
    P_minus: np.ndarray = field(repr=False)
    blocks: dict = field(repr=False)
    zeta: complex = 0.0

    def block(self, a: str, b: str) -> LocalObservable:
        X = self.observable
        return LocalObservable(X.support, self.blocks[(a, b)], X.L)

    def projector(self, sign: str) -> LocalObservable:
        X = self.observable
        return LocalObservable(X.support, self.P_plus if sign == "+" else self.P_minus, X.L)

    def reconstruct(self) -> np.ndarray:
        return sum(self.blocks.values())


def block_decompose(X: LocalObservable) -> BlockDecomposition:
    d = X.matrix.shape[0]
    Pp = np.zeros((d, d))
    Pp[0, 0] = 1.0
    Pm = np.eye(d) - Pp
    P = {"+": Pp, "-": Pm}
    blocks = {(a, b): P[a] @ X.matrix @ P[b] for a, b in product("+-", repeat=2)}
    zeta = complex(X.matrix[0, 0])
    for m in (Pp, Pm):
        m.setflags(write=False)
    return BlockDecomposition(X, Pp, Pm, blocks, zeta)


def _check_disjoint(X: LocalObservable, Y: LocalObservable):
    if set(X.support) & set(Y.support):
        raise ParameterError("observables must have disjoint supports")


def vanishing_identity_values(X: LocalObservable, Y: LocalObservable, F, t: float,
                              data: SpectralData, I=None) -> tuple[float, float]:
    """Set correlators of the evolved ``(+,-)`` and ``(-,+)`` blocks.

    Both vanish exactly because these blocks change the particle number in
    opposite directions.  ``I`` is the evolution window (default ``F``).
    """
    _check_disjoint(X, Y)
    I = F if I is None else I
    bx, by = block_decompose(X), block_decompose(Y)
    out = []
    for a, b in (("+", "-"), ("-", "+")):
        Xt = restricted_evolution(bx.block(a, b), I, t, data)
        out.append(set_correlator(Xt, by.block(a, b).full, F, data))
    return out[0], out[1]


def vanishing_identities_check(X, Y, F, t, data, I=None, tol: float = 1e-10) -> bool:
    return max(vanishing_identity_values(X, Y, F, t, data, I)) <= tol


def clustering_envelope(X: LocalObservable, Y: LocalObservable, I, data: SpectralData) -> float:
    """``||X|| ||Y|| sum_E ||P_-^X psi_E|| ||P_-^Y psi_E||`` over eigenvalues in ``I``.

    Multiply by :data:`ENVELOPE_CONSTANT` for the clustering bound.
    """
    _check_disjoint(X, Y)
    idx = _indices(data, I)
    if idx.size == 0:
        return 0.0
    V = data.eigenvectors[:, idx]
    Pm_x = block_decompose(X).projector("-").full
    Pm_y = block_decompose(Y).projector("-").full
    nx = np.linalg.norm(Pm_x @ V, axis=0)
    ny = np.linalg.norm(Pm_y @ V, axis=0)
    return X.norm * Y.norm * float(np.sum(nx * ny))


# ---------------------------------------------------------------------------
# sector eigenfunction correlators


def _trace_norm_product(A: np.ndarray, B: np.ndarray) -> float:
    """Trace norm of ``A B^*`` for tall matrices with few columns."""
    if A.shape[1] == 1:
        return float(np.linalg.norm(A) * np.linalg.norm(B))
    _, Ra = np.linalg.qr(A)
    _, Rb = np.linalg.qr(B)
    return float(np.linalg.svd(Ra @ Rb.conj().T, compute_uv=False).sum())


def sector_correlator(N: int, i: int, j: int, I, data: SpectralData) -> float:
    """Sum over eigenvalues in ``I`` of ``||Q_i P_E Q_j||_1`` in the N-particle sector.

    ``Q_i`` is the indicator of configurations occupying site ``i``.  Each
    cluster contributes the trace norm of its projection block.
    """
    if data.configs is None or data.configs.shape[1] != N:
        raise ParameterError("spectral data does not belong to an N-particle sector")
    idx = _indices(data, I)
    if idx.size == 0:
        return 0.0
    si = np.flatnonzero((data.configs == i).any(axis=1))
    sj = np.flatnonzero((data.configs == j).any(axis=1))
    if si.size == 0 or sj.size == 0:
        return 0.0
    total = 0.0
    for members in data.cluster_groups(idx):
        V = data.eigenvectors[:, members]
        total += _trace_norm_product(V[si], V[sj])
    return total


def number_correlator_sum(i: int, j: int, I, data: SpectralData, L: int) -> float:
    """Spin-chain side: sum over eigenvalues in ``I`` of ``||N_i P_E N_j||_1``."""
    idx = _indices(data, I)
    if idx.size == 0:
        return 0.0
    n = 2 * L + 1
    states = np.arange(2**n)
    si = np.flatnonzero((states >> (n - 1 - (i + L))) & 1)
    sj = np.flatnonzero((states >> (n - 1 - (j + L))) & 1)
    total = 0.0
    for members in data.cluster_groups(idx):
        V = data.eigenvectors[:, members]
        total += _trace_norm_product(V[si], V[sj])
    return total


def sum_identity_check(i: int, j: int, I, spin_data: SpectralData, sector_data: dict,
                       L: int, tol: float = 1e-8) -> bool:
    """Whether the sector correlators summed over N reproduce the spin-chain sum.

    ``sector_data`` maps each particle number to the spectral data of its
    sector operator.
    """
    lhs = sum(sector_correlator(N, i, j, I, d) for N, d in sector_data.items())
    rhs = number_correlator_sum(i, j, I, spin_data, L)
    return abs(lhs - rhs) <= tol


@dataclass(frozen=True)
class CorrelatorRecord:
    """One correlator value; ``N = 0`` marks spin-chain level quantities."""

    seed: int
    N: int
    i: int
    j: int
    t: float
    value: float

    @property
    def distance(self) -> int:
        return abs(self.i - self.j)
