"""Hamiltonians of the random XXZ chain and the surgeries applied to them.

Two representations are provided:

* :func:`build_spin_hamiltonian` assembles the chain Hamiltonian on the full
  tensor product space of ``2L+1`` spins (small chains only);
* :func:`build_sector_hamiltonian` assembles its restriction to the
  N-particle sector as a Schroedinger-type operator on ordered
  configurations, ``-(1/2D) Lap + (1 - 1/D) W + lam V + (beta - (1-1/D)/2) chi``.

Sector matrices are real symmetric and stored as CSR.  Every surgery returns a
new :class:`SectorOperator`; nothing is modified in place.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import config_space as cs
from .exceptions import CapacityError, ParameterError

__all__ = [
    "MAX_SPIN_SITES",
    "ModelParams",
    "DisorderSpec",
    "DisorderRealization",
    "SectorOperator",
    "SpinOperator",
    "realization_rng",
    "sample_disorder",
    "build_spin_hamiltonian",
    "build_sector_hamiltonian",
    "restrict",
    "decouple",
    "delete_overlap_potential",
    "add_edge_projection",
    "spin_index",
    "number_operator",
    "total_number_operator",
]

MAX_SPIN_SITES = 22


@dataclass(frozen=True)
class ModelParams:
    """Model parameters.

    ``beta=None`` selects the smallest admissible boundary coefficient
    ``(1 - 1/Delta)/2``, for which the boundary term of the sector operator
    vanishes.
    """

    Delta: float
    lam: float
    L: int
    beta: float | None = None
    delta: float = 0.1

    def __post_init__(self):
        if not self.Delta > 1:
            raise ParameterError(f"Delta must exceed 1, got {self.Delta}")
        if not self.lam >= 0:
            raise ParameterError(f"lam must be non-negative, got {self.lam}")
        if self.L < 0:
            raise ParameterError("L must be non-negative")
        if not 0 < self.delta < 1:
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")
        beta_min = 0.5 * (1 - 1 / self.Delta)
        if self.beta is None:
            object.__setattr__(self, "beta", beta_min)
        elif self.beta < beta_min - 1e-15:
            raise ParameterError(f"beta must be >= {beta_min}, got {self.beta}")

    @property
    def gap(self) -> float:
        """``1 - 1/Delta``, the bottom of the droplet spectrum."""
        return 1 - 1 / self.Delta

    @property
    def boundary_coefficient(self) -> float:
        return self.beta - 0.5 * self.gap

    def regime_value(self) -> float:
        """``lam * sqrt(Delta-1) * min(1, Delta-1)``; compare to a chosen K."""
        d = self.Delta - 1
        return self.lam * np.sqrt(d) * min(1.0, d)

    def in_regime(self, K: float) -> bool:
        return self.regime_value() >= K

    def to_dict(self) -> dict:
        return dict(Delta=self.Delta, lam=self.lam, L=self.L, beta=self.beta, delta=self.delta)


@dataclass(frozen=True)
class DisorderSpec:
    """Single-site distribution of the random field, supported on [0, omega_max].

    family : ``"uniform"``, ``"truncated-beta"`` (``params=(a, b)`` with
    ``a, b >= 1`` so the density is bounded) or ``"piecewise-density"``
    (``params`` are the relative weights of equal-width bins).
    """

    family: str = "uniform"
    omega_max: float = 1.0
    params: tuple = ()

    def __post_init__(self):
        if self.omega_max <= 0:
            raise ParameterError("omega_max must be positive")
        if self.family == "truncated-beta":
            if len(self.params) != 2 or min(self.params) < 1:
                raise ParameterError("truncated-beta needs params (a, b) with a, b >= 1")
        elif self.family == "piecewise-density":
            w = np.asarray(self.params, dtype=float)
            if w.size == 0 or np.any(w < 0) or w.sum() <= 0:
                raise ParameterError("piecewise-density needs non-negative bin weights")
        elif self.family != "uniform":
            raise ParameterError(f"unsupported disorder family {self.family!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def density_sup(self) -> float:
        """Supremum of the density."""
        if self.family == "uniform":
            return 1.0 / self.omega_max
        if self.family == "piecewise-density":
            w = np.asarray(self.params)
            return float(w.max() / w.sum() * w.size / self.omega_max)
        from scipy.stats import beta as beta_dist

        a, b = self.params
        mode = 0.0 if a == b == 1 else (a - 1) / (a + b - 2)
        return float(beta_dist.pdf(mode, a, b) / self.omega_max)

    @property
    def mean(self) -> float:
        if self.family == "uniform":
            return self.omega_max / 2
        if self.family == "truncated-beta":
            a, b = self.params
            return self.omega_max * a / (a + b)
        w = np.asarray(self.params) / sum(self.params)
        centers = (np.arange(w.size) + 0.5) / w.size
        return float(self.omega_max * (w * centers).sum())

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "uniform":
            return rng.uniform(0.0, self.omega_max, size)
        if self.family == "truncated-beta":
            return self.omega_max * rng.beta(*self.params, size)
        w = np.asarray(self.params) / sum(self.params)
        bins = rng.choice(w.size, size=size, p=w)
        return self.omega_max * (bins + rng.uniform(0.0, 1.0, size)) / w.size

    def to_dict(self) -> dict:
        return dict(family=self.family, omega_max=self.omega_max, params=list(self.params))


def realization_rng(master_seed: int, r: int) -> np.random.Generator:
    """Independent stream for realization ``r`` of a run seeded by ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(r,)))


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    """Field values ``omega[i + L]`` for sites ``i = -L..L``."""

    L: int
    values: np.ndarray = field(repr=False)
    spec: DisorderSpec = DisorderSpec()
    seed: tuple | None = None

    def __getitem__(self, site):
        return self.values[np.asarray(site) + self.L]

    def with_values(self, values) -> "DisorderRealization":
        v = np.array(values, dtype=float)
        v.setflags(write=False)
        return replace(self, values=v, seed=None)

    def to_json(self) -> str:
        return json.dumps(
            dict(
                L=self.L,
                spec=self.spec.to_dict(),
                seed=None if self.seed is None else list(self.seed),
                values=[float(v).hex() for v in self.values],
            )
        )

    @classmethod
    def from_json(cls, text: str) -> "DisorderRealization":
        d = json.loads(text)
        vals = np.array([float.fromhex(v) for v in d["values"]])
        vals.setflags(write=False)
        spec = DisorderSpec(d["spec"]["family"], d["spec"]["omega_max"], tuple(d["spec"]["params"]))
        seed = None if d["seed"] is None else tuple(d["seed"])
        return cls(L=d["L"], values=vals, spec=spec, seed=seed)

    @classmethod
    def constant(cls, L: int, value: float = 0.0) -> "DisorderRealization":
        v = np.full(2 * L + 1, float(value))
        v.setflags(write=False)
        return cls(L=L, values=v)


def sample_disorder(spec: DisorderSpec, L: int, seed) -> DisorderRealization:
    """Draw i.i.d. field values for sites -L..L.

    ``seed`` is an int, or a ``(master_seed, r)`` pair selecting realization
    ``r`` of a run; the draw is a deterministic function of ``(spec, L, seed)``.
    """
    if isinstance(seed, (tuple, list)):
        master, r = seed
        rng = realization_rng(int(master), int(r))
        seed = (int(master), int(r))
    else:
        rng = np.random.default_rng(int(seed))
        seed = (int(seed),)
    vals = spec.sample(rng, 2 * L + 1)
    vals.setflags(write=False)
    return DisorderRealization(L=L, values=vals, spec=spec, seed=seed)


# ---------------------------------------------------------------------------
# full spin chain


@dataclass(frozen=True, eq=False)
class SpinOperator:
    """Hamiltonian on the 2^(2L+1)-dimensional product basis.

    Basis index bit ``2L - (i + L)`` is 1 iff site ``i`` carries a down spin,
    so site ``-L`` is the most significant tensor factor.
    """

    matrix: sp.csr_matrix
    params: ModelParams
    omega: DisorderRealization

    @property
    def n_sites(self) -> int:
        return 2 * self.params.L + 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _occupations(n_sites: int) -> np.ndarray:
    states = np.arange(2**n_sites, dtype=np.int64)
    shifts = np.arange(n_sites - 1, -1, -1, dtype=np.int64)
    return ((states[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def build_spin_hamiltonian(params: ModelParams, omega: DisorderRealization) -> SpinOperator:
    """Nearest-neighbour XXZ terms plus random field plus droplet boundary term."""
    n = 2 * params.L + 1
    if n > MAX_SPIN_SITES:
        raise CapacityError(f"{n} sites exceed the spin-space capacity {MAX_SPIN_SITES}")
    if omega.L != params.L:
        raise ParameterError("disorder realization has the wrong volume")
    occ = _occupations(n)
    dim = occ.shape[0]
    walls = np.count_nonzero(occ[:, 1:] != occ[:, :-1], axis=1)
    diag = 0.5 * walls + params.lam * (occ @ omega.values)
    diag = diag + params.beta * (occ[:, 0] + occ[:, -1])

    rows, cols = [np.arange(dim)], [np.arange(dim)]
    data = [diag]
    states = np.arange(dim, dtype=np.int64)
    for p in range(n - 1):
        flip = occ[:, p] != occ[:, p + 1]
        src = states[flip]
        mask = (1 << (n - 1 - p)) | (1 << (n - 2 - p))
        rows.append(src)
        cols.append(src ^ mask)
        data.append(np.full(src.size, -0.5 / params.Delta))
    H = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    H.sum_duplicates()
    return SpinOperator(matrix=H, params=params, omega=omega)


def spin_index(configs, L: int) -> np.ndarray:
    """Product-basis index of the spin state with down spins at ``configs``."""
    c = np.atleast_2d(np.asarray(configs, dtype=np.int64))
    n = 2 * L + 1
    return ((np.int64(1) << (n - 1 - (c + L))).sum(axis=1)).astype(np.int64)


def number_operator(site: int, L: int) -> sp.dia_matrix:
    """Local number operator (down-spin projection) at ``site`` on the full chain."""
    n = 2 * L + 1
    occ = (np.arange(2**n) >> (n - 1 - (site + L))) & 1
    return sp.diags(occ.astype(float))


def total_number_operator(L: int) -> sp.dia_matrix:
    n = 2 * L + 1
    return sp.diags(_occupations(n).sum(axis=1).astype(float))


# ---------------------------------------------------------------------------
# N-particle sector


@dataclass(frozen=True, eq=False)
class SectorOperator:
    """Sector Hamiltonian, possibly restricted to a subset of configurations.

    The matrix is kept as a deterministic part ``base`` plus the diagonal
    random potential ``potential`` (``lam * V``), so that deleting the
    potential on a set leaves the remaining entries bit-identical.

    Attributes
    ----------
    space : ConfigSpace
        Parent configuration space.
    index : ndarray
        Sorted parent indices of the represented configurations; row ``r``
        belongs to ``space.configs[index[r]]``.
    base : csr_matrix
        Hopping, interaction, boundary and any added deterministic terms.
    potential : ndarray
        Random potential per represented configuration.
    surgery : tuple of str
        Log of applied modifications.
    """

    space: cs.ConfigSpace
    index: np.ndarray = field(repr=False)
    base: sp.csr_matrix = field(repr=False)
    potential: np.ndarray = field(repr=False)
    params: ModelParams = None
    omega: DisorderRealization = None
    surgery: tuple = ()

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return (self.base + sp.diags(self.potential)).tocsr()

    @property
    def dim(self) -> int:
        return self.index.size

    @property
    def N(self) -> int:
        return self.space.N

    @property
    def configs(self) -> np.ndarray:
        return self.space.configs[self.index]

    def positions(self, parent_indices) -> np.ndarray:
        """Row numbers of the given parent indices (which must be represented)."""
        parent_indices = np.asarray(parent_indices, dtype=np.int64)
        if parent_indices.size == 0:
            return parent_indices
        pos = np.searchsorted(self.index, parent_indices)
        pos = np.minimum(pos, max(self.index.size - 1, 0))
        if self.index.size == 0 or np.any(self.index[pos] != parent_indices):
            raise ParameterError("configuration set is not contained in the operator's domain")
        return pos

    def mask(self, parent_indices) -> np.ndarray:
        """Boolean mask over rows marking membership in ``parent_indices``."""
        return np.isin(self.index, np.asarray(parent_indices, dtype=np.int64))

    def cluster_counts(self) -> np.ndarray:
        return cs.cluster_counts(self.configs)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


def build_sector_hamiltonian(N: int, params: ModelParams, omega: DisorderRealization,
                             space: cs.ConfigSpace | None = None) -> SectorOperator:
    """Assemble the N-particle sector Hamiltonian on all of ``X_N^(L)``."""
    if omega.L != params.L:
        raise ParameterError("disorder realization has the wrong volume")
    if space is None:
        space = cs.enumerate_configs(N, params.L)
    elif space.N != N or space.L != params.L:
        raise ParameterError("configuration space does not match N and L")
    L, dim = params.L, space.dim
    c = space.configs
    i, j = cs.hopping_pairs(space)
    deg = np.bincount(i, minlength=dim) + np.bincount(j, minlength=dim)
    W = cs.cluster_counts(c)
    pot = params.lam * omega.values[c + L].sum(axis=1)
    chi = (c[:, 0] == -L).astype(float) + (c[:, -1] == L)
    diag = deg / (2 * params.Delta) + params.gap * W + params.boundary_coefficient * chi
    hop = np.full(i.size, -0.5 / params.Delta)
    base = sp.csr_matrix(
        (np.concatenate([diag, hop, hop]),
         (np.concatenate([np.arange(dim), i, j]), np.concatenate([np.arange(dim), j, i]))),
        shape=(dim, dim),
    )
    return SectorOperator(space=space, index=_frozen(np.arange(dim, dtype=np.int64)), base=base,
                          potential=_frozen(pot), params=params, omega=omega)


def restrict(op: SectorOperator, S) -> SectorOperator:
    """Principal submatrix on the parent configurations ``S``."""
    S = np.unique(np.asarray(S, dtype=np.int64))
    if S.size == 0:
        raise ParameterError("cannot restrict to an empty set")
    pos = op.positions(S)
    B = op.base[pos][:, pos].tocsr()
    return replace(op, index=_frozen(S), base=B, potential=_frozen(op.potential[pos]),
                   surgery=op.surgery + (f"restrict[{S.size}]",))


def decouple(op: SectorOperator, A) -> tuple[SectorOperator, sp.csr_matrix]:
    """Remove all couplings between ``A`` and its complement.

    Returns the decoupled operator and ``Gamma = H - H_decoupled``, which is
    supported on the boundary pairs of ``A``.
    """
    inside = op.mask(A)
    if not inside.any():
        raise ParameterError("decoupling set is empty")
    B = op.base.tocoo()
    cross = inside[B.row] != inside[B.col]
    keep = ~cross
    dec = sp.csr_matrix((B.data[keep], (B.row[keep], B.col[keep])), shape=B.shape)
    gamma = sp.csr_matrix((B.data[cross], (B.row[cross], B.col[cross])), shape=B.shape)
    return replace(op, base=dec, surgery=op.surgery + ("decouple",)), gamma


def delete_overlap_potential(op: SectorOperator, x1: int, y1: int, M: int) -> SectorOperator:
    """Zero the random potential on ``S_M(x) & S_M(y)`` for edge boxes at x1, y1."""
    c = op.configs
    in_x = np.isin(c, np.arange(x1 - M, x1 + M + 1)).any(axis=1)
    in_y = np.isin(c, np.arange(y1 - M, y1 + M + 1)).any(axis=1)
    overlap = in_x & in_y
    pot = op.potential.copy()
    pot[overlap] = 0.0
    return replace(op, potential=_frozen(pot),
                   surgery=op.surgery + (f"delete_overlap[{int(overlap.sum())}]",))


def add_edge_projection(op: SectorOperator) -> SectorOperator:
    """Add one to the diagonal at every fully packed configuration."""
    edge = (op.cluster_counts() == 1).astype(float)
    B = (op.base + sp.diags(edge)).tocsr()
    return replace(op, base=B, surgery=op.surgery + ("edge_projection",))
