"""Disorder ensembles and checks of explicit-constant inequalities.

Deterministic checks (resolvent decay in the bulk and with the edge
projection) must hold for every realization.  Statistical checks report
Wilson upper confidence bounds for probabilities and confidence intervals for
fitted decay rates.  Ensemble runs are organized as one task per realization;
results are reduced in realization order so they do not depend on how the
tasks were scheduled.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial

import numpy as np
import scipy.linalg as la
from scipy import stats

from . import config_space as cs
from .correlators import sector_correlator
from .exceptions import ParameterError, ResolventSingularError
from .operators import (
    DisorderRealization,
    DisorderSpec,
    ModelParams,
    add_edge_projection,
    build_sector_hamiltonian,
    restrict,
    sample_disorder,
)
from .spectral import (
    diagonalize,
    droplet_window,
    refine_tails,
    resolvent,
    schur_complement,
)

__all__ = [
    "CTParameters",
    "WegnerParameters",
    "CTResult",
    "CTSummary",
    "EnsembleConfig",
    "FitResult",
    "DecayRecord",
    "RunningStats",
    "apriori_constant",
    "wilson_upper",
    "realization_seed",
    "combes_thomas_verify",
    "edge_projection_ct_verify",
    "random_ball",
    "combes_thomas_ensemble",
    "fractional_moment_samples",
    "fractional_moment_scan",
    "scalar_chain_greens_row",
    "scalar_chain_fractional_moments",
    "wegner_empirical",
    "spectral_separation",
    "schur_identity_residuals",
    "eigencorrelator_samples",
    "eigencorrelator_decay",
    "fit_exponential",
    "map_realizations",
]


# ---------------------------------------------------------------------------
# explicit constants


def _check_delta(Delta: float, delta: float):
    if not Delta > 1:
        raise ParameterError(f"need Delta > 1, got {Delta}")
    if not 0 < delta < 1:
        raise ParameterError(f"need 0 < delta < 1, got {delta}")


@dataclass(frozen=True)
class CTParameters:
    """Constants of the resolvent decay bounds at cluster level ``k``."""

    Delta: float
    delta: float
    k: int = 1

    def __post_init__(self):
        _check_delta(self.Delta, self.delta)
        if self.k < 1:
            raise ParameterError("k must be a positive integer")

    @property
    def C(self) -> float:
        return 4 * self.Delta / (self.delta * (self.Delta - 1))

    @property
    def eta(self) -> float:
        return math.log1p(self.delta * (self.Delta - 1) / (4 * (self.k + 1)))

    @property
    def C_prime(self) -> float:
        return 8 * self.Delta / (self.delta * (self.Delta - 1))

    @property
    def eta_prime(self) -> float:
        return math.log1p(self.delta * (self.Delta - 1) / 8)

    def bound(self, dist: float) -> float:
        return self.C * math.exp(-self.eta * dist)

    def bound_prime(self, dist: float) -> float:
        return self.C_prime * math.exp(-self.eta_prime * dist)


@dataclass(frozen=True)
class WegnerParameters:
    """Constants of the eigenvalue-hit bound for edge boxes."""

    Delta: float
    delta: float

    def __post_init__(self):
        _check_delta(self.Delta, self.delta)

    @property
    def C_W(self) -> float:
        return 1 + math.sqrt(2) / (self.delta * (self.Delta - 1))

    @property
    def max_length(self) -> float:
        """Largest admissible interval length."""
        return 2 * self.delta * (1 - 1 / self.Delta) / self.C_W

    def bound(self, lam: float, rho_sup: float, M: int, N: int, length: float) -> float:
        return self.C_W / lam * rho_sup * (2 * M + 1) * (2 * M + N) * length

    def shrink_length(self, lam: float, rho_sup: float, M: int, N: int,
                      target: float = 0.5) -> float:
        """Halve the interval length from the admissible maximum until the bound is below ``target``."""
        length = self.max_length
        while self.bound(lam, rho_sup, M, N, length) >= target:
            length /= 2
        return length


def apriori_constant(Delta: float, delta: float) -> float:
    """Constant of the per-particle a priori bound on eigencorrelators in the droplet window."""
    _check_delta(Delta, delta)
    g = delta * (Delta - 1)
    return 16 * Delta / g * (8 / g + 2)


def separation_constants(Delta: float, delta: float) -> tuple[float, float]:
    """``(eta_1, C_1)`` controlling how fast deleting far potential moves window eigenvalues."""
    _check_delta(Delta, delta)
    g = delta * (Delta - 1)
    eta1 = math.log1p(g / 16)
    return eta1, 128 / (eta1 * g**2)


def wilson_upper(hits: int, n: int, confidence: float = 0.99) -> float:
    """Upper end of the two-sided Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ParameterError("need at least one trial")
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = hits / n
    denom = 1 + z * z / n
    centre = p + z * z / (2 * n)
    spread = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return min(1.0, (centre + spread) / denom)


# ---------------------------------------------------------------------------
# seeding and reduction


def realization_seed(master_seed: int, r: int, stream: int = 0) -> np.random.SeedSequence:
    """Seed of auxiliary stream ``stream`` for realization ``r``.

    Stream 0 is reserved for the disorder itself (see
    :func:`~xxzdroplet.operators.sample_disorder`).
    """
    key = (r,) if stream == 0 else (r, stream)
    return np.random.SeedSequence(master_seed, spawn_key=key)


def map_realizations(fn, R: int, threads: int = 1) -> list:
    """``[fn(r) for r in range(R)]``, optionally on a process pool; order is kept."""
    if threads <= 1 or R <= 1:
        return [fn(r) for r in range(R)]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(R), chunksize=max(1, R // (4 * threads))))


class RunningStats:
    """Streaming mean and variance (Welford) over arrays of equal shape."""

    def __init__(self, shape=()):
        self.n = 0
        self.mean = np.zeros(shape)
        self._m2 = np.zeros(shape)

    def push(self, x):
        x = np.asarray(x, dtype=float)
        self.n += 1
        d = x - self.mean
        self.mean = self.mean + d / self.n
        self._m2 = self._m2 + d * (x - self.mean)

    @property
    def variance(self) -> np.ndarray:
        if self.n < 2:
            return np.full_like(self.mean, np.nan)
        return self._m2 / (self.n - 1)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variance / self.n)


# ---------------------------------------------------------------------------
# resolvent decay


@dataclass(frozen=True)
class CTResult:
    passed: bool
    dist: float
    lhs: float
    weighted: float
    bound: float

    @property
    def margin(self) -> float:
        """Ratio of bound to the checked quantity (> 1 means satisfied)."""
        return self.bound / self.weighted if self.weighted > 0 else np.inf


_derived: dict = {}


def _derived_op(op, key, make):
    # keep derived operators alive so factorizations cached by matrix id stay valid
    k = (id(op), key)
    hit = _derived.get(k)
    if hit is not None and hit[0] is op:
        return hit[1]
    if len(_derived) > 16:
        _derived.clear()
    out = make(op)
    _derived[k] = (op, out)
    return out


def _bulk_op(op, k: int):
    def make(o):
        bulk = o.index[o.cluster_counts() > k]
        if bulk.size == 0:
            raise ParameterError(f"no configurations with more than {k} clusters")
        return restrict(o, bulk)

    return _derived_op(op, ("bulk", k), make)


def _block_norms(sub, z, A, B):
    posA, posB = sub.positions(A), sub.positions(B)
    G = resolvent(sub, z).block(posA, posB)
    W = sub.cluster_counts().astype(float)
    Gw = np.sqrt(W[posA])[:, None] * G * np.sqrt(W[posB])[None, :]
    return float(np.linalg.norm(G, 2)), float(np.linalg.norm(Gw, 2))


def _as_index(A) -> np.ndarray:
    A = np.unique(np.asarray(A, dtype=np.int64))
    if A.size == 0:
        raise ParameterError("configuration sets must be nonempty")
    return A


def combes_thomas_verify(op, k: int, E: float, epsilon: float, A, B) -> CTResult:
    """Check resolvent decay of the restriction to configurations with more than ``k`` clusters.

    The checked quantity is ``||chi_A W^(1/2) R W^(1/2) chi_B|| / (k+1)``,
    which dominates ``||chi_A R chi_B||``; both are reported.

    Parameters
    ----------
    op : SectorOperator
    A, B : array_like
        Parent indices of configurations with more than ``k`` clusters.

    Raises
    ------
    ParameterError
        If ``E`` lies outside the window for ``k`` or a set leaves the bulk.
    """
    p = op.params
    lo, hi = droplet_window(p.Delta, p.delta, k)
    if not lo <= E <= hi:
        raise ParameterError(f"E={E} outside [{lo}, {hi}]")
    A, B = _as_index(A), _as_index(B)
    sub = _bulk_op(op, k)
    if not (sub.mask(A).sum() == A.size and sub.mask(B).sum() == B.size):
        raise ParameterError(f"sets must consist of configurations with more than {k} clusters")
    d = cs.set_distance(op.space.configs[A], op.space.configs[B])
    lhs, weighted = _block_norms(sub, complex(E, epsilon), A, B)
    bound = CTParameters(p.Delta, p.delta, k).bound(d)
    checked = weighted / (k + 1)
    return CTResult(bool(checked <= bound and lhs <= bound), d, lhs, checked, bound)


def edge_projection_ct_verify(op, E: float, epsilon: float, A, B) -> CTResult:
    """Check resolvent decay of ``H + P_1`` on the whole configuration set.

    ``P_1`` is the projection onto fully packed configurations; the checked
    quantity is ``||chi_A W^(1/2) (H + P_1 - z)^{-1} W^(1/2) chi_B||``.
    """
    p = op.params
    lo, hi = droplet_window(p.Delta, p.delta, 1)
    if not lo <= E <= hi:
        raise ParameterError(f"E={E} outside [{lo}, {hi}]")
    A, B = _as_index(A), _as_index(B)
    shifted = _derived_op(op, "edge", add_edge_projection)
    d = cs.set_distance(op.space.configs[A], op.space.configs[B])
    lhs, weighted = _block_norms(shifted, complex(E, epsilon), A, B)
    bound = CTParameters(p.Delta, p.delta, 1).bound_prime(d)
    return CTResult(bool(weighted <= bound), d, lhs, weighted, bound)


def random_ball(op, rng: np.random.Generator, radius: int, pool=None) -> np.ndarray:
    """Parent indices within 1-distance ``radius`` of a random configuration of ``pool``."""
    pool = op.index if pool is None else np.asarray(pool)
    c = op.space.configs
    centre = c[rng.choice(pool)]
    d = np.abs(c[pool] - centre).sum(axis=1)
    return pool[d <= radius]


@dataclass
class CTSummary:
    checks: int = 0
    violations: int = 0
    min_margin: float = np.inf
    distances: list = field(default_factory=list)
    margins: list = field(default_factory=list)

    def add(self, res: CTResult):
        self.checks += 1
        self.violations += not res.passed
        self.min_margin = min(self.min_margin, res.margin)
        self.distances.append(res.dist)
        self.margins.append(res.margin)

    def merge(self, other: "CTSummary"):
        self.checks += other.checks
        self.violations += other.violations
        self.min_margin = min(self.min_margin, other.min_margin)
        self.distances += other.distances
        self.margins += other.margins

    def log_margin_slope(self) -> float:
        """Least-squares slope of log margin against distance."""
        d = np.asarray(self.distances, dtype=float)
        m = np.log(np.asarray(self.margins, dtype=float))
        ok = np.isfinite(m)
        if ok.sum() < 2 or np.ptp(d[ok]) == 0:
            return float("nan")
        return float(np.polyfit(d[ok], m[ok], 1)[0])


def _ct_realization(params, disorder, N_list, k, energies, epsilons, n_pairs, radius,
                    master_seed, edge, r):
    omega = sample_disorder(disorder, params.L, (master_seed, r))
    rng = np.random.default_rng(realization_seed(master_seed, r, stream=1))
    out = CTSummary()
    for N in N_list:
        op = build_sector_hamiltonian(N, params, omega)
        bulk = op.index[op.cluster_counts() > k]
        pairs = []
        for _ in range(n_pairs):
            pool = op.index if edge else bulk
            A = random_ball(op, rng, int(rng.integers(0, radius + 1)), pool)
            B = random_ball(op, rng, int(rng.integers(0, radius + 1)), pool)
            pairs.append((A, B))
        for E in energies:
            for eps in epsilons:
                for A, B in pairs:
                    if edge:
                        out.add(edge_projection_ct_verify(op, E, eps, A, B))
                    else:
                        out.add(combes_thomas_verify(op, k, E, eps, A, B))
    return out


def combes_thomas_ensemble(params: ModelParams, disorder: DisorderSpec, N_list=(2, 3),
                           k: int = 1, energies=None, epsilons=(0.0, 1e-2), n_pairs: int = 20,
                           radius: int = 2, realizations: int = 100, master_seed: int = 0,
                           edge: bool = False, threads: int = 1) -> CTSummary:
    """Run a resolvent decay check over realizations, particle numbers, energies and set pairs.

    ``edge=False`` checks the bulk restriction at level ``k``; ``edge=True``
    checks ``H + P_1`` on all configurations.  Sets are random balls of
    radius at most ``radius`` in the 1-distance.
    """
    if energies is None:
        lo, hi = droplet_window(params.Delta, params.delta, 1 if edge else k)
        energies = np.linspace(lo, hi, 5)
    fn = partial(_ct_realization, params, disorder, tuple(N_list), k, tuple(energies),
                 tuple(epsilons), n_pairs, radius, master_seed, edge)
    total = CTSummary()
    for part in map_realizations(fn, realizations, threads):
        total.merge(part)
    return total


# ---------------------------------------------------------------------------
# exponential fits


@dataclass(frozen=True)
class FitResult:
    """Fit of ``log mean = log C - m d``."""

    log_C: float
    m: float
    ci: tuple
    r2: float
    d_range: tuple
    n_points: int

    @property
    def no_decay(self) -> bool:
        """True when the confidence interval of ``m`` reaches zero."""
        return not self.ci[0] > 0

    def predict(self, d):
        d = np.asarray(d, dtype=float)
        if np.any(d < self.d_range[0]) or np.any(d > self.d_range[1]):
            raise ParameterError("refusing to extrapolate outside the fitted distances")
        return np.exp(self.log_C - self.m * d)


def fit_exponential(points, confidence: float = 0.95) -> FitResult:
    """Weighted least squares on log means.

    Parameters
    ----------
    points : iterable of (distance, mean, stderr)
        Non-positive means are dropped with a warning.  Weights are
        ``(mean / stderr)**2``; if any stderr is zero or missing the fit is
        unweighted.
    """
    pts = np.array([tuple(p) for p in points], dtype=float).reshape(-1, 3)
    bad = ~(pts[:, 1] > 0)
    if bad.any():
        warnings.warn(f"dropping {int(bad.sum())} non-positive means from the fit", stacklevel=2)
        pts = pts[~bad]
    if pts.shape[0] < 3:
        raise ParameterError("need at least three positive means to fit")
    d, mean, se = pts.T
    y = np.log(mean)
    if np.all(np.isfinite(se) & (se > 0)):
        w = (mean / se) ** 2
    else:
        w = np.ones_like(y)
    X = np.column_stack([np.ones_like(d), -d])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = y - X @ coef
    dof = d.size - 2
    s2 = float(np.sum(w * resid**2) / dof) if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(X.T @ (w[:, None] * X))
    half = stats.t.ppf(0.5 + confidence / 2, max(dof, 1)) * math.sqrt(max(cov[1, 1], 0.0))
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1 - float(np.sum(w * resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(coef[0]), float(coef[1]), (coef[1] - half, coef[1] + half), r2,
                     (float(d.min()), float(d.max())), int(d.size))


# ---------------------------------------------------------------------------
# ensembles along the edge


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything that determines an ensemble run.

    ``energy`` defaults to the centre of the droplet window; ``anchor`` is the
    first site of the reference point (defaults to centring the distances).
    """

    params: ModelParams
    disorder: DisorderSpec
    N_list: tuple = (2,)
    distances: tuple = tuple(range(1, 13))
    realizations: int = 100
    master_seed: int = 0
    s: float = 0.5
    epsilon: float = 1e-3
    N_max: int = 4
    energy: float | None = None
    anchor: int | None = None

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ParameterError("fractional exponent must lie in (0, 1)")
        if self.realizations < 1:
            raise ParameterError("need at least one realization")
        if len(self.distances) == 0 or min(self.distances) < 0:
            raise ParameterError("distances must be non-negative")
        object.__setattr__(self, "N_list", tuple(int(n) for n in self.N_list))
        object.__setattr__(self, "distances", tuple(int(d) for d in self.distances))

    @property
    def window(self) -> tuple:
        return droplet_window(self.params.Delta, self.params.delta, 1)

    @property
    def E(self) -> float:
        return sum(self.window) / 2 if self.energy is None else float(self.energy)

    @property
    def start(self) -> int:
        return -(max(self.distances) // 2) if self.anchor is None else int(self.anchor)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        d["disorder"] = self.disorder.to_dict()
        d["N_list"] = list(self.N_list)
        d["distances"] = list(self.distances)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleConfig":
        d = dict(d)
        d["params"] = ModelParams(**d["params"])
        d["disorder"] = DisorderSpec(**d["disorder"])
        d["N_list"] = tuple(d.get("N_list", (2,)))
        d["distances"] = tuple(d.get("distances", tuple(range(1, 13))))
        return cls(**d)


@dataclass
class DecayRecord:
    """Per-distance sample statistics and an exponential fit."""

    distances: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int
    fit: FitResult | None = None
    samples: np.ndarray | None = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)

    def rows(self) -> list:
        return [(int(d), float(m), float(e), int(self.n_samples))
                for d, m, e in zip(self.distances, self.mean, self.stderr)]

    def monotone_within(self, sigmas: float = 2.0) -> bool:
        """Whether means never increase by more than ``sigmas`` combined standard errors."""
        m, e = self.mean, self.stderr
        rise = m[1:] - m[:-1]
        return bool(np.all(rise <= sigmas * np.hypot(e[1:], e[:-1])))


def _record(distances, samples, diagnostics=None) -> DecayRecord:
    acc = RunningStats(len(distances))
    for row in samples:
        acc.push(row)
    rec = DecayRecord(np.asarray(distances), acc.mean, acc.stderr, acc.n, None,
                      np.asarray(samples), diagnostics or {})
    pts = [(d, m, e) for d, m, e in zip(distances, acc.mean, acc.stderr) if m > 0]
    if len(pts) >= 3:
        rec.fit = fit_exponential(pts)
    return rec


def _edge_positions(op, firsts):
    N = op.N
    cfg = np.array([cs.edge_config(int(f), N) for f in firsts])
    return op.positions(op.space.rank(cfg))


def fractional_moment_samples(config: EnsembleConfig, r: int, N: int | None = None) -> tuple:
    """``|G(u, v_d)|^s`` for one realization, ``u`` packed at the anchor.

    Singular realizations at ``epsilon == 0`` are redrawn from later streams.

    Returns
    -------
    values : ndarray
        One entry per configured distance.
    resampled : int
        Number of redraws needed.
    """
    p = config.params
    N = config.N_list[0] if N is None else N
    u1 = config.start
    firsts = [u1 + d for d in config.distances]
    if u1 < -p.L or max(firsts) + N - 1 > p.L:
        raise ParameterError("edge points do not fit in the volume")
    z = complex(config.E, config.epsilon)
    for attempt in range(100):
        if attempt == 0:
            omega = sample_disorder(config.disorder, p.L, (config.master_seed, r))
        else:
            rng = np.random.default_rng(realization_seed(config.master_seed, r, 1000 + attempt))
            omega = DisorderRealization.constant(p.L).with_values(
                config.disorder.sample(rng, 2 * p.L + 1))
        op = build_sector_hamiltonian(N, p, omega)
        try:
            col = resolvent(op, z).column(int(_edge_positions(op, [u1])[0]))
        except ResolventSingularError:
            continue
        return np.abs(col[_edge_positions(op, firsts)]) ** config.s, attempt
    raise ResolventSingularError("no regular realization found", dist=0.0)


def _fm_task(config, N, r):
    return fractional_moment_samples(config, r, N)


def fractional_moment_scan(config: EnsembleConfig, N: int | None = None,
                           threads: int = 1) -> DecayRecord:
    """Sample means of ``|<u, (H_N - E - i eps)^{-1} v>|^s`` along the edge."""
    N = config.N_list[0] if N is None else N
    out = map_realizations(partial(_fm_task, config, N), config.realizations, threads)
    samples = np.array([v for v, _ in out])
    return _record(config.distances, samples, {"resampled": int(sum(a for _, a in out)), "N": N})


def scalar_chain_greens_row(diag, hop: float, z: complex, u: int) -> np.ndarray:
    """Row ``u`` of ``(T - z)^{-1}`` for the tridiagonal ``T`` with constant hopping.

    Uses the left and right truncated Green's functions of the chain, so no
    matrix is ever formed.
    """
    a = np.asarray(diag, dtype=complex) - z
    n = a.size
    b2 = hop * hop
    gl = np.empty(n, dtype=complex)   # Green's function of [0, k] at k
    gr = np.empty(n, dtype=complex)   # Green's function of [k, n) at k
    gl[0] = 1 / a[0]
    for k in range(1, n):
        gl[k] = 1 / (a[k] - b2 * gl[k - 1])
    gr[n - 1] = 1 / a[n - 1]
    for k in range(n - 2, -1, -1):
        gr[k] = 1 / (a[k] - b2 * gr[k + 1])
    left = gl[u - 1] if u > 0 else 0.0
    right = gr[u + 1] if u < n - 1 else 0.0
    row = np.empty(n, dtype=complex)
    row[u] = 1 / (a[u] - b2 * left - b2 * right)
    for v in range(u + 1, n):
        row[v] = row[v - 1] * (-hop) * gr[v]
    for v in range(u - 1, -1, -1):
        row[v] = row[v + 1] * (-hop) * gl[v]
    return row


def scalar_chain_fractional_moments(Delta: float, lam: float, L: int, beta: float,
                                    disorder: DisorderSpec, E: float, epsilon: float, s: float,
                                    anchor: int, distances, realizations: int,
                                    master_seed: int) -> DecayRecord:
    """Single-magnon fractional moments computed directly from the spin chain energies.

    A lone down spin costs 1/2 per adjacent bond, ``beta`` at either end of
    the chain and ``lam * omega`` from the field; it hops with amplitude
    ``-1/(2 Delta)``.
    """
    n = 2 * L + 1
    bonds = np.full(n, 2.0)
    bonds[[0, -1]] = 1.0
    base = bonds / 2
    base[[0, -1]] += beta
    hop = -1 / (2 * Delta)
    z = complex(E, epsilon)
    u = anchor + L
    samples = []
    for r in range(realizations):
        rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(r,)))
        omega = disorder.sample(rng, n)
        row = scalar_chain_greens_row(base + lam * omega, hop, z, u)
        samples.append(np.abs(row[[u + d for d in distances]]) ** s)
    return _record(list(distances), np.array(samples))


# ---------------------------------------------------------------------------
# edge boxes


def _box_template(N: int, params: ModelParams, x1: int, M: int):
    """Box operator with zero disorder plus the configurations it lives on."""
    zero = DisorderRealization.constant(params.L, 0.0)
    full = build_sector_hamiltonian(N, params, zero)
    box = cs.make_box(full.space, x1, M)
    return restrict(full, box.support)


def _with_disorder(template, params, omega):
    pot = params.lam * omega.values[template.configs + params.L].sum(axis=1)
    pot.setflags(write=False)
    return replace(template, potential=pot, omega=omega)


@dataclass(frozen=True)
class WegnerResult:
    hits: int
    realizations: int
    frequency: float
    wilson_upper: float
    bound: float
    interval: tuple

    @property
    def passed(self) -> bool:
        return self.wilson_upper <= self.bound


def wegner_empirical(params: ModelParams, disorder: DisorderSpec, N: int, M: int, x1: int,
                     interval: tuple, realizations: int, master_seed: int = 0) -> WegnerResult:
    """Frequency with which the box restriction around the edge point at ``x1`` has an eigenvalue in ``interval``.

    Raises
    ------
    ParameterError
        If the interval leaves the droplet window or exceeds the admissible length.
    """
    a, b = map(float, interval)
    lo, hi = droplet_window(params.Delta, params.delta, 1)
    wp = WegnerParameters(params.Delta, params.delta)
    if not (lo <= a < b <= hi):
        raise ParameterError(f"interval {interval} not inside [{lo}, {hi}]")
    if b - a > wp.max_length * (1 + 1e-12):
        raise ParameterError(f"interval length {b - a} exceeds {wp.max_length}")
    template = _box_template(N, params, x1, M)
    hits = 0
    for r in range(realizations):
        omega = sample_disorder(disorder, params.L, (master_seed, r))
        w = la.eigvalsh(_with_disorder(template, params, omega).dense())
        hits += bool(np.any((w >= a) & (w <= b)))
    bound = wp.bound(params.lam, disorder.density_sup, M, N, b - a)
    return WegnerResult(hits, realizations, hits / realizations,
                        wilson_upper(hits, realizations), bound, (a, b))


@dataclass(frozen=True)
class SeparationResult:
    M: int
    epsilons: np.ndarray
    frequency: np.ndarray
    wilson_upper: np.ndarray
    reference: np.ndarray
    realizations: int


def spectral_separation(params: ModelParams, disorder: DisorderSpec, N: int, i: int, j: int,
                        epsilons, realizations: int, master_seed: int = 0) -> SeparationResult:
    """How often the window spectra of the boxes at ``i`` and ``j`` come within ``eps``.

    Window spectra use the droplet window with ``delta / 2``.  The
    ``reference`` curve is the shape ``C_W lam^-1 rho M^3 (eps + 2 C_1
    exp(-3/2 eta_1 M))`` with the unknown absolute constant set to one.
    """
    M = abs(i - j) // 4
    if M < 2 * N + 2 * params.beta:
        raise ParameterError(f"box size M={M} below 2N + 2 beta = {2 * N + 2 * params.beta}")
    lo, hi = droplet_window(params.Delta, params.delta / 2, 1)
    eps = np.asarray(epsilons, dtype=float)
    tx = _box_template(N, params, i, M)
    ty = _box_template(N, params, j, M)
    hits = np.zeros(eps.size, dtype=np.int64)
    for r in range(realizations):
        omega = sample_disorder(disorder, params.L, (master_seed, r))
        wx = la.eigvalsh(_with_disorder(tx, params, omega).dense())
        wy = la.eigvalsh(_with_disorder(ty, params, omega).dense())
        wx = wx[(wx >= lo) & (wx <= hi)]
        wy = wy[(wy >= lo) & (wy <= hi)]
        if wx.size and wy.size:
            gap = np.abs(wx[:, None] - wy[None, :]).min()
            hits += gap <= eps
    freq = hits / realizations
    upper = np.array([wilson_upper(int(h), realizations) for h in hits])
    eta1, C1 = separation_constants(params.Delta, params.delta)
    cw = WegnerParameters(params.Delta, params.delta / 4).C_W
    ref = cw / params.lam * disorder.density_sup * M**3 * (eps + 2 * C1 * math.exp(-1.5 * eta1 * M))
    return SeparationResult(M, eps, freq, upper, ref, realizations)


def schur_identity_residuals(params: ModelParams, disorder: DisorderSpec, N: int, M: int,
                             x1: int, energies, realizations: int,
                             master_seed: int = 0) -> np.ndarray:
    """``max |Q (H_box - E)^{-1} Q K_E - Q|`` per (realization, energy).

    ``Q`` projects onto the packed configurations of the box and ``K_E`` is
    the Schur complement onto them.
    """
    template = _box_template(N, params, x1, M)
    out = []
    for r in range(realizations):
        omega = sample_disorder(disorder, params.L, (master_seed, r))
        op = _with_disorder(template, params, omega)
        H = op.dense()
        for E in energies:
            sd = schur_complement(op, E)
            G = la.solve(H - E * np.eye(H.shape[0]), np.eye(H.shape[0])[:, sd.edge],
                         assume_a="sym")
            prod = G[sd.edge] @ sd.K
            out.append(float(np.abs(prod - np.eye(sd.edge.size)).max()))
    return np.array(out)


# ---------------------------------------------------------------------------
# eigenfunction correlators


def _sector_window_data(N: int, params: ModelParams, omega, window):
    op = build_sector_hamiltonian(N, params, omega)
    data = diagonalize(op, mode="window", interval=window)
    return refine_tails(op, data)


def eigencorrelator_samples(config: EnsembleConfig, r: int) -> tuple:
    """Per-distance sums over sectors of ``Q_N(i, i + d)`` for one realization.

    Returns
    -------
    values : ndarray
        ``sum_{N <= N_max} Q_N`` per configured distance.
    per_sector : ndarray, shape (N_max, n_distances)
    """
    p = config.params
    omega = sample_disorder(config.disorder, p.L, (config.master_seed, r))
    i = config.start
    if i < -p.L or i + max(config.distances) > p.L:
        raise ParameterError("sites do not fit in the volume")
    n_max = min(config.N_max, 2 * p.L + 1)
    per = np.zeros((n_max, len(config.distances)))
    for N in range(1, n_max + 1):
        data = _sector_window_data(N, p, omega, config.window)
        for c, d in enumerate(config.distances):
            per[N - 1, c] = sector_correlator(N, i, i + d, config.window, data)
    return per.sum(axis=0), per


def eigencorrelator_decay(config: EnsembleConfig, threads: int = 1) -> DecayRecord:
    """Ensemble means of the truncated eigencorrelator sum with diagnostics.

    ``diagnostics`` holds ``tail_max`` (largest ``Q_{N_max}`` seen),
    ``apriori_bound`` (the per-particle constant) and ``apriori_violations``
    (sector values above constant times ``N``).
    """
    out = map_realizations(partial(eigencorrelator_samples, config), config.realizations, threads)
    samples = np.array([v for v, _ in out])
    per = np.array([q for _, q in out])
    cc = apriori_constant(config.params.Delta, config.params.delta)
    Ns = np.arange(1, per.shape[1] + 1)[None, :, None]
    diag = {
        "tail_max": float(per[:, -1].max()),
        "apriori_bound": cc,
        "apriori_violations": int(np.sum(per > cc * Ns)),
        "per_sector_mean": per.mean(axis=0),
    }
    return _record(config.distances, samples, diag)
