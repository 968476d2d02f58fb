"""Spectra, spectral projections, resolvents and Schur complements.

Eigen-decompositions are returned as immutable :class:`SpectralData`.  Small
operators are diagonalized densely.  Large sector operators are only ever
diagonalized inside an energy window, using a Chebyshev-filtered Lanczos
iteration whose completeness is certified by an eigenvalue count.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .exceptions import CapacityError, ConvergenceError, ParameterError, ResolventSingularError
from .operators import SectorOperator, SpinOperator

__all__ = [
    "FULL_MAX_DIM",
    "INERTIA_MAX_DIM",
    "droplet_band",
    "droplet_window",
    "SpectralData",
    "SchurData",
    "Resolvent",
    "cluster_labels",
    "diagonalize",
    "diagonal_lower_bound",
    "count_below_bound",
    "inertia_count",
    "projection",
    "resolvent",
    "greens_element",
    "greens_column",
    "schur_complement",
    "bulk_restriction_bound_check",
    "refine_tails",
    "spectrum_rows",
]

FULL_MAX_DIM = 4000
WINDOW_MAX_COUNT = 1500
INERTIA_MAX_DIM = 60_000
REFINE_MAX_DIM = 40_000
CLUSTER_RTOL = 1e-9
RESIDUAL_RTOL = 1e-10


# ---------------------------------------------------------------------------
# closed-form bands


def droplet_band(N: int, Delta: float) -> tuple[float, float]:
    """Endpoints of the N-particle droplet band of the clean chain.

    With ``cosh(rho) = Delta`` the band is
    ``[tanh(rho) tanh(N rho / 2), tanh(rho) / tanh(N rho / 2)]``, which is the
    half-angle form of ``tanh(rho) (cosh(N rho) -+ 1) / sinh(N rho)`` and does
    not overflow for large N.
    """
    if not Delta > 1:
        raise ParameterError(f"Delta must exceed 1, got {Delta}")
    if N < 1:
        raise ParameterError(f"N must be positive, got {N}")
    rho = np.arccosh(Delta)
    t = np.tanh(rho)
    h = np.tanh(N * rho / 2)
    return float(t * h), float(t / h)


def droplet_window(Delta: float, delta: float, k: int = 1) -> tuple[float, float]:
    """The window ``[1 - 1/Delta, (k + 1 - delta)(1 - 1/Delta)]``."""
    if not Delta > 1:
        raise ParameterError(f"Delta must exceed 1, got {Delta}")
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    g = 1 - 1 / Delta
    return g, (k + 1 - delta) * g


# ---------------------------------------------------------------------------
# spectral data


def cluster_labels(eigenvalues: np.ndarray, tol: float) -> np.ndarray:
    """Label ascending eigenvalues so that neighbours closer than ``tol`` share a label."""
    ev = np.asarray(eigenvalues)
    if ev.size == 0:
        return np.zeros(0, dtype=np.int64)
    jumps = np.diff(ev) > tol
    return np.concatenate([[0], np.cumsum(jumps)]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigenpairs of a Hermitian operator, possibly restricted to a window.

    Attributes
    ----------
    eigenvalues : ndarray
        Ascending eigenvalues.
    eigenvectors : ndarray
        Orthonormal columns matching ``eigenvalues``.
    clusters : ndarray
        Integer label per eigenvalue; equal labels mark numerical degeneracy.
    window : tuple or None
        Closed interval used for ``window_members``.
    window_members : ndarray
        Indices of the eigenvalues inside ``window``.
    scale : float
        Norm estimate of the operator; tolerances are relative to it.
    complete : bool
        True if every eigenvalue (full mode) or every eigenvalue in the window
        is present.
    certificate : str
        How completeness was established.
    configs : ndarray or None
        Configuration of each basis vector for sector operators.
    n_sites : int
        Number of chain sites.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    clusters: np.ndarray = field(repr=False)
    window: tuple | None
    window_members: np.ndarray = field(repr=False)
    scale: float
    complete: bool = True
    certificate: str = "full"
    configs: np.ndarray | None = field(default=None, repr=False)
    n_sites: int = 0
    refined: bool = False

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def cluster_groups(self, members=None) -> list[np.ndarray]:
        """Index arrays of the degeneracy clusters meeting ``members``."""
        labels = self.clusters if members is None else np.unique(self.clusters[members])
        return [np.flatnonzero(self.clusters == c) for c in np.unique(labels)]

    def select(self, F) -> np.ndarray:
        """Indices of eigenvalues in ``F``, extended to whole clusters.

        A tuple ``(a, b)`` is read as the closed interval ``[a, b]``; a list or
        array is read as eigenvalue indices.
        """
        if isinstance(F, tuple):
            a, b = F
            hit = np.flatnonzero((self.eigenvalues >= a) & (self.eigenvalues <= b))
        else:
            hit = np.unique(np.asarray(F, dtype=np.int64))
        if hit.size == 0:
            return hit
        return np.flatnonzero(np.isin(self.clusters, self.clusters[hit]))

    def in_interval(self, a: float, b: float) -> np.ndarray:
        """Indices with ``a <= E <= b`` extended to whole clusters."""
        return self.select((float(a), float(b)))

    def min_gap(self) -> float:
        if self.size < 2:
            return np.inf
        return float(np.diff(self.eigenvalues).min())


def _as_matrix(op):
    if isinstance(op, (SectorOperator, SpinOperator)):
        return op.matrix
    if sp.issparse(op):
        return op.tocsr()
    return np.asarray(op)


def _default_window(op):
    params = getattr(op, "params", None)
    if params is None:
        return None
    return droplet_window(params.Delta, params.delta)


def _gershgorin_upper(H) -> float:
    if sp.issparse(H):
        return float(abs(H).sum(axis=1).max())
    return float(np.abs(H).sum(axis=1).max())


def diagonal_lower_bound(H) -> np.ndarray:
    """Diagonal matrix ``D`` with ``H >= D`` in quadratic-form order.

    ``D_xx = H_xx - sum_{y != x} |H_xy|``; the difference ``H - D`` is
    diagonally dominant with non-negative diagonal, hence positive.
    """
    if sp.issparse(H):
        H = H.tocsr()
        d = H.diagonal()
        off = np.asarray(abs(H).sum(axis=1)).ravel() - np.abs(d)
    else:
        d = np.diag(H).real
        off = np.abs(H).sum(axis=1) - np.abs(d)
    return d - off


def count_below_bound(H, E: float, rtol: float = 1e-12) -> int:
    """Upper bound on the number of eigenvalues below ``E - rtol * ||H||``.

    Follows from ``H >= D`` and Weyl monotonicity.  The small slack keeps
    rounding in ``D`` from counting entries that equal ``E`` exactly.
    """
    D = diagonal_lower_bound(H)
    return int(np.count_nonzero(D < E - rtol * _gershgorin_upper(H)))


def inertia_count(H, E: float) -> int:
    """Exact number of eigenvalues of ``H`` strictly below ``E``.

    Uses a symmetric LDL-type factorization of ``H - E`` (sparse LU without
    row pivoting) and Sylvester's law of inertia.

    Raises
    ------
    CapacityError
        If the dimension exceeds ``INERTIA_MAX_DIM``.
    ResolventSingularError
        If ``E`` is (numerically) an eigenvalue.
    """
    n = H.shape[0]
    if n > INERTIA_MAX_DIM:
        raise CapacityError(f"inertia count limited to dim {INERTIA_MAX_DIM}")
    if not sp.issparse(H) and n <= FULL_MAX_DIM:
        _, d, _ = la.ldl(np.asarray(H) - E * np.eye(n))
        w = np.linalg.eigvalsh(d)
        if np.min(np.abs(w)) == 0:
            raise ResolventSingularError("shift is an eigenvalue", dist=0.0)
        return int(np.count_nonzero(w < 0))
    A = (sp.csc_matrix(H) - E * sp.identity(n, format="csc")).tocsc()
    try:
        lu = sla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                      options=dict(SymmetricMode=True))
    except RuntimeError as exc:
        raise ResolventSingularError(str(exc), dist=0.0) from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise ConvergenceError("symmetric factorization needed row pivoting", residuals=None)
    d = lu.U.diagonal()
    if np.min(np.abs(d)) == 0:
        raise ResolventSingularError("shift is an eigenvalue", dist=0.0)
    return int(np.count_nonzero(d < 0))


def _chebyshev_window(H, lo, hi, k, seed=0):
    """Lowest ``k`` eigenpairs of a large sparse symmetric ``H`` via a polynomial filter.

    A Chebyshev polynomial damps ``[c, b]`` (``b`` bounds the spectrum from
    above) and grows monotonically below ``c > hi``, so the ``k`` largest
    eigenvalues of ``p(H)`` belong to the ``k`` smallest of ``H``.
    """
    n = H.shape[0]
    b = _gershgorin_upper(H)
    a = float(diagonal_lower_bound(H).min())
    c = min(hi + max(0.25 * (hi - a), 1e-3 * b), 0.5 * (hi + b))
    e, m = (b - c) / 2, (b + c) / 2

    def growth(E):
        x = abs((E - m) / e)
        return np.arccosh(max(x, 1.0))

    g_hi, g_lo = growth(hi), growth(a)
    deg = int(np.ceil(np.log(1e4) / max(g_hi, 1e-6)))
    deg = max(4, min(deg, int(np.log(1e13) / max(g_lo, 1e-6)), 200))
    # below c the polynomial has sign (-1)^deg; an even degree keeps it positive
    deg += deg % 2
    Hs = ((H - m * sp.identity(n, format="csr")) * (2 / e)).tocsr()

    def apply(x):
        y0, y1 = x, 0.5 * (Hs @ x)
        for _ in range(2, deg + 1):
            y0, y1 = y1, Hs @ y1 - y0
        return y1

    op = sla.LinearOperator((n, n), matvec=apply, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    ncv = min(n, k + max(24, k // 5))
    try:
        _, V = sla.eigsh(op, k=k, which="LA", ncv=ncv, tol=1e-12, v0=v0, maxiter=300)
    except sla.ArpackNoConvergence as exc:
        raise ConvergenceError("filtered Lanczos did not converge", residuals=None) from exc
    HV = H @ V
    T = V.T @ HV
    theta, U = np.linalg.eigh((T + T.T) / 2)
    V = V @ U
    res = np.linalg.norm(HV @ U - V * theta, axis=0)
    return theta, V, res, b


def _window_pairs(H, lo: float, hi: float):
    """Eigenpairs with ``lo <= E <= hi`` (up to the cluster tolerance)."""
    n = H.shape[0]
    scale = max(_gershgorin_upper(H), 1e-300)
    tol = CLUSTER_RTOL * scale
    bound = count_below_bound(H, hi + tol)
    if bound == 0:
        return np.zeros(0), np.zeros((n, 0)), scale, "diagonal bound: nothing below the window top"
    if n <= FULL_MAX_DIM:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        w, V = np.linalg.eigh(dense)
        keep = (w >= lo - tol) & (w <= hi + tol)
        return w[keep], V[:, keep], scale, "dense"
    if n <= INERTIA_MAX_DIM:
        # spectrum slicing: exact count, then shift-invert at the window centre
        count = inertia_count(H, hi + tol) - inertia_count(H, lo - tol)
        if count == 0:
            return np.zeros(0), np.zeros((n, 0)), scale, "inertia 0"
        if count >= n - 1:
            raise CapacityError("window holds almost the whole spectrum; use full mode")
        sigma = 0.5 * (lo + hi)
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            w, V = sla.eigsh(sp.csc_matrix(H), k=count, sigma=sigma, which="LM", v0=v0,
                             tol=1e-13, ncv=min(n, max(2 * count + 1, count + 32)))
        except sla.ArpackNoConvergence as exc:
            raise ConvergenceError("shift-invert Lanczos did not converge", residuals=None) from exc
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        outside = (w < lo - tol) | (w > hi + tol)
        if np.any(outside):
            raise ConvergenceError("shift-invert returned eigenvalues outside the window",
                                   residuals=None)
        return w, V, scale, f"inertia {count}"
    if bound > WINDOW_MAX_COUNT:
        raise CapacityError(f"up to {bound} eigenvalues below the window top; "
                            f"the filtered solver is limited to {WINDOW_MAX_COUNT}")
    w, V, res, _ = _chebyshev_window(sp.csr_matrix(H), lo, hi, bound)
    wanted = w <= hi + tol
    if np.any(res[wanted] > RESIDUAL_RTOL * scale):
        raise ConvergenceError("window eigenpairs not converged", residuals=res)
    keep = wanted & (w >= lo - tol)
    return w[keep], V[:, keep], scale, f"diagonal bound {bound}"


def diagonalize(op, mode: str = "full", interval: tuple | None = None,
                check: bool = True) -> SpectralData:
    """Eigen-decomposition of a sector or spin operator.

    Parameters
    ----------
    op : SectorOperator, SpinOperator or matrix
    mode : {"full", "window"}
        ``"full"`` returns every eigenpair (dimension at most ``FULL_MAX_DIM``).
        ``"window"`` returns exactly the eigenpairs in ``interval`` (default:
        the droplet window of the operator's parameters).
    interval : tuple, optional
        Closed energy interval.
    check : bool
        Verify residuals and orthonormality.

    Raises
    ------
    CapacityError
        Full mode above ``FULL_MAX_DIM``.
    ConvergenceError
        Residuals too large or the eigenvalue count disagrees with the
        inertia of the shifted operator.
    """
    H = _as_matrix(op)
    n = H.shape[0]
    window = interval if interval is not None else _default_window(op)
    configs = op.configs if isinstance(op, SectorOperator) else None
    if isinstance(op, SectorOperator):
        n_sites = op.space.n_sites
    elif isinstance(op, SpinOperator):
        n_sites = op.n_sites
    else:
        n_sites = 0

    if mode == "full":
        if n > FULL_MAX_DIM:
            raise CapacityError(f"full diagonalization limited to dim {FULL_MAX_DIM}, got {n}")
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        w, V = np.linalg.eigh(dense)
        scale = max(float(np.abs(w).max()) if n else 0.0, 1e-300)
        certificate, complete = "full", True
    elif mode == "window":
        if window is None:
            raise ParameterError("window mode needs an interval")
        w, V, scale, certificate = _window_pairs(H, *map(float, window))
        complete = True
    else:
        raise ParameterError(f"unknown mode {mode!r}")

    labels = cluster_labels(w, CLUSTER_RTOL * scale)
    if window is not None:
        tol = CLUSTER_RTOL * scale
        members = np.flatnonzero((w >= window[0] - tol) & (w <= window[1] + tol))
        if members.size:
            members = np.flatnonzero(np.isin(labels, labels[members]))
    else:
        members = np.zeros(0, dtype=np.int64)
    for arr in (w, V, labels, members):
        arr.setflags(write=False)
    data = SpectralData(
        eigenvalues=w, eigenvectors=V, clusters=labels, window=window, window_members=members,
        scale=scale, complete=complete, certificate=certificate, configs=configs, n_sites=n_sites,
    )
    if check and w.size:
        _check_pairs(H, data)
    return data


def _check_pairs(H, data: SpectralData):
    V, w = data.eigenvectors, data.eigenvalues
    res = np.linalg.norm(H @ V - V * w, axis=0)
    if res.max() > RESIDUAL_RTOL * data.scale:
        raise ConvergenceError("eigenpair residuals exceed tolerance", residuals=res)
    gram = V.T @ V
    if np.abs(gram - np.eye(w.size)).max() > 1e-10:
        raise ConvergenceError("eigenvectors are not orthonormal", residuals=res)


def spectrum_rows(data: SpectralData) -> list[tuple[int, float, bool]]:
    """``(index, eigenvalue, in_window)`` rows for export."""
    inside = np.zeros(data.size, dtype=bool)
    inside[data.window_members] = True
    return [(i, float(e), bool(f)) for i, (e, f) in enumerate(zip(data.eigenvalues, inside))]


# ---------------------------------------------------------------------------
# projections


def projection(data: SpectralData, F) -> np.ndarray:
    """Dense spectral projection onto the eigenvalues in ``F``.

    ``F`` is a closed interval ``(a, b)`` or a collection of eigenvalue
    indices.  Degeneracy clusters are included as a whole.
    """
    idx = data.select(F)
    V = data.eigenvectors[:, idx]
    return V @ V.T


# ---------------------------------------------------------------------------
# resolvents


class Resolvent:
    """Factorization of ``H - z`` reused for many right-hand sides.

    Parameters
    ----------
    H : sparse or dense matrix
    z : complex
        Spectral parameter.  For real ``z`` the distance from ``z`` to the
        spectrum is estimated and must exceed ``min_dist``.
    """

    def __init__(self, H, z: complex, min_dist: float = 1e-10):
        self.H = sp.csc_matrix(H)
        self.z = complex(z)
        n = self.H.shape[0]
        real = self.z.imag == 0
        dtype = float if real else complex
        A = (self.H.astype(dtype) - (self.z.real if real else self.z) * sp.identity(n, format="csc"))
        self._A = A.tocsc()
        try:
            self._lu = sla.splu(self._A)
        except RuntimeError as exc:
            raise ResolventSingularError(f"H - z is singular at z={z}", dist=0.0) from exc
        if real:
            dist = self.distance_estimate()
            if dist <= min_dist:
                raise ResolventSingularError(
                    f"real shift {z.real} within {dist:.3g} of the spectrum", dist=dist
                )

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def distance_estimate(self, iters: int = 30) -> float:
        """Estimate of ``dist(z, spectrum) = 1 / ||(H - z)^-1||`` by power iteration."""
        x = np.random.default_rng(1).standard_normal(self.dim)
        x /= np.linalg.norm(x)
        nrm = 0.0
        for _ in range(iters):
            y = self._lu.solve(x)
            nrm = np.linalg.norm(y)
            if not np.isfinite(nrm) or nrm == 0:
                return 0.0
            x = y / nrm
        return 1.0 / nrm

    def solve(self, b) -> np.ndarray:
        """``(H - z)^{-1} b`` with one step of iterative refinement if needed."""
        b = np.asarray(b)
        dtype = np.result_type(b.dtype, self._A.dtype)
        x = self._lu.solve(b.astype(dtype))
        r = b - self._A @ x
        bn = np.linalg.norm(b)
        if bn and np.linalg.norm(r) > RESIDUAL_RTOL * bn:
            x = x + self._lu.solve(r.astype(dtype))
            r = b - self._A @ x
            if np.linalg.norm(r) > RESIDUAL_RTOL * bn:
                raise ConvergenceError("resolvent solve inaccurate", residuals=np.abs(r))
        return x

    def column(self, v: int) -> np.ndarray:
        e = np.zeros(self.dim)
        e[v] = 1.0
        return self.solve(e)

    def element(self, u: int, v: int) -> complex:
        return complex(self.column(v)[u])

    def block(self, A, B) -> np.ndarray:
        """The matrix ``[(H - z)^{-1}]_{A, B}`` for row positions ``A`` and ``B``."""
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        E = np.zeros((self.dim, B.size))
        E[B, np.arange(B.size)] = 1.0
        X = self.solve(E)
        return X[A]


_CACHE: OrderedDict = OrderedDict()
_CACHE_SIZE = 8


def resolvent(op, z: complex) -> Resolvent:
    """Cached :class:`Resolvent` for ``(op, z)``."""
    H = _as_matrix(op)
    key = (id(H), complex(z))
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is H:
        _CACHE.move_to_end(key)
        return hit[1]
    R = Resolvent(H, z)
    _CACHE[key] = (H, R)
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return R


def _row(op, u) -> int:
    if isinstance(u, (int, np.integer)):
        return int(u)
    if isinstance(op, SectorOperator):
        return int(op.positions([op.space.index(u)])[0])
    raise ParameterError("configurations can only address sector operators")


def greens_element(op, z: complex, u, v) -> complex:
    """``<u, (H - z)^{-1} v>`` for configurations (or row indices) ``u`` and ``v``."""
    return resolvent(op, z).element(_row(op, u), _row(op, v))


def greens_column(op, z: complex, v) -> np.ndarray:
    """The column ``(H - z)^{-1} e_v``."""
    return resolvent(op, z).column(_row(op, v))


# ---------------------------------------------------------------------------
# Schur complement


@dataclass(frozen=True, eq=False)
class SchurData:
    """Partition of ``H`` into edge block ``A``, bulk block ``B`` and coupling ``V``.

    ``K = A - E - V (B - E)^{-1} V^T`` is the effective operator on the edge
    rows ``edge``; ``bulk`` holds the remaining rows.
    """

    E: float
    K: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    edge: np.ndarray = field(repr=False)
    bulk: np.ndarray = field(repr=False)

    @property
    def bulk_gap(self) -> float:
        """Smallest eigenvalue of ``B - E``."""
        if self.B.size == 0:
            return np.inf
        return float(np.linalg.eigvalsh(self.B).min() - self.E)

    @property
    def B_inverse_norm(self) -> float:
        return 1.0 / self.bulk_gap if self.B.size else 0.0

    @property
    def V_norm(self) -> float:
        return float(np.linalg.norm(self.V, 2)) if self.V.size else 0.0


def schur_complement(op: SectorOperator, E: float, edge=None) -> SchurData:
    """Effective edge operator of ``op`` at energy ``E``.

    ``edge`` lists row positions of the edge part; by default all rows whose
    configuration is fully packed.

    Raises
    ------
    ResolventSingularError
        If ``B - E`` is not positive definite.
    """
    H = op.dense()
    n = H.shape[0]
    if edge is None:
        edge = np.flatnonzero(op.cluster_counts() == 1)
    edge = np.asarray(edge, dtype=np.int64)
    bulk = np.setdiff1d(np.arange(n), edge)
    A = H[np.ix_(edge, edge)]
    B = H[np.ix_(bulk, bulk)]
    V = H[np.ix_(edge, bulk)]
    if bulk.size:
        try:
            c = la.cho_factor(B - E * np.eye(bulk.size))
        except la.LinAlgError as exc:
            w = np.linalg.eigvalsh(B)
            raise ResolventSingularError(
                f"bulk block minus E={E} is not positive", dist=float(np.abs(w - E).min())
            ) from exc
        K = A - E * np.eye(edge.size) - V @ la.cho_solve(c, V.T)
    else:
        K = A - E * np.eye(edge.size)
    K = (K + K.T) / 2
    return SchurData(E=float(E), K=K, A=A, B=B, V=V, edge=edge, bulk=bulk)


def bulk_restriction_bound_check(op: SectorOperator, k: int, tol: float = 1e-10) -> bool:
    """Whether the restriction to configurations with more than ``k`` clusters
    has spectrum above ``(k + 1)(1 - 1/Delta)``.  Vacuously true if empty."""
    from .operators import restrict

    w = op.cluster_counts()
    bulk = op.index[w > k]
    if bulk.size == 0:
        return True
    sub = restrict(op, bulk)
    target = (k + 1) * op.params.gap - tol
    if sub.dim <= FULL_MAX_DIM:
        return bool(np.linalg.eigvalsh(sub.dense()).min() >= target)
    if count_below_bound(sub.matrix, target) == 0:
        return True
    lam = sla.eigsh(sub.matrix, k=1, which="SA", tol=1e-12, return_eigenvectors=False)[0]
    return bool(lam >= target)


# ---------------------------------------------------------------------------
# accurate eigenvector tails


def refine_tails(op: SectorOperator, data: SpectralData, members=None,
                 core: float = 1e-6) -> SpectralData:
    """Recompute the small components of isolated eigenvectors to high relative accuracy.

    For an eigenpair ``(E, psi)`` and the set ``T`` where ``|psi|`` is below
    ``core * max|psi|``, the exact eigenvector satisfies
    ``psi_T = -(H_T - E)^{-1} H_{T,C} psi_C``.  Solving this system resolves
    components far below the absolute accuracy of the eigensolver.  Only
    eigenvalues that form their own cluster are refined; large operators are
    returned unchanged.
    """
    if data.size == 0 or op.dim > REFINE_MAX_DIM:
        return data
    H = op.matrix.tocsr()
    members = data.window_members if members is None else np.asarray(members)
    V = np.array(data.eigenvectors)
    counts = np.bincount(data.clusters)
    for a in members:
        if counts[data.clusters[a]] != 1:
            continue
        psi = V[:, a]
        small = np.abs(psi) < core * np.abs(psi).max()
        if not small.any():
            continue
        T, C = np.flatnonzero(small), np.flatnonzero(~small)
        E = float(psi @ (H @ psi))
        HT = H[T][:, T]
        rhs = -(H[T][:, C] @ psi[C])
        try:
            lu = sla.splu((HT - E * sp.identity(T.size, format="csr")).tocsc())
            x = lu.solve(rhs)
        except RuntimeError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        new = psi.copy()
        new[T] = x
        new /= np.linalg.norm(new)
        if np.linalg.norm(new - psi) > 1e-8:
            continue
        V[:, a] = new
    V.setflags(write=False)
    return replace(data, eigenvectors=V, refined=True)

