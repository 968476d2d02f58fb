from itertools import combinations

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from xxzdroplet.correlators import (
    ENVELOPE_CONSTANT,
    CorrelatorRecord,
    LocalObservable,
    block_decompose,
    clustering_envelope,
    default_time_grid,
    dynamical_sup,
    number_correlator_sum,
    number_observable,
    partition_sup,
    random_observable,
    restricted_evolution,
    sector_correlator,
    set_correlator,
    state_correlator,
    sum_identity_check,
    vanishing_identities_check,
    vanishing_identity_values,
)
from xxzdroplet.exceptions import ParameterError
from xxzdroplet.operators import (
    DisorderSpec,
    ModelParams,
    build_sector_hamiltonian,
    build_spin_hamiltonian,
    sample_disorder,
    total_number_operator,
)
from xxzdroplet.spectral import diagonalize

from conftest import DOWN, site_op


def _chain(L=2, seed=0, Delta=2.0, lam=1.0):
    p = ModelParams(Delta=Delta, lam=lam, L=L)
    om = sample_disorder(DisorderSpec(), L, seed)
    H = build_spin_hamiltonian(p, om)
    return p, om, H, diagonalize(H)


def _brute_partition_sup(X, Y, I, data):
    """Enumerate all contiguous groupings of the clusters in ``I``."""
    idx = data.select(I)
    groups = data.cluster_groups(idx)
    K = len(groups)
    best = 0.0
    for r in range(K):
        for cuts in combinations(range(1, K), r):
            edges = (0,) + cuts + (K,)
            total = 0.0
            for a, b in zip(edges[:-1], edges[1:]):
                members = np.concatenate(groups[a:b])
                total += set_correlator(X, Y, members, data)
            best = max(best, total)
    return best


# ---------------------------------------------------------------------------
# observables


def test_local_observable_embedding_matches_kron():
    L = 2
    rng = np.random.default_rng(0)
    X = random_observable((-1, 1), L, rng)
    # embed by brute force: sum over local matrix units
    full = np.zeros((32, 32), dtype=complex)
    units = {0: np.array([[1, 0], [0, 0]]), 1: np.array([[0, 0], [0, 1]])}
    flips = {(0, 1): np.array([[0, 1], [0, 0]]), (1, 0): np.array([[0, 0], [1, 0]])}
    local = {**{(k, k): v for k, v in units.items()}, **flips}
    for a in range(4):
        for b in range(4):
            bits_a, bits_b = ((a >> 1) & 1, a & 1), ((b >> 1) & 1, b & 1)
            f1 = local[(bits_a[0], bits_b[0])]
            f2 = local[(bits_a[1], bits_b[1])]
            term = np.kron(np.kron(np.kron(np.kron(np.eye(2), f1), np.eye(2)), f2), np.eye(2))
            full += X.matrix[a, b] * term
    assert np.abs(X.full.toarray() - full).max() <= 1e-15
    n0 = number_observable(0, L).full.toarray()
    assert np.array_equal(n0, site_op(DOWN, 2, 5))


def test_local_observable_errors():
    with pytest.raises(ParameterError):
        LocalObservable((), np.eye(1), 2)
    with pytest.raises(ParameterError):
        LocalObservable((1, 0), np.eye(4), 2)
    with pytest.raises(ParameterError):
        LocalObservable((3,), np.eye(2), 2)
    with pytest.raises(ParameterError):
        LocalObservable((0,), np.eye(4), 2)


# ---------------------------------------------------------------------------
# state and set correlators


def test_state_correlator_examples():
    L = 2
    _, _, H, data = _chain()
    rng = np.random.default_rng(1)
    X = random_observable((0,), L, rng)
    identity = LocalObservable((1,), np.eye(2), L)
    psi = data.eigenvectors[:, 7]
    assert state_correlator(X, identity, psi) <= 1e-14
    basis = np.zeros(32)
    basis[0b01010] = 1
    assert state_correlator(number_observable(-1, L), number_observable(1, L), basis) == 0
    Ni = number_observable(0, L)
    n = np.linalg.norm(Ni.full @ psi) ** 2
    assert state_correlator(Ni, Ni, psi) == pytest.approx(n - n**2, abs=1e-14)
    with pytest.raises(ParameterError):
        state_correlator(Ni, Ni, 2 * psi)


def test_set_correlator_trivial_sets_and_singletons():
    L = 2
    _, _, H, data = _chain(seed=3)
    rng = np.random.default_rng(2)
    X, Y = random_observable((-2,), L, rng), random_observable((1, 2), L, rng)
    assert set_correlator(X, Y, (-1.0, 1e3), data) <= 1e-12
    assert set_correlator(X, Y, (-5.0, -1.0), data) == 0
    for a in range(data.size):
        assert abs(set_correlator(X, Y, [a], data)
                   - state_correlator(X, Y, data.eigenvectors[:, a])) <= 1e-12


# ---------------------------------------------------------------------------
# partition suprema


def test_partition_sup_single_eigenvalue():
    L = 2
    _, _, H, data = _chain(seed=4)
    rng = np.random.default_rng(3)
    X, Y = random_observable((0,), L, rng), random_observable((2,), L, rng)
    E = data.eigenvalues[5]
    res = partition_sup(X, Y, (E - 1e-9, E + 1e-9), data)
    assert res.value == pytest.approx(set_correlator(X, Y, [5], data), abs=1e-13)
    assert res.exact


@pytest.mark.parametrize("seed", range(4))
def test_partition_sup_matches_enumeration(seed):
    L = 2
    _, _, H, data = _chain(seed=seed)
    rng = np.random.default_rng(seed)
    X = random_observable((-2, -1), L, rng)
    Y = random_observable((1,), L, rng)
    E = data.eigenvalues
    I = (E[3] - 1e-9, E[12] + 1e-9)  # ten eigenvalues
    res = partition_sup(X, Y, I, data)
    assert res.value == pytest.approx(_brute_partition_sup(X, Y, I, data), rel=1e-12)
    singles = sum(state_correlator(X, Y, data.eigenvectors[:, a]) for a in data.select(I))
    assert res.value >= singles - 1e-12
    reached = sum(set_correlator(X, Y, part, data) for part in res.partition)
    assert reached == pytest.approx(res.value, rel=1e-12)
    covered = np.sort(np.concatenate(res.partition))
    assert np.array_equal(covered, data.select(I))


def test_partition_sup_with_degenerate_window():
    # the clean chain has reflection-symmetric degeneracies
    L = 2
    p = ModelParams(Delta=2.0, lam=0.0, L=L)
    from xxzdroplet.operators import DisorderRealization

    data = diagonalize(build_spin_hamiltonian(p, DisorderRealization.constant(L)))
    rng = np.random.default_rng(9)
    X, Y = random_observable((-2,), L, rng), random_observable((2,), L, rng)
    groups = data.cluster_groups()
    assert any(g.size > 1 for g in groups[1:11])
    I = (data.eigenvalues[groups[1][0]] - 1e-9, data.eigenvalues[groups[10][-1]] + 1e-9)
    res = partition_sup(X, Y, I, data)
    assert res.value == pytest.approx(_brute_partition_sup(X, Y, I, data), rel=1e-12)


# ---------------------------------------------------------------------------
# restricted evolution and the dynamical supremum


def test_restricted_evolution_against_matrix_exponential():
    L = 2
    _, _, H, data = _chain(seed=5)
    rng = np.random.default_rng(4)
    X = random_observable((0, 1), L, rng)
    I = data.window
    P = data.eigenvectors[:, data.select(I)]
    HI = P @ np.diag(data.eigenvalues[data.select(I)]) @ P.T
    Xd = X.full.toarray()
    assert np.array_equal(restricted_evolution(X, I, 0.0, data), Xd.astype(complex))
    for t in (0.3, 2.0, 17.5):
        U = la.expm(1j * t * HI)
        ref = U @ Xd @ U.conj().T
        got = restricted_evolution(X, I, t, data)
        assert np.abs(got - ref).max() <= 1e-10
        assert np.linalg.norm(got, 2) == pytest.approx(np.linalg.norm(Xd, 2), rel=1e-10)


def test_dynamical_sup_bounds_and_refinement():
    L = 2
    _, _, H, data = _chain(seed=6)
    rng = np.random.default_rng(5)
    X, Y = random_observable((-2,), L, rng), random_observable((2,), L, rng)
    I = (data.eigenvalues[1] - 1e-9, data.eigenvalues[9] + 1e-9)
    coarse = default_time_grid(data, I)
    res = dynamical_sup(X, Y, I, data, coarse)
    assert res.grid_max <= res.certified + 1e-12
    fine = dynamical_sup(X, Y, I, data, np.union1d(coarse, np.linspace(0, 50, 300)))
    assert fine.grid_max >= res.grid_max
    assert fine.certified == pytest.approx(res.certified)
    # the evolved value at the reported time matches a direct evaluation
    Xt = restricted_evolution(X, I, res.t_max, data)
    direct = partition_sup(Xt, Y.full, I, data).value
    assert direct == pytest.approx(res.grid_max, rel=1e-9)


def test_dynamical_sup_commuting_case_is_static():
    L = 2
    _, _, H, data = _chain(seed=7)
    Ntot = LocalObservable(tuple(range(-L, L + 1)),
                           total_number_operator(L).toarray(), L)
    Y = random_observable((0,), L, np.random.default_rng(0))
    I = data.window
    res = dynamical_sup(Ntot, Y, I, data, np.linspace(0, 20, 40))
    assert res.grid_max == pytest.approx(partition_sup(Ntot, Y, I, data).value, abs=1e-12)


# ---------------------------------------------------------------------------
# block decomposition and exact identities


def test_block_decomposition_examples():
    L = 2
    rng = np.random.default_rng(6)
    X = random_observable((-1, 0, 2), L, rng)
    bd = block_decompose(X)
    assert np.abs(bd.reconstruct() - X.matrix).max() == 0
    assert abs(bd.zeta) <= X.norm + 1e-12
    assert np.abs(bd.blocks[("+", "+")] - bd.zeta * bd.P_plus).max() == 0
    Pp = LocalObservable((0,), np.diag([1.0, 0.0]), L)
    bp = block_decompose(Pp)
    assert bp.zeta == 1 and all(np.abs(m).max() == 0 for k, m in bp.blocks.items() if k != ("+", "+"))
    assert block_decompose(number_observable(1, L)).zeta == 0
    # P_minus is dominated by the local number operator
    nsum = sum(number_observable(s, L).full for s in X.support).toarray()
    diff = nsum - bd.projector("-").full.toarray()
    assert np.linalg.eigvalsh(diff).min() >= -1e-12


def _random_disjoint(L, rng):
    sites = rng.permutation(np.arange(-L, L + 1))
    nx, ny = rng.integers(1, 3, size=2)
    return tuple(sorted(sites[:nx])), tuple(sorted(sites[nx:nx + ny]))


@settings(max_examples=25)
@given(st.integers(0, 2**31 - 1))
def test_vanishing_identities_random(seed):
    L = 2
    rng = np.random.default_rng(seed)
    _, _, H, data = _chain(seed=seed % 1000)
    sx, sy = _random_disjoint(L, rng)
    X, Y = random_observable(sx, L, rng), random_observable(sy, L, rng)
    a, b = np.sort(rng.uniform(0, 4, size=2))
    t = float(rng.uniform(0, 30))
    assert vanishing_identities_check(X, Y, (a, b), t, data)
    assert vanishing_identities_check(X, Y, (a, b), t, data, I=data.window)


def test_vanishing_identities_reject_overlap():
    L = 2
    _, _, H, data = _chain()
    rng = np.random.default_rng(0)
    with pytest.raises(ParameterError):
        vanishing_identity_values(random_observable((0, 1), L, rng),
                                  random_observable((1,), L, rng), data.window, 0.0, data)


def test_envelope_bound():
    L = 2
    rng = np.random.default_rng(11)
    for seed in range(10):
        _, _, H, data = _chain(seed=seed)
        sx, sy = _random_disjoint(L, rng)
        X, Y = random_observable(sx, L, rng), random_observable(sy, L, rng)
        I = data.window
        sup = dynamical_sup(X, Y, I, data)
        assert sup.grid_max <= ENVELOPE_CONSTANT * clustering_envelope(X, Y, I, data) + 1e-12


# ---------------------------------------------------------------------------
# sector correlators


def _sector_data(N, L=5, seed=0, Delta=2.0, lam=1.0):
    p = ModelParams(Delta=Delta, lam=lam, L=L)
    op = build_sector_hamiltonian(N, p, sample_disorder(DisorderSpec(), L, seed))
    return op, diagonalize(op)


def test_sector_correlator_diagonal_and_anderson_form():
    op, data = _sector_data(2)
    I = data.window
    idx = data.select(I)
    si = (data.configs == 1).any(axis=1)
    V = data.eigenvectors[:, idx]
    assert sector_correlator(2, 1, 1, I, data) == pytest.approx(np.sum(V[si] ** 2), rel=1e-12)
    op1, d1 = _sector_data(1, L=6, seed=2)
    I1 = (0.0, 10.0)
    for i, j in ((-6, 6), (-1, 2), (3, 3)):
        ref = np.sum(np.abs(d1.eigenvectors[i + 6]) * np.abs(d1.eigenvectors[j + 6]))
        assert sector_correlator(1, i, j, I1, d1) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ParameterError):
        sector_correlator(3, 0, 1, I, data)


@given(st.integers(-5, 5), st.integers(-5, 5), st.integers(0, 20))
@settings(max_examples=30)
def test_sector_correlator_cauchy_schwarz(i, j, seed):
    op, data = _sector_data(2, seed=seed)
    I = (0.0, 3.0)
    q = sector_correlator(2, i, j, I, data)
    assert q <= np.sqrt(sector_correlator(2, i, i, I, data) * sector_correlator(2, j, j, I, data)) + 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_sum_identity(seed):
    L = 3
    p = ModelParams(Delta=2.0, lam=1.0, L=L)
    om = sample_disorder(DisorderSpec(), L, seed)
    spin = diagonalize(build_spin_hamiltonian(p, om))
    sectors = {N: diagonalize(build_sector_hamiltonian(N, p, om)) for N in range(1, 2 * L + 2)}
    I = spin.window
    for i, j in ((-3, 3), (0, 1), (2, 2), (-1, 2)):
        assert sum_identity_check(i, j, I, spin, sectors, L)
    assert number_correlator_sum(0, 1, (-3.0, -1.0), spin, L) == 0
    # only one-particle eigenvalues below the two-particle band bottom
    low = (0.0, min(d.eigenvalues.min() for N, d in sectors.items() if N > 1) - 1e-9)
    one = sector_correlator(1, -1, 2, low, sectors[1])
    assert one == pytest.approx(number_correlator_sum(-1, 2, low, spin, L), abs=1e-12)


def test_correlator_record():
    r = CorrelatorRecord(seed=1, N=2, i=-3, j=4, t=0.0, value=0.1)
    assert r.distance == 7
