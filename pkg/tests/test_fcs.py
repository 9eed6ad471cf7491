import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _models import hmm_fixtures, hmm_path_density, rand_density, rand_hermitian, rand_hmm
from spinchain.errors import CapExceededError, DimensionError, SpinChainError, TripleError
from spinchain.fcs import (
    GeneratingTriple,
    HiddenMarkovSpec,
    block_transfer_map,
    classical_markov_spec,
    classify_ergodicity,
    from_hidden_markov,
    local_density,
    make_triple,
    product_triple,
    random_triple,
    stationary_distribution,
    stationary_state,
    validate_triple,
)
from spinchain.maps import KrausMap, stochastic_map
from spinchain.operators import partial_trace, tensor_power

seeds = st.integers(0, 2**32 - 1)


def test_validate_examples():
    assert validate_triple(product_triple(np.diag([0.4, 0.6]))).ok
    for spec in hmm_fixtures():
        assert validate_triple(from_hidden_markov(spec)).ok
    assert validate_triple(random_triple(2, 3, rank=2, rng=0)).ok


def test_validate_flags_non_stationary_rho():
    t = from_hidden_markov(classical_markov_spec(np.array([[0.5, 0.5], [0.2, 0.8]])))
    bad = GeneratingTriple(t.d_A, t.d_B, t.E, np.diag([0.5, 0.5]))
    v = validate_triple(bad)
    assert not v.ok and v.failures() == ["invariant"]
    assert v.invariance_residual == pytest.approx(0.15)


def test_validate_flags_non_unital_and_non_faithful():
    t = random_triple(2, 2, rng=1)
    v = validate_triple(GeneratingTriple(2, 2, KrausMap(2 * t.E.kraus), t.rho))
    assert "unital" in v.failures()
    v = validate_triple(GeneratingTriple(2, 2, t.E, np.diag([1.0, 0.0])))
    assert "rho_faithful" in v.failures()


def test_make_triple_rejects_non_faithful_stationary_density():
    # classical chain with an absorbing state: stationary distribution (1, 0)
    spec_T = np.array([[1.0, 0.0], [0.5, 0.5]])
    ops = []
    for x, y in itertools.product(range(2), repeat=2):
        if spec_T[x, y] > 0:
            L = np.zeros((4, 2))
            L[:, x] = np.sqrt(spec_T[x, y]) * np.kron(np.eye(2)[x], np.eye(2)[y])
            ops.append(L.T)
    with pytest.raises(TripleError) as err:
        make_triple(2, np.array(ops))
    assert err.value.code == "NOT_FAITHFUL"
    with pytest.raises(DimensionError):
        make_triple(3, np.array(ops))


def test_hidden_markov_spec_validation():
    theta = np.array([[np.eye(2) / 2] * 2] * 2)
    with pytest.raises(SpinChainError) as err:
        HiddenMarkovSpec(np.array([[0.5, 0.6], [0.2, 0.8]]), theta)
    assert err.value.code == "STOCHASTIC_ROW"
    with pytest.raises(SpinChainError) as err:
        HiddenMarkovSpec(np.array([[0.5, 0.5], [0.2, 0.8]]), theta, r=np.array([0.5, 0.5]))
    assert err.value.code == "NOT_STATIONARY"
    spec = HiddenMarkovSpec(np.array([[0.5, 0.5], [0.2, 0.8]]), theta)
    assert np.allclose(spec.r, [2 / 7, 5 / 7])


def test_stationary_distribution_two_state():
    p, q = 0.3, 0.1
    T = np.array([[1 - p, p], [q, 1 - q]])
    assert np.allclose(stationary_distribution(T), [q / (p + q), p / (p + q)])


def test_local_density_matches_path_sum():
    for spec in hmm_fixtures():
        t = from_hidden_markov(spec)
        for n in (1, 2, 3):
            assert np.max(np.abs(local_density(t, n) - hmm_path_density(spec, n))) <= 1e-12


def test_local_density_product_and_marginals():
    phi = np.diag([0.3, 0.7]).astype(complex)
    t = product_triple(phi)
    assert np.allclose(local_density(t, 3), tensor_power(phi, 3), atol=1e-15)
    t = random_triple(2, 2, rng=4)
    om = {n: local_density(t, n) for n in (1, 2, 3, 4)}
    for n in (1, 2, 3):
        assert np.allclose(partial_trace(om[n + 1], [2] * (n + 1), list(range(n))), om[n], atol=1e-12)
        assert np.allclose(partial_trace(om[n + 1], [2] * (n + 1), list(range(1, n + 1))), om[n], atol=1e-12)
    for n, w in om.items():
        assert abs(np.trace(w) - 1) <= 1e-12
        assert np.linalg.eigvalsh(w)[0] >= -1e-12


def test_local_density_classical_path_measure():
    T = np.array([[0.3, 0.7], [0.6, 0.4]])
    spec = classical_markov_spec(T)
    om = local_density(from_hidden_markov(spec), 3)
    r = spec.r
    diag = np.real(np.diag(om))
    for x in itertools.product(range(2), repeat=3):
        # outputs of an embedded classical chain are its states x_0, x_1, x_2
        p = r[x[0]] * T[x[0], x[1]] * T[x[1], x[2]]
        assert diag[x[0] * 4 + x[1] * 2 + x[2]] == pytest.approx(p, abs=1e-14)
    assert np.allclose(om, np.diag(diag), atol=1e-15)


def test_local_density_cap(monkeypatch):
    monkeypatch.setenv("SPINCHAIN_CAP", "16")
    t = product_triple(np.eye(2) / 2)
    assert local_density(t, 4).shape == (16, 16)
    with pytest.raises(CapExceededError):
        local_density(t, 5)


def test_block_transfer_map_examples():
    t = random_triple(2, 2, rng=5)
    assert np.allclose(block_transfer_map(t, np.eye(2)).matrix, t.E1.matrix)
    S = block_transfer_map(t, np.eye(8))
    assert np.allclose(S.matrix, np.linalg.matrix_power(t.E1.matrix, 3), atol=1e-12)
    assert np.allclose(S(np.eye(2)), np.eye(2), atol=1e-12)
    rng = np.random.default_rng(6)
    a, b = rand_hermitian(rng, 2), rand_hermitian(rng, 2)
    S = block_transfer_map(t, np.kron(a, b))
    assert np.allclose(S.matrix, t.transfer_map(a).matrix @ t.transfer_map(b).matrix, atol=1e-12)


def test_block_transfer_map_by_basis_expansion():
    # X = sum c_{ijkl} e_ij (x) e_kl, and the map is linear in X
    t = random_triple(2, 3, rng=7)
    rng = np.random.default_rng(8)
    X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    ref = np.zeros((9, 9), dtype=complex)
    units = [np.outer(np.eye(2)[i], np.eye(2)[j]) for i in range(2) for j in range(2)]
    for u in units:
        for v in units:
            c = np.sum(np.conj(np.kron(u, v)) * X)
            ref += c * (t.transfer_map(u).matrix @ t.transfer_map(v).matrix)
    assert np.max(np.abs(block_transfer_map(t, X).matrix - ref)) <= 1e-12


def test_transfer_route_matches_density_route_random_observables():
    rng = np.random.default_rng(9)
    triples = [from_hidden_markov(s) for s in hmm_fixtures()[:3]] + [random_triple(2, 2, rng=10)]
    count = 0
    for n in range(1, 7):
        for t in triples:
            om = local_density(t, n)
            for _ in range(5 if n < 6 else 1):
                X = rand_hermitian(rng, 2**n)
                lhs = t.expectation(X)
                rhs = np.trace(om @ X)
                assert abs(lhs - rhs) <= 1e-10 * max(1.0, np.max(np.abs(X)))
                count += 1
    assert count >= 100


def test_ergodicity_examples():
    assert classify_ergodicity(product_triple(np.diag([0.2, 0.8]))).strongly_mixing
    flip = classical_markov_spec(np.array([[0.0, 1.0], [1.0, 0.0]]))
    rep = classify_ergodicity(from_hidden_markov(flip))
    assert rep.ergodic and not rep.strongly_mixing
    rep = classify_ergodicity(from_hidden_markov(classical_markov_spec(np.array([[0.5, 0.5], [0.2, 0.8]]))))
    assert rep.ergodic and rep.strongly_mixing


def test_stationary_state_examples():
    p, q = 0.3, 0.1
    rho, mult = stationary_state(stochastic_map(np.array([[1 - p, p], [q, 1 - q]])))
    assert mult == 1
    assert np.allclose(rho, np.diag([q / (p + q), p / (p + q)]))
    ds = np.array([[0.2, 0.5, 0.3], [0.5, 0.2, 0.3], [0.3, 0.3, 0.4]])
    rho, _ = stationary_state(stochastic_map(ds))
    assert np.allclose(rho, np.eye(3) / 3)
    block = np.zeros((4, 4))
    block[:2, :2] = [[0.5, 0.5], [0.2, 0.8]]
    block[2:, 2:] = [[0.1, 0.9], [0.6, 0.4]]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rho, mult = stationary_state(stochastic_map(block))
    assert mult == 2 and any("fixed space" in str(w.message) for w in caught)
    assert abs(np.trace(rho) - 1) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_random_hmm_embedding_is_valid(seed):
    rng = np.random.default_rng(seed)
    spec = rand_hmm(rng, int(rng.integers(1, 4)), d_A=int(rng.integers(1, 4)))
    t = from_hidden_markov(spec)
    assert validate_triple(t).ok
    assert np.max(np.abs(local_density(t, 2) - hmm_path_density(spec, 2))) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_local_density_is_density_with_consistent_marginals(seed, dA, dB):
    t = random_triple(dA, dB, rank=2, rng=seed)
    n = 2 if dA == 3 else 3
    om_n, om_next = local_density(t, n), local_density(t, n + 1)
    assert abs(np.trace(om_next) - 1) <= 1e-12
    assert np.linalg.eigvalsh(om_next)[0] >= -1e-12
    assert np.allclose(partial_trace(om_next, [dA] * (n + 1), list(range(n))), om_n, atol=1e-12)
    # translation invariance: dropping the first site gives the same density
    assert np.allclose(partial_trace(om_next, [dA] * (n + 1), list(range(1, n + 1))), om_n, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_product_triple_expectation(seed):
    rng = np.random.default_rng(seed)
    phi = rand_density(rng, 2)
    a, b = rand_hermitian(rng, 2), rand_hermitian(rng, 2)
    t = product_triple(phi)
    ref = np.trace(phi @ a) * np.trace(phi @ b)
    assert abs(t.expectation(np.kron(a, b)) - ref) <= 1e-12 * max(1.0, abs(ref))
