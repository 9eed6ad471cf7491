import warnings
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _models import hmm_fixtures, primitive_hmm_fixtures, rand_density, rand_hermitian
from spinchain.errors import CapExceededError, DimensionError, ReducibleMapError
from spinchain.fcs import classical_markov_spec, from_hidden_markov, local_density, product_triple, random_triple
from spinchain.ldp import (
    PAULI_X,
    PAULI_Z,
    Interaction,
    average_observable,
    finite_pressure,
    finite_pressure_grid,
    gibbs_local_state,
    ising_interaction,
    local_hamiltonian,
    log_mgf_limit,
    log_mgf_sequence,
    mean_energy_norm,
    mean_energy_operator,
    mgf_exact,
    one_site_interaction,
    pressure_curve,
    rate_function,
    rate_function_model,
    spectral_distribution,
    transfer_pressure,
    zero_interaction,
)
from spinchain.operators import expm_h, shift_embed, tensor_power

seeds = st.integers(0, 2**32 - 1)
Z = np.real(PAULI_Z)
I2 = np.eye(2)


def test_interaction_validation_and_algebra():
    with pytest.raises(DimensionError):
        Interaction(2, (np.eye(3),))
    phi = ising_interaction(1.0, 0.5) + one_site_interaction(Z)
    assert phi.range == 1
    assert np.allclose(phi.terms[0], 1.5 * Z)
    assert zero_interaction(2).range == -1
    assert np.allclose(ising_interaction(2.0).scaled(0.5).terms[1], np.kron(Z, Z))


def test_local_hamiltonian_examples():
    assert np.array_equal(local_hamiltonian(zero_interaction(2), 3), np.zeros((8, 8)))
    h = rand_hermitian(np.random.default_rng(0), 2)
    H = local_hamiltonian(one_site_interaction(h), 2)
    assert np.allclose(H, np.kron(h, I2) + np.kron(I2, h))
    H = local_hamiltonian(ising_interaction(1.0), 3)
    assert np.allclose(H, np.kron(np.kron(Z, Z), I2) + np.kron(I2, np.kron(Z, Z)))
    assert np.allclose(local_hamiltonian(ising_interaction(1.0), 1), 0)


def test_mean_energy_operator_three_site_oracle():
    J, hz, hx = 0.7, 0.3, -0.4
    phi = ising_interaction(J, hz, hx)
    h = hz * Z + hx * np.real(PAULI_X)
    zz = J * np.kron(Z, Z)
    # windows containing the middle site: {1}, {0,1}, {1,2}
    ref = np.kron(np.kron(I2, h), I2) + np.kron(zz, I2) / 2 + np.kron(I2, zz) / 2
    assert np.allclose(mean_energy_operator(phi), ref)
    assert mean_energy_norm(phi) == pytest.approx(np.max(np.abs(np.linalg.eigvalsh(ref))))
    assert mean_energy_norm(one_site_interaction(Z)) == pytest.approx(1.0)
    assert mean_energy_norm(zero_interaction(2)) == 0.0


def test_average_observable_examples():
    assert np.allclose(average_observable(I2, 3), np.eye(8))
    A = average_observable(Z, 2)
    assert np.allclose(np.diag(A), [1, 0, 0, -1])
    with pytest.raises(CapExceededError):
        average_observable(Z, 13)


def test_spectral_distribution_examples():
    d = spectral_distribution(np.eye(2) / 2, Z)
    assert d.atoms == [(-1.0, 0.5), (1.0, 0.5)]
    p, n = 0.3, 6
    om = tensor_power(np.diag([p, 1 - p]), n)
    d = spectral_distribution(om, average_observable(np.diag([1.0, 0.0]), n))
    ref = {k / n: comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)}
    assert len(d.values) == n + 1
    for v, m in d.atoms:
        assert m == pytest.approx(ref[round(v * n) / n], abs=1e-14)
    assert d.total_mass == pytest.approx(1.0, abs=1e-12)
    assert d.mean == pytest.approx(p)
    assert d.mass(0, 0.5) == pytest.approx(sum(ref[k / n] for k in range(4)))
    assert d.mass(0, 0.5, closed=False) == pytest.approx(sum(ref[k / n] for k in range(1, 3)))
    with pytest.raises(DimensionError):
        spectral_distribution(np.eye(4) / 4, Z)


def test_spectral_distribution_support_in_spectrum_range():
    rng = np.random.default_rng(1)
    a = rand_hermitian(rng, 2)
    w = np.linalg.eigvalsh(a)
    t = random_triple(2, 2, rng=2)
    for n in (1, 3, 5):
        d = spectral_distribution(local_density(t, n), average_observable(a, n))
        assert d.values[0] >= w[0] - 1e-12 and d.values[-1] <= w[-1] + 1e-12
        assert d.total_mass == pytest.approx(1.0, abs=1e-12)


def test_mgf_examples():
    t = random_triple(2, 2, rng=3)
    assert mgf_exact(t, Z, 0.0, 5) == pytest.approx(1.0, abs=1e-13)
    phi = np.diag([0.3, 0.7])
    pt = product_triple(phi)
    s, n = 0.8, 4
    assert mgf_exact(pt, Z, s, n) == pytest.approx((0.3 * np.exp(s) + 0.7 * np.exp(-s)) ** n, rel=1e-12)


def test_mgf_matches_distribution_route():
    # m_n(t) = int exp(n t x) dmu_n(x) = omega_n(exp(t sum_k gamma^k(a)))
    rng = np.random.default_rng(4)
    for spec in hmm_fixtures():
        t = from_hidden_markov(spec)
        a = rand_hermitian(rng, 2)
        for n in (1, 2, 4):
            d = spectral_distribution(local_density(t, n), average_observable(a, n))
            for s in (-1.3, 0.4, 2.0):
                ref = d.mgf(n * s)
                assert mgf_exact(t, a, s, n) == pytest.approx(ref, rel=1e-11)


def test_log_mgf_limit_examples():
    t = random_triple(2, 2, rng=5)
    assert log_mgf_limit(t, Z, 0.0) == pytest.approx(0.0, abs=1e-13)
    pt = product_triple(np.diag([0.3, 0.7]))
    s = 1.1
    assert log_mgf_limit(pt, Z, s) == pytest.approx(np.log(0.3 * np.exp(s) + 0.7 * np.exp(-s)))
    T = np.array([[0.3, 0.7], [0.6, 0.4]])
    ct = from_hidden_markov(classical_markov_spec(T))
    f = np.array([1.0, -1.0])
    # Perron root of the tilted matrix T_xy exp(s f(y)); trace and determinant give the quadratic
    M = T * np.exp(s * f)[None, :]
    tr, det = np.trace(M), np.linalg.det(M)
    root = (tr + np.sqrt(tr**2 - 4 * det)) / 2
    assert log_mgf_limit(ct, Z, s) == pytest.approx(np.log(root), rel=1e-12)


def test_log_mgf_sequence_converges():
    t = from_hidden_markov(primitive_hmm_fixtures()[0])
    a = rand_hermitian(np.random.default_rng(6), 2)
    logs = log_mgf_sequence(t, a, 0.7, 400)
    n = np.arange(1, 401)
    F = log_mgf_limit(t, a, 0.7)
    assert abs(logs[-1] / 400 - F) <= 1e-2
    assert abs((logs[-1] - logs[-2]) - F) <= 1e-10
    assert np.all(np.abs(logs / n - F)[50:] <= np.abs(logs / n - F)[10] + 1e-12)


def test_rate_function_examples():
    p = 0.3
    pt = product_triple(np.diag([p, 1 - p]))
    a = np.diag([1.0, 0.0])
    for x in (0.1, 0.5, 0.9):
        kl = x * np.log(x / p) + (1 - x) * np.log((1 - x) / (1 - p))
        assert rate_function(pt, a, x) == pytest.approx(kl, abs=1e-8)
    assert rate_function(pt, a, p) <= 1e-10
    assert rate_function(pt, a, 1.0) == pytest.approx(-np.log(p))
    assert rate_function(pt, a, 0.0) == pytest.approx(-np.log(1 - p))
    assert rate_function(pt, a, 1.5) == np.inf
    assert rate_function(pt, a, -0.1) == np.inf


def test_rate_function_refuses_reducible_map():
    block = np.zeros((4, 4))
    block[:2, :2] = [[0.5, 0.5], [0.2, 0.8]]
    block[2:, 2:] = [[0.1, 0.9], [0.6, 0.4]]
    t = from_hidden_markov(classical_markov_spec(block, r=np.array([2 / 7, 5 / 7, 0.4, 0.6]) / 2))
    with pytest.raises(ReducibleMapError):
        rate_function(t, np.diag([1.0, 0, 0, 0]), 0.2)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        log_mgf_limit(t, np.diag([1.0, 0, 0, 0]), 0.2)
    assert caught


def test_rate_function_model_shape():
    t = from_hidden_markov(primitive_hmm_fixtures()[1])
    a = rand_hermitian(np.random.default_rng(7), 2)
    model = rate_function_model(t, a, np.linspace(-4, 4, 41))
    assert model.convexity_residual() >= -1e-10
    xs = np.linspace(*model.spectrum_bounds, 31)
    I = model.evaluate(xs)
    assert np.all(I >= 0)
    assert model.I(model.mean) <= 1e-8
    # convex: second differences on an even grid are nonnegative
    assert np.min(np.diff(I, 2)) >= -1e-7
    assert np.argmin(I) in (np.argmin(np.abs(xs - model.mean)), np.argmin(np.abs(xs - model.mean)) + 1)


def test_large_deviation_sandwich_at_cap(monkeypatch):
    # (1/n) log mu_n(C) against -inf_C I for a closed and an open interval away from the mean
    monkeypatch.setenv("SPINCHAIN_CAP", "1024")
    n = 10
    t = from_hidden_markov(primitive_hmm_fixtures()[2])
    a = Z
    model = rate_function_model(t, a, np.zeros(0))
    mu = spectral_distribution(local_density(t, n), average_observable(a, n))
    c, d = model.mean + 0.3, 1.0
    xs = np.linspace(c, d, 201)
    inf_I = float(np.min(model.evaluate(xs)))
    upper = np.log(mu.mass(c, d, tol=1e-12)) / n
    lower = np.log(mu.mass(c, d, closed=False, tol=1e-12)) / n
    # finite-n slack of order log(n + 1) / n from the polynomial prefactors
    slack = 2 * np.log(n + 1) / n
    assert upper <= -inf_I + slack
    assert lower >= -inf_I - slack


def test_pressure_examples():
    t = random_triple(2, 2, rng=8)
    assert np.allclose(pressure_curve(t, zero_interaction(2), 0.7, 4).values, 0, atol=1e-14)
    phi1 = np.diag([0.3, 0.7])
    h = rand_hermitian(np.random.default_rng(9), 2)
    ref = np.log(np.trace(phi1 @ expm_h(-0.5 * h))).real
    for n in (1, 2, 4):
        assert finite_pressure(phi1, one_site_interaction(h), 0.5, n) == pytest.approx(ref, abs=1e-13)
    w = np.linalg.eigvalsh(h)
    assert finite_pressure("tracial", one_site_interaction(h), 0.5, 3) == pytest.approx(
        np.log(np.mean(np.exp(-0.5 * w)))
    )
    grid = finite_pressure_grid(t, ising_interaction(1, 0.3), [-1.0, 0.2, 1.5], 4)
    direct = [finite_pressure(t, ising_interaction(1, 0.3), s, 4) for s in (-1.0, 0.2, 1.5)]
    assert np.allclose(grid, direct, atol=1e-13)


def test_pressure_bounds_and_transfer_route():
    t = from_hidden_markov(hmm_fixtures()[1])
    phi = ising_interaction(1.0, 0.4, 0.6)
    for s in (-2.0, 0.5, 1.5):
        curve = pressure_curve(t, phi, s, 6, m_max=4)
        assert curve.bound_ok
    # product state and one-site interaction: transfer value equals the exact pressure
    phi1 = np.diag([0.25, 0.75])
    h = rand_hermitian(np.random.default_rng(10), 2)
    ref = np.log(np.trace(phi1 @ expm_h(-1.2 * h))).real
    assert transfer_pressure(product_triple(phi1), one_site_interaction(h), 1.2, 3) == pytest.approx(ref)


def test_gibbs_local_state():
    assert np.allclose(gibbs_local_state(zero_interaction(2), 2), np.eye(4) / 4)
    G = gibbs_local_state(ising_interaction(1.0), 2)
    w = np.exp(-np.array([1, -1, -1, 1.0]))
    assert np.allclose(G, np.diag(w / w.sum()))
    assert gibbs_local_state(ising_interaction(1.0, 0.3, 0.5), 3).shape == (8, 8)


@settings(max_examples=15, deadline=None)
@given(seeds, st.floats(-2, 2))
def test_pressure_within_mean_energy_bound(seed, s):
    rng = np.random.default_rng(seed)
    phi = Interaction(2, (rand_hermitian(rng, 2), rand_hermitian(rng, 4)))
    omega = rand_density(rng, 2)
    bound = abs(s) * mean_energy_norm(phi)
    for n in (1, 2, 3):
        assert abs(finite_pressure(omega, phi, s, n)) <= bound + 1e-10


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_log_mgf_limit_is_convex(seed):
    rng = np.random.default_rng(seed)
    t = random_triple(2, 2, rng=int(rng.integers(2**31)))
    a = rand_hermitian(rng, 2)
    ts = np.linspace(-2, 2, 9)
    F = np.array([log_mgf_limit(t, a, s, check=False) for s in ts])
    assert np.min(np.diff(F, 2)) >= -1e-10
    w = np.linalg.eigvalsh(a)
    assert np.all(F <= np.maximum(ts * w[0], ts * w[-1]) + 1e-10)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_shifted_one_site_terms_sum(seed):
    rng = np.random.default_rng(seed)
    h = rand_hermitian(rng, 2)
    H = local_hamiltonian(one_site_interaction(h), 3)
    assert np.allclose(H, sum(shift_embed(h, k, 3, 2) for k in range(3)))
    assert np.allclose(H / 3, average_observable(h, 3))
