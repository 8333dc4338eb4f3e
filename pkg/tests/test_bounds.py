import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisygrf import bounds as B
from noisygrf.errors import BoundViolation, ContractViolation, NoCertificateError, OutOfRegimeError
from noisygrf.models import IsingModel
from noisygrf.oracle import brute_force_logZ, iter_states
from noisygrf.samplers import SamplerConfig


def two_state(a, b):
    return np.array([[1 - a, a], [b, 1 - b]])


def test_stochastic_matrix_validation():
    with pytest.raises(ContractViolation):
        B.StochasticMatrix([[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(ContractViolation):
        B.StochasticMatrix([[1.2, -0.2], [0.5, 0.5]])
    with pytest.raises(ContractViolation):
        B.StochasticMatrix(np.ones((2, 3)) / 3)
    P = B.StochasticMatrix(two_state(0.2, 0.3))
    assert np.allclose(P.stationary(), [0.6, 0.4])


def test_kernel_distance_examples():
    assert B.tv_kernel_distance(np.eye(2), np.eye(2)) == 0.0
    assert B.tv_kernel_distance(two_state(0.1, 0.1), two_state(0.3, 0.1)) == pytest.approx(0.2)
    with pytest.raises(ContractViolation):
        B.tv_kernel_distance(np.eye(2), np.eye(3))


def test_primitivity():
    assert not B.is_primitive(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not B.is_primitive(np.eye(3))
    assert B.is_primitive(two_state(0.5, 1.0))
    # Wielandt's matrix: primitive, with first positive power (n-1)^2 + 1
    n = 6
    P = np.roll(np.eye(n), 1, axis=1)
    P[n - 1] = 0.0
    P[n - 1, [0, 1]] = 0.5
    assert B.is_primitive(P)
    assert np.any(np.linalg.matrix_power(P, (n - 1) ** 2) == 0)
    assert np.all(np.linalg.matrix_power(P, (n - 1) ** 2 + 1) > 0)


def test_two_state_certificates():
    P = two_state(0.2, 0.3)
    assert B.dobrushin_coefficient(P) == pytest.approx(0.5)
    assert B.minorization_mass(P) == pytest.approx(0.5)
    d = B.ergodicity_cert(P, "dobrushin")
    assert (d.c, d.rho) == (1.0, pytest.approx(0.5))
    m = B.ergodicity_cert(P, "minorization")
    assert (m.c, m.rho) == (2.0, pytest.approx(0.5))
    assert B.ergodicity_cert(P).method == "dobrushin"
    with pytest.raises(NoCertificateError):
        B.ergodicity_cert(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ContractViolation):
        B.ergodicity_cert(P, "spectral")


def test_no_one_step_certificate():
    # primitive, but rows 0 and 1 have disjoint supports and no column is positive everywhere
    P = np.array([[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5], [0.5, 0.0, 0.5, 0.0], [0.0, 0.5, 0.0, 0.5]])
    assert B.is_primitive(P)
    with pytest.raises(NoCertificateError):
        B.ergodicity_cert(P)


def test_mixing_lambda_and_bound_examples():
    assert B.mixing_lambda(1.0, 0.5) == 0
    assert B.mixing_lambda(2.0, 0.5) == 1
    assert B.mixing_lambda(2.0, 0.9) == 7
    assert B.mixing_lambda(2.0, 0.0) == 1
    cert = B.ErgodicityCert(1.0, 0.5, "dobrushin")
    assert B.uniform_perturbation_bound(cert, 0.01) == (0, pytest.approx(0.02))
    cert = B.ErgodicityCert(2.0, 0.5, "minorization")
    assert B.uniform_perturbation_bound(cert, 0.1) == (1, pytest.approx(0.3))
    with pytest.raises(ContractViolation):
        B.uniform_perturbation_bound(cert, -1.0)
    with pytest.raises(ContractViolation):
        B.ErgodicityCert(0.5, 0.5, "x")


@given(st.floats(1.0, 10.0), st.floats(0.01, 0.99), st.floats(0, 1), st.floats(0, 1))
def test_bound_monotone_in_kappa(c, rho, k1, k2):
    cert = B.ErgodicityCert(c, rho, "x")
    lo, hi = sorted((k1, k2))
    assert B.uniform_perturbation_bound(cert, lo)[1] <= B.uniform_perturbation_bound(cert, hi)[1]


@given(st.floats(1.0, 10.0), st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_bound_monotone_in_rho(c, rho, d):
    lo = B.uniform_perturbation_bound(B.ErgodicityCert(c, rho, "x"), 0.1)[1]
    hi = B.uniform_perturbation_bound(B.ErgodicityCert(c, rho + d, "x"), 0.1)[1]
    assert lo <= hi + 1e-12


def test_certificates_hold_on_random_kernels():
    rng = np.random.default_rng(0)
    for _ in range(50):
        P = B.random_kernel(10, rng)
        pi = B.StochasticMatrix(P).stationary()
        for method in ("dobrushin", "minorization"):
            cert = B.ergodicity_cert(P, method)
            Pn = np.eye(10)
            for n in range(1, 101):
                Pn = Pn @ P
                tv = 0.5 * np.abs(Pn - pi).sum(axis=1).max()
                assert tv <= cert.c * cert.rho**n + 1e-12


def test_random_pairs_respect_bound():
    out = B.verify_random_pairs(8, 200, 0.05, 200, seed=1)
    assert out == {"pairs_tested": 200, "violations": 0, "worst_slack": out["worst_slack"]}
    assert out["worst_slack"] >= 0


def test_verify_perturbation_flags_a_false_certificate():
    P = two_state(0.05, 0.05)
    Phat = two_state(0.15, 0.05)
    honest = B.verify_perturbation(P, Phat, 0, 100)
    assert not honest.violated and honest.check() is honest
    fake = B.verify_perturbation(P, Phat, 0, 100, cert=B.ErgodicityCert(1.0, 0.01, "fake"))
    assert fake.violated
    with pytest.raises(BoundViolation):
        fake.check()


def test_n_step_tv_exact_for_two_states():
    P, Phat = two_state(0.2, 0.3), two_state(0.4, 0.3)
    tv = B.n_step_tv(P, Phat, 0, 30)
    expect = [abs(np.linalg.matrix_power(P, n)[0, 0] - np.linalg.matrix_power(Phat, n)[0, 0]) for n in range(1, 31)]
    assert np.allclose(tv, expect, atol=1e-15)
    with pytest.raises(ContractViolation):
        B.n_step_tv(P, Phat, 5, 3)


def test_rate_constants_scale_with_root_n():
    a = B.noisy_exchange_rate_constants(1.2, 1.1, 1.5, 100)
    b = B.noisy_exchange_rate_constants(1.2, 1.1, 1.5, 400)
    assert b.total_bound == pytest.approx(a.total_bound / 2, rel=1e-14)
    assert a.c == 2.0 and a.rho == pytest.approx(1 - 1 / (1.2**3 * 1.1**3 * 1.5**4))
    assert a.lam == B.mixing_lambda(2.0, a.rho)
    with pytest.raises(ContractViolation):
        B.noisy_exchange_rate_constants(0.5, 1, 1, 10)
    with pytest.raises(ContractViolation):
        B.noisy_exchange_rate_constants(1, 1, 1, 0)


def test_rate_constants_unit_inputs():
    # c_pi = c_h = K = 1 gives rho floored at 0, lambda 1 and prefactor 1 + 0
    r = B.noisy_exchange_rate_constants(1, 1, 1, 1)
    assert r.rho == B.RHO_FLOOR and r.lam == 1
    assert r.total_bound == pytest.approx(1.0, abs=1e-12)


def test_langevin_delta_regime_and_formula():
    with pytest.raises(OutOfRegimeError):
        B.langevin_delta_bound(1, 2.0, 0.5, 4.0)
    with pytest.raises(ContractViolation):
        B.langevin_delta_bound(0, 2.0, 0.5, 100)
    out = B.langevin_delta_bound(2, 3.0, 0.25, 1000)
    a = 4 * 9 * 0.0625
    expect = np.expm1(2 * np.log(1000) / (a * 1000)) + 4 * 2 * np.sqrt(np.pi) * 3 * 0.25 / 1000
    assert out.delta == pytest.approx(expect, rel=1e-14)
    assert out.kernel_bound == pytest.approx(np.sqrt(expect / 2))
    assert out.kernel_bound_sqrt == pytest.approx(np.sqrt(expect))
    assert out.threshold == pytest.approx(2 * a)


def test_langevin_delta_large_n_asymptotics():
    k, S, s = 1, 2.0, 0.5
    a = 4 * S**2 * s**2
    N = 1e8
    out = B.langevin_delta_bound(k, S, s, N)
    lead = k * np.log(N) / (a * N) + 4 * k * np.sqrt(np.pi) * S * s / N
    assert out.delta == pytest.approx(lead, rel=1e-6)
    deltas = [B.langevin_delta_bound(k, S, s, n).delta for n in (1e4, 1e5, 1e6, 1e7)]
    assert all(x > y for x, y in zip(deltas, deltas[1:]))


def test_langevin_delta_ratio_tends_to_one_slowly():
    # delta N a / (k log(N/k)) = 1 + O(1 / log N): far from 1 at N = 1e8 when S |Sigma| ~ 1
    def ratio(k, S, s, N):
        a = 4 * S**2 * s**2
        return B.langevin_delta_bound(k, S, s, N).delta * a * N / (k * np.log(N / k))

    assert ratio(1, 1.0, 0.1, 1e8) == pytest.approx(1.0, abs=0.01)
    big = [ratio(1, 1.0, 1.0, n) for n in (1e8, 1e16, 1e64, 1e256)]
    assert big[0] > 2
    assert all(x > y for x, y in zip(big, big[1:])) and big[-1] < 1.05


def test_histogram_tv_examples():
    x = np.array([0.0, 0.0, 1.0, 2.0])
    assert B.histogram_tv(x, x, 0.0, 4) == 0.0
    stay = np.zeros(10)
    move = np.linspace(1, 2, 10)
    assert B.histogram_tv(stay, move, 0.0, 3) == pytest.approx(1.0)


def test_empirical_tv_identical_kernels_is_zero(ising44_data):
    model, y, _ = ising44_data
    cfg = SamplerConfig(aux_burnin=20, rw_scale=0.3)
    fn = B.one_step_function("exchange", model, y, cfg)
    res = B.empirical_kernel_tv(fn, fn, [0.4], n_reps=300, n_boot=20)
    assert res.tv == 0.0 and res.bins == 7
    with pytest.raises(ContractViolation):
        B.empirical_kernel_tv(fn, fn, [0.4, 0.1], n_reps=10)


def test_empirical_tv_detects_a_different_kernel():
    a = lambda t, rng: t + rng.normal(0, 1.0, size=1)
    b = lambda t, rng: t + rng.normal(3.0, 1.0, size=1)
    res = B.empirical_kernel_tv(a, b, [0.0], n_reps=5000, n_boot=50)
    # TV between N(0,1) and N(3,1) is 2 Phi(1.5) - 1
    from scipy.stats import norm

    assert res.tv == pytest.approx(2 * norm.cdf(1.5) - 1, abs=4 * res.se + 0.03)


def test_grid_kernels_are_stochastic_and_reversible():
    model = IsingModel(2, 2)
    y = np.array([[1, 1], [-1, 1]], dtype=np.int8)
    grid = np.linspace(-1, 1.5, 11)
    P = B.grid_exact_mh_kernel(model, y, grid, 0.3)
    B.StochasticMatrix(P)
    pi = B.StochasticMatrix(P).stationary()
    flow = pi[:, None] * P
    assert np.allclose(flow, flow.T, atol=1e-12)
    Q = B.grid_noisy_exchange_kernel(model, y, grid, 0.3, 3)
    B.StochasticMatrix(Q)


def test_grid_exchange_acceptance_by_explicit_states():
    model = IsingModel(2, 2)
    y = np.array([[1, 1], [-1, 1]], dtype=np.int8)
    grid = np.array([-0.2, 0.1, 0.5])
    Q = B.grid_noisy_exchange_kernel(model, y, grid, 0.4, 1)
    h = B._proposal_weights(grid, 0.4)
    s = model.suffstats(y)[0]
    prior = model.prior
    i, j = 0, 2
    t, tp = grid[i], grid[j]
    logz = brute_force_logZ(model, [tp])
    acc = 0.0
    for yp in iter_states(model):
        sp = model.suffstats(yp)[0]
        f = np.exp(tp * sp - logz)
        log_a = prior.logpdf([tp]) - prior.logpdf([t]) + (tp - t) * s + (t - tp) * sp
        acc += f * min(1.0, np.exp(log_a))
    assert Q[i, j] == pytest.approx(h[i, j] * acc, rel=1e-12)


def test_noisy_grid_kernel_approaches_exact_mh():
    model = IsingModel(2, 2)
    y = np.array([[1, 1], [-1, 1]], dtype=np.int8)
    grid = np.linspace(-1, 1.5, 9)
    P = B.grid_exact_mh_kernel(model, y, grid, 0.4)
    dist = [B.tv_kernel_distance(P, B.grid_noisy_exchange_kernel(model, y, grid, 0.4, N)) for N in (1, 2, 4, 8, 16)]
    assert all(a > b for a, b in zip(dist, dist[1:]))


@pytest.mark.parametrize("N", [1, 4, 16])
def test_grid_kernel_bound_holds_exactly(N):
    model = IsingModel(2, 2)
    y = np.array([[1, 1], [-1, 1]], dtype=np.int8)
    grid = np.linspace(-1, 1.5, 9)
    P = B.grid_exact_mh_kernel(model, y, grid, 0.4)
    Q = B.grid_noisy_exchange_kernel(model, y, grid, 0.4, N)
    terms = B.noisy_exchange_kernel_terms(model, y, grid, 0.4, N, rule="discrete")
    row_tv = 0.5 * np.abs(P - Q).sum(axis=1)
    assert np.all(row_tv <= terms.row_integrals + 1e-13)
    rep = B.verify_perturbation(P, Q, 4, 300, cert=terms.cert)
    assert rep.per_n_tv.max() <= terms.bound + 1e-12


def test_kernel_bound_halves_when_n_quadruples():
    model = IsingModel(2, 2)
    y = np.array([[1, 1], [-1, 1]], dtype=np.int8)
    grid = np.linspace(-1, 1.5, 21)
    a = B.noisy_exchange_kernel_bound(model, y, grid, 0.4, 10)
    b = B.noisy_exchange_kernel_bound(model, y, grid, 0.4, 40)
    assert b == pytest.approx(a / 2, rel=1e-12)
    with pytest.raises(ContractViolation):
        B.noisy_exchange_kernel_bound(model, y, grid, 0.4, 10, rule="simpson")
    with pytest.raises(ContractViolation):
        B.acceptance_error_grid(model, y, grid, 0)


def test_multiset_limit():
    model = IsingModel(3, 3)
    y = np.ones((3, 3), dtype=np.int8)
    with pytest.raises(ContractViolation):
        B.grid_noisy_exchange_kernel(model, y, np.linspace(0, 1, 3), 0.3, 50, max_multisets=1000)


def test_ratio_sd_zero_on_diagonal():
    model = IsingModel(2, 3)
    grid = np.linspace(-0.5, 0.5, 5)
    sd = B.ratio_sd_grid(model, grid)
    assert np.allclose(np.diag(sd), 0.0, atol=1e-7)
    assert np.all(sd >= 0)
