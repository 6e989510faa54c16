import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from oracles import grid_search_barycenter_1d, quantile_coupling_w2
from distseq import (BarycenterError, DiagonalGaussian, InvalidArgument, MethodId, ModelConfig,
                     PriorSpec, aggregate_data, average_convolve, barycenter_diag, boundary_signal,
                     gpoe, local_posterior, poe, run_method, simulate, wasserstein2_diag)

G = DiagonalGaussian


def random_gaussians(rng, m, N, sd=(0.2, 2.0)):
    return [G(rng.normal(size=N), rng.uniform(*sd, size=N) ** 2) for _ in range(m)]


def test_average_convolve_examples():
    one = G([1.0, 2.0], [0.5, 0.25])
    out = average_convolve([one])
    assert out.mean.tolist() == one.mean.tolist() and out.var.tolist() == one.var.tolist()
    out = average_convolve([G([1.0], [1.0]), G([3.0], [1.0])])
    assert out.mean[0] == 2.0 and out.var[0] == 0.5
    for m in (2, 5, 40):
        s2 = np.array([0.3, 0.07, 1e-5])
        locs = [G(np.full(3, j), s2) for j in range(m)]
        assert average_convolve(locs).var.tobytes() == (s2 / m).tobytes()
    with pytest.raises(InvalidArgument):
        average_convolve([])
    with pytest.raises(InvalidArgument):
        average_convolve([G([0.0], [1.0]), G([0.0, 1.0], [1.0, 1.0])])


def test_wasserstein_examples():
    assert wasserstein2_diag(G([0.0], [1.0]), G([1.0], [1.0])) == 1.0
    assert wasserstein2_diag(G([0.0], [4.0]), G([0.0], [1.0])) == 1.0
    with pytest.raises(InvalidArgument):
        wasserstein2_diag(G([0.0], [1.0]), G([0.0, 0.0], [1.0, 1.0]))


def test_wasserstein_against_quantile_coupling():
    rng = np.random.default_rng(5)
    for _ in range(5):
        p, q = random_gaussians(rng, 2, 5, sd=(0.2, 1.2))
        assert wasserstein2_diag(p, q) == pytest.approx(quantile_coupling_w2(p, q), abs=1e-4)


def test_barycenter_examples():
    s2 = np.array([0.5, 0.1])
    locs = [G([j, -j], s2) for j in range(4)]
    out = barycenter_diag(locs)
    np.testing.assert_array_equal(out.var, s2)
    np.testing.assert_allclose(out.mean, [1.5, -1.5])
    one = G([1.0], [2.0])
    assert barycenter_diag([one]).var[0] == 2.0
    out = barycenter_diag([G([0.0], [1.0]), G([0.0], [9.0])])
    assert out.mean[0] == 0.0 and out.var[0] == pytest.approx(4.0, rel=1e-12)


def test_barycenter_grid_search_oracle():
    mean, sd = grid_search_barycenter_1d([1.0, 3.0])
    out = barycenter_diag([G([0.0], [1.0]), G([0.0], [9.0])])
    assert np.sqrt(out.var[0]) == pytest.approx(sd, abs=1e-3)
    assert out.mean[0] == pytest.approx(mean, abs=1e-2)
    mean, sd = grid_search_barycenter_1d([0.5, 1.0, 2.0], means=[-1.0, 0.0, 2.5])
    out = barycenter_diag([G([-1.0], [0.25]), G([0.0], [1.0]), G([2.5], [4.0])])
    assert np.sqrt(out.var[0]) == pytest.approx(sd, abs=1e-3)
    assert out.mean[0] == pytest.approx(mean, abs=1e-2)


@given(st.integers(0, 2**32), st.integers(2, 8))
@settings(max_examples=30)
def test_barycenter_fixed_point_matches_sd_average(seed, m):
    rng = np.random.default_rng(seed)
    locs = random_gaussians(rng, m, 6)
    out = barycenter_diag(locs, tol=1e-13)
    sd = np.mean([np.sqrt(p.var) for p in locs], axis=0)
    np.testing.assert_allclose(out.var, sd**2, rtol=1e-12)
    # it is the minimizer of the mean squared W2 distance against perturbations
    f = lambda g: np.mean([wasserstein2_diag(g, p) for p in locs])
    base = f(out)
    for eps in (1e-3, -1e-3):
        assert f(G(out.mean + eps, out.var)) > base
        assert f(G(out.mean, out.var * (1 + eps))) > base


def test_barycenter_iteration_equals_closed_form_fast():
    s2 = np.array([0.5, 0.1, 0.02])
    locs = [G([j, 0, 1], s2) for j in range(3)]
    out = barycenter_diag(locs, max_iter=2, shortcut=False)
    np.testing.assert_allclose(out.var, s2, rtol=0, atol=1e-12)


def test_barycenter_non_convergence_is_reported():
    rng = np.random.default_rng(0)
    locs = random_gaussians(rng, 3, 4)
    with pytest.raises(BarycenterError) as err:
        barycenter_diag(locs, tol=-1.0, max_iter=3)
    assert err.value.residual >= 0


def test_poe_examples():
    one = G([1.0, 2.0], [0.5, 0.25])
    assert poe([one]).mean.tolist() == [1.0, 2.0]
    out = poe([G([0.0], [1.0]), G([2.0], [1.0])])
    assert out.mean[0] == 1.0 and out.var[0] == 0.5
    assert gpoe([one]).var.tolist() == poe([one]).var.tolist()


@given(st.integers(0, 2**32), st.sampled_from([2, 40]))
@settings(max_examples=20)
def test_gpoe_inflates_by_m(seed, m):
    locs = random_gaussians(np.random.default_rng(seed), m, 7)
    a, b = poe(locs), gpoe(locs)
    np.testing.assert_allclose(b.var / a.var, m, rtol=1e-15)
    assert a.mean.tobytes() == b.mean.tobytes()
    np.testing.assert_allclose(gpoe(locs, power=1 / m).var, b.var, rtol=1e-12)


def test_poe_matches_closed_form_on_local_posteriors():
    cfg = ModelConfig(8, 2, 1.0, trunc=50)
    data = simulate(boundary_signal(1, 1, 50), cfg, 3)
    out = poe([local_posterior(y, PriorSpec(1.0), cfg) for y in data.locals])
    i = np.arange(1, 51, dtype=float)
    denom = cfg.n + cfg.sigma**2 * cfg.m * i**3
    np.testing.assert_allclose(out.mean, cfg.n * aggregate_data(data) / denom, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(out.var, cfg.sigma**2 / denom, rtol=1e-12)


@given(st.integers(0, 2**32), st.integers(2, 9))
@settings(max_examples=25)
def test_rules_are_permutation_invariant(seed, m):
    rng = np.random.default_rng(seed)
    locs = random_gaussians(rng, m, 5)
    shuffled = [locs[k] for k in rng.permutation(m)]
    for rule in (average_convolve, poe, gpoe, barycenter_diag):
        a, b = rule(locs), rule(shuffled)
        assert a.mean.tobytes() == b.mean.tobytes() and a.var.tobytes() == b.var.tobytes()


@given(st.integers(0, 2**32), st.integers(1, 9))
@settings(max_examples=25)
def test_variance_bounds(seed, m):
    locs = random_gaussians(np.random.default_rng(seed), m, 5)
    vmin = np.min([p.var for p in locs], axis=0)
    assert np.all(poe(locs).var <= vmin * (1 + 1e-12))
    vmax = np.max([p.var for p in locs], axis=0)
    assert np.all(average_convolve(locs).var <= vmax / m * (1 + 1e-12))


@pytest.fixture(scope="module")
def sim():
    cfg = ModelConfig(400, 8, 1.0, trunc=200)
    return cfg, simulate(boundary_signal(1, 1, 200), cfg, 12)


def test_method_identities(sim):
    cfg, data = sim
    post = {t: run_method(t, data, 1.0) for t in ("I", "II", "III", "IV", "V", "VI")}
    np.testing.assert_allclose(post["II"].mean, post["IV"].mean, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(post["IV"].spread, cfg.m * post["II"].spread, rtol=1e-12)
    np.testing.assert_allclose(post["I"].mean, post["V"].mean, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(post["I"].mean, post["VI"].mean, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(post["I"].var, post["V"].var, rtol=1e-12)
    np.testing.assert_allclose(post["VI"].spread, cfg.m * post["V"].spread, rtol=1e-12)


def test_run_method_rejects_vii_and_unknown(sim):
    _, data = sim
    with pytest.raises(InvalidArgument, match="adaptive"):
        run_method("VII", data, 1.0)
    with pytest.raises(InvalidArgument):
        MethodId("VIII")
    with pytest.raises(InvalidArgument):
        MethodId("VII")
    with pytest.raises(InvalidArgument):
        MethodId("I", tau=2.0)


def test_method_iii_explicit_tau(sim):
    cfg, data = sim
    a = run_method(MethodId("III", tau=float(cfg.m)), data, 1.0)
    b = run_method("III", data, 1.0)
    assert a.mean.tobytes() == b.mean.tobytes()
    c = run_method(MethodId("III", alpha=2.0), data, 1.0)
    assert not np.allclose(c.mean, b.mean)


def test_run_method_matches_per_machine_composition(sim):
    from distseq import power_likelihood_posterior, rescaled_prior_posterior, default_tau
    cfg, data = sim
    prior = PriorSpec(1.0)
    plain = [local_posterior(y, prior, cfg) for y in data.locals]
    power = [power_likelihood_posterior(y, prior, cfg) for y in data.locals]
    scaled = [rescaled_prior_posterior(y, PriorSpec(1.0, default_tau(1.0, 1.0, cfg)), cfg)
              for y in data.locals]
    expected = {"I": average_convolve(plain), "II": average_convolve(power),
                "III": average_convolve(scaled), "IV": barycenter_diag(power),
                "V": poe(plain), "VI": gpoe(plain)}
    for tag, want in expected.items():
        got = run_method(tag, data, 1.0)
        assert got.mean.tobytes() == want.mean.tobytes(), tag
        assert got.var.tobytes() == want.var.tobytes(), tag
