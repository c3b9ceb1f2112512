import math

import numpy as np
import pytest

import pdegp


@pytest.fixture(scope="module")
def setup():
    prob = pdegp.problem("constant_diffusion_1d")
    obs = pdegp.Observations.pointwise(pdegp.equally_spaced_points_1d(5))
    data = pdegp.make_data(prob, obs, np.array([0.314]), 1e-5, seed=1, mesh_n=256)
    ts = pdegp.build_training(prob, obs, pdegp.Design(4, mesh_n=256))
    return prob, obs, data, ts


def test_forward_map_and_training(setup):
    prob, obs, data, ts = setup
    assert ts.theta.shape == (1, 4)
    assert ts.gx.shape == (4, 5)
    g = pdegp.forward_map(prob, obs, ts.theta[:, 0], 256)
    np.testing.assert_allclose(g, ts.gx[0], rtol=0, atol=1e-14)
    assert data.y.shape == (5,)


def test_gp_interpolates(setup):
    prob, obs, _, ts = setup
    model = pdegp.EmulatorModel("baseline", pdegp.Kernel("squared_exponential", 1.0, 1.5), jitter=1e-12)
    gp = pdegp.ConditionedGP(model, ts, prob, obs)
    for i in range(4):
        th = ts.theta[:, i]
        np.testing.assert_allclose(gp.mean(th), ts.gx[i], atol=1e-9)
        assert abs(gp.cov(th, th)).max() < 1e-8


def test_posterior_gradient_and_mala(setup):
    prob, obs, data, ts = setup
    model = pdegp.EmulatorModel("baseline", pdegp.Kernel("squared_exponential", 1.0, 1.5))
    gp = pdegp.ConditionedGP(model, ts, prob, obs)
    post = pdegp.Posterior.emulated("marginal", gp, data, pdegp.Prior(prob))
    th = np.array([0.2])
    h = 1e-6
    fd = (post.log_density(th + h) - post.log_density(th - h)) / (2 * h)
    assert post.grad_log_density(th)[0] == pytest.approx(fd, rel=1e-5)
    a = pdegp.mala(post, 1e-3, 2000, burn_in=500, seed=3, init=np.array([0.3]))
    b = pdegp.mala(post, 1e-3, 2000, burn_in=500, seed=3, init=np.array([0.3]))
    assert a.samples.shape == (1500, 1)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert 0 < a.acceptance_rate <= 1


def test_hellinger_gaussian_pair():
    ax = pdegp.uniform_axis(-10, 11, 4097)
    p = pdegp.grid_from_log([ax], lambda t: -0.5 * t[0] ** 2)
    q = pdegp.grid_from_log([ax], lambda t: -0.5 * (t[0] - 1) ** 2)
    assert pdegp.hellinger(p, q) == pytest.approx(math.sqrt(1 - math.exp(-1 / 8)), abs=1e-4)


def test_errors_map_to_python(setup):
    prob, obs, _, _ = setup
    with pytest.raises(pdegp.InputError):
        pdegp.forward_map(prob, obs, np.array([0.1, 0.2]), 64)
    with pytest.raises(pdegp.Error):
        pdegp.problem("no_such_problem")


def test_mala_default_start(setup):
    prob, obs, data, ts = setup
    model = pdegp.EmulatorModel("baseline", pdegp.Kernel("squared_exponential", 1.0, 1.5))
    post = pdegp.Posterior.emulated("mean", pdegp.ConditionedGP(model, ts, prob, obs), data,
                                    pdegp.Prior(prob))
    chain = pdegp.mala(post, step=1e-4, n_samples=200)
    assert chain.samples.shape == (200, 1)
