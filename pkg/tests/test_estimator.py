import math

import numpy as np
import pytest

from udml import autodiff as ad
from udml.autodiff import Tensor
from udml.estimator import (RHO_FLOOR, NoiseEstimator, NoiseGrid,
                            estimator_loss, inference_uncertainty,
                            predict_sigma)


def test_noise_grid_validation():
    grid = NoiseGrid()
    assert grid.levels == tuple(float(s) for s in range(11))
    with pytest.raises(ValueError):
        NoiseGrid(levels=(1.0, 2.0))
    with pytest.raises(ValueError):
        NoiseGrid(levels=(0.0, 2.0, 2.0))
    with pytest.raises(ValueError):
        NoiseGrid(levels=())


def test_noise_grid_sampling_covers_levels():
    grid = NoiseGrid(levels=(0.0, 1.0, 5.0))
    draws = grid.sample(np.random.default_rng(0), 3000)
    assert set(np.unique(draws)) == {0.0, 1.0, 5.0}
    counts = [np.sum(draws == s) for s in grid.levels]
    assert all(800 < c < 1200 for c in counts)


def test_predictions_are_nonnegative():
    est = NoiseEstimator(input_dim=4, hidden_dim=8)
    est.init(np.random.default_rng(1))
    x = Tensor(np.random.default_rng(2).standard_normal((50, 4)) * 10.0)
    pred = predict_sigma(est, x)
    assert pred.shape == (50,)
    assert np.all(pred.data >= 0.0)


def test_zero_network_predicts_log_two():
    est = NoiseEstimator(input_dim=3, hidden_dim=4)
    est.init(np.random.default_rng(3))
    for _, p in est.named_parameters():
        p.data[...] = 0.0
    pred = predict_sigma(est, Tensor(np.ones((2, 3))))
    assert np.allclose(pred.data, math.log(2.0), atol=1e-12)


def test_estimator_loss_matches_loop_oracle():
    est = NoiseEstimator(input_dim=3, hidden_dim=4)
    est.init(np.random.default_rng(4))
    x = np.random.default_rng(5).standard_normal((6, 3))
    target = np.array([0.0, 1.0, 2.0, 5.0, 7.0, 10.0])
    loss = estimator_loss(est, Tensor(x), target)
    pred = predict_sigma(est, Tensor(x)).data
    expected = sum((p - t) ** 2 for p, t in zip(pred, target)) / 6
    assert loss.item() == pytest.approx(expected, abs=1e-12)


def test_estimator_loss_trains_only_estimator():
    est = NoiseEstimator(input_dim=3, hidden_dim=4)
    est.init(np.random.default_rng(6))
    upstream = Tensor(np.random.default_rng(7).standard_normal((5, 3)), requires_grad=True)
    loss = estimator_loss(est, ad.detach(upstream), np.ones(5))
    ad.backward(loss)
    assert upstream.grad is None
    grads = [p.grad for _, p in est.named_parameters()]
    assert all(g is not None for g in grads)
    assert any(np.any(g != 0) for g in grads)


def test_inference_uncertainty_floor_and_square():
    est = NoiseEstimator(input_dim=3, hidden_dim=4)
    est.init(np.random.default_rng(8))
    x = Tensor(np.random.default_rng(9).standard_normal((10, 3)))
    rho = inference_uncertainty(est, x)
    s = predict_sigma(est, x).data
    assert np.allclose(rho.data, s * s + RHO_FLOOR, atol=1e-15)
    assert np.all(rho.data >= RHO_FLOOR)


def test_input_mode_validation():
    assert NoiseEstimator(4, input_mode="raw").input_mode == "raw"
    with pytest.raises(ValueError):
        NoiseEstimator(4, input_mode="features")


def test_estimator_can_fit_a_simple_mapping():
    # sigma = mean of the input vector; the estimator should recover it.
    rng = np.random.default_rng(10)
    est = NoiseEstimator(input_dim=4, hidden_dim=16)
    est.init(rng)
    from udml.nn import Adam
    params = [p for _, p in est.named_parameters()]
    opt = Adam(params, lr=1e-2)
    for _ in range(400):
        sigma = rng.choice([0.0, 2.0, 5.0, 8.0], size=64)
        x = sigma[:, None] + 0.1 * rng.standard_normal((64, 4))
        loss = estimator_loss(est, Tensor(x), sigma)
        ad.backward(loss)
        opt.step()
        ad.zero_grad(params)
    sigma = np.array([0.0, 2.0, 5.0, 8.0])
    x = np.repeat(sigma[:, None], 4, axis=1)
    pred = predict_sigma(est, Tensor(x)).data
    assert float(np.abs(pred - sigma).mean()) < 0.3
