import numpy as np
import pytest

from udml import autodiff as ad
from udml.autodiff import Tensor
from udml.encoder import VARIANCE_FLOOR, ModalityEncoder, embed_sample, encode


@pytest.fixture
def enc():
    e = ModalityEncoder(feat_dim=5, embed_dim=4, hidden_dim=8)
    e.init(np.random.default_rng(0))
    return e


def test_encode_shapes_and_variance_floor(enc):
    x = Tensor(np.random.default_rng(1).standard_normal((7, 5)))
    emb = encode(enc, x)
    assert emb.mu.shape == (7, 4)
    assert emb.sigma2.shape == (7, 4)
    assert np.all(emb.sigma2.data >= VARIANCE_FLOOR)


def test_variance_floor_binds_under_very_negative_preactivations(enc):
    for _, p in enc.var_head.named_parameters():
        p.data[...] = 0.0
    enc.var_head.bias.data[...] = -60.0
    emb = enc.encode(Tensor(np.zeros((3, 5))))
    assert np.allclose(emb.sigma2.data, VARIANCE_FLOOR, atol=1e-18)


def test_eval_mode_returns_mean_deterministically(enc):
    x = Tensor(np.random.default_rng(2).standard_normal((4, 5)))
    emb = enc.encode(x)
    z = embed_sample(emb, "eval")
    assert z is emb.mu


def test_train_mode_samples_with_embedding_statistics(enc):
    mu = Tensor(np.full((20_000, 2), 3.0))
    sigma2 = Tensor(np.full((20_000, 2), 4.0))
    from udml.encoder import GaussianEmbedding
    z = embed_sample(GaussianEmbedding(mu, sigma2), "train", np.random.default_rng(3))
    assert abs(z.data.mean() - 3.0) < 0.05
    assert abs(z.data.var() - 4.0) < 0.1


def test_train_mode_requires_rng(enc):
    emb = enc.encode(Tensor(np.zeros((1, 5))))
    with pytest.raises(ValueError):
        embed_sample(emb, "train")
    with pytest.raises(ValueError):
        embed_sample(emb, "test")


def test_gradients_flow_to_both_heads(enc):
    x = Tensor(np.random.default_rng(4).standard_normal((6, 5)))
    emb = enc.encode(x)
    z = embed_sample(emb, "train", np.random.default_rng(5))
    loss = ad.sum(ad.mul(z, z))
    ad.backward(loss)
    assert enc.mu_head.weight.grad is not None and np.any(enc.mu_head.weight.grad != 0)
    assert enc.var_head.weight.grad is not None and np.any(enc.var_head.weight.grad != 0)


def test_named_parameters_are_disjoint_and_complete(enc):
    names = [n for n, _ in enc.named_parameters("m1.")]
    assert len(names) == len(set(names)) == 8  # 2 trunk + mu + var layers, w+b each
    assert all(n.startswith("m1.") for n in names)
