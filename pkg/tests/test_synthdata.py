import numpy as np
import pytest

from udml.synthdata import (ModalityBatch, ModalitySpec, SyntheticSpec,
                            corrupt_split, generate, inject_gaussian,
                            inject_salt, load_dataset, load_split,
                            save_dataset, save_split)


def _small_spec(seed=0):
    return SyntheticSpec(
        num_classes=3,
        modalities=[ModalitySpec(feat_dim=4, separation=6.0, warp="none"),
                    ModalitySpec(feat_dim=5, separation=2.0, warp="nonlinear")],
        n_train=300, n_val=60, n_test=90, seed=seed)


def test_spec_validation():
    with pytest.raises(ValueError):
        ModalitySpec(feat_dim=1)
    with pytest.raises(ValueError):
        ModalitySpec(separation=-1.0)
    with pytest.raises(ValueError):
        ModalitySpec(warp="affine")
    with pytest.raises(ValueError):
        SyntheticSpec(num_classes=1)
    with pytest.raises(ValueError):
        SyntheticSpec(modalities=[])


def test_generate_shapes_and_labels():
    ds = generate(_small_spec())
    assert ds.num_classes == 3
    assert ds.feat_dims == [4, 5]
    assert [f.shape for f in ds.train.features] == [(300, 4), (300, 5)]
    assert ds.val.size == 60 and ds.test.size == 90
    assert set(np.unique(ds.train.labels)) <= {0, 1, 2}
    assert len(ds.feature_stats) == 2


def test_generate_is_deterministic_per_seed():
    a, b = generate(_small_spec(seed=5)), generate(_small_spec(seed=5))
    c = generate(_small_spec(seed=6))
    assert np.array_equal(a.train.features[0], b.train.features[0])
    assert np.array_equal(a.test.labels, b.test.labels)
    assert not np.array_equal(a.train.features[0], c.train.features[0])


def test_class_structure_separable_without_warp():
    ds = generate(_small_spec())
    x, y = ds.train.features[0], ds.train.labels
    centroids = np.stack([x[y == k].mean(axis=0) for k in range(3)])
    pred = np.argmin(
        ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2), axis=1)
    assert (pred == y).mean() > 0.97


def test_warp_preserves_class_information():
    # The warp is invertible, so a nearest-centroid rule in the warped space
    # of a well separated modality should still mostly work.
    spec = _small_spec()
    spec.modalities[1] = ModalitySpec(feat_dim=5, separation=6.0, warp="nonlinear")
    ds = generate(spec)
    x, y = ds.train.features[1], ds.train.labels
    centroids = np.stack([x[y == k].mean(axis=0) for k in range(3)])
    pred = np.argmin(
        ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2), axis=1)
    assert (pred == y).mean() > 0.8


def test_inject_gaussian_statistics_and_identity():
    rng = np.random.default_rng(0)
    x = np.zeros((2000, 10))
    out = inject_gaussian(x, 3.0, rng)
    assert abs(out.std() - 3.0) < 0.1
    same = inject_gaussian(x, 0.0, rng)
    assert np.array_equal(same, x) and same is not x
    with pytest.raises(ValueError):
        inject_gaussian(x, -1.0, rng)


def test_inject_salt_rate_and_values():
    rng = np.random.default_rng(1)
    x = np.zeros((4000, 5))
    mean, std = np.zeros(5), np.ones(5)
    out = inject_salt(x, 5.0, rng, mean, std)  # p = 0.25
    hit = out != 0.0
    assert abs(hit.mean() - 0.25) < 0.02
    assert set(np.unique(out[hit])) == {-5.0, 5.0}
    # saturates at p = 0.5 for large epsilon
    out = inject_salt(x, 1000.0, rng, mean, std)
    assert abs((out != 0.0).mean() - 0.5) < 0.02
    assert np.array_equal(inject_salt(x, 0.0, rng, mean, std), x)


def test_corrupt_split_fraction_and_tags():
    ds = generate(_small_spec())
    rng = np.random.default_rng(2)
    out = corrupt_split(ds.test, 0.5, "gaussian", 5.0, rng, ds.feature_stats)
    assert out.size == ds.test.size
    tagged = [t for t in out.corruption_tags if t is not None]
    assert len(tagged) == round(0.5 * ds.test.size)
    assert all(t["kind"] == "gaussian" and t["epsilon"] == 5.0 for t in tagged)
    assert {t["modality"] for t in tagged} == {0, 1}
    # untouched rows are bit-identical, tagged rows differ in the tagged modality
    for i, t in enumerate(out.corruption_tags):
        if t is None:
            assert np.array_equal(out.features[0][i], ds.test.features[0][i])
            assert np.array_equal(out.features[1][i], ds.test.features[1][i])
        else:
            m = t["modality"]
            assert not np.array_equal(out.features[m][i], ds.test.features[m][i])
            assert np.array_equal(out.features[1 - m][i], ds.test.features[1 - m][i])


def test_corrupt_split_pinned_modality_and_validation():
    ds = generate(_small_spec())
    rng = np.random.default_rng(3)
    out = corrupt_split(ds.test, 1.0, "salt", 10.0, rng, ds.feature_stats, modality=1)
    tagged = [t for t in out.corruption_tags if t is not None]
    assert len(tagged) == ds.test.size
    assert {t["modality"] for t in tagged} == {1}
    assert all(np.array_equal(a, b)
               for a, b in zip(out.features[0], ds.test.features[0]))
    with pytest.raises(IndexError):
        corrupt_split(ds.test, 0.5, "salt", 1.0, rng, ds.feature_stats, modality=2)
    with pytest.raises(ValueError):
        corrupt_split(ds.test, 1.5, "salt", 1.0, rng)
    with pytest.raises(ValueError):
        corrupt_split(ds.test, 0.5, "pepper", 1.0, rng)


def test_corrupt_split_zero_fraction_is_identity():
    ds = generate(_small_spec())
    out = corrupt_split(ds.test, 0.0, "gaussian", 5.0, np.random.default_rng(4))
    assert np.array_equal(out.features[0], ds.test.features[0])
    assert all(t is None for t in out.corruption_tags)


def test_split_round_trip_exact(tmp_path):
    ds = generate(_small_spec())
    path = tmp_path / "train.csv"
    save_split(str(path), ds.train, ds.num_classes)
    batch, k = load_split(str(path))
    assert k == 3
    assert np.array_equal(batch.labels, ds.train.labels)
    for a, b in zip(batch.features, ds.train.features):
        assert np.array_equal(a, b)
    header = path.read_text().splitlines()[0]
    assert header == "# udml-dataset v1 K=3 M=2 dims=4,5"


def test_dataset_round_trip_and_header_validation(tmp_path):
    ds = generate(_small_spec())
    save_dataset(str(tmp_path), ds)
    back = load_dataset(str(tmp_path))
    assert back.num_classes == 3 and back.feat_dims == [4, 5]
    for a, b in zip(back.val.features, ds.val.features):
        assert np.array_equal(a, b)
    bad = tmp_path / "bad.csv"
    bad.write_text("label,f1\n0,1.0\n")
    with pytest.raises(ValueError):
        load_split(str(bad))


def test_take_subsets_consistently():
    batch = ModalityBatch(
        [np.arange(12.0).reshape(6, 2), np.arange(18.0).reshape(6, 3)],
        np.arange(6),
        corruption_tags=[None, {"modality": 0}, None, None, {"modality": 1}, None])
    sub = batch.take(np.array([1, 4]))
    assert np.array_equal(sub.labels, [1, 4])
    assert np.array_equal(sub.features[0], [[2.0, 3.0], [8.0, 9.0]])
    assert sub.corruption_tags == [{"modality": 0}, {"modality": 1}]
