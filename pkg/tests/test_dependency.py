import numpy as np
import pytest

from udml.dependency import (ALPHA_FLOOR, DependencyState, dependency_scores,
                             drop_modality_logits, normalize_alpha)


def test_dependency_scores_loop_oracle():
    rng = np.random.default_rng(0)
    full = rng.standard_normal((5, 3))
    dropped = [rng.standard_normal((5, 3)) for _ in range(2)]
    d = dependency_scores(full, dropped)
    for m in range(2):
        expected = np.mean([np.abs(full[i] - dropped[m][i]).sum() for i in range(5)])
        assert d[m] == pytest.approx(expected, abs=1e-12)


def test_dependency_scores_zero_for_identical_logits():
    full = np.ones((4, 6))
    d = dependency_scores(full, [full.copy(), full + 1.0])
    assert d[0] == 0.0
    assert d[1] == pytest.approx(6.0, abs=1e-12)
    with pytest.raises(ValueError):
        dependency_scores(full, [np.ones((4, 5))])


def test_normalize_alpha_basic_ratio():
    alpha = normalize_alpha([3.0, 1.0], 2)
    assert np.allclose(alpha, [1.5, 0.5], atol=1e-12)
    assert alpha.sum() == 2.0


def test_normalize_alpha_sum_is_exact():
    rng = np.random.default_rng(1)
    for m in (2, 3, 5):
        for _ in range(50):
            alpha = normalize_alpha(rng.uniform(0.0, 10.0, size=m), m)
            assert alpha.sum() == float(m)
            assert np.all(alpha >= ALPHA_FLOOR - 1e-12)


def test_normalize_alpha_floor_clamps_tiny_scores():
    alpha = normalize_alpha([1.0, 1e-9], 2)
    assert alpha[1] == pytest.approx(ALPHA_FLOOR, abs=1e-12)
    assert alpha.sum() == 2.0


def test_normalize_alpha_all_zero_falls_back_to_uniform():
    assert np.array_equal(normalize_alpha([0.0, 0.0, 0.0], 3), np.ones(3))
    with pytest.raises(ValueError):
        normalize_alpha([-1.0, 2.0], 2)


def test_dependency_state_ema_tracks_and_validates():
    state = DependencyState(2, decay=0.5)
    assert np.array_equal(state.alpha, np.ones(2))
    state.update([4.0, 0.0])
    assert np.allclose(state.raw_d_ema, [2.0, 0.0], atol=1e-15)
    state.update([4.0, 0.0])
    assert np.allclose(state.raw_d_ema, [3.0, 0.0], atol=1e-15)
    assert state.alpha[0] > state.alpha[1]
    assert state.alpha.sum() == 2.0
    with pytest.raises(ValueError):
        DependencyState(2, decay=1.0)


class _StubModel:
    def __init__(self):
        self.calls = []

    def modality_logits(self, features, keep):
        self.calls.append(tuple(keep))
        return np.zeros((2, 3))


def test_drop_modality_logits_passes_complement():
    model = _StubModel()
    feats = [np.zeros((2, 4)), np.zeros((2, 4)), np.zeros((2, 4))]
    drop_modality_logits(model, feats, 1)
    assert model.calls == [(0, 2)]
    with pytest.raises(IndexError):
        drop_modality_logits(model, feats, 3)
