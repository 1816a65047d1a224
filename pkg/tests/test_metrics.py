import numpy as np
import pytest

from udml.metrics import accuracy, macro_f1, spearman


def test_accuracy_basic():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert accuracy([0, 0, 0], [0, 1, 2]) == pytest.approx(1 / 3)
    assert accuracy([1], [0]) == 0.0


def test_macro_f1_perfect_and_constant_predictor():
    assert macro_f1([0, 1, 0, 1], [0, 1, 0, 1], 2) == 1.0
    # constant predictor on a balanced 2-class problem:
    # class 0 has P=0.5, R=1 -> F1 = 2/3; class 1 has F1 = 0; macro = 1/3
    assert macro_f1([0, 0, 0, 0], [0, 0, 1, 1], 2) == pytest.approx(1 / 3)


def test_macro_f1_matches_hand_computation():
    pred = np.array([0, 0, 1, 1, 2, 2])
    true = np.array([0, 1, 1, 1, 2, 0])
    # class 0: tp=1 fp=1 fn=1 -> 0.5; class 1: tp=2 fp=0 fn=1 -> 0.8
    # class 2: tp=1 fp=1 fn=0 -> 2/3
    assert macro_f1(pred, true, 3) == pytest.approx((0.5 + 0.8 + 2 / 3) / 3)


def test_macro_f1_empty_class_contributes_zero():
    assert macro_f1([0, 0], [0, 0], 2) == pytest.approx(0.5)


def test_spearman_monotone_and_reversed():
    x = [1.0, 2.0, 3.0, 4.0]
    assert spearman(x, [10.0, 20.0, 25.0, 100.0]) == 1.0
    assert spearman(x, [4.0, 3.0, 2.0, 1.0]) == -1.0


def test_spearman_ties_and_degenerate():
    assert spearman([1.0, 2.0, 2.0, 3.0], [1.0, 2.5, 2.5, 4.0]) == pytest.approx(1.0)
    assert spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0


def test_spearman_matches_pearson_of_ranks():
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(50), rng.standard_normal(50)
    rx = np.argsort(np.argsort(x)).astype(float)
    ry = np.argsort(np.argsort(y)).astype(float)
    expected = np.corrcoef(rx, ry)[0, 1]
    assert spearman(x, y) == pytest.approx(expected, abs=1e-12)
