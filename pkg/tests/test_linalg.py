import numpy as np
import pytest

from ddtrack._linalg import (
    kernel_basis,
    numerical_rank,
    right_pseudo_inverse,
    row_space_basis,
    sym_sqrt,
)
from ddtrack.errors import ConditioningError


def test_numerical_rank_thresholding():
    a = np.diag([1.0, 1e-6, 1e-12])
    assert numerical_rank(a) == 2
    assert numerical_rank(a, rtol=1e-14) == 3
    assert numerical_rank(np.zeros((3, 2))) == 0


def test_kernel_and_row_space_are_complementary():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 7))
    ker = kernel_basis(a)
    row = row_space_basis(a)
    assert ker.shape == (7, 4) and row.shape == (7, 3)
    np.testing.assert_allclose(a @ ker, 0.0, atol=1e-12)
    np.testing.assert_allclose(ker.T @ row, 0.0, atol=1e-12)
    np.testing.assert_allclose(ker.T @ ker, np.eye(4), atol=1e-12)


def test_right_pseudo_inverse_identity():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 9))
    np.testing.assert_allclose(a @ right_pseudo_inverse(a), np.eye(4), atol=1e-10)


def test_right_pseudo_inverse_rejects_rank_deficiency():
    a = np.vstack([np.ones(5), np.ones(5)])
    with pytest.raises(ConditioningError):
        right_pseudo_inverse(a)


def test_right_pseudo_inverse_warns_when_ill_conditioned():
    a = np.diag([1.0, 1e-13]) @ np.random.default_rng(2).standard_normal((2, 6))
    with pytest.warns(RuntimeWarning):
        right_pseudo_inverse(a, rtol=1e-16)


def test_sym_sqrt():
    rng = np.random.default_rng(3)
    b = rng.standard_normal((4, 4))
    spd = b @ b.T + 4 * np.eye(4)
    root = sym_sqrt(spd)
    np.testing.assert_allclose(root @ root, spd, atol=1e-10)
    with pytest.raises(ConditioningError):
        sym_sqrt(np.diag([1.0, -1.0]))
