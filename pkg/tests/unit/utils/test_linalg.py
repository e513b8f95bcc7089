import numpy as np

from survshap.utils.linalg import find_singular_dimension


def test_full_rank():
    rng = np.random.default_rng(0)

    assert find_singular_dimension(rng.normal(size=(20, 4))) is None


def test_duplicated_column():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 3))
    X = np.column_stack((X, X[:, 1]))

    assert find_singular_dimension(X) in (1, 3)


def test_zero_column():
    X = np.column_stack((np.ones(5), np.zeros(5), np.arange(5.0)))

    assert find_singular_dimension(X) == 1


def test_more_columns_than_rows():
    assert find_singular_dimension(np.ones((1, 3))) is not None
    assert find_singular_dimension(np.zeros((3, 0))) is None
