import numpy as np
import pytest

from survshap.eval.utils import quantile_window, ranking_distribution, top_k_agreement
from survshap.models.ranking import ImportanceRanking

NAMES = ("a", "b", "c")


def test_quantile_window(hand_dataset):
    low, high = quantile_window(hand_dataset, (0.0, 1.0))

    assert (low, high) == (1.0, 4.0)


def test_ranking_distribution():
    rankings = [
        ImportanceRanking.from_scores([3.0, 2.0, 1.0], NAMES),
        ImportanceRanking.from_scores([2.0, 3.0, 1.0], NAMES),
    ]

    df = ranking_distribution(rankings)

    assert list(df.columns) == ["rank", "variable", "fraction"]
    assert len(df) == 9
    np.testing.assert_allclose(df.groupby("rank")["fraction"].sum(), 1.0)
    first = df[df["rank"] == 1].set_index("variable")["fraction"]
    assert first.to_dict() == {"a": 0.5, "b": 0.5, "c": 0.0}
    third = df[df["rank"] == 3].set_index("variable")["fraction"]
    assert third["c"] == 1.0


def test_ranking_distribution_needs_rankings():
    with pytest.raises(ValueError):
        ranking_distribution([])
    with pytest.raises(ValueError):
        ranking_distribution(
            [
                ImportanceRanking.from_scores([1.0, 2.0, 3.0], NAMES),
                ImportanceRanking.from_scores([1.0, 2.0, 3.0], ("x", "y", "z")),
            ]
        )


def test_top_k_agreement():
    reference = ImportanceRanking.from_scores([3.0, 2.0, 1.0], NAMES)
    same_top = ImportanceRanking.from_scores([2.0, 3.0, 1.0], NAMES)
    other_top = ImportanceRanking.from_scores([3.0, 1.0, 2.0], NAMES)

    assert top_k_agreement([same_top, other_top], [reference, reference]) == 0.5
    assert top_k_agreement([other_top], [reference], k=1) == 1.0
    with pytest.raises(ValueError):
        top_k_agreement([same_top], [])
