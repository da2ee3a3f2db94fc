import numpy as np
import pytest

from napselect.exceptions import EmptyInputError
from napselect.selection import auroc, extract_layer_patterns, layer_distances, rank_layers, rank_pattern_layers
from napselect.utils import DumpHandler


def pairwise_auroc(tp, fp):
    wins = sum(1.0 if f > t else 0.5 if f == t else 0.0 for t in tp for f in fp)
    return wins / (len(tp) * len(fp))


class TestAuroc:

    @pytest.mark.parametrize("tp, fp, expected", [
        ([1, 2], [3, 4], 1.0),
        ([3, 4], [1, 2], 0.0),
        ([1, 2], [2, 3], 0.875),
    ])
    def test_examples(self, tp, fp, expected):
        assert auroc(tp, fp) == expected

    def test_matches_pair_loop_with_ties(self, rng):
        for _ in range(20):
            tp = rng.integers(0, 12, size=int(rng.integers(1, 1001)))
            fp = rng.integers(0, 12, size=int(rng.integers(1, 1001)))
            expected = float(((fp[np.newaxis, :] > tp[:, np.newaxis]) + 0.5 * (fp[np.newaxis, :] == tp[:, np.newaxis])).mean())
            assert auroc(tp, fp) == pytest.approx(expected, abs=1e-12)

    def test_small_pair_loop(self):
        tp, fp = [3, 1, 4, 1, 5], [9, 2, 6, 5, 3, 5]
        assert auroc(tp, fp) == pytest.approx(pairwise_auroc(tp, fp), abs=1e-12)

    def test_swapping_groups_complements(self, rng):
        tp = rng.integers(0, 20, size=57)
        fp = rng.integers(0, 20, size=31)
        assert auroc(tp, fp) + auroc(fp, tp) == pytest.approx(1.0, abs=1e-12)

    def test_monotone_transform_invariant(self, rng):
        tp = rng.integers(0, 20, size=40)
        fp = rng.integers(0, 20, size=40)
        assert auroc(tp, fp) == pytest.approx(auroc(np.exp(tp / 3.0), np.exp(fp / 3.0)), abs=1e-12)

    def test_empty_group(self):
        with pytest.raises(EmptyInputError):
            auroc([], [1])


class TestRankLayers:

    def test_orders_by_auroc(self):
        ranked = rank_layers({"roi.1": ([5], [1]), "roi.0": ([1], [5])})
        assert [(s.layer_id, s.auroc) for s in ranked] == [("roi.0", 1.0), ("roi.1", 0.0)]

    def test_single_layer(self):
        (score,) = rank_layers({"roi.0": ([1, 2], [2, 3])})
        assert score.auroc == 0.875 and score.n_tp == 2 and score.n_fp == 2

    def test_tie_broken_by_layer_id(self):
        ranked = rank_layers({"b": ([1], [2]), "a": ([1], [2])})
        assert [s.layer_id for s in ranked] == ["a", "b"]

    def test_undefined_layer_ranked_last(self):
        ranked = rank_layers({"a": ([1], []), "b": ([5], [1])})
        assert [s.layer_id for s in ranked] == ["b", "a"]
        assert ranked[1].auroc is None and not ranked[1].defined
        assert ranked[1].to_dict() == {"layer": "a", "auroc": None, "n_tp": 1, "n_fp": 0}

    def test_dump_layer_separates(self, selection_dump):
        layers = extract_layer_patterns(DumpHandler.read_activation_dump(selection_dump))
        (score,) = rank_pattern_layers(layers)
        assert score.layer_id == "roi.0"
        assert score.auroc == 1.0
        assert (score.n_tp, score.n_fp) == (2, 2)

    def test_layer_distances_against_own_bank(self, selection_dump):
        layer = extract_layer_patterns(DumpHandler.read_activation_dump(selection_dump))["roi.0"]
        tp, fp = layer_distances(layer)
        assert list(tp) == [0, 0]
        assert list(fp) == [4, 4]
