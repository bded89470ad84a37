import random

import pytest

from dialseg.core import LengthMismatch, Segmentation
from dialseg.metrics import brute_force_oracle, default_window, pk, window_diff


def random_segmentation(rng: random.Random, n: int) -> Segmentation:
    k = rng.randint(0, n - 1) if n > 1 else 0
    bounds = sorted(rng.sample(range(1, n), k)) if k else []
    return Segmentation(n, bounds)


def test_default_window_examples():
    assert default_window(Segmentation(10, [5])) == 3
    assert default_window(Segmentation(5, [])) == 3
    assert default_window(Segmentation(2, [1])) == 1


def test_default_window_clamps():
    # Many segments push k below 1; a single segment pushes it past n-1.
    assert default_window(Segmentation(4, [1, 2, 3])) == 1
    assert default_window(Segmentation(3, [])) >= 1
    assert default_window(Segmentation(1, [])) == 1


def test_pk_identical_is_zero():
    seg = Segmentation(8, [2, 5])
    assert pk(seg, seg).value == 0.0
    assert window_diff(seg, seg).value == 0.0


def test_pk_hand_example():
    result = pk(Segmentation(5, [2]), Segmentation(5, []), 2)
    assert result.value == 2 / 3
    assert result.window_k == 2
    assert result.comparisons == 3


def test_pk_all_singletons():
    result = pk(Segmentation(4, [1, 2, 3]), Segmentation(4, []), 1)
    assert result.value == 1.0


def test_window_diff_hand_examples():
    assert window_diff(Segmentation(5, [2]), Segmentation(5, [3]), 2).value == 2 / 3
    assert window_diff(Segmentation(5, [2]), Segmentation(5, []), 2).value == 2 / 3


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        pk(Segmentation(5, []), Segmentation(6, []))
    with pytest.raises(LengthMismatch):
        window_diff(Segmentation(5, []), Segmentation(4, []))


def test_short_dialogue_single_window():
    # n <= k produces one whole-dialogue window instead of an error.
    result = pk(Segmentation(3, [1]), Segmentation(3, [1]), 10)
    assert result.comparisons == 1
    assert result.value == 0.0
    result = window_diff(Segmentation(3, [1]), Segmentation(3, []), 10)
    assert result.comparisons == 1
    assert result.value == 1.0


def test_degenerate_single_utterance():
    result = pk(Segmentation(1, []), Segmentation(1, []), 1)
    assert result.value == 0.0 and result.comparisons == 1


def test_oracle_agreement():
    rng = random.Random(90125)
    for _ in range(500):
        n = rng.randint(1, 100)
        ref = random_segmentation(rng, n)
        hyp = random_segmentation(rng, n)
        k = rng.randint(1, max(1, n - 1))
        assert pk(ref, hyp, k).value == brute_force_oracle(ref, hyp, k, "pk")
        assert (
            window_diff(ref, hyp, k).value
            == brute_force_oracle(ref, hyp, k, "window_diff")
        )


def test_monotone_sanity():
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(2, 60)
        ref = random_segmentation(rng, n)
        empty = Segmentation(n, [])
        assert pk(ref, ref).value == 0.0
        assert pk(ref, empty).value >= 0.0
        assert window_diff(ref, empty).value >= 0.0


def test_value_in_unit_interval():
    rng = random.Random(6)
    for _ in range(200):
        n = rng.randint(1, 50)
        ref = random_segmentation(rng, n)
        hyp = random_segmentation(rng, n)
        r = pk(ref, hyp)
        w = window_diff(ref, hyp)
        assert 0.0 <= r.value <= 1.0
        assert 0.0 <= w.value <= 1.0
        expected = ref.n - r.window_k if ref.n > r.window_k else 1
        assert r.comparisons == expected
