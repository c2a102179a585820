import itertools
import math

import numpy as np
import pytest

from gridcraft.evaluator import classify_and_f1, kmeans2_threshold
from gridcraft.stats import betainc, paired_ttest, student_t_cdf, student_t_sf

scipy_stats = pytest.importorskip("scipy.stats")


# -- 1-D 2-means ------------------------------------------------------------------

def test_kmeans2_worked_example():
    delta = kmeans2_threshold([0.1, 0.2, 0.9, 1.0])
    assert delta == pytest.approx(0.55)  # centroids 0.15 and 0.95


def test_kmeans2_symmetric_pair():
    assert kmeans2_threshold([0.0, 1.0]) == pytest.approx(0.5)


def test_kmeans2_degenerate_errors():
    with pytest.raises(ValueError):
        kmeans2_threshold([0.4, 0.4, 0.4])
    with pytest.raises(ValueError):
        kmeans2_threshold([1.0])


def lloyd_two_means(xs, init, iters=200):
    c1, c2 = init
    for _ in range(iters):
        a = [x for x in xs if abs(x - c1) <= abs(x - c2)]
        b = [x for x in xs if abs(x - c1) > abs(x - c2)]
        if not a or not b:
            break
        n1, n2 = sum(a) / len(a), sum(b) / len(b)
        if n1 == c1 and n2 == c2:
            break
        c1, c2 = n1, n2
    return sorted((c1, c2))


def sse_of_split(xs, c1, c2):
    return sum(min((x - c1) ** 2, (x - c2) ** 2) for x in xs)


def test_exhaustive_matches_best_lloyd_on_small_instances():
    """The exhaustive split attains the global optimum: no Lloyd run from any
    distinct-pair initialization achieves a lower within-cluster SSE."""
    rng = np.random.default_rng(0)
    for _ in range(30):
        n = int(rng.integers(2, 13))
        xs = np.round(rng.normal(size=n), 3).tolist()
        if len(set(xs)) < 2:
            continue
        delta = kmeans2_threshold(xs)
        left = [x for x in xs if x <= delta]
        right = [x for x in xs if x > delta]
        ours = sse_of_split(xs, sum(left) / len(left), sum(right) / len(right))
        for init in itertools.combinations(sorted(set(xs)), 2):
            c1, c2 = lloyd_two_means(xs, init)
            assert ours <= sse_of_split(xs, c1, c2) + 1e-9


# -- F1 ---------------------------------------------------------------------------

def test_f1_perfect_separation():
    scores = [0.1, 0.2, 0.8, 0.9]
    labels = [0, 0, 1, 1]
    res = classify_and_f1(scores, 0.5, labels)
    assert res.f1 == 1.0


def test_f1_all_wrong_is_zero():
    res = classify_and_f1([0.9, 0.1], 0.5, [0, 1])
    assert res.f1 == 0.0


def test_f1_confusion_arithmetic():
    # TP=3, FP=1, FN=0 -> F1 = 2*(3/4)*1 / (3/4 + 1) = 6/7
    scores = [0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1]
    labels = [1, 1, 1, 0, 0, 0, 0, 0]
    res = classify_and_f1(scores, 0.5, labels)
    assert res.f1 == pytest.approx(6 / 7)


def test_f1_tie_at_threshold_is_failure():
    res = classify_and_f1([0.5], 0.5, [1])
    assert res.predictions == [0]


def test_f1_permutation_invariant(rng):
    scores = rng.random(30).tolist()
    labels = rng.integers(0, 2, size=30).tolist()
    base = classify_and_f1(scores, 0.5, labels).f1
    perm = rng.permutation(30)
    shuffled = classify_and_f1([scores[i] for i in perm], 0.5,
                               [labels[i] for i in perm]).f1
    assert base == pytest.approx(shuffled)


def test_f1_length_mismatch_errors():
    with pytest.raises(ValueError):
        classify_and_f1([0.5, 0.6], 0.5, [1])


def test_f1_zero_when_no_positive_predictions_or_truth():
    assert classify_and_f1([0.1, 0.2], 0.5, [0, 0]).f1 == 0.0


# -- Student t --------------------------------------------------------------------

def test_betainc_against_scipy():
    rng = np.random.default_rng(1)
    for _ in range(300):
        a = float(rng.uniform(0.3, 20))
        b = float(rng.uniform(0.3, 20))
        x = float(rng.uniform(0, 1))
        assert betainc(a, b, x) == pytest.approx(
            float(scipy_stats.beta.cdf(x, a, b)), abs=1e-8)


def test_t_cdf_against_scipy():
    rng = np.random.default_rng(2)
    for _ in range(200):
        t = float(rng.uniform(-8, 8))
        df = int(rng.integers(1, 40))
        assert student_t_cdf(t, df) == pytest.approx(
            float(scipy_stats.t.cdf(t, df)), abs=1e-8)
    assert student_t_sf(0.0, 5) == pytest.approx(0.5, abs=1e-12)


def test_paired_ttest_identical_samples():
    res = paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert res.t == 0.0 and res.p == 1.0 and res.df == 2


def test_paired_ttest_hand_derived_case():
    # differences {1,2,3}: mean 2, sample sd 1, t = 2/(1/sqrt(3)) = 3.4641
    res = paired_ttest([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    assert res.t == pytest.approx(2 * math.sqrt(3), abs=1e-9)
    assert res.p == pytest.approx(0.0742, abs=1e-3)
    assert res.df == 2
    # cross-check against an independent implementation
    t_ref, p_ref = scipy_stats.ttest_rel([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    assert res.t == pytest.approx(float(t_ref), abs=1e-9)
    assert res.p == pytest.approx(float(p_ref), abs=1e-9)


def test_paired_ttest_antisymmetric():
    rng = np.random.default_rng(3)
    a = rng.normal(size=8).tolist()
    b = rng.normal(size=8).tolist()
    r1 = paired_ttest(a, b)
    r2 = paired_ttest(b, a)
    assert r1.t == pytest.approx(-r2.t, abs=1e-12)
    assert r1.p == pytest.approx(r2.p, abs=1e-12)


def test_paired_ttest_degenerate_zero_variance():
    res = paired_ttest([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
    assert res.degenerate and res.p == 0.0 and math.isinf(res.t)


def test_paired_ttest_p_decreases_with_effect_size():
    base = [0.0] * 5
    rng = np.random.default_rng(4)
    noise = rng.normal(scale=0.3, size=5)
    prev = 1.1
    for shift in (0.5, 1.0, 2.0, 4.0):
        a = (noise + shift).tolist()
        p = paired_ttest(a, base).p
        assert p < prev
        prev = p


def test_paired_ttest_validation():
    with pytest.raises(ValueError):
        paired_ttest([1.0], [2.0])
    with pytest.raises(ValueError):
        paired_ttest([1.0, 2.0], [1.0])
