import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gammaln

from equinmf.evaluation import accuracy, kmeans, nmi, summarize, welch_ttest


def brute_accuracy(pred, truth):
    pc, tc = sorted(set(pred)), sorted(set(truth))
    best = 0
    size = max(len(pc), len(tc))
    pcs = pc + [None] * (size - len(pc))
    for perm in itertools.permutations(tc + [None] * (size - len(tc))):
        mapping = dict(zip(pcs, perm))
        best = max(best, sum(mapping[p] == t for p, t in zip(pred, truth)))
    return best / len(pred)


def plugin_nmi(pred, truth):
    n = len(pred)
    joint = Counter(zip(pred, truth))
    cp, ct = Counter(pred), Counter(truth)
    mi = sum(c / n * math.log((c / n) / ((cp[a] / n) * (ct[b] / n))) for (a, b), c in joint.items())
    hp = -sum(c / n * math.log(c / n) for c in cp.values())
    ht = -sum(c / n * math.log(c / n) for c in ct.values())
    return mi / math.sqrt(hp * ht)


def brute_kmeans_sse(points, k=2):
    best = math.inf
    n = len(points)
    for assign in itertools.product(range(k), repeat=n):
        if len(set(assign)) < k:
            continue
        a = np.array(assign)
        sse = sum(((points[a == c] - points[a == c].mean(0)) ** 2).sum() for c in range(k))
        best = min(best, sse)
    return best


def t_sf_by_quadrature(t, df):
    """Two-sided tail of Student's t from its density, integrated numerically."""
    logc = gammaln((df + 1) / 2) - gammaln(df / 2) - 0.5 * math.log(df * math.pi)
    pdf = lambda x: math.exp(logc - (df + 1) / 2 * math.log1p(x * x / df))
    tail, _ = integrate.quad(pdf, abs(t), math.inf, epsabs=1e-14, epsrel=1e-12)
    return 2 * tail


def test_accuracy_examples():
    assert accuracy([0, 1, 2, 2], [0, 1, 2, 2]) == 1.0
    assert accuracy([2, 0, 1, 1], [0, 1, 2, 2]) == 1.0
    assert accuracy([0, 0, 1, 1, 2, 2], [0, 1, 1, 1, 2, 2]) == pytest.approx(5 / 6)
    assert brute_accuracy([0, 0, 1, 1, 2, 2], [0, 1, 1, 1, 2, 2]) == pytest.approx(5 / 6)
    with pytest.raises(ValueError):
        accuracy([0, 1], [0, 1, 1])


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_accuracy_matches_brute_force(data):
    n = data.draw(st.integers(1, 14))
    k = data.draw(st.integers(1, 5))
    pred = data.draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n))
    truth = data.draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n))
    assert accuracy(pred, truth) == pytest.approx(brute_accuracy(pred, truth), abs=1e-15)


def test_accuracy_at_least_one_over_k_balanced(rng):
    truth = np.repeat(np.arange(4), 10)
    for _ in range(50):
        assert accuracy(rng.integers(0, 4, size=40), truth) >= 0.25


def test_nmi_examples():
    assert nmi([0, 0, 1, 1], [0, 0, 1, 1]) == pytest.approx(1.0, abs=1e-12)
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-15)
    assert nmi([0, 0, 1, 1], [0, 0, 0, 1]) == pytest.approx(plugin_nmi([0, 0, 1, 1], [0, 0, 0, 1]), abs=1e-12)
    assert nmi([0, 0, 0], [1, 1, 1]) == 1.0
    assert nmi([0, 0, 0], [0, 1, 1]) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_nmi_matches_plugin_and_is_symmetric(data):
    n = data.draw(st.integers(2, 30))
    pred = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    truth = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    if len(set(pred)) > 1 and len(set(truth)) > 1:
        assert nmi(pred, truth) == pytest.approx(plugin_nmi(pred, truth), abs=1e-12)
    assert nmi(pred, truth) == nmi(truth, pred)
    relabel = {c: 10 - c for c in set(pred)}
    assert nmi([relabel[p] for p in pred], truth) == pytest.approx(nmi(pred, truth), abs=1e-12)
    assert 0.0 <= nmi(pred, truth) <= 1.0


def test_kmeans_singletons(rng):
    pts = rng.standard_normal((6, 2))
    run = kmeans(pts, 6, repeats=3, seed=1)
    assert run.sse == 0.0
    assert len(set(run.labels)) == 6


def test_kmeans_two_blobs(rng):
    pts = np.vstack([rng.normal(0, 0.1, (20, 2)), rng.normal(10, 0.1, (20, 2))])
    truth = np.repeat([0, 1], 20)
    assert accuracy(kmeans(pts, 2, seed=4).labels, truth) == 1.0


def test_kmeans_matches_exhaustive_optimum():
    hits = 0
    for seed in range(20):
        pts = np.random.default_rng(seed).standard_normal((8, 2))
        hits += abs(kmeans(pts, 2, seed=seed).sse - brute_kmeans_sse(pts)) < 1e-9
    assert hits >= 19


def test_kmeans_sse_nonincreasing_and_deterministic(rng):
    pts = rng.standard_normal((60, 3))
    a, b = kmeans(pts, 5, seed=3), kmeans(pts, 5, seed=3)
    assert np.array_equal(a.labels, b.labels) and a.sse == b.sse
    hist = np.array(a.sse_history)
    assert np.all(hist[1:] <= hist[:-1] + 1e-12)
    with pytest.raises(ValueError):
        kmeans(pts[:3], 4)


def test_welch_identical_samples():
    res = welch_ttest([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
    assert not res.significant and res.p == pytest.approx(1.0)
    res = welch_ttest([0.5, 0.5], [0.5, 0.5])
    assert res == (0.0, 1.0, False)


def test_welch_table_gap_is_significant(rng):
    a = 0.93 + 0.04 * rng.standard_normal(20)
    b = 0.84 + 0.03 * rng.standard_normal(20)
    assert welch_ttest(a, b, 0.05).significant


def test_welch_p_matches_quadrature():
    a = [0.91, 0.95, 0.89, 0.97, 0.93]
    b = [0.84, 0.88, 0.80, 0.86]
    res = welch_ttest(a, b)
    va, vb = np.var(a, ddof=1) / len(a), np.var(b, ddof=1) / len(b)
    t = (np.mean(a) - np.mean(b)) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    assert res.t == pytest.approx(t, rel=1e-12)
    assert abs(res.p - t_sf_by_quadrature(t, df)) < 1e-6


def test_summarize_stats():
    rep = summarize("equinmf", [0.9, 1.0], [0.8, 0.8])
    assert rep.accuracy_mean == pytest.approx(0.95)
    assert rep.accuracy_std == pytest.approx(math.sqrt(0.005))
    assert rep.nmi_std == 0.0
