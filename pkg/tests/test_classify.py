import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reupload import classify
from reupload.classify import LdaModel
from reupload.errors import DegenerateFitError, InvalidArgumentError

from oracles import lda_threshold_by_accuracy, lda_threshold_by_density


def clusters(mu1, mu2, n1, n2, var):
    """Samples with exact means and pooled variance (denominator n - 2)."""
    d = math.sqrt(var * (n1 + n2 - 2) / (n1 + n2))
    c1 = mu1 + d * np.array([(-1) ** i for i in range(n1)])
    c2 = mu2 + d * np.array([(-1) ** i for i in range(n2)])
    return np.r_[c1, c2], np.r_[np.ones(n1, int), np.full(n2, 2)]


class TestFit:
    def test_symmetric(self):
        m = classify.fit_lda([0.1, 0.2, 0.8, 0.9], [2, 2, 1, 1])
        assert m.threshold == pytest.approx(0.5)
        assert m.orientation == 1

    def test_equal_priors(self):
        p, y = clusters(0.7, 0.3, 50, 50, 0.01)
        assert classify.fit_lda(p, y).threshold == pytest.approx(0.5, abs=1e-12)

    def test_unequal_priors_closed_form(self):
        p, y = clusters(0.8, 0.2, 10, 90, 0.01)
        m = classify.fit_lda(p, y)
        assert m.pooled_variance == pytest.approx(0.01, rel=1e-12)
        assert m.threshold == pytest.approx(0.5 + 0.01 * math.log(9) / 0.6, abs=1e-12)
        assert m.threshold == pytest.approx(0.5366, abs=1e-4)

    def test_unequal_priors_oracles(self):
        p, y = clusters(0.8, 0.2, 10, 90, 0.01)
        tau = classify.fit_lda(p, y).threshold
        assert tau == pytest.approx(lda_threshold_by_density(0.8, 0.2, 0.01, 10, 90), abs=1e-10)
        assert tau == pytest.approx(lda_threshold_by_accuracy(0.8, 0.2, 0.01, 10, 90), abs=1e-5)

    def test_uniform_priors_ignore_counts(self):
        p, y = clusters(0.8, 0.2, 10, 90, 0.01)
        assert classify.fit_lda(p, y, priors="uniform").threshold == pytest.approx(0.5)

    def test_orientation_flips(self):
        m = classify.fit_lda([0.1, 0.2, 0.8, 0.9], [1, 1, 2, 2])
        assert m.orientation == -1
        assert classify.predict(m, 0.15) == 1

    def test_single_class(self):
        with pytest.raises(DegenerateFitError):
            classify.fit_lda([0.1, 0.2], [1, 1])

    def test_tied_means(self):
        with pytest.raises(DegenerateFitError) as err:
            classify.fit_lda([0.4, 0.6, 0.4, 0.6], [1, 1, 2, 2])
        assert err.value.model.degenerate
        assert err.value.model.threshold == pytest.approx(0.5)

    def test_bad_labels(self):
        with pytest.raises(InvalidArgumentError):
            classify.fit_lda([0.1, 0.2], [0, 1])

    @given(st.permutations(list(range(12))))
    def test_order_invariant(self, perm):
        p = np.array([0.1, 0.15, 0.3, 0.2, 0.25, 0.05, 0.7, 0.9, 0.8, 0.65, 0.85, 0.75])
        y = np.array([2] * 6 + [1] * 6)
        a = classify.fit_lda(p, y)
        b = classify.fit_lda(p[list(perm)], y[list(perm)])
        assert a.threshold == pytest.approx(b.threshold, abs=1e-14)

    @given(st.lists(st.floats(0, 0.45), min_size=1, max_size=20),
           st.lists(st.floats(0.55, 1), min_size=1, max_size=20))
    def test_separable_gives_full_accuracy(self, low, high):
        p = np.r_[low, high]
        y = np.r_[np.full(len(low), 2), np.ones(len(high), int)]
        try:
            m = classify.fit_lda(p, y, priors="uniform")
        except DegenerateFitError:
            return
        # uniform priors put tau halfway between the means, which lies in the gap
        if max(low) < m.threshold <= min(high):
            assert classify.accuracy(classify.predict(m, p), y) == 1.0

    def test_roundtrip(self):
        m = classify.fit_lda([0.1, 0.2, 0.8, 0.9], [2, 2, 1, 1])
        assert LdaModel.from_dict(m.to_dict()) == m


class TestPredict:
    def test_examples(self):
        up = LdaModel(0.5, 1, (0.8, 0.2), 0.01)
        down = LdaModel(0.5, -1, (0.2, 0.8), 0.01)
        assert classify.predict(up, 0.9) == 1
        assert classify.predict(up, 0.5) == 1
        assert classify.predict(down, 0.9) == 2
        assert classify.predict(down, 0.5) == 1

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, a, b):
        m = LdaModel(0.4, 1, (0.8, 0.2), 0.01)
        lo, hi = sorted((a, b))
        # class 1 is "high" here, so the label can only go 2 -> 1 as p rises
        assert classify.predict(m, lo) >= classify.predict(m, hi)

    def test_array(self):
        m = LdaModel(0.5, 1, (0.8, 0.2), 0.01)
        assert classify.predict(m, np.array([0.1, 0.6])).tolist() == [2, 1]


class TestAccuracy:
    def test_values(self):
        assert classify.accuracy([1, 2, 1], [1, 2, 1]) == 1.0
        assert classify.accuracy([1, 1], [2, 2]) == 0.0
        assert classify.accuracy([1, 2, 1, 1], [1, 2, 1, 2]) == 0.75

    def test_errors(self):
        with pytest.raises(InvalidArgumentError):
            classify.accuracy([1, 2], [1])
        with pytest.raises(InvalidArgumentError):
            classify.accuracy([], [])
