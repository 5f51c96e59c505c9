import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from steinpert.distances import MassMismatchError, MetricKind, distance, kappa_bound, wasserstein_bruteforce
from steinpert.lattice import SignedLatticeMeasure, poisson_pmf

D0, D1, D2 = (SignedLatticeMeasure.delta(k) for k in range(3))


def _prob(off, w):
    w = np.asarray(w, dtype=float)
    return SignedLatticeMeasure(off, w / w.sum())


probs = st.builds(
    _prob, st.integers(-2, 2), st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5)
)
kinds = st.sampled_from(list(MetricKind))


@pytest.mark.parametrize("kind", list(MetricKind))
def test_self_distance_zero(kind):
    p = poisson_pmf(3.0)
    assert distance(p, p, kind) == 0.0


@pytest.mark.parametrize(
    "kind,value",
    [("total_variation", 2.0), ("wasserstein", 1.0), ("point", 1.0), ("kolmogorov", 1.0)],
)
def test_two_point(kind, value):
    assert distance(D0, D1, kind) == pytest.approx(value)


def test_wasserstein_two_sites():
    assert distance(D0, D2, "wasserstein") == pytest.approx(2.0)
    assert wasserstein_bruteforce(D0, D2) == pytest.approx(2.0)


def test_wasserstein_mass_mismatch():
    with pytest.raises(MassMismatchError):
        distance(D0, D1.scale(0.5), "wasserstein")


@given(probs, probs, probs, kinds)
def test_metric_axioms(p, q, r, kind):
    dpq = distance(p, q, kind)
    assert dpq >= 0
    assert dpq == pytest.approx(distance(q, p, kind), abs=1e-12)
    assert dpq <= distance(p, r, kind) + distance(r, q, kind) + 1e-10


@given(probs, probs)
def test_wasserstein_dual(p, q):
    assert distance(p, q, "wasserstein") == pytest.approx(wasserstein_bruteforce(p, q), abs=1e-9)


@given(probs, probs)
def test_metric_orderings(p, q):
    tv = distance(p, q, "total_variation")
    assert distance(p, q, "kolmogorov") <= 0.5 * tv + 1e-12
    assert distance(p, q, "point") <= tv + 1e-12


class TestKappa:
    @pytest.mark.parametrize("kind", ["total_variation", "wasserstein", "point"])
    def test_nonnegative_support(self, kind):
        assert kappa_bound(poisson_pmf(2.0), kind, 2.0) == 0.0

    def test_total_variation(self):
        pi = SignedLatticeMeasure.from_dict({-1: 0.1, 0: 0.5, 1: 0.4})
        assert kappa_bound(pi, "total_variation", 1.0) == pytest.approx(0.2)

    def test_wasserstein(self):
        pi = SignedLatticeMeasure.from_dict({-2: 0.05, 0: 0.95})
        assert kappa_bound(pi, "wasserstein", 4.0) == pytest.approx(0.3)

    def test_point(self):
        pi = SignedLatticeMeasure.from_dict({-2: 0.05, -1: -0.02, 0: 0.97})
        expected = 0.07 / np.sqrt(2 * np.e * 3.0) + 0.05
        assert kappa_bound(pi, "point", 3.0) == pytest.approx(expected)

    def test_kolmogorov_refused(self):
        with pytest.raises(ValueError):
            kappa_bound(D0, "kolmogorov", 1.0)
