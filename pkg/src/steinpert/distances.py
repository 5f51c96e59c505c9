"""Probability metrics between finite signed lattice measures.

Total variation follows the functional convention: the supremum over test
functions bounded by 1, i.e. the l1 norm of the difference (no factor 1/2).
"""

from __future__ import annotations

import enum
import itertools
import math

import numpy as np

from .lattice import SignedLatticeMeasure

MASS_TOL = 1e-10


class MetricKind(str, enum.Enum):
    TOTAL_VARIATION = "total_variation"
    WASSERSTEIN = "wasserstein"
    POINT = "point"
    KOLMOGOROV = "kolmogorov"


class MassMismatchError(ValueError):
    pass


def _joint(P: SignedLatticeMeasure, Q: SignedLatticeMeasure, pad: int = 0):
    if len(P) == 0 and len(Q) == 0:
        return np.zeros(1), np.zeros(1)
    los = [m.lo for m in (P, Q) if len(m)]
    his = [m.hi for m in (P, Q) if len(m)]
    lo, hi = min(los) - pad, max(his) + pad
    return P.on(lo, hi), Q.on(lo, hi)


def distance(P: SignedLatticeMeasure, Q: SignedLatticeMeasure, kind: MetricKind | str) -> float:
    kind = MetricKind(kind)
    p, q = _joint(P, Q, pad=1)
    d = p - q
    if kind is MetricKind.TOTAL_VARIATION:
        return float(math.fsum(np.abs(d)))
    if kind is MetricKind.POINT:
        return float(np.max(np.abs(d)))
    cdf = np.cumsum(d)
    if kind is MetricKind.KOLMOGOROV:
        return float(np.max(np.abs(cdf)))
    # Wasserstein
    if abs(P.total_mass() - Q.total_mass()) > MASS_TOL:
        raise MassMismatchError(
            f"Wasserstein distance needs equal masses, got {P.total_mass()!r} vs {Q.total_mass()!r}"
        )
    return float(math.fsum(np.abs(cdf[:-1])))


def wasserstein_bruteforce(P: SignedLatticeMeasure, Q: SignedLatticeMeasure) -> float:
    """sup over f with |Delta f| <= 1 of |P(f) - Q(f)|, by enumerating slope vertices.

    The objective is linear in the slopes, so the sup over the box [-1, 1]^k
    sits at a vertex.  Only for small joint supports.
    """
    p, q = _joint(P, Q)
    d = p - q
    k = len(d) - 1
    if k > 16:
        raise ValueError("joint support too large for enumeration")
    if k == 0:
        return 0.0
    best = 0.0
    for slopes in itertools.product((-1.0, 1.0), repeat=k):
        f = np.concatenate([[0.0], np.cumsum(slopes)])
        best = max(best, abs(float(np.dot(d, f))))
    return best


def kappa_bound(pi: SignedLatticeMeasure, kind: MetricKind | str, lam: float) -> float:
    """Upper bound on kappa(pi, Z_-) for the metric ``kind``.

    ``lam`` is the mean of the reference Poisson law.  No bound is published
    for the Kolmogorov metric, so that case is refused.
    """
    kind = MetricKind(kind)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    neg = pi.support < 0
    w = np.abs(pi.weights[neg])
    j = pi.support[neg]
    if kind is MetricKind.TOTAL_VARIATION:
        return 2.0 * float(w.sum())
    if kind is MetricKind.WASSERSTEIN:
        return float(np.dot(w, np.abs(j) + lam))
    if kind is MetricKind.POINT:
        return float(w.sum()) / math.sqrt(2 * math.e * lam) + float(w.max(initial=0.0))
    raise ValueError("no kappa bound is available for the Kolmogorov metric")
