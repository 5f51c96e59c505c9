"""Exact finite-n laws, the Borovkov-Pfeifer bound pipeline, and a
birth-death chain with fixed-size jumps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.special import zeta

from .distances import MetricKind, distance
from .lattice import (
    PreconditionError,
    RecordsTail,
    SignedLatticeMeasure,
    bp_rates,
    convolve,
    exp_rates,
    poisson_pmf,
    records_probabilities,
)

MAX_DEPENDENT_N = 20
TABLE_TOL = 1e-12


class TruncationError(RuntimeError):
    """The truncated state space holds too much stationary mass near its edge."""


# ---------------------------------------------------------------------------
# Bernoulli sums


def _bit_matrix(n: int) -> np.ndarray:
    # row k holds the outcome with index k; x_1 is the most significant bit
    k = np.arange(1 << n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((k[:, None] >> shifts[None, :]) & 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class BernoulliSumModel:
    """W = sum of indicators, in one of three flavours.

    * ``independent``: indicators with probabilities ``p``.
    * ``dependent``: an explicit joint table over {0,1}^n in lexicographic
      order (x_1 most significant).
    * ``records``: p_i = 1/i for s <= i <= n, independent, with the
      analytic tail i > n entering the approximating measure.
    """

    kind: Literal["independent", "dependent", "records"]
    p: np.ndarray
    joint: np.ndarray | None = field(default=None, repr=False)
    s: int | None = None
    n_records: int | None = None

    @classmethod
    def independent(cls, p: Sequence[float]) -> "BernoulliSumModel":
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or np.any((p < 0) | (p > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        return cls("independent", p)

    @classmethod
    def dependent(cls, joint: Sequence[float]) -> "BernoulliSumModel":
        t = np.asarray(joint, dtype=float).ravel()
        n = int(round(math.log2(t.size))) if t.size else -1
        if n < 1 or (1 << n) != t.size:
            raise ValueError("joint table length must be a power of two")
        if n > MAX_DEPENDENT_N:
            raise ValueError(f"dependent models are capped at n = {MAX_DEPENDENT_N}")
        if np.any(t < 0):
            raise ValueError("joint probabilities must be nonnegative")
        if abs(math.fsum(t) - 1.0) > TABLE_TOL:
            raise ValueError(f"joint table sums to {math.fsum(t)!r}, not 1")
        bits = _bit_matrix(n)
        p = t @ bits
        return cls("dependent", p, joint=t)

    @classmethod
    def records(cls, n: int, s: int = 4) -> "BernoulliSumModel":
        if s < 4:
            raise PreconditionError("records need s >= 4 so that every p_i < 1/3")
        if n < s:
            raise ValueError("need n >= s")
        return cls("records", records_probabilities(s, n), s=s, n_records=n)

    @classmethod
    def from_json(cls, source: str | Path | dict) -> "BernoulliSumModel":
        """Load {"n": n, "probs": [2^n reals]}."""
        if isinstance(source, dict):
            obj = source
        else:
            obj = json.loads(Path(source).read_text())
        if set(obj) != {"n", "probs"}:
            raise ValueError("joint table JSON needs exactly the keys 'n' and 'probs'")
        n = int(obj["n"])
        probs = obj["probs"]
        if len(probs) != 1 << n:
            raise ValueError(f"expected {1 << n} probabilities for n = {n}, got {len(probs)}")
        return cls.dependent(probs)

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def lam(self) -> float:
        return math.fsum(self.p)

    @property
    def theta1(self) -> float:
        return theta1(self)

    @property
    def eta1(self) -> float:
        return eta1(self)

    def tail(self) -> RecordsTail | None:
        return RecordsTail(self.n_records) if self.kind == "records" else None


def poisson_binomial_pmf(p: Sequence[float]) -> SignedLatticeMeasure:
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    w = np.zeros(len(p) + 1)
    w[0] = 1.0
    for k, pi in enumerate(p, start=1):
        w[1 : k + 1] = w[1 : k + 1] * (1 - pi) + w[:k] * pi
        w[0] *= 1 - pi
    return SignedLatticeMeasure(0, w, trim=0.0)


def enumerate_independent_pmf(p: Sequence[float]) -> SignedLatticeMeasure:
    """Oracle: sum over all 2^n outcomes."""
    p = np.asarray(p, dtype=float)
    bits = _bit_matrix(len(p))
    probs = np.prod(np.where(bits == 1, p, 1 - p), axis=1)
    return SignedLatticeMeasure(0, np.bincount(bits.sum(axis=1), weights=probs, minlength=len(p) + 1), trim=0.0)


def product_table(p: Sequence[float]) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    bits = _bit_matrix(len(p))
    return np.prod(np.where(bits == 1, p, 1 - p), axis=1)


def markov_indicator_table(p0: float, stay: float, n: int) -> np.ndarray:
    """Joint table of a stationary two-state chain: P(I_1 = 1) = p0 and
    P(I_{k+1} = I_k) = stay, with the flip probabilities chosen so p0 is stationary."""
    if not 0 < p0 < 1:
        raise ValueError("p0 must be in (0, 1)")
    # flips 0->1 at a, 1->0 at b; stationarity a (1-p0) = b p0
    b = (1 - stay)
    a = b * p0 / (1 - p0)
    if not (0 <= a <= 1 and 0 <= b <= 1):
        raise ValueError("inconsistent chain parameters")
    P = np.array([[1 - a, a], [b, 1 - b]])
    bits = _bit_matrix(n)
    probs = np.where(bits[:, 0] == 1, p0, 1 - p0)
    for k in range(1, n):
        probs = probs * P[bits[:, k - 1], bits[:, k]]
    return probs


def exact_sum_pmf(model: BernoulliSumModel) -> SignedLatticeMeasure:
    if model.kind != "dependent":
        return poisson_binomial_pmf(model.p)
    bits = _bit_matrix(model.n)
    return SignedLatticeMeasure(0, np.bincount(bits.sum(axis=1), weights=model.joint, minlength=model.n + 1), trim=0.0)


def _leave_one_out(model: BernoulliSumModel, i: int) -> tuple[np.ndarray, np.ndarray]:
    """pmfs of W^(i) and of W^(i) given I_i = 1, both on 0..n-1."""
    bits = _bit_matrix(model.n)
    w_minus = bits.sum(axis=1) - bits[:, i]
    t = model.joint
    plain = np.bincount(w_minus, weights=t, minlength=model.n)
    on = bits[:, i] == 1
    mass = t[on].sum()
    if mass <= 0:
        raise ValueError(f"P(I_{i + 1} = 1) = 0, so the conditional law is undefined")
    cond = np.bincount(w_minus[on], weights=t[on], minlength=model.n) / mass
    return plain, cond


def eta1_terms(model: BernoulliSumModel) -> tuple[float, float]:
    """(independent-coupling eta1, minimal-coupling eta1)."""
    if model.kind != "dependent":
        return 0.0, 0.0
    indep, minimal = [], []
    k = np.arange(model.n)
    for i in range(model.n):
        pi = model.p[i]
        if pi >= 0.5:
            raise PreconditionError("eta1 needs p_i < 1/2")
        plain, cond = _leave_one_out(model, i)
        weight = pi / (1 - 2 * pi)
        minimal.append(weight * math.fsum(np.abs(np.cumsum(cond - plain))))
        indep.append(weight * float(cond @ np.abs(k[:, None] - k[None, :]) @ plain))
    return math.fsum(indep), math.fsum(minimal)


def eta1(model: BernoulliSumModel, coupling: Literal["independent", "minimal"] = "independent") -> float:
    a, b = eta1_terms(model)
    if coupling == "independent":
        return a
    if coupling == "minimal":
        return b
    raise ValueError(f"unknown coupling {coupling!r}")


def tail_theta_sum(model: BernoulliSumModel) -> float:
    """T = sum_{i>n} p_i^2 (1-2p_i)^{-2}; zero unless the family continues past n."""
    if model.kind == "records":
        return float(zeta(2, model.n_records - 1))
    return 0.0


def theta1(model: BernoulliSumModel) -> float:
    """sum_i p_i^2 (1-2p_i)^{-2} / lambda over the whole family, tail included."""
    p = model.p
    if np.any(p >= 1.0 / 3.0):
        raise PreconditionError("theta1 needs every p_i < 1/3")
    lam = model.lam
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if model.kind == "records":
        # p_i = 1/i gives p_i^2 (1-2p_i)^{-2} = (i-2)^{-2}
        return float(zeta(2, model.s - 2)) / lam
    return math.fsum(p**2 / (1 - 2 * p) ** 2) / lam


def sup_pmf_bound(model: BernoulliSumModel) -> float:
    """Bound on max_k P(W = k): (4 sum p q)^{-1/2} for independent sums, exact max otherwise."""
    if model.kind == "dependent":
        return float(np.max(exact_sum_pmf(model).weights))
    v = 4.0 * math.fsum(model.p * (1 - model.p))
    return min(1.0, v**-0.5) if v > 0 else 1.0


@dataclass(frozen=True)
class BPBounds:
    total_variation: float
    point: float
    wasserstein: float
    T: float
    eta1: float
    theta1: float
    lam: float
    supW: float

    def __iter__(self):
        return iter((self.total_variation, self.point, self.wasserstein))

    def for_metric(self, kind: MetricKind | str) -> float:
        kind = MetricKind(kind)
        if kind is MetricKind.TOTAL_VARIATION:
            return self.total_variation
        if kind is MetricKind.POINT:
            return self.point
        if kind is MetricKind.WASSERSTEIN:
            return self.wasserstein
        raise ValueError(f"no bound for metric {kind.value}")


def bp_error_bounds(
    model: BernoulliSumModel, supW: float | None = None, eta: float | None = None
) -> BPBounds:
    th = theta1(model)
    if th >= 0.5:
        raise PreconditionError(f"theta1 = {th:.6g} must be below 1/2")
    T = tail_theta_sum(model)
    e = eta1(model) if eta is None else eta
    s = sup_pmf_bound(model) if supW is None else supW
    lam = model.lam
    k = 1.0 / (1.0 - 2.0 * th)
    return BPBounds(
        total_variation=2.0 * k / lam * (T + e),
        point=2.0 * k / lam * (s * T + e),
        wasserstein=1.15 * k / math.sqrt(lam) * (T + e),
        T=T,
        eta1=e,
        theta1=th,
        lam=lam,
        supW=s,
    )


def bp_approximation(model: BernoulliSumModel, L: int | None = None) -> SignedLatticeMeasure:
    """Po(lambda) * BP, built from the marginal probabilities (and the records tail)."""
    rates = bp_rates(model.p, tail=model.tail(), L=L, infinite=model.kind == "records")
    return convolve(poisson_pmf(model.lam), exp_rates(rates))


@dataclass(frozen=True)
class RecordsRow:
    n: int
    metric: MetricKind
    actual: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.actual / self.bound if self.bound > 0 else (0.0 if self.actual == 0 else math.inf)


DEFAULT_METRICS = (MetricKind.TOTAL_VARIATION, MetricKind.POINT, MetricKind.WASSERSTEIN)


def records_experiment(
    n: int, s: int = 4, metrics: Iterable[MetricKind | str] = DEFAULT_METRICS, L: int | None = None
) -> list[RecordsRow]:
    """Actual distance and its bound between L(W_s) and Po(lambda) * BP_s."""
    model = BernoulliSumModel.records(n, s)
    exact = poisson_binomial_pmf(model.p)
    approx = bp_approximation(model, L)
    bounds = bp_error_bounds(model)
    rows = []
    for kind in metrics:
        kind = MetricKind(kind)
        rows.append(RecordsRow(n, kind, distance(exact, approx, kind), bounds.for_metric(kind)))
    return rows


# ---------------------------------------------------------------------------
# Example bound for a jump-diffusion with random jump sizes


def random_jump_tv_bound(alpha: float, z: float, second_moment_about_z: float) -> float:
    """d_TV <= 2 alpha int (zeta - z)^2 mu(d zeta) / (1 - gamma), gamma = sqrt(2 pi) z alpha."""
    if alpha < 0 or z < 0 or second_moment_about_z < 0:
        raise ValueError("alpha, z and the second moment must be nonnegative")
    gamma = math.sqrt(2 * math.pi) * z * alpha
    if gamma >= 1:
        raise ValueError(f"gamma = {gamma:.6g} >= 1")
    return 2.0 * alpha * second_moment_about_z / (1.0 - gamma)



# ---------------------------------------------------------------------------
# birth-death chain with jumps


@dataclass(frozen=True)
class MarkovJumpModel:
    """Rates j -> j+1 at N, j -> j-1 at j, j -> j + floor(z sqrt N) at alpha."""

    N: int
    z: float
    alpha: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if self.z < 0 or self.alpha < 0:
            raise ValueError("z and alpha must be nonnegative")

    @property
    def eta_N(self) -> float:
        return 1.0 / math.sqrt(self.N)

    @property
    def jump(self) -> int:
        return int(math.floor(self.z * math.sqrt(self.N) + 1e-12))

    def default_truncation(self) -> int:
        return int(math.ceil(self.N + 8 * math.sqrt(self.N) + 3 * self.jump))

    def second_moment_bound(self) -> float:
        a, z = self.alpha, self.z
        return 1 + 0.5 * a * z * self.eta_N + a * a * z * z + 0.5 * a * z * z


@dataclass(frozen=True, eq=False)
class Equilibrium:
    model: MarkovJumpModel
    x_law: SignedLatticeMeasure
    truncation: int
    balance_residual: float
    top_mass: float

    @property
    def w_points(self) -> np.ndarray:
        return (self.x_law.support - self.model.N) * self.model.eta_N

    @property
    def mean_w(self) -> float:
        return float(np.dot(self.x_law.weights, self.w_points))

    @property
    def second_moment_w(self) -> float:
        return float(np.dot(self.x_law.weights, self.w_points**2))

    @property
    def abs_mean_w(self) -> float:
        return float(np.dot(self.x_law.weights, np.abs(self.w_points)))

    def d1_ingredients(self) -> dict[str, float]:
        """Coefficients of our assembled bound d1 <= C N^{-1/2} / (1 - gamma).

        With y = (g_f)' solving the standard normal equation, the derivative
        bounds give ||g'|| <= 2, ||g''|| <= 4, ||g'''|| <= 2 per unit of
        ||f||_inf + ||f'||_inf, so C = 2/3 + 2 E|W| + 2 alpha.
        """
        m = self.model
        gamma = (4 + math.sqrt(2 * math.pi)) * m.z * m.alpha
        C = 2.0 / 3.0 + 2.0 * self.abs_mean_w + 2.0 * m.alpha
        C_moment = 2.0 / 3.0 + 2.0 * math.sqrt(m.second_moment_bound()) + 2.0 * m.alpha
        out = {"gamma": gamma, "C": C, "C_from_moment_bound": C_moment, "E_abs_w": self.abs_mean_w}
        out["d1_bound"] = C / math.sqrt(m.N) / (1 - gamma) if gamma < 1 else math.inf
        return out


def _generator(model: MarkovJumpModel, M: int) -> sp.csr_matrix:
    j = np.arange(M + 1)
    rows, cols, vals = [], [], []
    up = j[:-1]
    rows.append(up), cols.append(up + 1), vals.append(np.full(up.size, float(model.N)))
    down = j[1:]
    rows.append(down), cols.append(down - 1), vals.append(down.astype(float))
    k = model.jump
    if k > 0 and model.alpha > 0:
        src = j[: M + 1 - k]
        rows.append(src), cols.append(src + k), vals.append(np.full(src.size, float(model.alpha)))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    Q = sp.coo_matrix((v, (r, c)), shape=(M + 1, M + 1)).tocsr()
    Q = Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())
    return Q.tocsr()


def _solve_stationary(model: MarkovJumpModel, M: int) -> tuple[np.ndarray, float]:
    Q = _generator(model, M)
    A = Q.T.tolil()
    b = np.zeros(M + 1)
    # pin the state nearest the mode, where the balance equation is best conditioned
    anchor = min(M, model.N)
    A[anchor, :] = 0.0
    A[anchor, anchor] = 1.0
    b[anchor] = 1.0
    pi = spsolve(A.tocsr(), b)
    pi = np.maximum(pi, 0.0)
    pi /= math.fsum(pi)
    res = float(np.max(np.abs(Q.T @ pi)))
    return pi, res


def markov_jump_equilibrium(model: MarkovJumpModel, truncation: int | None = None, max_doublings: int = 8) -> Equilibrium:
    """Stationary law of X_N on {0..M}, doubling M until the top band holds <= 1e-10."""
    M = truncation if truncation is not None else model.default_truncation()
    band = int(math.ceil(math.sqrt(model.N))) + model.jump + 1
    for _ in range(max_doublings + 1):
        pi, res = _solve_stationary(model, M)
        top = float(pi[max(0, M - band) :].sum())
        if top <= 1e-10:
            law = SignedLatticeMeasure(0, pi, trim=0.0)
            return Equilibrium(model, law, M, res, top)
        if truncation is not None:
            raise TruncationError(f"truncation {M} leaves mass {top:.3e} in the top band")
        M *= 2
    raise TruncationError(f"no adequate truncation up to {M}")
