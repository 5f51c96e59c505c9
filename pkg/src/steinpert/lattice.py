"""Finite-support signed measures on the integers.

Everything discrete in the package (Poisson laws, signed compound Poisson
laws, the Borovkov-Pfeifer correction, exact laws of Bernoulli sums) is
carried as a :class:`SignedLatticeMeasure`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from numba import njit
from scipy.special import gammaln, zeta

EPS_TRIM = 1e-14
WINDOW_CAP = 1_000_000


class DivergenceError(RuntimeError):
    """A recursion or series failed to reach its tail tolerance inside the window cap."""


class PreconditionError(ValueError):
    """Input violates a stated precondition (e.g. p_i >= 1/3)."""


def _trim(offset: int, w: np.ndarray, eps: float) -> tuple[int, np.ndarray]:
    nz = np.flatnonzero(np.abs(w) > eps)
    if nz.size == 0:
        return 0, np.zeros(0)
    return offset + int(nz[0]), w[nz[0]: nz[-1] + 1].copy()


@dataclass(frozen=True, eq=False)
class SignedLatticeMeasure:
    """Signed measure with finite support on Z.

    ``weights[k]`` is the mass at ``offset + k``.  End weights with absolute
    value at most ``EPS_TRIM`` are dropped on construction.
    """

    offset: int
    weights: np.ndarray
    trim: float = field(default=EPS_TRIM, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        off, w = _trim(int(self.offset), w, self.trim)
        w.setflags(write=False)
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "weights", w)

    # construction helpers -------------------------------------------------

    @classmethod
    def delta(cls, k: int = 0) -> "SignedLatticeMeasure":
        return cls(k, np.ones(1))

    @classmethod
    def empty(cls) -> "SignedLatticeMeasure":
        return cls(0, np.zeros(0))

    @classmethod
    def from_dict(cls, masses: Mapping[int, float]) -> "SignedLatticeMeasure":
        if not masses:
            return cls.empty()
        lo, hi = min(masses), max(masses)
        w = np.zeros(hi - lo + 1)
        for k, v in masses.items():
            w[k - lo] += v
        return cls(lo, w)

    # basic queries --------------------------------------------------------

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + len(self.weights) - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self.weights))

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, j: int) -> float:
        k = j - self.offset
        if 0 <= k < len(self.weights):
            return float(self.weights[k])
        return 0.0

    def on(self, lo: int, hi: int) -> np.ndarray:
        """Dense weights on ``lo..hi`` inclusive (zeros off the support)."""
        out = np.zeros(hi - lo + 1)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo: b - lo + 1] = self.weights[a - self.offset: b - self.offset + 1]
        return out

    def total_mass(self) -> float:
        return float(math.fsum(self.weights))

    def abs_mass(self, where: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
        w = np.abs(self.weights)
        if where is not None:
            w = w[where(self.support)]
        return float(np.sum(w))

    def negative_part_mass(self) -> float:
        """|m|(Z_-), the total variation of the measure on the negative integers."""
        return self.abs_mass(lambda j: j < 0)

    def expect(self, f: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> float:
        """m(f) = sum_j m{j} f(j)."""
        vals = f(self.support) if callable(f) else np.asarray(f, dtype=float)
        return float(np.dot(self.weights, vals))

    def mean(self) -> float:
        return self.expect(lambda j: j.astype(float))

    def cdf(self, lo: int | None = None, hi: int | None = None) -> np.ndarray:
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        return np.cumsum(self.on(lo, hi))

    def is_probability(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.weights >= -tol)) and abs(self.total_mass() - 1.0) <= tol

    def shift(self, k: int) -> "SignedLatticeMeasure":
        return SignedLatticeMeasure(self.offset + k, self.weights)

    def reflect(self) -> "SignedLatticeMeasure":
        """Image under j -> -j."""
        return SignedLatticeMeasure(-self.hi, self.weights[::-1])

    def __add__(self, other: "SignedLatticeMeasure") -> "SignedLatticeMeasure":
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return SignedLatticeMeasure(lo, self.on(lo, hi) + other.on(lo, hi))

    def __sub__(self, other: "SignedLatticeMeasure") -> "SignedLatticeMeasure":
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return SignedLatticeMeasure(lo, self.on(lo, hi) - other.on(lo, hi))

    def scale(self, c: float) -> "SignedLatticeMeasure":
        return SignedLatticeMeasure(self.offset, c * self.weights)

    def allclose(self, other: "SignedLatticeMeasure", atol: float) -> bool:
        if len(self) == 0 and len(other) == 0:
            return True
        return float(np.max(np.abs((self - other).weights), initial=0.0)) <= atol

    # serialization --------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {"offset": self.offset, "weights": [float(x) for x in self.weights]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "SignedLatticeMeasure":
        if set(obj) != {"offset", "weights"}:
            raise ValueError("measure JSON must have exactly the keys 'offset' and 'weights'")
        return cls(int(obj["offset"]), np.asarray(obj["weights"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "SignedLatticeMeasure":
        return cls.from_json_obj(json.loads(text))

    def __repr__(self) -> str:
        return f"SignedLatticeMeasure(support={self.lo}..{self.hi}, mass={self.total_mass():.12g})"


# ---------------------------------------------------------------------------
# rate specifications


@dataclass(frozen=True)
class JumpRateSpec:
    """Rates {l: lambda_l} of exp{sum_l lambda_l (z^l - 1)}.

    ``truncation_error`` bounds sum_{|l| > L} |l lambda_l| for the rates that
    were discarded when the spec was built.
    """

    rates: Mapping[int, float]
    truncation_error: float = 0.0

    def __post_init__(self):
        clean = {int(l): float(v) for l, v in self.rates.items() if v != 0.0}
        if 0 in clean:
            raise ValueError("jump size 0 carries no rate")
        object.__setattr__(self, "rates", dict(sorted(clean.items())))

    @property
    def total_rate(self) -> float:
        return math.fsum(self.rates.values())

    @property
    def first_moment(self) -> float:
        return math.fsum(l * v for l, v in self.rates.items())

    @property
    def abs_first_moment(self) -> float:
        return math.fsum(abs(l * v) for l, v in self.rates.items())

    def positive(self) -> "JumpRateSpec":
        return JumpRateSpec({l: v for l, v in self.rates.items() if l > 0})

    def negative(self) -> "JumpRateSpec":
        return JumpRateSpec({l: v for l, v in self.rates.items() if l < 0})

    def __add__(self, other: "JumpRateSpec") -> "JumpRateSpec":
        out = dict(self.rates)
        for l, v in other.rates.items():
            out[l] = out.get(l, 0.0) + v
        return JumpRateSpec(out, self.truncation_error + other.truncation_error)


@dataclass(frozen=True)
class CompoundPoissonSpec:
    """CP(lambda, mu): law of sum_l l N_l with N_l ~ Po(lambda mu_l).

    ``mu`` may be signed and may charge negative l; only m1 > 0 is required.
    """

    lam: float
    mu: Mapping[int, float]

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        mu = {int(l): float(v) for l, v in self.mu.items() if v != 0.0}
        if 0 in mu:
            raise ValueError("mu must not charge l = 0")
        object.__setattr__(self, "mu", dict(sorted(mu.items())))
        if not self.m1 > 0:
            raise ValueError(f"m1 must be positive, got {self.m1}")

    @property
    def m1(self) -> float:
        return math.fsum(l * v for l, v in self.mu.items())

    @property
    def m2(self) -> float:
        return math.fsum(l * (l - 1) * v for l, v in self.mu.items() if l >= 1)

    @property
    def m2_abs(self) -> float:
        return math.fsum(l * (l - 1) * abs(v) for l, v in self.mu.items())

    @property
    def poisson_mean(self) -> float:
        """lambda * m1, the mean of the Poisson reference law."""
        return self.lam * self.m1

    @property
    def two_sided(self) -> bool:
        return any(l < 0 for l in self.mu)

    @property
    def max_jump(self) -> int:
        return max(self.mu)

    @property
    def min_jump(self) -> int:
        return min(self.mu)

    def is_probability_spec(self) -> bool:
        return all(l >= 1 and v >= 0 for l, v in self.mu.items())

    def rates(self) -> JumpRateSpec:
        return JumpRateSpec({l: self.lam * v for l, v in self.mu.items()})

    @classmethod
    def from_rates(cls, rates: JumpRateSpec) -> "CompoundPoissonSpec":
        m = rates.first_moment
        if not m > 0:
            raise ValueError("rates must have positive first moment")
        # normalise so that m1 = 1, lambda = sum l lambda_l
        return cls(m, {l: v / m for l, v in rates.rates.items()})


# ---------------------------------------------------------------------------
# construction of measures


def convolve(a: SignedLatticeMeasure, b: SignedLatticeMeasure) -> SignedLatticeMeasure:
    if len(a) == 0 or len(b) == 0:
        return SignedLatticeMeasure.empty()
    if min(len(a), len(b)) > 64:
        from scipy.signal import fftconvolve

        w = fftconvolve(a.weights, b.weights)
    else:
        w = np.convolve(a.weights, b.weights)
    return SignedLatticeMeasure(a.offset + b.offset, w)


def gf_eval(m: SignedLatticeMeasure, z: float) -> float:
    """Generating function sum_j m{j} z^j (a Laurent sum if the support is two-sided)."""
    if len(m) == 0:
        return 0.0
    if z == 1.0:
        return m.total_mass()
    if z <= 0:
        if m.lo < 0:
            raise ValueError("two-sided supports need z > 0")
        return float(np.dot(m.weights, float(z) ** m.support))
    # log space keeps z^j finite for large |j|
    logs = m.support * math.log(z)
    top = logs.max()
    return float(np.dot(m.weights, np.exp(logs - top)) * math.exp(top))


def poisson_pmf(lam: float, tol: float = 1e-16) -> SignedLatticeMeasure:
    """Po(lam) on a window holding all but ``tol`` of the mass.

    The weights are generated from the mode outwards by the ratio
    p(k+1)/p(k) = lam/(k+1), which never overflows.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    mode = int(math.floor(lam))
    p_mode = math.exp(mode * math.log(lam) - lam - gammaln(mode + 1))
    floor = tol * 1e-3
    down = [p_mode]
    k, p = mode, p_mode
    while k > 0 and p > floor:
        p *= k / lam
        k -= 1
        down.append(p)
    lo = k
    up = []
    k, p = mode, p_mode
    while True:
        p *= lam / (k + 1)
        k += 1
        up.append(p)
        r = lam / (k + 1)
        if r < 1 and p * r / (1 - r) < floor:
            break
        if k - lo > WINDOW_CAP:
            raise DivergenceError("Poisson window exceeded cap")
    w = np.array(down[::-1] + up)
    return SignedLatticeMeasure(lo, w)


@njit(cache=True)
def _panjer(lrates, log_q0, tol, cap):
    # lrates[l-1] = l * lambda_l; q is stored as exp(-log_scale) times its true value
    L = lrates.shape[0]
    absmean = 0.0
    for l in range(L):
        absmean += abs(lrates[l])
    q = np.empty(1024)
    q[0] = 1.0
    log_scale = log_q0
    cum = np.exp(log_scale)
    n = 1
    while n <= cap:
        j = n
        if j >= q.shape[0]:
            q2 = np.empty(2 * q.shape[0])
            q2[:n] = q[:n]
            q = q2
        s = 0.0
        for l in range(1, min(j, L) + 1):
            s += lrates[l - 1] * q[j - l]
        q[j] = s / j
        n += 1
        if abs(q[j]) > 1e250:
            for k in range(n):
                q[k] *= 1e-250
            log_scale += 250.0 * np.log(10.0)
        scale = np.exp(log_scale)
        cum += q[j] * scale
        if j > absmean + L and abs(1.0 - cum) <= tol:
            small = True
            for back in range(L + 1):
                if abs(q[j - back]) * scale > tol:
                    small = False
                    break
            if small:
                return q[:n], log_scale, True
    return q[:n], log_scale, False


def _exp_one_sided(rates: Mapping[int, float], tol: float) -> SignedLatticeMeasure:
    if not rates:
        return SignedLatticeMeasure.delta(0)
    L = max(rates)
    lrates = np.zeros(L)
    for l, v in rates.items():
        lrates[l - 1] = l * v
    total = math.fsum(rates.values())
    q, log_scale, ok = _panjer(lrates, -total, tol, WINDOW_CAP)
    if not ok:
        raise DivergenceError(
            f"compound Poisson recursion did not reach tail tolerance {tol} within {WINDOW_CAP} points"
        )
    w = np.zeros_like(q)
    nz = q != 0
    with np.errstate(under="ignore"):
        w[nz] = np.sign(q[nz]) * np.exp(np.log(np.abs(q[nz])) + log_scale)
    return SignedLatticeMeasure(0, w)


def exp_rates(spec: JumpRateSpec | Mapping[int, float], tol: float = 1e-14) -> SignedLatticeMeasure:
    """The (possibly signed) measure with generating function exp{sum_l lambda_l (z^l - 1)}.

    Positive jump sizes go through the recursion
    q_j = j^{-1} sum_l l lambda_l q_{j-l}, which encodes Q'(z) = Q(z) sum_l l lambda_l z^{l-1}
    and stays valid for signed rates.  Negative jump sizes are handled by
    reflection and the two halves are convolved.
    """
    if not isinstance(spec, JumpRateSpec):
        spec = JumpRateSpec(spec)
    pos = spec.positive().rates
    neg = {-l: v for l, v in spec.negative().rates.items()}
    out = _exp_one_sided(pos, tol)
    if neg:
        out = convolve(out, _exp_one_sided(neg, tol).reflect())
    return out


def compound_poisson(spec: CompoundPoissonSpec, tol: float = 1e-14) -> SignedLatticeMeasure:
    return exp_rates(spec.rates(), tol)


def exp_rates_series(spec: JumpRateSpec | Mapping[int, float], terms: int = 60) -> SignedLatticeMeasure:
    """e^{-Lambda} sum_k nu^{*k}/k!, the direct series; only for small checks."""
    if not isinstance(spec, JumpRateSpec):
        spec = JumpRateSpec(spec)
    if not spec.rates:
        return SignedLatticeMeasure.delta(0)
    nu = SignedLatticeMeasure.from_dict(spec.rates)
    term = SignedLatticeMeasure.delta(0)
    acc = SignedLatticeMeasure.delta(0)
    for k in range(1, terms + 1):
        term = convolve(term, nu).scale(1.0 / k)
        acc = acc + term
    return acc.scale(math.exp(-spec.total_rate))


# ---------------------------------------------------------------------------
# Borovkov-Pfeifer rates


def _tail_power_sum(start: int, l: int) -> tuple[float, float]:
    """sum_{m >= start} m^{-l} for l >= 2 as (value, error bound), via the Hurwitz zeta."""
    val = float(zeta(l, start))
    return val, 8 * np.finfo(float).eps * val


@dataclass(frozen=True)
class RecordsTail:
    """Analytic tail p_i = 1/i for i > n (records in i.i.d. trials)."""

    n: int

    def ratio_power_sum(self, l: int) -> tuple[float, float]:
        """sum_{i>n} (p_i/q_i)^l = sum_{m>=n} m^{-l}, as (value, error)."""
        if l == 1:
            raise ValueError("the l = 1 sum diverges for the records tail")
        return _tail_power_sum(self.n, l)

    def rate_one(self) -> float:
        # sum_{i>n} p_i^2/q_i = sum_{i>n} 1/(i(i-1)) telescopes to 1/n
        return 1.0 / self.n

    def theta_sum(self) -> tuple[float, float]:
        """sum_{i>n} p_i^2 (1-2p_i)^{-2} = sum_{m>=n-1} m^{-2}."""
        return _tail_power_sum(self.n - 1, 2)

    def p(self, i: np.ndarray) -> np.ndarray:
        return 1.0 / np.asarray(i, dtype=float)


def _choose_L(bound: Callable[[int], float], target: float, L_max: int = 4000) -> int:
    L = 1
    while bound(L) >= target:
        L += 1
        if L > L_max:
            raise DivergenceError("jump-size truncation did not reach its target")
    return L


def finite_family_rates(p: Sequence[float], L: int | None = None, target: float | None = None) -> JumpRateSpec:
    """lambda_{1l} = ((-1)^{l+1}/l) sum_i (p_i/q_i)^l, the signed CP rates of a Bernoulli sum."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    if p.size == 0:
        return JumpRateSpec({})
    if np.any(p >= 0.5):
        raise PreconditionError("signed CP representation needs p_i < 1/2")
    r = p / (1 - p)
    lam = float(p.sum())
    rmax = float(r.max())
    # sum_{l>L} l |lambda_{1l}| = sum_{l>L} sum_i r_i^l <= n r^{L+1}/(1-r)
    tail = lambda L: p.size * rmax ** (L + 1) / (1 - rmax)
    if L is None:
        L = _choose_L(tail, (target if target is not None else 1e-12 * lam))
    rates = {}
    for l in range(1, L + 1):
        rates[l] = (-1) ** (l + 1) / l * math.fsum(r ** l)
    return JumpRateSpec(rates, tail(L))


def records_tail_rates(n: int, L: int | None = None, target: float = 1e-14) -> JumpRateSpec:
    """lambda_{2l} for the records tail p_i = 1/i, i > n."""
    tail = RecordsTail(n)
    if n < 2:
        raise PreconditionError("records tail needs n >= 2")
    # sum_{l>L} sum_{m>=n} m^{-l} = sum_{m>=n} m^{-L-1}/(1-1/m) <= (n/(n-1)) (n^{-L-1} + n^{-L}/L)
    bound = lambda L: n / (n - 1.0) * (float(n) ** (-L - 1) + float(n) ** (-L) / L)
    if L is None:
        L = _choose_L(bound, target)
    rates = {1: tail.rate_one()}
    err = 0.0
    for l in range(2, L + 1):
        val, e = tail.ratio_power_sum(l)
        rates[l] = (-1) ** (l + 1) / l * val
        err += e
    return JumpRateSpec(rates, bound(L) + err)


def bp_rates(
    p: Sequence[float],
    tail: RecordsTail | None = None,
    L: int | None = None,
    include_poisson: bool = False,
    infinite: bool = False,
) -> JumpRateSpec:
    """Rates of the Borovkov-Pfeifer measure BP for the probabilities ``p``.

    With ``include_poisson`` the Po(lambda) factor, lambda = sum p, is folded
    into lambda_1, giving the rates of Po(lambda) * BP; then sum_l l lambda_l = lambda.
    Without it, lambda_1 = sum p_i^2/q_i and sum_l l lambda_l = 0.

    ``infinite`` declares that ``p`` is the head of an infinite family; a
    ``tail`` model is then mandatory.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p >= 1.0 / 3.0):
        raise PreconditionError("every p_i must satisfy 0 <= p_i < 1/3")
    if infinite and tail is None:
        raise PreconditionError("an infinite family needs an analytic tail model")
    lam = float(p.sum())
    target = 1e-12 * max(lam, 1e-300)
    head = finite_family_rates(p, L=L, target=target)
    rates = dict(head.rates)
    err = head.truncation_error
    # finite part: l lambda_{1l} sums to lambda; strip the Poisson part from l = 1
    rates[1] = rates.get(1, 0.0) - lam
    if tail is not None:
        t = records_tail_rates(tail.n, L=L, target=target)
        for l, v in t.rates.items():
            rates[l] = rates.get(l, 0.0) + v
        err += t.truncation_error
    if include_poisson:
        rates[1] = rates.get(1, 0.0) + lam
    return JumpRateSpec(rates, err)


def records_probabilities(s: int, n: int) -> np.ndarray:
    return 1.0 / np.arange(s, n + 1, dtype=float)


def rates_from_iterable(pairs: Iterable[tuple[int, float]]) -> JumpRateSpec:
    return JumpRateSpec(dict(pairs))
