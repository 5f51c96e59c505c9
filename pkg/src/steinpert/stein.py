"""Poisson-based perturbation engine on the integer lattice.

The reference operator is the Poisson Stein operator

    (A0 g)(j) = lam' g(j+1) - j g(j),      lam' = lambda * m1,

whose right inverse is available in closed form.  A compound Poisson
operator A1 = A0 + U is inverted through the Neumann series

    B = A0^{-1} P0 sum_k (-1)^k (U A0^{-1} P0)^k,

which converges whenever the contraction constant gamma = ||U A0^{-1} P0|| < 1.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Literal, Mapping

import numpy as np
from numba import njit

from .distances import MetricKind, distance
from .lattice import CompoundPoissonSpec, SignedLatticeMeasure, compound_poisson, poisson_pmf

TailConvention = Literal["zero", "constant"]


class WindowError(ValueError):
    """An operator would have to read a function outside its stored window."""


class NoContractionError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    pass


class NormKind(str, enum.Enum):
    SUP = "sup"
    WASSERSTEIN = "wasserstein_seminorm"
    L1 = "l1"


# ---------------------------------------------------------------------------
# functions on the lattice


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    """Real function on an integer window ``offset .. offset + len(values) - 1``.

    Outside the window the function is 0 (``tail="zero"``) or extends the
    nearest stored value (``tail="constant"``).  Operators never extrapolate
    to the right: they refuse to read above ``hi`` (see :class:`WindowError`).
    """

    offset: int
    values: np.ndarray
    tail: TailConvention = "zero"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("a lattice function needs at least one stored value")
        if self.tail not in ("zero", "constant"):
            raise ValueError(f"unknown tail convention {self.tail!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "offset", int(self.offset))

    @classmethod
    def indicator(cls, k: int, lo: int = 0) -> "LatticeFunction":
        v = np.zeros(k - lo + 2)
        v[k - lo] = 1.0
        return cls(lo, v, "zero")

    @classmethod
    def constant(cls, c: float, lo: int = 0) -> "LatticeFunction":
        return cls(lo, np.array([c]), "constant")

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + len(self.values) - 1

    @property
    def right_tail(self) -> float:
        return float(self.values[-1]) if self.tail == "constant" else 0.0

    @property
    def left_tail(self) -> float:
        return float(self.values[0]) if self.tail == "constant" else 0.0

    def __call__(self, j):
        j = np.asarray(j)
        k = j - self.offset
        inside = (k >= 0) & (k < len(self.values))
        out = np.where(k < 0, self.left_tail, self.right_tail).astype(float)
        out = np.where(inside, self.values[np.clip(k, 0, len(self.values) - 1)], out)
        return out if out.ndim else float(out)

    def on(self, lo: int, hi: int) -> np.ndarray:
        return self(np.arange(lo, hi + 1))

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.values)), abs(self.left_tail), abs(self.right_tail)))

    def w_seminorm(self) -> float:
        """||Delta f||_inf, including the jumps into the tails."""
        v = np.concatenate([[self.left_tail], self.values, [self.right_tail]])
        return float(np.max(np.abs(np.diff(v))))

    def l1_norm(self) -> float:
        if self.tail == "constant" and (self.left_tail != 0.0 or self.right_tail != 0.0):
            return math.inf
        return float(np.sum(np.abs(self.values)))

    def norm(self, kind: NormKind | str) -> float:
        kind = NormKind(kind)
        if kind is NormKind.SUP:
            return self.sup_norm()
        if kind is NormKind.WASSERSTEIN:
            return self.w_seminorm()
        return self.l1_norm()


def measure_expect(m: SignedLatticeMeasure, f: LatticeFunction) -> float:
    """m(f) with f evaluated through its tail convention."""
    if len(m) == 0:
        return 0.0
    return float(np.dot(m.weights, f(m.support)))


# ---------------------------------------------------------------------------
# array kernels on Z_+ (index = lattice site)


@njit(cache=True)
def _tail_ratio(j, lam):
    # R_j = sum_{m>=1} prod_{i=1}^m lam/(j+i) = sum_{k>j} p(k) / p(j) for Po(lam)
    r = 0.0
    term = 1.0
    m = 1
    while True:
        term *= lam / (j + m)
        r += term
        if term < 1e-18 * r and lam / (j + m) < 0.5:
            break
        m += 1
    return r


@njit(cache=True)
def _a0_inverse(f, c, lam, hi):
    # f[k] for k = 0..K, f(k) = c for k > K; f centred under Po(lam).
    # returns g[0..hi] with g(0) = 0 and lam g(j+1) - j g(j) = f(j).
    K = f.shape[0] - 1
    jstar = max(1, int(math.ceil(lam)))
    start = max(K, jstar)
    N = max(hi, start + 1) + 1
    g = np.zeros(N)
    # forward recursion below the mean: error factor j/lam < 1
    for j in range(0, min(jstar, N - 1)):
        fj = f[j] if j <= K else c
        g[j + 1] = (fj + j * g[j]) / lam
    if N - 1 <= jstar:
        return g[: hi + 1]
    # for j >= K the centred f is constant, so g(j+1) = -c R_j / lam exactly
    R = np.empty(N)
    R[N - 1] = _tail_ratio(N - 1, lam)
    for j in range(N - 2, start - 1, -1):
        R[j] = lam / (j + 1) * (1.0 + R[j + 1])
    for j in range(start, N - 1):
        g[j + 1] = -c * R[j] / lam
    # downward recursion between the mean and K: error factor lam/j < 1
    for j in range(start, jstar, -1):
        fj = f[j] if j <= K else c
        g[j] = (lam * g[j + 1] - fj) / j
    return g[: hi + 1]


def _read(g: np.ndarray, idx: np.ndarray) -> np.ndarray:
    # g indexed by site on Z_+, zero on negative sites (G_0); caller guarantees idx <= len-1
    out = np.zeros(idx.shape)
    ok = idx >= 0
    out[ok] = g[idx[ok]]
    return out


def _apply_u(g: np.ndarray, spec: CompoundPoissonSpec, hi: int, lo: int = 0) -> np.ndarray:
    j = np.arange(lo, hi + 1)
    g1 = _read(g, j + 1)
    out = np.zeros(j.shape)
    for l, m in spec.mu.items():
        out += l * m * (_read(g, j + l) - g1)
    return spec.lam * out


def _apply_a0(g: np.ndarray, lam: float, hi: int, lo: int = 0) -> np.ndarray:
    j = np.arange(lo, hi + 1)
    return lam * _read(g, j + 1) - j * _read(g, j)


def _apply_a1(g: np.ndarray, spec: CompoundPoissonSpec, hi: int, lo: int = 0) -> np.ndarray:
    j = np.arange(lo, hi + 1)
    out = -j * _read(g, j)
    for l, m in spec.mu.items():
        out += spec.lam * l * m * _read(g, j + l)
    return out


# ---------------------------------------------------------------------------
# public operators


def p0_project(f: LatticeFunction, pi0: SignedLatticeMeasure) -> LatticeFunction:
    """P0 f = (f - pi0(f)) on Z_+, zero on the negative integers."""
    mean = measure_expect(pi0, f)
    hi = max(f.hi + 1, pi0.hi, 0)
    # the stored zero at -1 makes the constant extension vanish on the negatives
    vals = np.concatenate([[0.0], f.on(0, hi) - mean])
    return LatticeFunction(-1, vals, "constant")


def a0_solve(f: LatticeFunction, lam: float, hi: int | None = None) -> LatticeFunction:
    """Right inverse of the Po(lam) Stein operator for a centred f on Z_+.

    Returns g on ``0..hi`` with g(0) = 0 and lam g(j+1) - j g(j) = f(j) for
    0 <= j < hi.  The forward recursion is used below the mean, the exact
    Poisson-tail form above it.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if f.lo < 0 and np.any(f.values[: -f.lo] != 0.0):
        raise ValueError("a0_solve acts on functions supported by Z_+")
    if f.lo > 0 and f.tail == "constant" and f.left_tail != 0.0:
        raise ValueError("left constant extension below the window is ambiguous on Z_+")
    K = max(f.hi, 0)
    vals = f.on(0, K)
    c = f.right_tail
    pi0 = poisson_pmf(lam)
    centre = float(np.dot(pi0.weights, f(pi0.support)))
    scale = max(1.0, float(np.max(np.abs(vals))), abs(c))
    if abs(centre) > 1e-9 * scale:
        raise ValueError(f"f is not centred under Po({lam}): pi0(f) = {centre:.3e}")
    if hi is None:
        hi = max(K + 1, int(math.ceil(lam + 10 * math.sqrt(lam) + 10)))
    if hi > 2_000_000:
        raise WindowError("requested window too large to solve")
    g = _a0_inverse(vals, c, float(lam), int(hi))
    return LatticeFunction(0, g, "zero")


def _max_read(kind: str, spec: CompoundPoissonSpec) -> int:
    if kind == "a0":
        return 1
    return max(1, spec.max_jump)


def apply_operator(
    kind: Literal["a0", "a1", "u"],
    g: LatticeFunction,
    spec: CompoundPoissonSpec,
    window: tuple[int, int] | None = None,
) -> LatticeFunction:
    """Pointwise A0, A1 or U applied to g, with lam' = spec.lam * spec.m1 for A0.

    ``g`` is taken to vanish on the negative integers.  Without ``window`` the
    largest window whose reads stay inside g's stored values is used.
    """
    if kind not in ("a0", "a1", "u"):
        raise ValueError(f"unknown operator {kind!r}")
    if g.lo > 0:
        g = LatticeFunction(0, g.on(0, g.hi), g.tail)
    top = _max_read(kind, spec)
    lo_default = min(0, spec.min_jump) if kind != "a0" and spec.two_sided else 0
    if window is None:
        window = (lo_default, g.hi - top)
    lo, hi = window
    if hi + top > g.hi and g.tail != "constant":
        raise WindowError(
            f"operator {kind} on window {window} reads up to {hi + top}, beyond the stored window ending at {g.hi}"
        )
    arr = g.on(0, max(g.hi, hi + top))
    if kind == "a0":
        out = _apply_a0(arr, spec.poisson_mean, hi, lo)
    elif kind == "u":
        out = _apply_u(arr, spec, hi, lo)
    else:
        out = _apply_a1(arr, spec, hi, lo)
    return LatticeFunction(lo, out, "zero")


# ---------------------------------------------------------------------------
# contraction certificates


def gamma_upper(spec: CompoundPoissonSpec, norm: NormKind | str = NormKind.SUP) -> float:
    """Certified bound 2 m2'/m1 on ||U A0^{-1} P0|| (same value for all three norms)."""
    NormKind(norm)
    return 2.0 * spec.m2_abs / spec.m1


def magic_factor(lam: float, norm: NormKind | str) -> float:
    """Constant A with ||Delta A0^{-1} P0 f|| <= A ||f|| for the given norm on F."""
    norm = NormKind(norm)
    if norm is NormKind.WASSERSTEIN:
        return 1.15 / math.sqrt(lam)
    return 2.0 / lam


@dataclass(frozen=True)
class PerturbationReport:
    gamma_upper: float
    gamma_empirical: float
    contraction_ok: bool
    A: float
    norm: NormKind

    def to_json_obj(self) -> dict:
        d = asdict(self)
        d["norm"] = self.norm.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())


class _Engine:
    """Shared window bookkeeping for the Neumann iteration on Z_+."""

    def __init__(self, spec: CompoundPoissonSpec, extra_hi: int = 0):
        self.spec = spec
        self.lam = spec.poisson_mean
        self.pi0 = poisson_pmf(self.lam)
        L = max(1, spec.max_jump)
        self.L = L
        self.J = max(extra_hi, int(math.ceil(6 * self.lam + 12 * math.sqrt(self.lam)))) + 40 * L + 200
        # sites near J see the constant-extension approximation; keep them out of checks
        self.valid = self.J - 20 * L - 100
        self.w0 = self.pi0.on(0, self.J)

    def centre(self, f: np.ndarray) -> np.ndarray:
        return f - np.dot(self.w0, f)

    def solve(self, fc: np.ndarray) -> np.ndarray:
        return _a0_inverse(fc, float(fc[-1]), self.lam, self.J + self.L + 1)

    def T(self, f: np.ndarray) -> np.ndarray:
        """U A0^{-1} P0 f on 0..J."""
        g = self.solve(self.centre(f))
        return _apply_u(g, self.spec, self.J)

    def embed(self, f: LatticeFunction) -> np.ndarray:
        return f.on(0, self.J)


def _array_norm(v: np.ndarray, norm: NormKind, upto: int) -> float:
    v = v[: upto + 1]
    if norm is NormKind.SUP:
        return float(np.max(np.abs(v)))
    if norm is NormKind.WASSERSTEIN:
        return float(np.max(np.abs(np.diff(v))))
    return float(np.sum(np.abs(v)))


def _probe(rng: np.random.Generator, K: int, norm: NormKind, i: int) -> np.ndarray:
    # alternate between uniform values, random signs and random indicator sets
    style = i % 3
    if norm is NormKind.WASSERSTEIN:
        if style == 0:
            steps = rng.uniform(-1, 1, K)
        elif style == 1:
            steps = rng.choice([-1.0, 1.0], K)
        else:
            steps = np.where(rng.random(K) < 0.5, 0.0, rng.choice([-1.0, 1.0], K))
        return np.concatenate([[0.0], np.cumsum(steps)])
    if style == 0:
        return rng.uniform(-1, 1, K + 1)
    if style == 1:
        return rng.choice([-1.0, 1.0], K + 1)
    return (rng.random(K + 1) < rng.uniform(0.1, 0.9)).astype(float)


def gamma_empirical(
    spec: CompoundPoissonSpec, norm: NormKind | str = NormKind.SUP, probes: int = 200, seed: int = 0
) -> float:
    """Largest observed ||U A0^{-1} P0 f|| / ||f|| over seeded random probes.

    A lower estimate of the operator norm; the Wasserstein variant applies
    the re-centred map P0 U A0^{-1} to centred probes.
    """
    norm = NormKind(norm)
    if probes < 1:
        raise ValueError("need at least one probe")
    eng = _Engine(spec)
    if spec.m2_abs == 0.0:
        return 0.0
    lam = eng.lam
    K = int(math.ceil(lam + 6 * math.sqrt(lam) + 10))
    rng = np.random.default_rng(seed)
    best = 0.0
    for i in range(probes):
        raw = _probe(rng, K, norm, i)
        f = np.zeros(eng.J + 1)
        f[: K + 1] = raw
        if norm is NormKind.WASSERSTEIN:
            f[K + 1:] = raw[-1]
            f = eng.centre(f)
        den = _array_norm(f, norm, eng.J)
        if den == 0.0:
            continue
        out = eng.T(f)
        if norm is NormKind.WASSERSTEIN:
            out = eng.centre(out)
        best = max(best, _array_norm(out, norm, eng.valid) / den)
    return best


def perturbation_report(
    spec: CompoundPoissonSpec, norm: NormKind | str = NormKind.SUP, probes: int = 200, seed: int = 0
) -> PerturbationReport:
    norm = NormKind(norm)
    up = gamma_upper(spec, norm)
    emp = gamma_empirical(spec, norm, probes, seed)
    return PerturbationReport(up, emp, up < 1.0, magic_factor(spec.poisson_mean, norm), norm)


# ---------------------------------------------------------------------------
# Neumann series


@dataclass(frozen=True, eq=False)
class NeumannSolution:
    """Bf together with the pieces needed to verify it."""

    g: LatticeFunction  # Bf on 0..valid
    ubf: LatticeFunction  # U B f on 0..valid
    terms: int
    gamma: float
    last_term_norm: float
    spec: CompoundPoissonSpec = field(repr=False)
    pi0: SignedLatticeMeasure = field(repr=False)

    def constant_c(self, f: LatticeFunction, pi1: SignedLatticeMeasure) -> float:
        """c(f) = pi1(f) - pi0(f) + pi0(U B f)."""
        return measure_expect(pi1, f) - measure_expect(self.pi0, f) + measure_expect(self.pi0, self.ubf)


def neumann_solve(
    f: LatticeFunction,
    spec: CompoundPoissonSpec,
    tol: float = 1e-10,
    max_terms: int = 2000,
    norm: NormKind | str = NormKind.SUP,
) -> NeumannSolution:
    """Partial sums of the Neumann series for B f.

    Stops once the current term has norm at most tol * (1 - gamma), with
    gamma the certified bound from :func:`gamma_upper`.
    """
    norm = NormKind(norm)
    gamma = gamma_upper(spec, norm)
    if gamma >= 1.0:
        raise NoContractionError(f"gamma = {gamma:.6g} >= 1; the Neumann series is not certified")
    eng = _Engine(spec, extra_hi=max(f.hi, 0) + 1)
    term = eng.embed(f)
    acc = np.zeros_like(term)
    target = tol * (1.0 - gamma)
    k = 0
    last = math.inf
    while True:
        acc += term if k % 2 == 0 else -term
        k += 1
        term = eng.T(term)
        last = _array_norm(eng.centre(term), norm, eng.valid)
        if last <= target:
            break
        if k >= max_terms:
            raise NonConvergenceError(f"Neumann series not converged after {max_terms} terms (last {last:.3e})")
    g = eng.solve(eng.centre(acc))
    ubf = _apply_u(g, spec, eng.valid)
    return NeumannSolution(
        g=LatticeFunction(0, g[: eng.valid + spec.max_jump + 1], "zero"),
        ubf=LatticeFunction(0, ubf, "zero"),
        terms=k,
        gamma=gamma,
        last_term_norm=last,
        spec=spec,
        pi0=eng.pi0,
    )


def neumann_b(
    f: LatticeFunction,
    spec: CompoundPoissonSpec,
    tol: float = 1e-10,
    max_terms: int = 2000,
    norm: NormKind | str = NormKind.SUP,
) -> LatticeFunction:
    return neumann_solve(f, spec, tol, max_terms, norm).g


def neumann_residual(sol: NeumannSolution, f: LatticeFunction, pi1: SignedLatticeMeasure | None = None) -> np.ndarray:
    """(A1 B f)(j) - f(j) + pi1(f) for j = 0..valid."""
    spec = sol.spec
    if pi1 is None:
        pi1 = compound_poisson(spec)
    hi = sol.ubf.hi
    a1 = _apply_a1(sol.g.values, spec, hi)
    return a1 - f.on(0, hi) + measure_expect(pi1, f)


# ---------------------------------------------------------------------------
# magic factors


@dataclass(frozen=True)
class SteinFactorReport:
    norm: NormKind
    lam: float
    f_norm: float
    achieved: Mapping[str, float]
    bounds: Mapping[str, float]

    @property
    def passed(self) -> bool:
        return all(self.achieved[k] <= self.bounds[k] * (1 + 1e-9) + 1e-12 for k in self.bounds)


def stein_factor_check(lam: float, f: LatticeFunction, norm: NormKind | str) -> SteinFactorReport:
    """Evaluate the Poisson magic-factor inequalities for g = A0^{-1} P0 f."""
    norm = NormKind(norm)
    pi0 = poisson_pmf(lam)
    pf = p0_project(f, pi0)
    hi = max(pf.hi + 2, int(math.ceil(lam + 12 * math.sqrt(lam) + 30)))
    g = a0_solve(pf, lam, hi=hi + 1).values
    # g(0) = 0 is a convention, so differences start at j = 1; U only reads
    # those.  Beyond f's window g is monotone and tends to 0.
    dg = np.diff(g[1:])
    fn = f.norm(norm)
    if norm is NormKind.SUP:
        achieved = {"delta_g_sup": float(np.max(np.abs(dg)))}
        bounds = {"delta_g_sup": 2.0 / lam * fn}
    elif norm is NormKind.WASSERSTEIN:
        achieved = {
            "g_sup": float(np.max(np.abs(g))),
            "delta_g_sup": float(np.max(np.abs(dg))),
            "delta2_g_sup": float(np.max(np.abs(np.diff(dg)))),
        }
        bounds = {"g_sup": fn, "delta_g_sup": 1.15 / math.sqrt(lam) * fn, "delta2_g_sup": 2.0 / lam * fn}
    else:
        tail = abs(g[-1])
        achieved = {"g_sup": float(np.max(np.abs(g))), "delta_g_l1": float(np.sum(np.abs(dg))) + tail}
        bounds = {"g_sup": fn / lam, "delta_g_l1": 2.0 / lam * fn}
    return SteinFactorReport(norm, lam, fn, achieved, bounds)


# ---------------------------------------------------------------------------
# compound Poisson base: certificate only


@dataclass(frozen=True, eq=False)
class CpToCpPerturbation:
    """CP(lam1, mu1) viewed as a perturbation of CP(lam0, mu0) on Z_+."""

    spec0: CompoundPoissonSpec
    spec1: CompoundPoissonSpec
    mean_tol: float = 1e-10

    def __post_init__(self):
        s0, s1 = self.spec0, self.spec1
        if not (s0.is_probability_spec() and s1.is_probability_spec()):
            raise ValueError("both compound Poisson laws must live on Z_+ with nonnegative mu")
        top = max(s0.mu)
        for j in range(1, top + 1):
            if j * s0.mu.get(j, 0.0) < (j + 1) * s0.mu.get(j + 1, 0.0) - 1e-15:
                raise ValueError(f"base jump law violates j mu_j >= (j+1) mu_(j+1) at j = {j}")
        if not self.delta > 0:
            raise ValueError(f"delta = mu_1 - 2 mu_2 must be positive, got {self.delta}")
        mean0 = s0.lam * s0.m1
        mean1 = s1.lam * s1.m1
        if abs(mean0 - mean1) > self.mean_tol * max(1.0, mean0):
            raise ValueError(f"perturbation must preserve the mean ({mean0} vs {mean1})")
        if self.delta * s0.lam <= 0.25:
            warnings.warn(
                f"delta * lambda0 = {self.delta * s0.lam:.4g} <= 1/4: the constant c1 is negative here",
                RuntimeWarning,
                stacklevel=2,
            )

    @property
    def delta(self) -> float:
        mu = self.spec0.mu
        return mu.get(1, 0.0) - 2.0 * mu.get(2, 0.0)

    @property
    def dl(self) -> float:
        return self.delta * self.spec0.lam

    @property
    def c1(self) -> float:
        return 4.0 - 2.0 / math.sqrt(self.dl)

    @property
    def c2(self) -> float:
        return 0.5 / self.dl + 2.0 * max(math.log(2.0 * self.dl), 0.0)

    def _diff(self) -> dict[int, float]:
        s0, s1 = self.spec0, self.spec1
        ls = sorted(set(s0.mu) | set(s1.mu))
        return {l: s1.lam * s1.mu.get(l, 0.0) - s0.lam * s0.mu.get(l, 0.0) for l in ls}

    @property
    def E(self) -> float:
        return 0.5 * math.fsum(l * abs(d) for l, d in self._diff().items())

    @property
    def rho(self) -> SignedLatticeMeasure | None:
        E = self.E
        if E == 0.0:
            return None
        return SignedLatticeMeasure.from_dict({l: l * max(d, 0.0) / E for l, d in self._diff().items()})

    @property
    def sigma(self) -> SignedLatticeMeasure | None:
        E = self.E
        if E == 0.0:
            return None
        return SignedLatticeMeasure.from_dict({l: l * max(-d, 0.0) / E for l, d in self._diff().items()})

    @property
    def theta(self) -> float:
        E = self.E
        if E == 0.0:
            return 0.0
        return E * distance(self.rho, self.sigma, MetricKind.WASSERSTEIN)

    @property
    def gamma(self) -> float:
        return self.c2 * self.theta / self.dl


def gamma_cp_to_cp(p: CpToCpPerturbation) -> float:
    return p.gamma


# ---------------------------------------------------------------------------
# bound combinators


def _check_gamma(gamma: float) -> None:
    if not 0.0 <= gamma < 1.0:
        raise NoContractionError(f"need 0 <= gamma < 1, got {gamma}")


def bound_very_useful(
    A: float,
    gamma: float,
    eps: float,
    pi1_outside: float = 0.0,
    pi_outside: float = 0.0,
    kappa1: float = 0.0,
    kappa: float = 0.0,
    F: float = 1.0,
) -> float:
    """d(pi, pi1) <= (A eps + eps') / (1 - gamma), with
    eps' = min{2 (|pi1|(X0^c) + pi(X0^c)) F, kappa(pi1, X0^c) + kappa(pi, X0^c)}."""
    _check_gamma(gamma)
    eps_prime = min(2.0 * (pi1_outside + pi_outside) * F, kappa1 + kappa)
    return (A * eps + eps_prime) / (1.0 - gamma)


def bound_k_distance(
    H: float, eps1: float, eps2: float, A: float, gamma: float, gammaH: float, eps_pi: float = 0.0
) -> float:
    """H {eps1 + gamma_H A eps2 / (1 - gamma) + eps(pi, pi1) / (1 - gamma)}."""
    _check_gamma(gamma)
    if not H > 0:
        raise ValueError("H must be positive")
    return H * (eps1 + gammaH * A * eps2 / (1.0 - gamma) + eps_pi / (1.0 - gamma))


def cf_bounds(pi1_outside: float, kappa1: float, gamma: float, f_sup: float, f_norm: float) -> tuple[float, float]:
    """The two bounds on |c(f)|: 2|pi1|(X0^c) ||f||_inf / (1-gamma) and kappa1 ||f|| / (1-gamma)."""
    _check_gamma(gamma)
    return 2.0 * pi1_outside * f_sup / (1.0 - gamma), kappa1 * f_norm / (1.0 - gamma)


def useful_bound(
    pi_af: float, gamma: float, pi1_outside: float, pi_outside: float, kappa1: float, kappa: float, f_sup: float, f_norm: float
) -> float:
    """|pi(f) - pi1(f)| <= |pi(A1 B f)| + the smaller of the two leakage corrections."""
    _check_gamma(gamma)
    a = 2.0 * (pi1_outside + pi_outside) * f_sup
    b = (kappa1 + kappa) * f_norm
    return abs(pi_af) + min(a, b) / (1.0 - gamma)


def random_test_function(rng: np.random.Generator, lam: float, norm: NormKind | str, i: int = 0) -> LatticeFunction:
    """Seeded probe on Z_+ spanning the bulk of Po(lam); the style cycles with ``i``."""
    norm = NormKind(norm)
    K = int(math.ceil(lam + 6 * math.sqrt(lam) + 10))
    vals = _probe(rng, K, norm, i)
    return LatticeFunction(0, vals, "constant" if norm is NormKind.WASSERSTEIN else "zero")


@dataclass(frozen=True)
class SweepResult:
    lam: float
    norm: NormKind
    quantity: str
    probes: int
    worst_ratio: float
    violations: int


def stein_factor_sweep(
    lam: float, norm: NormKind | str, probes: int = 1000, seed: int = 0, bound_scale: float = 1.0
) -> list[SweepResult]:
    """Run :func:`stein_factor_check` on seeded probes; one result per inequality."""
    norm = NormKind(norm)
    rng = np.random.default_rng([seed, int(round(lam * 1e6)), list(NormKind).index(norm)])
    worst: dict[str, float] = {}
    bad: dict[str, int] = {}
    for i in range(probes):
        rep = stein_factor_check(lam, random_test_function(rng, lam, norm, i), norm)
        for k, b in rep.bounds.items():
            if b == 0.0:
                continue
            r = rep.achieved[k] / b
            worst[k] = max(worst.get(k, 0.0), r)
            if rep.achieved[k] > b * bound_scale * (1 + 1e-9) + 1e-12:
                bad[k] = bad.get(k, 0) + 1
    return [SweepResult(lam, norm, k, probes, worst[k], bad.get(k, 0)) for k in sorted(worst)]
