"""Stein equation for centred normal laws, the t-interpolation family and
the contraction constants of the continuous perturbation examples.

The equation solved throughout is

    y'(x) - a x y(x) = h(x) - hbar,      a = 1 - psi,  hbar = E h(N(0, 1/a)).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import norm

QUAD_TOL = 1e-11
TAIL_SLACK = 1e-10
GL_NODES = 10
DEFAULT_STEP = 1.0 / 512

_gl_x, _gl_w = np.polynomial.legendre.leggauss(GL_NODES)


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True, eq=False)
class ContinuousTestFunction:
    """A test function h with the metadata the bounds need.

    ``kinks`` lists points where h or h' fails to be smooth; they become
    panel boundaries and are kept away from finite-difference stencils.
    ``const`` is z for an indicator, the Lipschitz constant L, or the sup bound B.
    """

    kind: Literal["indicator", "lipschitz", "bounded"]
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    const: float
    deriv: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    kinks: tuple[float, ...] = ()
    label: str = ""

    @classmethod
    def indicator(cls, z: float) -> "ContinuousTestFunction":
        return cls(
            "indicator",
            lambda x: (np.asarray(x) <= z).astype(float),
            float(z),
            lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            (float(z),),
            f"indicator(z={z:g})",
        )

    @classmethod
    def lipschitz(cls, func, L: float, deriv=None, kinks: Sequence[float] = (), label: str = "") -> "ContinuousTestFunction":
        if not L >= 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        return cls("lipschitz", func, float(L), deriv, tuple(sorted(kinks)), label)

    @classmethod
    def bounded(cls, func, B: float, deriv=None, kinks: Sequence[float] = (), label: str = "") -> "ContinuousTestFunction":
        if not B >= 0:
            raise ValueError("sup bound must be nonnegative")
        return cls("bounded", func, float(B), deriv, tuple(sorted(kinks)), label)

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.deriv is not None:
            return np.asarray(self.deriv(x), dtype=float)
        e = 1e-5
        return (self(x - 2 * e) - 8 * self(x - e) + 8 * self(x + e) - self(x + 2 * e)) / (12 * e)


def random_lipschitz_probe(rng: np.random.Generator) -> ContinuousTestFunction:
    """Either a clipped ramp (exact constant, two kinks) or a sum of sines."""
    if rng.random() < 0.5:
        c = rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0])
        lo, hi = np.sort(rng.uniform(-2.5, 2.5, 2))
        f = lambda x, c=c, lo=lo, hi=hi: c * np.clip(x, lo, hi)
        d = lambda x, c=c, lo=lo, hi=hi: np.where((x > lo) & (x < hi), c, 0.0)
        return ContinuousTestFunction.lipschitz(f, abs(c), d, (lo, hi), f"ramp(c={c:.3g})")
    a = rng.uniform(-1, 1, 3)
    b = rng.uniform(0.2, 2.0, 3)
    ph = rng.uniform(0, 2 * np.pi, 3)
    f = lambda x, a=a, b=b, ph=ph: np.sum(a[:, None] * np.sin(b[:, None] * np.atleast_1d(x)[None, :] + ph[:, None]), axis=0).reshape(np.shape(x))
    d = lambda x, a=a, b=b, ph=ph: np.sum((a * b)[:, None] * np.cos(b[:, None] * np.atleast_1d(x)[None, :] + ph[:, None]), axis=0).reshape(np.shape(x))
    return ContinuousTestFunction.lipschitz(f, float(np.sum(np.abs(a * b))), d, (), "sines")


def random_bounded_probe(rng: np.random.Generator) -> ContinuousTestFunction:
    """Either a random step function or a smooth sigmoid mixture."""
    if rng.random() < 0.5:
        k = int(rng.integers(1, 5))
        cuts = np.sort(rng.uniform(-3, 3, k))
        vals = rng.uniform(-1, 1, k + 1)
        f = lambda x, cuts=cuts, vals=vals: vals[np.searchsorted(cuts, x, side="left")]
        return ContinuousTestFunction.bounded(f, float(np.max(np.abs(vals))), lambda x: np.zeros_like(x), tuple(cuts), "steps")
    a = rng.uniform(-1, 1, 2)
    c = rng.uniform(-2, 2, 2)
    s = rng.uniform(0.5, 4, 2)
    f = lambda x, a=a, c=c, s=s: a[0] * np.tanh(s[0] * (x - c[0])) + a[1] * np.tanh(s[1] * (x - c[1]))
    d = lambda x, a=a, c=c, s=s: a[0] * s[0] / np.cosh(s[0] * (x - c[0])) ** 2 + a[1] * s[1] / np.cosh(s[1] * (x - c[1])) ** 2
    return ContinuousTestFunction.bounded(f, float(np.sum(np.abs(a))), d, (), "tanh")


# ---------------------------------------------------------------------------
# problem description


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    step: float = DEFAULT_STEP

    def points(self) -> np.ndarray:
        k = int(round((self.hi - self.lo) / self.step))
        return self.lo + self.step * np.arange(k + 1)


def default_grid(psi: float, step: float = DEFAULT_STEP) -> Grid:
    r = 8.0 / math.sqrt(1.0 - psi)
    r = math.ceil(r / step) * step
    return Grid(-r, r, step)


@dataclass(frozen=True)
class ContinuousProblem:
    psi: float = 0.0
    m: float = 1.0
    alpha: float = 0.0
    z: float = 0.0
    grid: Grid | None = None

    def __post_init__(self):
        if not 0.0 <= self.psi <= 1.0:
            raise ValueError("psi must lie in [0, 1]")
        if not self.m > 0:
            raise ValueError("m must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.grid is not None and self.psi < 1:
            need = 8.0 / math.sqrt(1 - self.psi)
            if self.grid.lo > -need + 1e-12 or self.grid.hi < need - 1e-12:
                raise ValueError(f"grid must cover [-{need:.4g}, {need:.4g}]")


def _check_psi(psi: float) -> float:
    if not 0.0 <= psi < 1.0:
        raise ValueError("psi must satisfy 0 <= psi < 1")
    return 1.0 - psi


def _quad(f, a, b, **kw) -> float:
    # the error estimate is judged below, so scipy's roundoff warning is redundant
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(
            f, a, b, epsabs=kw.pop("epsabs", 1e-13), epsrel=kw.pop("epsrel", 1e-12), limit=kw.pop("limit", 500), **kw
        )
    if not np.isfinite(val) or err > 1e-9:
        raise QuadratureError(f"quadrature on [{a}, {b}] did not converge (error estimate {err:.2e})")
    return float(val)


def _quad_pieces(f, a, b, points: Sequence[float]) -> float:
    cuts = [a] + [p for p in sorted(points) if a < p < b] + [b]
    return math.fsum(_quad(f, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]))


def hbar(h: ContinuousTestFunction, psi: float) -> float:
    """E h(N) for N ~ N(0, 1/(1 - psi))."""
    a = _check_psi(psi)
    if h.kind == "indicator":
        return float(norm.cdf(h.const * math.sqrt(a)))
    dens = lambda x: float(h(x)) * math.exp(-0.5 * a * x * x) * math.sqrt(a / (2 * math.pi))
    return _quad_pieces(dens, -math.inf, math.inf, h.kinks)


# ---------------------------------------------------------------------------
# solving


@dataclass(frozen=True, eq=False)
class NormalSolution:
    psi: float
    h: ContinuousTestFunction = field(repr=False)
    hbar: float
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    yp: np.ndarray = field(repr=False)
    ypp: np.ndarray = field(repr=False)

    @property
    def a(self) -> float:
        return 1.0 - self.psi

    def smooth_mask(self, width: int = 3) -> np.ndarray:
        """Grid points at least ``width`` steps from every kink of h."""
        step = self.x[1] - self.x[0]
        ok = np.ones(self.x.shape, bool)
        for k in self.h.kinks:
            ok &= np.abs(self.x - k) > width * step * (1 + 1e-9)
        return ok

    def ode_residual(self) -> float:
        """max |Dy - a x y - h + hbar| with D a fourth-order central difference,
        over grid points whose stencil avoids the kinks of h."""
        x, y = self.x, self.y
        step = x[1] - x[0]
        d = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * step)
        xc = x[2:-2]
        r = d - self.a * xc * y[2:-2] - self.h(xc) + self.hbar
        mask = self.smooth_mask(3)[2:-2]
        return float(np.max(np.abs(r[mask]))) if mask.any() else 0.0


def _tail_value(h, hb, a, x0, side) -> float:
    # left: int_{-inf}^{x0} exp(a (x0^2 - t^2)/2) (h(t) - hb) dt
    # right: -int_{x0}^{inf} exp(a (x0^2 - t^2)/2) (h(t) - hb) dt
    kern = lambda t: math.exp(0.5 * a * (x0 - t) * (x0 + t)) * (float(h(t)) - hb)
    kinks = [k for k in h.kinks if (k < x0 if side == "left" else k > x0)]
    if side == "left":
        return _quad_pieces(kern, -math.inf, x0, kinks)
    return -_quad_pieces(kern, x0, math.inf, kinks)


def _panel_integrals(h, hb, a, nodes, anchor) -> np.ndarray:
    """int over each panel [nodes[k], nodes[k+1]] of exp(a (anchor_k^2 - t^2)/2)(h(t) - hb) dt."""
    lo, hi = nodes[:-1], nodes[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t = mid[:, None] + half[:, None] * _gl_x[None, :]
    ak = anchor[:, None]
    vals = np.exp(0.5 * a * (ak - t) * (ak + t)) * (h(t.ravel()).reshape(t.shape) - hb)
    return half * (vals @ _gl_w)


def _consistent_hbar(h, a, nodes) -> float:
    # Gaussian mean of h from the same panels, so both sweeps meet at zero
    lo, hi = nodes[:-1], nodes[1:]
    half = 0.5 * (hi - lo)
    t = 0.5 * (hi + lo)[:, None] + half[:, None] * _gl_x[None, :]
    w = np.exp(-0.5 * a * t * t)
    num = math.fsum(half * ((w * h(t.ravel()).reshape(t.shape)) @ _gl_w))
    den = math.fsum(half * (w @ _gl_w))
    g = lambda s: math.exp(-0.5 * a * s * s)
    left_w = _quad(g, -math.inf, nodes[0])
    right_w = _quad(g, nodes[-1], math.inf)
    left_n = _quad_pieces(lambda s: g(s) * float(h(s)), -math.inf, nodes[0], h.kinks)
    right_n = _quad_pieces(lambda s: g(s) * float(h(s)), nodes[-1], math.inf, h.kinks)
    return (num + left_n + right_n) / (den + left_w + right_w)


def stein_solve_normal(h: ContinuousTestFunction, psi: float, grid: Grid | None = None) -> NormalSolution:
    """Solve y' - (1-psi) x y = h - hbar on a grid via the explicit integral form.

    Sweeps run from each end toward zero, so every propagation factor
    exp(a (x_{k+1}^2 - x_k^2)/2) is at most one.
    """
    a = _check_psi(psi)
    grid = grid or default_grid(psi)
    x = grid.points()
    kinks = [k for k in h.kinks if grid.lo < k < grid.hi]
    nodes = np.union1d(x, kinks)
    on_grid = np.isin(nodes, x)
    hb = _consistent_hbar(h, a, nodes)
    y = np.empty(nodes.size)
    neg = np.nonzero(nodes <= 0)[0]
    pos = np.nonzero(nodes > 0)[0]
    if neg.size:
        i_end = neg[-1]
        y[0] = _tail_value(h, hb, a, nodes[0], "left")
        seg = nodes[: i_end + 1]
        inc = _panel_integrals(h, hb, a, seg, seg[1:])
        fac = np.exp(0.5 * a * (seg[1:] - seg[:-1]) * (seg[1:] + seg[:-1]))
        for k in range(i_end):
            y[k + 1] = fac[k] * y[k] + inc[k]
    if pos.size:
        i0 = pos[0]
        y[-1] = _tail_value(h, hb, a, nodes[-1], "right")
        seg = nodes[i0:]
        inc = _panel_integrals(h, hb, a, seg, seg[:-1])
        fac = np.exp(0.5 * a * (seg[:-1] - seg[1:]) * (seg[:-1] + seg[1:]))
        for k in range(seg.size - 2, -1, -1):
            y[i0 + k] = fac[k] * y[i0 + k + 1] - inc[k]
    y = y[on_grid]
    hx = h(x)
    yp = a * x * y + hx - hb
    ypp = a * y + a * x * yp + h.derivative(x)
    return NormalSolution(psi, h, hb, x, y, yp, ypp)


def solve_by_scaling(h: ContinuousTestFunction, psi: float, grid: Grid | None = None) -> NormalSolution:
    """Same solution via x = w / sqrt(1 - psi): y(x) = u(sqrt(a) x) / sqrt(a),
    with u the psi = 0 solution for w -> h(w / sqrt(a))."""
    a = _check_psi(psi)
    r = math.sqrt(a)
    scaled = ContinuousTestFunction(
        h.kind,
        lambda w: h(np.asarray(w) / r),
        h.const,
        (lambda w: h.derivative(np.asarray(w) / r) / r),
        tuple(k * r for k in h.kinks),
        h.label,
    )
    grid = grid or default_grid(psi)
    w_grid = Grid(grid.lo * r, grid.hi * r, grid.step * r)
    u = stein_solve_normal(scaled, 0.0, w_grid)
    x = u.x / r
    y = u.y / r
    yp = u.yp
    ypp = u.ypp * r
    return NormalSolution(psi, h, u.hbar, x, y, yp, ypp)


# ---------------------------------------------------------------------------
# bound verification


@dataclass(frozen=True)
class BoundLine:
    line: str
    estimate: float
    bound: float
    slack: float

    @property
    def holds(self) -> bool:
        return self.estimate <= self.bound * (1 + 1e-6) + self.slack


@dataclass(frozen=True)
class NormalBoundReport:
    psi: float
    label: str
    kind: str
    lines: tuple[BoundLine, ...]
    ode_residual: float

    @property
    def passed(self) -> bool:
        return all(l.holds for l in self.lines)


def _sup(v: np.ndarray) -> float:
    return float(np.max(np.abs(v)))


def verify_normal_bounds(h: ContinuousTestFunction, psi: float, grid: Grid | None = None) -> NormalBoundReport:
    """Grid estimates of the solution norms against the bounds for h's kind."""
    a = _check_psi(psi)
    sol = stein_solve_normal(h, psi, grid)
    x, y, yp = sol.x, sol.y, sol.yp
    slack = TAIL_SLACK + QUAD_TOL
    sup_y, sup_yp, sup_xy = _sup(y), _sup(yp), _sup(x * y)
    if h.kind == "indicator":
        lines = [
            BoundLine("sup|y|", sup_y, 0.25 * math.sqrt(2 * math.pi / a), slack),
            BoundLine("sup|y'|", sup_yp, 1.0, slack),
            BoundLine("sup|xy|", sup_xy, 1.0 / a, slack),
        ]
    elif h.kind == "bounded":
        B = h.const
        lines = [
            BoundLine("sup|y|", sup_y, math.sqrt(2 * math.pi / a) * B, slack),
            BoundLine("sup|y'|", sup_yp, 4.0 * B, slack),
            BoundLine("sup|xy|", sup_xy, 2.0 / a * B, slack),
        ]
    else:
        L = h.const
        # y'' uses one-sided values of h' at kinks, which is what the sup sees
        mask = sol.smooth_mask(0)
        lines = [
            BoundLine("sup|y|", sup_y, 2.0 / a * L, slack),
            BoundLine("sup|y'|", sup_yp, 4.0 / math.sqrt(a) * L, slack),
            BoundLine("sup|y''|", _sup(sol.ypp[mask]), 2.0 / math.sqrt(a) * L, slack),
            BoundLine("sup|xy'|", _sup(x * yp), 3.0 / a * L, slack),
        ]
    return NormalBoundReport(psi, h.label or h.kind, h.kind, tuple(lines), sol.ode_residual())


def bound_matrix(
    psis: Sequence[float] = (0.0, 0.25, 0.5),
    zs: Sequence[float] = (-2.0, -1.0, 0.0, 1.0, 2.0),
    lipschitz_probes: int = 5,
    bounded_probes: int = 5,
    seed: int = 0,
) -> list[NormalBoundReport]:
    out = []
    for psi in psis:
        rng = np.random.default_rng([seed, int(round(psi * 1e6))])
        hs = [ContinuousTestFunction.indicator(z) for z in zs]
        hs += [random_lipschitz_probe(rng) for _ in range(lipschitz_probes)]
        hs += [random_bounded_probe(rng) for _ in range(bounded_probes)]
        out.extend(verify_normal_bounds(h, psi) for h in hs)
    return out


# ---------------------------------------------------------------------------
# t-interpolation family


def _t_kernel(x, m, psi):
    x = np.asarray(x, dtype=float)
    return (1 + x * x / m) ** (-(m + 1) * psi / 2) * np.exp(-(1 - psi) * x * x / 2)


def t_normalizer(m: float, psi: float) -> float:
    _check_psi(psi)
    if not m > 0:
        raise ValueError("m must be positive")
    # even integrand: integrate one side
    half = _quad(lambda x: float(_t_kernel(x, m, psi)), 0, math.inf, epsabs=1e-14, epsrel=1e-13)
    return 1.0 / (2.0 * half)


def t_density(m: float, psi: float, grid: Grid | None = None) -> tuple[float, np.ndarray, np.ndarray]:
    """(k, x, p(x)) for p(x) = k (1 + x^2/m)^{-(m+1) psi / 2} exp(-(1-psi) x^2 / 2)."""
    k = t_normalizer(m, psi)
    grid = grid or default_grid(psi)
    x = grid.points()
    return k, x, k * _t_kernel(x, m, psi)


@dataclass(frozen=True, eq=False)
class SmoothProbe:
    g: Callable[[float], float]
    dg: Callable[[float], float]
    label: str = ""


def characterization_residual(probe: SmoothProbe, m: float, psi: float) -> float:
    """|int (g'(x) - x {(1-psi) + psi (m+1)/(m+x^2)} g(x)) p(x) dx|."""
    k = t_normalizer(m, psi)
    a = 1.0 - psi

    def integrand(x):
        return (probe.dg(x) - x * (a + psi * (m + 1) / (m + x * x)) * probe.g(x)) * k * float(_t_kernel(x, m, psi))

    return abs(_quad(integrand, -math.inf, 0.0, epsabs=1e-14) + _quad(integrand, 0.0, math.inf, epsabs=1e-14))


def random_smooth_probe(rng: np.random.Generator) -> SmoothProbe:
    c = rng.uniform(-2, 2)
    s = rng.uniform(0.3, 3)
    b = rng.uniform(-1, 1)
    if rng.random() < 0.5:
        return SmoothProbe(lambda x: math.sin(s * x + c) + b, lambda x: s * math.cos(s * x + c), "sin")
    return SmoothProbe(lambda x: 1 / (1 + (s * (x - c)) ** 2), lambda x: -2 * s * s * (x - c) / (1 + (s * (x - c)) ** 2) ** 2, "cauchy")


# ---------------------------------------------------------------------------
# contraction constants


class GammaKind(str, enum.Enum):
    T_FAMILY_SUP = "t_family_sup"
    T_FAMILY_KOLMOGOROV = "t_family_kolmogorov"
    JUMP_DIFFUSION_SUP = "jump_diffusion_sup"
    JUMP_DIFFUSION_NORM1 = "jump_diffusion_norm1"
    JUMP_DIFFUSION_KOLMOGOROV = "jump_diffusion_kolmogorov"
    JUMP_DIFFUSION_CENTRED_SUP = "jump_diffusion_centred_sup"
    JUMP_DIFFUSION_CENTRED_DERIV = "jump_diffusion_centred_deriv"


@dataclass(frozen=True)
class GammaConstant:
    kind: GammaKind
    value: float

    @property
    def contraction_ok(self) -> bool:
        return self.value < 1.0


def gamma_constants(problem: ContinuousProblem, which: GammaKind | str) -> GammaConstant:
    """Closed-form contraction constants.

    The t-family constants use psi and m; the jump-diffusion ones use z and
    alpha.  The centred variants are the coefficients of ||f||_inf and
    ||f'||_inf when perturbing from N(alpha z, 1).
    """
    which = GammaKind(which)
    psi, m, z, al = problem.psi, problem.m, problem.z, problem.alpha
    if which in (GammaKind.T_FAMILY_SUP, GammaKind.T_FAMILY_KOLMOGOROV):
        if psi >= 1.0:
            return GammaConstant(which, math.inf)
        g = 2.0 * psi / (1.0 - psi) * (1.0 + 1.0 / m)
        if which is GammaKind.T_FAMILY_KOLMOGOROV:
            g *= 1 + 1 / math.sqrt(m) + 0.25 * math.sqrt(2 * math.pi * (1 - psi)) + 0.5 * (1 - psi) * math.sqrt(m)
        return GammaConstant(which, g)
    r = math.sqrt(2 * math.pi)
    value = {
        GammaKind.JUMP_DIFFUSION_SUP: r * z * al,
        GammaKind.JUMP_DIFFUSION_NORM1: (4 + r) * z * al,
        GammaKind.JUMP_DIFFUSION_KOLMOGOROV: (1 + r / 4) * z * al,
        GammaKind.JUMP_DIFFUSION_CENTRED_SUP: 2 * al * z * z,
        GammaKind.JUMP_DIFFUSION_CENTRED_DERIV: al * z * z,
    }[which]
    return GammaConstant(which, value)
