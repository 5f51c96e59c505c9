"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""

import itertools
import math
import time

import numpy as np
import pytest

from steinpert.distances import MetricKind, distance
from steinpert.lattice import CompoundPoissonSpec, bp_rates, compound_poisson, convolve, exp_rates, poisson_pmf
from steinpert.models import (
    BernoulliSumModel,
    MarkovJumpModel,
    bp_approximation,
    bp_error_bounds,
    enumerate_independent_pmf,
    eta1,
    exact_sum_pmf,
    markov_indicator_table,
    markov_jump_equilibrium,
    poisson_binomial_pmf,
    records_experiment,
)
from steinpert.normal import (
    ContinuousProblem,
    ContinuousTestFunction,
    GammaKind,
    bound_matrix,
    characterization_residual,
    gamma_constants,
    random_smooth_probe,
    stein_solve_normal,
)
from steinpert.stein import (
    LatticeFunction,
    NormKind,
    apply_operator,
    gamma_empirical,
    gamma_upper,
    measure_expect,
    neumann_residual,
    neumann_solve,
    perturbation_report,
    stein_factor_sweep,
)


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {title}: {detail}")

    return emit


def test_criterion_1_records_reproduction(report):
    t0 = time.perf_counter()
    rows = {n: records_experiment(n, 4) for n in (25, 50, 100, 200)}
    elapsed = time.perf_counter() - t0
    worst = max(r.ratio for rs in rows.values() for r in rs)
    scaled = [
        next(r.actual for r in rs if r.metric is MetricKind.TOTAL_VARIATION) * n * math.log(n)
        for n, rs in rows.items()
    ]
    spread = max(scaled) / min(scaled)
    ok = worst <= 1 and spread <= 4 and elapsed <= 30
    report(1, "records within their bounds", ok,
           f"worst actual/bound {worst:.3f}, tv*n*ln n spread {spread:.3f}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_exact_representation(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 13))
        p = rng.uniform(0.0, 1 / 3, n) * (1 - 1e-9)
        exact = poisson_binomial_pmf(p)
        rates = bp_rates(p)
        approx = convolve(poisson_pmf(float(p.sum())), exp_rates(rates))
        lo, hi = min(approx.lo, 0), max(approx.hi, exact.hi)
        err = float(np.max(np.abs(exact.on(lo, hi) - approx.on(lo, hi))))
        worst = max(worst, err / (1e-9 + rates.truncation_error))
    ok = worst <= 1
    report(2, "signed CP representation exact", ok, f"worst error / allowance {worst:.2e} over 20 families")
    assert ok


def _random_spec(rng):
    L = int(rng.integers(2, 5))
    lam = float(rng.uniform(0.5, 30))
    w = rng.random(L - 1)
    ratio = rng.uniform(0.05, 0.45)
    a = sum(l * (l - 1) * w[l - 2] for l in range(2, L + 1))
    b = sum(l * w[l - 2] for l in range(2, L + 1))
    # scale the l >= 2 weights so that m2 / m1 = ratio
    c = ratio / (a - ratio * b)
    mu = {1: 1.0, **{l: c * w[l - 2] for l in range(2, L + 1)}}
    tot = sum(mu.values())
    return CompoundPoissonSpec(lam, {k: v / tot for k, v in mu.items()})


def _probe_functions(rng, K, count):
    out = []
    for i in range(count):
        if i % 3 == 0:
            out.append(LatticeFunction.indicator(int(rng.integers(0, K))))
        elif i % 3 == 1:
            out.append(LatticeFunction(0, rng.uniform(-1, 1, K)))
        else:
            out.append(LatticeFunction(0, np.cumsum(rng.uniform(-1, 1, K)), "constant"))
    return out


def test_criterion_3_neumann_engine(report):
    rng = np.random.default_rng(3)
    one_sided, max_gamma = 0.0, 0.0
    for _ in range(20):
        spec = _random_spec(rng)
        max_gamma = max(max_gamma, gamma_upper(spec))
        pi1 = compound_poisson(spec)
        for f in _probe_functions(rng, int(3 * spec.lam + 20), 10):
            r = neumann_residual(neumann_solve(f, spec), f, pi1)
            one_sided = max(one_sided, float(np.max(np.abs(r))))
    two_sided = 0.0
    for s in range(10):
        eps = rng.uniform(0.01, 0.1)
        mu = {1: 1.0, 2: rng.uniform(0, 0.1), -1: eps}
        if s % 2:
            mu[-2] = eps / 3
        spec = CompoundPoissonSpec(float(rng.uniform(1, 20)), mu)
        pi1 = compound_poisson(spec)
        for f in _probe_functions(rng, int(3 * spec.lam + 20), 10):
            sol = neumann_solve(f, spec)
            r = neumann_residual(sol, f, pi1)
            two_sided = max(two_sided, float(np.ptp(r)), abs(float(r[0]) - sol.constant_c(f, pi1)))
    ok = max_gamma <= 0.9 and one_sided <= 1e-8 and two_sided <= 1e-8
    report(3, "Neumann residuals", ok,
           f"max gamma {max_gamma:.3f}, Z+ residual {one_sided:.2e}, two-sided constancy/c(f) {two_sided:.2e}")
    assert ok


def test_criterion_4_magic_factors(report):
    results = [r for lam in (0.5, 1.0, 5.0, 20.0) for n in NormKind for r in stein_factor_sweep(lam, n, 1000, seed=0)]
    violations = sum(r.violations for r in results)
    worst = max(results, key=lambda r: r.worst_ratio)
    ok = violations == 0 and len(results) == 24
    report(4, "Poisson magic factors", ok,
           f"{violations} violations over {len(results)} inequality sweeps of 1000 probes; "
           f"tightest {worst.quantity} ({worst.norm.value}, lam {worst.lam:g}) at {worst.worst_ratio:.4f}")
    assert ok


def test_criterion_5_normal_bounds(report):
    t0 = time.perf_counter()
    reports = bound_matrix()
    sol = stein_solve_normal(ContinuousTestFunction.indicator(0.0), 0.0)
    y0 = float(sol.y[np.argmin(np.abs(sol.x))])
    elapsed = time.perf_counter() - t0
    failed = [r for r in reports if not r.passed]
    gap = abs(y0 - math.sqrt(2 * math.pi) / 4)
    ok = not failed and len(reports) == 45 and gap <= 1e-6 and elapsed <= 60
    report(5, "normal Stein solution bounds", ok,
           f"{len(reports) - len(failed)}/{len(reports)} cells pass, |y(0) - sqrt(2 pi)/4| = {gap:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_6_characterization(report):
    rng = np.random.default_rng(6)
    lattice = 0.0
    for i in range(100):
        lam = float(rng.choice([0.5, 1.0, 5.0, 20.0]))
        spec = CompoundPoissonSpec(lam, {1: 1.0})
        k = int(rng.integers(1, 40))
        vals = np.concatenate([[0.0], rng.uniform(-1, 1, k), np.zeros(int(lam * 10) + 60)])
        ag = apply_operator("a0", LatticeFunction(0, vals), spec)
        lattice = max(lattice, abs(measure_expect(poisson_pmf(lam), ag)))
    continuous = 0.0
    grid = list(itertools.product((0.0, 0.25, 0.4), (5.0, 10.0)))
    for i in range(20):
        psi, m = grid[i % len(grid)]
        continuous = max(continuous, characterization_residual(random_smooth_probe(rng), m, psi))
    ok = lattice <= 1e-10 and continuous <= 1e-8
    report(6, "characterization residuals", ok, f"lattice {lattice:.2e}, continuous {continuous:.2e}")
    assert ok


def _eta1_bruteforce(table, n):
    """Independent-coupling eta1 by direct enumeration of the joint table."""
    outcomes = list(itertools.product((0, 1), repeat=n))
    total = 0.0
    for i in range(n):
        p_i = sum(pr for x, pr in zip(outcomes, table) if x[i])
        plain = np.zeros(n)
        cond = np.zeros(n)
        for x, pr in zip(outcomes, table):
            w = sum(x) - x[i]
            plain[w] += pr
            if x[i]:
                cond[w] += pr / p_i
        e = sum(cond[a] * plain[b] * abs(a - b) for a in range(n) for b in range(n))
        total += p_i / (1 - 2 * p_i) * e
    return total


def test_criterion_7_bruteforce_oracles(report):
    rng = np.random.default_rng(7)
    dp_err = 0.0
    for n in range(1, 11):
        p = rng.uniform(0, 1, n)
        dp_err = max(dp_err, float(np.max(np.abs(poisson_binomial_pmf(p).on(0, n) - enumerate_independent_pmf(p).on(0, n)))))
    eta_err, worst = 0.0, 0.0
    for _ in range(12):
        n = int(rng.integers(3, 11))
        table = markov_indicator_table(float(rng.uniform(0.05, 0.12)), float(rng.uniform(0.0, 1.0)), n)
        model = BernoulliSumModel.dependent(table)
        e = eta1(model, "independent")
        eta_err = max(eta_err, abs(e - _eta1_bruteforce(table, n)))
        actual = distance(exact_sum_pmf(model), bp_approximation(model), "total_variation")
        worst = max(worst, actual / bp_error_bounds(model, eta=e).total_variation)
    ok = dp_err <= 1e-12 and eta_err <= 1e-12 and worst <= 1
    report(7, "brute-force oracles", ok,
           f"DP vs enumeration {dp_err:.1e}, eta1 vs enumeration {eta_err:.1e}, worst tv/bound {worst:.3f}")
    assert ok


def test_criterion_8_markov_jump(report):
    pois = 0.0
    for N in (25, 100):
        eq = markov_jump_equilibrium(MarkovJumpModel(N, 0.0, 0.5))
        hi = eq.x_law.hi
        pois = max(pois, float(np.max(np.abs(eq.x_law.on(0, hi) - poisson_pmf(float(N)).on(0, hi)))))
    mean_ratio, var_ratio = 0.0, 0.0
    for N in (25, 100, 400):
        for z, alpha in ((0.1, 0.5), (0.2, 1.0)):
            m = MarkovJumpModel(N, z, alpha)
            eq = markov_jump_equilibrium(m)
            mean_ratio = max(mean_ratio, abs(eq.mean_w) / (alpha * z))
            var_ratio = max(var_ratio, eq.second_moment_w / m.second_moment_bound())
    # the second moment meets its bound with equality when z sqrt(N) is an integer
    ok = pois <= 1e-9 and mean_ratio <= 1 + 1e-9 and var_ratio <= 1 + 1e-9
    report(8, "birth-death equilibrium", ok,
           f"Po(N) error {pois:.1e}, |E W|/(alpha z) <= {mean_ratio:.4f}, E W^2/bound <= {var_ratio:.10f}")
    assert ok


def test_criterion_9_gamma_certificates(report):
    specs = [
        CompoundPoissonSpec(1.0, {1: 0.9, 2: 0.1}),
        CompoundPoissonSpec(5.0, {1: 0.8, 2: 0.2}),
        CompoundPoissonSpec(12.0, {1: 0.7, 2: 0.2, 3: 0.1}),
        CompoundPoissonSpec(3.0, {1: 0.95, 4: 0.05}),
        CompoundPoissonSpec(4.0, {-1: 0.03, 1: 0.95, 2: 0.02}),
    ]
    dominated = all(
        gamma_empirical(s, n, probes=100, seed=1) <= gamma_upper(s, n) + 1e-9 for s in specs for n in NormKind
    )
    flags = []
    for mu2 in np.linspace(0.0, 0.6, 13):
        s = CompoundPoissonSpec(2.0, {1: 1 - mu2, 2: mu2})
        flags.append(perturbation_report(s, "sup", probes=5).contraction_ok == (s.m2 / s.m1 < 0.5))
    for z, alpha in itertools.product((0.05, 0.2, 0.4, 0.8), (0.5, 1.0, 2.0)):
        g = gamma_constants(ContinuousProblem(alpha=alpha, z=z), GammaKind.JUMP_DIFFUSION_SUP)
        flags.append(g.contraction_ok == (math.sqrt(2 * math.pi) * z * alpha < 1))
    for psi, m in itertools.product((0.0, 0.1, 0.2, 0.3, 0.5, 1.0), (1.0, 5.0, 30.0)):
        g = gamma_constants(ContinuousProblem(psi=psi, m=m), GammaKind.T_FAMILY_SUP)
        expected = psi < 1 and 2 * psi / (1 - psi) * (1 + 1 / m) < 1
        flags.append(g.contraction_ok == expected)
    ok = dominated and all(flags)
    report(9, "gamma certificates", ok,
           f"empirical <= upper on {len(specs) * 3} spec/norm pairs: {dominated}; {sum(flags)}/{len(flags)} flags agree")
    assert ok
