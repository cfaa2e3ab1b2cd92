"""Acceptance battery: each check reruns one quantitative claim end to end.

Every check returns a ``CheckResult`` whose ``detail`` records the numbers
it compared, so a failing line says by how much it failed.
"""

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List

import numpy as np

from . import finrel
from .environments import monotone_coupled_envs
from .groups import CyclicGenerator, FreeAbelianGroup, FreeGroup, GroupHomomorphism, KernelOfHom, Trivial, Whole
from .spectral import (
    almost_invariant_from_power,
    build_markov,
    exact_return_series,
    explore_ball,
    folner_search,
    interval_folner_sets,
    mean_ergodic_average,
    norm_sweep,
    operator_norm,
    radial_oracle_cyclic,
    radial_oracle_free,
    represent,
    rotation_average_bound,
    rotation_matrix,
)
from .walks import (
    PercolationTarget,
    RestrictedTarget,
    SmallPiecesTarget,
    StepDistribution,
    SubgroupTarget,
    coupled_series,
    fit_asymptotic,
    fit_decay,
    fit_radius,
    make_lazy,
    sample_return_series,
)

KESTEN_F2 = math.sqrt(3) / 2


@dataclass
class CheckResult:
    name: str
    title: str
    passed: bool
    detail: Dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"{self.name} {'PASS' if self.passed else 'FAIL'} {self.title} ({self.seconds:.1f}s) {self.detail}"

    def to_dict(self):
        return {
            "name": self.name,
            "title": self.title,
            "passed": self.passed,
            "detail": self.detail,
            "seconds": round(self.seconds, 3),
        }


def _free_words_returning(rank, length):
    """Brute-force count of reduced-walk returns: all words of the given length."""
    letters = list(range(1, rank + 1)) + [-i for i in range(1, rank + 1)]
    count = 0

    def rec(stack, n):
        nonlocal count
        if n == 0:
            count += not stack
            return
        for l in letters:
            if stack and stack[-1] == -l:
                rec(stack[:-1], n - 1)
            else:
                rec(stack + [l], n - 1)

    rec([], length)
    return Fraction(count, (2 * rank) ** length)


def check_a1(seed=0, N=10**6, K=20, workers=1):
    """Kesten value on the free group of rank 2 against the radial oracle and brute force."""
    oracle = radial_oracle_free(2, K, 10**4)
    lazy_oracle = radial_oracle_free(2, K, 10**4, lazy=True)
    brute = [_free_words_returning(2, 2), _free_words_returning(2, 4)]
    F = FreeGroup(2)
    nu = make_lazy(StepDistribution.uniform(F))
    series = sample_return_series(F, SubgroupTarget(Trivial(F)), nu, K, N, seed, workers)
    est = fit_radius(series)
    ok_bound = abs(oracle.eigen_bound - KESTEN_F2) <= 1e-4
    ok_brute = brute == [Fraction(1, 4), Fraction(7, 64)] and oracle.p_exact[1:3] == brute
    ok_mc = abs(est.value - lazy_oracle.eigen_bound) <= 0.02
    return ok_bound and ok_brute and ok_mc, {
        "eigen_bound": oracle.eigen_bound,
        "lazy_eigen_bound": lazy_oracle.eigen_bound,
        "p2_p4": [str(x) for x in oracle.p_exact[1:3]],
        "mc_fit": est.value,
        "mc_error": abs(est.value - lazy_oracle.eigen_bound),
    }


def check_a2(seed=0, N=10**5, K=40, radius=60, workers=1):
    """Amenable case: the square lattice has radius 1."""
    Z2 = FreeAbelianGroup(2)
    nu = StepDistribution.uniform(Z2)
    sweep = norm_sweep(Z2, Trivial(Z2), nu, [radius])
    norm = sweep.norms[-1].value
    series = sample_return_series(Z2, SubgroupTarget(Trivial(Z2)), nu, K, N, seed, workers)
    est = fit_radius(series, model="loglinear")
    return norm >= 0.99 and est.value >= 0.97, {
        "states": sweep.sizes[-1],
        "norm": norm,
        "mc_fit": est.value,
        "model": est.method,
    }


def kernel_to_z(F, generator=1):
    """Kernel of the map sending one generator to 1 and the rest to 0."""
    Z = FreeAbelianGroup(1)
    images = [()] * F.generator_count
    images[generator - 1] = (1,)
    return KernelOfHom(GroupHomomorphism(F, Z, tuple(images)))


def check_a3(radius=1000, eps=0.1):
    """Coamenable kernel: Schreier graph is a line, norms tend to 1, Folner sets exist."""
    F = FreeGroup(2)
    sub = kernel_to_z(F)
    nu = make_lazy(StepDistribution.uniform(F))
    ball = explore_ball(F, sub, nu, radius)
    norm = operator_norm(build_markov(ball, nu)).value
    fol = folner_search(ball, [(1,), (-1,), (2,), (-2,)], eps)
    return norm >= 0.999 and fol.found, {"states": ball.size, "norm": norm, "folner_radius": fol.radius}


def check_a4(seed=0, N=10**6, K=20, ball_radius=12, workers=1):
    """Cyclic subgroup of F2: MC fit, truncated norm and exact DP agree, all below 0.95."""
    F = FreeGroup(2)
    sub = CyclicGenerator(F, 1)
    nu = StepDistribution.uniform(F)
    dp = radial_oracle_cyclic(2, K, 3 * K)
    dp_est = fit_asymptotic(np.arange(1, K + 1), dp.p[1:])
    ball = explore_ball(F, sub, nu, ball_radius)
    op = build_markov(ball, nu)
    # the explicit ball reproduces the lumped chain exactly while paths stay inside
    explicit = exact_return_series(op, 0, ball_radius)
    dp_gap = float(np.abs(explicit - dp.p[1 : ball_radius + 1]).max())
    norm = operator_norm(op).value
    series = sample_return_series(F, SubgroupTarget(sub), nu, K, N, seed, workers)
    mc = fit_radius(series).value
    ref = dp_est.value
    ok = abs(mc - ref) <= 0.02 and abs(norm - ref) <= 0.02 and max(mc, norm, ref) <= 0.95 and dp_gap <= 1e-12
    return ok, {"dp": ref, "mc_fit": mc, "truncated_norm": norm, "explicit_vs_chain": dp_gap}


def check_a5(seed=0, N=2 * 10**6, K=20, p=0.5, workers=1):
    """Small pieces: radius 1 on E, the Kesten value on the complement."""
    F = FreeGroup(2)
    nu = StepDistribution.uniform(F)
    on_e, off_e = coupled_series(
        F, [SmallPiecesTarget(p, "E"), SmallPiecesTarget(p, "Ec")], nu, K, N, seed, workers
    )
    oracle = radial_oracle_free(2, K, 10**4).eigen_bound
    r_e, r_ec = fit_radius(on_e).value, fit_radius(off_e).value
    return r_e >= 0.97 and abs(r_ec - oracle) <= 0.02, {
        "rho_E": r_e,
        "rho_Ec": r_ec,
        "oracle": oracle,
        "samples": [on_e.samples, off_e.samples],
    }


def check_a6(seed=0, trials=100, n_max=64):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        R, _, _ = finrel.random_model(rng, n_max)
        f = finrel.random_transport_function(R, rng)
        mt = finrel.mass_transport_check(R, f)
        worst = max(worst, mt.discrepancy)
    return worst <= 1e-12, {"max_discrepancy": worst}


def check_a7(seed=0, trials=20, n_max=32, K=50):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        R, S, nu = finrel.random_model(rng, n_max)
        worst = max(worst, finrel.trace_identity_gap(R, S, nu, K))
    return worst <= 1e-10, {"max_gap": worst}


def check_a8(seed=0, N=10**5, K=20, p_levels=(0.2, 0.4, 0.6, 0.8, 1.0), perc_K=3, perc_N=300, workers=1):
    """Nested targets never reverse their hit counts."""
    F = FreeGroup(2)
    nu = StepDistribution.uniform(F)
    cyc = CyclicGenerator(F, 1)
    targets = [
        SubgroupTarget(Trivial(F)),
        RestrictedTarget(cyc, 0.3),
        RestrictedTarget(cyc, 0.7),
        SubgroupTarget(cyc),
        SubgroupTarget(kernel_to_z(F, 2)),
        SubgroupTarget(Whole(F)),
    ]
    # (smaller, larger) pairs of nested targets
    pairs = [(0, 3), (1, 2), (2, 3), (3, 4), (4, 5)]
    series = coupled_series(F, targets, nu, K, N, seed, workers)
    violations = sum(int((series[a].hits > series[b].hits).sum()) for a, b in pairs)
    perc = coupled_series(
        F, [PercolationTarget(p, 2 * perc_K) for p in p_levels], nu, perc_K, perc_N, seed, workers
    )
    perc_violations = 0
    for a, b in zip(perc, perc[1:]):
        perc_violations += int((a.hits > b.hits).sum()) + int((a.hits_upper > b.hits_upper).sum())
    # edge sets themselves are nested on a small ball
    envs = monotone_coupled_envs(F, p_levels, seed)
    edge_violations = 0
    for lo, hi in zip(envs, envs[1:]):
        for v in explore_ball(F, Trivial(F), nu, 4).reps:
            for l in F.letters():
                edge_violations += lo.is_open(v, l) and not hi.is_open(v, l)
    total = violations + perc_violations + edge_violations
    return total == 0, {
        "subgroup_violations": violations,
        "percolation_violations": perc_violations,
        "edge_violations": int(edge_violations),
    }


def check_a9(z_radius=200, eps=0.1, f2_radius=12, f2_eps=0.05, f2_budget=500):
    """Almost-invariant vectors appear on Z and provably cannot on F2."""
    Z = FreeAbelianGroup(1)
    nu = make_lazy(StepDistribution.uniform(Z))
    ball = explore_ball(Z, Trivial(Z), nu, z_radius)
    op = build_markov(ball, nu)
    start = np.zeros(ball.size)
    start[0] = 1.0
    res = almost_invariant_from_power(op, start, eps, 10_000)
    monotone = bool(np.all(np.diff(res.log_a) <= 0))
    F = FreeGroup(2)
    nu2 = make_lazy(StepDistribution.uniform(F))
    ball2 = explore_ball(F, Trivial(F), nu2, f2_radius)
    op2 = build_markov(ball2, nu2)
    start2 = np.zeros(ball2.size)
    start2[0] = 1.0
    res2 = almost_invariant_from_power(op2, start2, f2_eps, f2_budget)
    floor = 1.0 - radial_oracle_free(2, 1, 10**4, lazy=True).eigen_bound ** 2
    ok = res.fired and res.residual <= 0.1 and monotone and not res2.fired and res2.best_residual > floor
    return ok, {
        "z_iterations": res.iterations,
        "z_residual": res.residual,
        "a_nonincreasing": monotone,
        "f2_fired": res2.fired,
        "f2_best_residual": res2.best_residual,
        "f2_floor": floor,
    }


def check_a10(n_max=1000):
    """Mean ergodic averages of rotations."""
    Z = FreeAbelianGroup(1)
    xi = np.array([1.0, 0.0])
    quarter = [np.array([[0, -1], [1, 0]])]
    avg4 = mean_ergodic_average(Z, quarter, np.array([1, 0]), [[(1,) * j for j in range(4)]])
    exact_zero = bool(np.all(avg4.averages[0] == 0))
    rot = [rotation_matrix(1.0)]
    res = mean_ergodic_average(Z, rot, xi, interval_folner_sets(n_max))
    worst = min(rotation_average_bound(1.0, n) - x for n, x in zip(range(1, n_max + 1), res.norms))
    # sanity: the representation of a^n is the rotation by n radians
    drift = float(np.abs(represent(Z, rot, (1,) * 355) - rotation_matrix(355.0)).max())
    return exact_zero and worst >= 0, {"avg4_zero": exact_zero, "min_margin": float(worst), "power_drift": drift}


def check_a11(seed=0, K=3, N=300, p_levels=(0.4, 0.6, 0.8), windows=(3, 6), workers=1):
    """Percolation brackets are ordered and tighten with the window; p = 1 gives radius 1."""
    F = FreeGroup(2)
    nu = StepDistribution.uniform(F)
    targets = [PercolationTarget(p, W) for p in p_levels for W in windows]
    series = coupled_series(F, targets, nu, K, N, seed, workers)
    ordered, tighter = True, True
    widths = {}
    for j, p in enumerate(p_levels):
        rows = series[j * len(windows) : (j + 1) * len(windows)]
        for s in rows:
            ordered &= bool(np.all(s.hits <= s.hits_upper))
        for a, b in zip(rows, rows[1:]):
            tighter &= bool(np.all(b.hits >= a.hits) and np.all(b.hits_upper <= a.hits_upper))
        widths[str(p)] = [int((s.hits_upper - s.hits).sum()) for s in rows]
    full = sample_return_series(F, PercolationTarget(1.0, 2 * K), nu, K, N, seed, workers)
    rho1 = fit_decay(full.k, full.p_hat, (1, K)).value
    return ordered and tighter and abs(rho1 - 1.0) <= 1e-6, {
        "ordered": ordered,
        "tightening": tighter,
        "bracket_widths": widths,
        "rho_at_p1": rho1,
    }


CHECKS: Dict[str, tuple] = {
    "A1": ("Kesten value, nonamenable", check_a1),
    "A2": ("amenable lattice has radius 1", check_a2),
    "A3": ("coamenable kernel", check_a3),
    "A4": ("non-coamenable cyclic subgroup", check_a4),
    "A5": ("small pieces dichotomy", check_a5),
    "A6": ("mass transport", check_a6),
    "A7": ("trace identity", check_a7),
    "A8": ("monotone coupling", check_a8),
    "A9": ("almost-invariant construction", check_a9),
    "A10": ("mean ergodic averages", check_a10),
    "A11": ("percolation brackets", check_a11),
}


def run_check(name, **kwargs) -> CheckResult:
    title, fn = CHECKS[name]
    t0 = time.perf_counter()
    passed, detail = fn(**kwargs)
    return CheckResult(name, title, bool(passed), detail, time.perf_counter() - t0)


def run_battery(names=None, seed=0, workers=1, report: Callable = None) -> List[CheckResult]:
    out = []
    for name in names or CHECKS:
        fn = CHECKS[name][1]
        kwargs = {}
        params = fn.__code__.co_varnames[: fn.__code__.co_argcount]
        if "seed" in params:
            kwargs["seed"] = seed
        if "workers" in params:
            kwargs["workers"] = workers
        res = run_check(name, **kwargs)
        if report:
            report(res)
        out.append(res)
    return out
