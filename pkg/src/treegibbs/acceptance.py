"""The acceptance suite: eleven numeric criteria, each returning a pass/fail record.

Shared by ``treegibbs verify`` and ``tests/test_acceptance.py``.  Every
check runs at its stated tolerance; a failing check reports the measured
numbers rather than being relaxed.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import chain, oracle, perco, renorm
from .chain import ChainEnvironment
from .errors import InfeasibleConditioning
from .gibbs import FREE, MINUS, PLUS, ModelParams
from .renorm import ImageField


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] #{self.number:<2d} {self.title}: {self.detail} ({self.seconds:.2f} s)"


def _timed(number: int, title: str, budget: float | None = None):
    def wrap(fn):
        def run() -> CriterionResult:
            t0 = time.perf_counter()
            passed, detail = fn()
            elapsed = time.perf_counter() - t0
            if budget is not None and elapsed > budget:
                passed = False
                detail += f"; over the {budget:g} s budget"
            return CriterionResult(number, title, passed, detail, elapsed)

        run.number = number
        run.title = title
        return run

    return wrap


@_timed(1, "zero-marginal formula", budget=1.0)
def zero_marginal():
    worst = 0.0
    for beta in (0.0, 0.3, 0.6, 1.0):
        exact = renorm.image_zero_marginal(ModelParams(beta), depth=4, bc=FREE)
        worst = max(worst, abs(exact - perco.p_zero(beta)))
    at_zero = renorm.image_zero_marginal(ModelParams(0.0), depth=4, bc=FREE)
    ok = worst <= 1e-12 and abs(at_zero - 0.75) <= 1e-12
    return ok, f"max |exact - formula| = {worst:.2e}, value at beta=0 is {at_zero:.15f}"


@_timed(2, "critical point of p_zero", budget=1e-3)
def critical_point():
    found = perco.beta_one()
    err = abs(found - 0.5 * math.log(1 + math.sqrt(2)))
    return err <= 1e-10, f"bisection root {found:.13f}, error {err:.2e}"


@_timed(3, "transfer-matrix closed forms", budget=1.0)
def closed_forms():
    worst_iter = 0.0
    worst_limit = {}
    for beta in (0.2, 0.5, 1.0, 2.0):
        P = np.eye(2)
        step = chain.p_plus(beta)
        for n in range(1, 201):
            P = P @ step
            worst_iter = max(worst_iter, float(np.abs(P - chain.p_plus_power(n, beta)).max()))
        worst_limit[beta] = float(np.abs(chain.p_plus_power(200, beta) - chain.limit_matrix(beta)).max())
    bad = {b: d for b, d in worst_limit.items() if d > 1e-10}
    detail = f"closed form vs product {worst_iter:.2e}; distance to limit at n=200: " + ", ".join(
        f"beta={b:g}: {d:.2e}" for b, d in worst_limit.items()
    )
    return worst_iter <= 1e-12 and not bad, detail


@_timed(4, "chain vs enumeration", budget=30.0)
def chain_oracle(cases: int = 1000, seed: int = 4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        R = int(rng.integers(1, 13))
        beta = float(rng.uniform(0.0, 3.0))
        env = ChainEnvironment.random(rng, R)
        x0 = int(rng.choice((-1, 1)))
        plus, minus = oracle.oracle_chain(env.full(), R, beta)
        value = chain.chain_conditional_magnetization(env, x0, R, beta)
        worst = max(worst, abs(value - (plus if x0 == 1 else minus)))
    return worst <= 1e-12, f"{cases} cases, max difference {worst:.2e}"


@_timed(5, "tree inference vs enumeration", budget=60.0)
def tree_oracle():
    worst = 0.0
    feasible = mismatched_support = 0
    for beta in (0.5, 1.0):
        params = ModelParams(beta)
        for tail in (PLUS, MINUS):
            table = oracle.oracle_conditional_table(2, tail, 3, params)
            for key in itertools.product((-1, 0, 1), repeat=6):
                eta = ImageField(2, np.array((0,) + key, dtype=np.int8), partial=True)
                try:
                    m = renorm.conditional_image_magnetization(eta, tail, 3, params)
                except InfeasibleConditioning:
                    mismatched_support += key in table
                    continue
                if key not in table:
                    mismatched_support += 1
                    continue
                feasible += 1
                worst = max(worst, abs(m - table[key]))
    ok = worst <= 1e-12 and mismatched_support == 0
    return ok, f"{feasible} feasible events, max difference {worst:.2e}, support mismatches {mismatched_support}"


@_timed(6, "ratio contraction and gap bound")
def contraction(envs: int = 1000, R: int = 30, seed: int = 6):
    rng = np.random.default_rng(seed)
    step_viol = steps = bound_viol = checks = 0
    done = 0
    while done < envs:
        beta = float(rng.uniform(0.2, 2.0))
        env = ChainEnvironment.random(rng, R)
        if chain.is_alternating(env):
            continue
        done += 1
        d = chain.ratio_trajectories(env, beta, R).diffs
        for a, b in zip(d, d[1:]):
            steps += 1
            step_viol += b > math.exp(-beta) * a * (1 + 1e-9)
        for r in range(1, R + 1):
            checks += 1
            bound_viol += not chain.gap_bound(env, r, beta).holds
    ok = step_viol == 0 and bound_viol == 0
    return ok, (
        f"one-step contraction violated in {step_viol}/{steps} steps, "
        f"gap bound violated in {bound_viol}/{checks} (env, R) pairs"
    )


@_timed(7, "discontinuity at the null configuration", budget=60.0)
def null_discontinuity():
    params = ModelParams(1.0)
    gaps = [renorm.tail_gap(renorm.null_image(R), params, extra_depth=4) for R in range(2, 7)]
    monotone = all(b >= a * (1 - 1e-12) for a, b in zip(gaps, gaps[1:]))
    zero_free = max(
        renorm.tail_gap(ImageField.constant(4, s, partial=True), params, extra_depth=4) for s in (1, -1)
    )
    ok = gaps[2] > 0.05 and monotone and zero_free <= 1e-12
    listed = ", ".join(f"{g:.4f}" for g in gaps)
    return ok, f"null gaps R=2..6: {listed}; zero-free gap {zero_free:.1e}"


SINGLE_PATH_RADII = range(8, 21)


def single_path_flanks(seed: int = 8, length: int = 24) -> list[int]:
    """A reproducible non-alternating flank sequence."""
    rng = np.random.default_rng(seed)
    while True:
        h = [int(x) for x in rng.choice((-1, 1), size=length)]
        if not chain.is_alternating(h):
            return h


@_timed(8, "exponential continuity along a single zero path", budget=120.0)
def single_path_decay():
    parts = []
    ok = True
    for label, flanks in (("constant", [1] * 24), ("random", single_path_flanks())):
        for beta in (0.8, 1.2):
            profile = renorm.gap_profile(
                lambda R: renorm.single_path_image(flanks, R), SINGLE_PATH_RADII, ModelParams(beta)
            )
            slope = renorm.log_slope(*zip(*profile))
            ok &= slope <= -beta + 0.1
            parts.append(f"{label} beta={beta:g}: slope {slope:.3f} (need <= {-beta + 0.1:.2f})")
    return ok, "; ".join(parts)


@_timed(9, "MGF, cumulant bounds and deviation bound")
def mgf_bounds():
    thetas = np.linspace(0.0, 5.0, 101)
    mult_bad = bound_bad = 0
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        for theta in thetas:
            one = perco.mgf_model(theta, p, 1)
            for R in range(1, 51):
                mult_bad += perco.mgf_model(theta, p, R) != one**R
                K = perco.cumulant_model(theta, p, R)
                slack = 1e-12 * R * (1 + theta)  # floating-point rounding only
                bound_bad += not (-R * theta - slack <= K <= R * theta + slack)
    value = perco.deviation_bound(10, 0.5, 1.0)
    target = math.exp(10 - math.exp(5))
    rel = abs(value - target) / target
    ok = mult_bad == 0 and bound_bad == 0 and rel <= 1e-12
    return ok, f"multiplicativity failures {mult_bad}, cumulant-bound violations {bound_bad}, deviation bound rel. error {rel:.1e}"


@_timed(10, "percolation regimes", budget=120.0)
def percolation_regimes(replicas: int = 20000, seed: int = 10):
    hot = perco.monte_carlo_paths(0.2, 12, FREE, replicas, seed)
    cold = perco.monte_carlo_paths(1.0, 12, FREE, replicas, seed + 1)
    ok = hot.survival_freq >= 0.2 and cold.survival_freq <= 0.02
    return ok, f"survival at beta=0.2: {hot.survival_freq:.4f}; at beta=1.0: {cold.survival_freq:.4f}"


@_timed(11, "zebra bound")
def zebra(samples: int = 20000, seed: int = 11):
    est = perco.zebra_one_step(0.0, samples, seed)
    z = (est.estimate - perco.ZEBRA_BOUND) / est.stderr
    ok = abs(z) <= 3 and perco.ZEBRA_BOUND < perco.CRITICAL_P
    return ok, (
        f"estimate {est.estimate:.4f} +- {est.stderr:.4f} over {est.trials} path trials "
        f"({z:+.1f} sigma from 2/9); 2/9 < 1/2 holds"
    )


CRITERIA = [
    zero_marginal,
    critical_point,
    closed_forms,
    chain_oracle,
    tree_oracle,
    contraction,
    null_discontinuity,
    single_path_decay,
    mgf_bounds,
    percolation_regimes,
    zebra,
]
QUICK = {1, 2, 3, 4, 5, 9}  # exact checks only: no Monte Carlo, no long sweeps


def run(quick: bool = False) -> list[CriterionResult]:
    return [check() for check in CRITERIA if not quick or check.number in QUICK]
