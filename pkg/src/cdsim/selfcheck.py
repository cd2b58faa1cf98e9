"""Programmatic invariant/oracle suite behind `cdsim check`.

A fast cross-section of the full pytest suite: bracket identities, ramp
calculus, integrator certification, sampler moments, the exactly solvable
1d gauge-potential case, and the quantum-block oracle.
"""

from __future__ import annotations

import math

import numpy as np

from . import agp as agp_mod
from .dynamics import EvolutionPlan, convergence_check, evolve_points
from .ensemble import sample_harmonic_shell, sample_shell
from .models import (HARMONIC_1D, INTEGRABLE, NONINTEGRABLE, ProtocolSpec,
                     RampSchedule)
from .polyalg import ANGULAR_MOMENTUM, PhasePoint, PhasePolynomial, poisson_bracket
from .swtheory import QuantumBlockSpec, quantum_block_variance


def _random_poly(rng, degree=4, nterms=6):
    terms = {}
    for _ in range(nterms):
        exps = tuple(int(e) for e in rng.integers(0, degree // 2 + 1, size=4))
        if sum(exps) > degree:
            continue
        terms[exps] = float(rng.integers(-9, 10))
    return PhasePolynomial(terms)


def run_selfcheck(fast: bool = False) -> int:
    results: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str = "") -> None:
        results.append((name, bool(ok), detail))

    rng = np.random.default_rng(2024)

    # bracket identities
    ok_anti, ok_jacobi = True, True
    for _ in range(10):
        a, b, c = (_random_poly(rng) for _ in range(3))
        if not (poisson_bracket(a, b) + poisson_bracket(b, a)).is_zero():
            ok_anti = False
        jac = (poisson_bracket(a, poisson_bracket(b, c))
               + poisson_bracket(b, poisson_bracket(c, a))
               + poisson_bracket(c, poisson_bracket(a, b)))
        scale = max((abs(v) for v in jac.terms.values()), default=0.0)
        if scale > 1e-12:
            ok_jacobi = False
    check("bracket antisymmetry (term-exact)", ok_anti)
    check("Jacobi identity (tol 1e-12)", ok_jacobi)
    check("{L, H_I} = 0 symbolically",
          poisson_bracket(ANGULAR_MOMENTUM, INTEGRABLE.hamiltonian(0.229)).is_zero())

    # ramp calculus: integral of beta_dot recovers the span
    from scipy.integrate import quad
    s = RampSchedule.smooth(0.0, 0.229, 10.0)
    integral, _ = quad(s.beta_dot_at, 0.0, s.tau, limit=200)
    check("smooth ramp: int beta_dot = beta_f - beta_i",
          abs(integral - 0.229) < 1e-9 * 0.229, f"integral={integral!r}")

    # integrator: drift and step-halving order
    t_end = 20.0 if fast else 100.0
    worst = 0.0
    for model, betas in ((INTEGRABLE, (0.0, 0.229)),
                         (NONINTEGRABLE, (1.0, 5.0, 8.85))):
        for beta in betas:
            h = model.hamiltonian(beta)
            z0 = np.array([[0.31, 0.4, -0.2, 0.5]])
            plan = EvolutionPlan(model, RampSchedule.hold(beta, t_end))
            e0 = h.evaluate_many(z0)[0]
            e1 = h.evaluate_many(evolve_points(z0, plan, 0.0, t_end))[0]
            worst = max(worst, abs(e1 - e0) / abs(e0))
    check(f"energy drift at fixed beta over t={t_end:g} < 1e-9", worst < 1e-9,
          f"worst={worst:.2e}")

    plan = EvolutionPlan(INTEGRABLE, RampSchedule.smooth(0.0, 0.229, 10.0), dt=2e-3)
    r_coarse = convergence_check(PhasePoint(0.6, 0.1, 0.2, 0.8), plan, 10.0)
    fine_plan = EvolutionPlan(INTEGRABLE, plan.schedule, dt=1e-3)
    r_fine = convergence_check(PhasePoint(0.6, 0.1, 0.2, 0.8), fine_plan, 10.0)
    ratio = r_coarse.discrepancy / r_fine.discrepancy
    check("RK4 dt-halving ratio in [12, 20]", 12.0 <= ratio <= 20.0,
          f"ratio={ratio:.1f}")

    # samplers
    n = 20_000 if fast else 100_000
    ens = sample_harmonic_shell(1.0, n, 7)
    x2 = float((ens.points[:, 0] ** 2).mean())
    se = float((ens.points[:, 0] ** 2).std(ddof=1)) / math.sqrt(n)
    check("harmonic shell <x^2> = E0/2", abs(x2 - 0.5) < 4 * se,
          f"mean={x2:.5f} se={se:.1e}")
    ens_r = sample_shell(NONINTEGRABLE, 5.0, 1.0, 200, 11)
    h5 = NONINTEGRABLE.hamiltonian(5.0).evaluate_many(ens_r.points)
    check("rejection shell |H-E0| <= width/2",
          bool(np.all(np.abs(h5 - 1.0) <= ens_r.meta.shell_width / 2)))

    # exactly solvable 1d gauge potential
    proto = ProtocolSpec("harmonic1d", HARMONIC_1D, 0.0, 1.0)
    table = agp_mod.tabulate(HARMONIC_1D, proto, 1, grid_size=11,
                             n_ref=2000, seed=3)
    sols = table.solutions_at(1)
    worst_res = max(s.residual_norm for s in sols)
    norm_q0 = 1e-10 * max(
        np.var(HARMONIC_1D.dH_dbeta.evaluate_many(
            sample_shell(HARMONIC_1D, s.beta, 1.0, 2000, 3).points))
        for s in sols)
    check("1d oscillator residual <= 1e-10 * ||dH/dbeta||^2",
          worst_res <= norm_q0, f"worst={worst_res:.2e}")
    gam_mid = table.gamma_at(0.5, 1)[0]
    check("1d oscillator gamma_1 ~ 1/(4(1+beta))",
          abs(gam_mid - 1.0 / 6.0) < 0.01 / 6.0, f"gamma(0.5)={gam_mid:.6f}")

    # quantum block oracle
    seq = {N: quantum_block_variance(QuantumBlockSpec(N=N, model="integrable"))
           for N in (25, 50, 100, 200)}
    alpha = math.log2((seq[50] - seq[100]) / (seq[100] - seq[200]))
    limit = seq[200] + (seq[200] - seq[100]) / (2 ** alpha - 1.0)
    check("quantum block limit -> 1/720 (fitted)",
          abs(limit * 720.0 - 1.0) < 0.02 and 0.8 <= alpha <= 1.2,
          f"limit*720={limit * 720:.5f} alpha={alpha:.2f}")

    failed = [r for r in results if not r[1]]
    for name, ok, detail in results:
        mark = "PASS" if ok else "FAIL"
        print(f"[{mark}] {name}" + (f"  ({detail})" if detail else ""))
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 2
