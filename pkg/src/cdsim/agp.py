"""Chebyshev operator basis for the adiabatic gauge potential and the
regularized variational solve for its coefficients.

The basis is generated by repeated application of L = {H, .}:

    Q0 = dH/dbeta,  Q1 = {H, Q0},  Q_{n+1} = 2 {H, Q_n} - Q_{n-1}

and the gauge potential ansatz keeps the odd elements,
A = sum_k gamma_k Q_{2k-1}.  The gamma minimize

    S = ||G||^2 + mu^2 ||A||^2,    G = dH/dbeta - {A, H}

with ||O||^2 = <O^2> - <O>^2 taken over a moment ensemble (connected
moments).  Minimization reduces to the symmetric positive semi-definite
normal equations M gamma = b with

    M_jk = Cov({Q_{2j-1},H}, {Q_{2k-1},H}) + mu^2 Cov(Q_{2j-1}, Q_{2k-1})
    b_j  = Cov({Q_{2j-1},H}, dH/dbeta).

Reported action and residual values are computed by direct evaluation of the
residual combination on the ensemble (forward stable), not from the solved
quadratic form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg

from .dynamics import compile_field, _run_ramp
from .ensemble import Ensemble, EnsembleMeta, sample_shell
from .errors import MomentMismatch, OutOfRange, SingularSystem
from .models import ModelSpec, ProtocolSpec
from .polyalg import PhasePolynomial

from .config_defaults import DEFAULTS

#: regularizer scale: mu^2 = MU_FACTOR * var(Q0) / var(Q1) unless overridden
MU_FACTOR = float(DEFAULTS["cd"]["mu_factor"])

#: uniform ridge on the equilibrated normal matrix.  The unrescaled Chebyshev
#: recursion makes high elements exponentially near-dependent (cond(M) beyond
#: 1e27 at order 7); without the ridge, gamma in the degenerate directions is
#: fit to moment noise, jumps between neighboring grid points, and the
#: interpolated CD term destroys rather than helps the drive.  1e-6 is far
#: below the statistical accuracy of the moments yet crushes those
#: directions; the solved action changes only at second order.
SOLVER_RIDGE = float(DEFAULTS["cd"]["solver_ridge"])

DEFAULT_GRID_SIZE = int(DEFAULTS["cd"]["grid_size"])
DEFAULT_REFERENCE_TAU = float(DEFAULTS["cd"]["reference_tau"])
_BETA_TOL = 1e-9


@dataclass(frozen=True)
class AgpBasis:
    """Odd Chebyshev elements at one beta, plus their brackets with H.

    R[k] = {Q_{2k+1}, H} is obtained from the recursion itself
    ({H, Q_n} = (Q_{n+1} + Q_{n-1})/2), not from extra bracket evaluations.
    """

    model_name: str
    beta: float
    order: int
    q0: PhasePolynomial
    Q: list[PhasePolynomial]   # [Q1, Q3, ..., Q_{2l-1}]
    R: list[PhasePolynomial]   # [{Q1,H}, {Q3,H}, ...]


def build_basis(model: ModelSpec, beta: float, order: int,
                max_degree: int | None = None) -> AgpBasis:
    """Generate Q_0 .. Q_{2*order} and keep the odd elements."""
    if order < 0:
        raise ValueError("order must be >= 0")
    h = model.hamiltonian(beta)
    q0 = model.dH_dbeta
    if order == 0:
        return AgpBasis(model.name, beta, 0, q0, [], [])
    qs = [q0, h.poisson_bracket(q0, max_degree)]
    for _ in range(2 * order - 1):
        nxt = 2.0 * h.poisson_bracket(qs[-1], max_degree) - qs[-2]
        qs.append(nxt)
    odd = [qs[2 * k - 1] for k in range(1, order + 1)]
    brackets = [-0.5 * (qs[2 * k] + qs[2 * k - 2]) for k in range(1, order + 1)]
    return AgpBasis(model.name, beta, order, q0, odd, brackets)


@dataclass(frozen=True)
class AgpSolution:
    beta: float
    order: int
    gamma: np.ndarray
    action_value: float    # ||G||^2 + mu^2 ||A||^2 at the optimum
    residual_norm: float   # ||G||^2 alone
    mu: float
    cond: float            # condition number of M, monitored per Open Question


def _connected_moments(basis: AgpBasis, ens: Ensemble):
    """Centered value columns for Q0, R_k and Q_{2k-1} on the ensemble."""
    pts = ens.points
    q0c = basis.q0.evaluate_many(pts)
    q0c = q0c - q0c.mean()
    rc = np.empty((pts.shape[0], basis.order))
    qc = np.empty((pts.shape[0], basis.order))
    for k in range(basis.order):
        col = basis.R[k].evaluate_many(pts)
        rc[:, k] = col - col.mean()
        col = basis.Q[k].evaluate_many(pts)
        qc[:, k] = col - col.mean()
    return q0c, rc, qc


def solve_variational_nested(basis: AgpBasis, moments: Ensemble,
                             mu: Optional[float] = None,
                             ridge: float = SOLVER_RIDGE) -> list[AgpSolution]:
    """Solutions for every truncation order 1..basis.order on shared moments.

    The normal matrix is assembled once at full order and each truncation
    solves its leading block after column equilibration (unit diagonal) plus
    the SOLVER_RIDGE stabilizer.  Action and residual values are evaluated
    directly from the residual combination on the ensemble, and the order-l
    report keeps the padded order-(l-1) coefficients whenever the fresh solve
    evaluates worse (both are admissible points of the larger ansatz space),
    so action values are non-increasing in l by construction, not by luck.
    """
    if abs(moments.meta.beta - basis.beta) > _BETA_TOL * max(1.0, abs(basis.beta)):
        raise MomentMismatch(
            f"moment ensemble at beta = {moments.meta.beta} but basis at {basis.beta}"
        )
    if basis.order < 1:
        return []
    n = len(moments)
    q0c, rc, qc = _connected_moments(basis, moments)
    var_q0 = float(q0c @ q0c) / n
    c_rr = (rc.T @ rc) / n
    c_qq = (qc.T @ qc) / n
    b = (rc.T @ q0c) / n

    if mu is None:
        mu_sq = MU_FACTOR * var_q0 / c_qq[0, 0] if c_qq[0, 0] > 0.0 else MU_FACTOR
    else:
        mu_sq = float(mu) ** 2

    def evaluated(gamma: np.ndarray, l: int, mu_used: float) -> tuple[float, float]:
        g_vals = q0c - rc[:, :l] @ gamma
        a_vals = qc[:, :l] @ gamma
        res = float(g_vals @ g_vals) / n
        return res + mu_used * float(a_vals @ a_vals) / n, res

    out: list[AgpSolution] = []
    best_gamma = np.zeros(0)
    best_action = var_q0  # gamma = 0 is always admissible
    best_residual = var_q0
    for l in range(1, basis.order + 1):
        m_l = c_rr[:l, :l] + mu_sq * c_qq[:l, :l]
        d = np.sqrt(np.diag(m_l))
        d[d == 0.0] = 1.0
        m_eq = m_l / d[:, None] / d[None, :]
        b_eq = b[:l] / d
        cond = float(np.linalg.cond(m_eq))
        trial_mu, trial_ridge = mu_sq, ridge
        gamma = None
        for attempt in range(8):
            try:
                if trial_mu != mu_sq:  # mu was bumped: reassemble
                    m_l = c_rr[:l, :l] + trial_mu * c_qq[:l, :l]
                    d = np.sqrt(np.diag(m_l))
                    d[d == 0.0] = 1.0
                    m_eq = m_l / d[:, None] / d[None, :]
                    b_eq = b[:l] / d
                cho = scipy.linalg.cho_factor(
                    m_eq + trial_ridge * np.eye(l), lower=True)
                gamma = scipy.linalg.cho_solve(cho, b_eq) / d
                break
            except np.linalg.LinAlgError:
                if trial_mu == 0.0 and trial_ridge == 0.0:
                    raise SingularSystem(
                        f"normal matrix singular at mu = 0 (order {l}); raise mu"
                    ) from None
                if attempt < 3 and trial_mu > 0.0:
                    trial_mu *= 100.0
                else:
                    trial_ridge = max(trial_ridge, 1e-14) * 100.0
        if gamma is None:
            raise SingularSystem(f"normal matrix not factorizable at order {l}")
        action, residual = evaluated(gamma, l, trial_mu)
        if action > best_action:
            # keep the padded lower-order solution (an admissible point of
            # this order's ansatz space); values are reused verbatim so the
            # reported sequence is non-increasing exactly
            gamma = np.concatenate([best_gamma, np.zeros(l - best_gamma.size)])
            action, residual = best_action, best_residual
        best_gamma, best_action, best_residual = gamma, action, residual
        out.append(AgpSolution(
            beta=basis.beta, order=l, gamma=gamma,
            action_value=action, residual_norm=residual,
            mu=math.sqrt(trial_mu), cond=cond,
        ))
    return out


def solve_variational(basis: AgpBasis, moments: Ensemble,
                      mu: Optional[float] = None) -> AgpSolution:
    sols = solve_variational_nested(basis, moments, mu)
    if not sols:
        raise ValueError("basis order must be >= 1")
    return sols[-1]


@dataclass
class AgpTable:
    """Per-grid-point variational solutions along a protocol's beta range."""

    model_name: str
    protocol_name: str
    beta_grid: np.ndarray
    order: int
    bases: list[AgpBasis]
    solutions: list[list[AgpSolution]]  # [grid point][order-1]
    provenance: dict

    def solutions_at(self, order: int) -> list[AgpSolution]:
        if not (1 <= order <= self.order):
            raise ValueError(f"order {order} outside 1..{self.order}")
        return [per_point[order - 1] for per_point in self.solutions]

    def gamma_matrix(self, order: int) -> np.ndarray:
        return np.array([s.gamma for s in self.solutions_at(order)])

    def action_matrix(self) -> np.ndarray:
        """(grid, order) array of action values, for plateau diagnostics."""
        return np.array([[s.action_value for s in per_point]
                         for per_point in self.solutions])

    def _interval(self, beta: float) -> int:
        grid = self.beta_grid
        if beta < grid[0] - _BETA_TOL or beta > grid[-1] + _BETA_TOL:
            raise OutOfRange(f"beta = {beta} outside table range "
                             f"[{grid[0]}, {grid[-1]}]")
        j = int(np.searchsorted(grid, beta, side="right")) - 1
        return min(max(j, 0), len(grid) - 2)

    def gamma_at(self, beta: float, order: int) -> np.ndarray:
        """gamma linearly interpolated between the bracketing grid points."""
        j = self._interval(beta)
        gam = self.gamma_matrix(order)
        w = (beta - self.beta_grid[j]) / (self.beta_grid[j + 1] - self.beta_grid[j])
        return (1.0 - w) * gam[j] + w * gam[j + 1]

    def agp_polynomial(self, beta: float, order: Optional[int] = None) -> PhasePolynomial:
        """The interpolated gauge potential as a polynomial.

        Basis polynomials come from the interval's left grid point; only the
        coefficients are interpolated.  On a grid point the tabulated
        combination is returned exactly.
        """
        order = self.order if order is None else order
        if order == 0:
            # still validates the range
            self._interval(beta)
            return PhasePolynomial.zero()
        j = self._interval(beta)
        gam = self.gamma_at(beta, order)
        out = PhasePolynomial.zero()
        for k in range(order):
            out = out + gam[k] * self.bases[j].Q[k]
        return out

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "model": self.model_name,
            "protocol": self.protocol_name,
            "beta_grid": self.beta_grid.tolist(),
            "order": self.order,
            "provenance": self.provenance,
            "grid_points": [
                {
                    "beta": float(self.beta_grid[i]),
                    "basis": [q.to_terms_list() for q in self.bases[i].Q],
                    "solutions": [
                        {
                            "order": s.order,
                            "gamma": s.gamma.tolist(),
                            "action_value": s.action_value,
                            "residual_norm": s.residual_norm,
                            "mu": s.mu,
                            "cond": s.cond,
                        }
                        for s in self.solutions[i]
                    ],
                }
                for i in range(len(self.beta_grid))
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def from_json_dict(cls, doc: dict) -> "AgpTable":
        from .models import get_model

        model = get_model(doc["model"])
        grid = np.asarray(doc["beta_grid"], dtype=np.float64)
        order = int(doc["order"])
        bases, solutions = [], []
        for gp in doc["grid_points"]:
            beta = float(gp["beta"])
            q_list = [PhasePolynomial.from_terms_list(t) for t in gp["basis"]]
            # brackets with H are cheap to regenerate and keep files smaller
            rebuilt = build_basis(model, beta, order)
            bases.append(AgpBasis(model.name, beta, order, model.dH_dbeta,
                                  q_list, rebuilt.R))
            sols = [
                AgpSolution(
                    beta=beta, order=int(s["order"]),
                    gamma=np.asarray(s["gamma"], dtype=np.float64),
                    action_value=float(s["action_value"]),
                    residual_norm=float(s["residual_norm"]),
                    mu=float(s["mu"]), cond=float(s["cond"]),
                )
                for s in gp["solutions"]
            ]
            solutions.append(sols)
        return cls(doc["model"], doc["protocol"], grid, order, bases,
                   solutions, doc.get("provenance", {}))

    @classmethod
    def load(cls, path: str | Path) -> "AgpTable":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def tabulate(model: ModelSpec, protocol: ProtocolSpec, order: int,
             grid_size: int = DEFAULT_GRID_SIZE, mu: Optional[float] = None,
             reference_tau: float = DEFAULT_REFERENCE_TAU, n_ref: int = 10000,
             seed: int = 0, shell_width: Optional[float] = None) -> AgpTable:
    """Tabulate variational solutions on a uniform beta grid.

    Moment ensembles are snapshots of a single slow unassisted forward drive
    (the adiabatically connected distribution), taken exactly when beta(t)
    crosses each grid value.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    lo = min(protocol.beta_i, protocol.beta_f)
    hi = max(protocol.beta_i, protocol.beta_f)
    if lo == hi:
        raise ValueError("protocol has zero beta span")
    grid = np.linspace(lo, hi, grid_size)
    grid[0], grid[-1] = lo, hi  # exact endpoints

    bases: dict[float, AgpBasis] = {}
    solutions: dict[float, list[AgpSolution]] = {}

    if model.shell_sampler is not None:
        # The adiabatically connected distribution family is available in
        # closed form; use it directly instead of approximating it with a
        # slow drive (exactness matters for the solvable oracle).
        moment_sampler = "exact_shell"
        for k, beta_g in enumerate(grid):
            basis = build_basis(model, float(beta_g), order)
            snapshot = sample_shell(model, float(beta_g), protocol.E0,
                                    n_ref, seed)
            bases[float(beta_g)] = basis
            solutions[float(beta_g)] = (
                solve_variational_nested(basis, snapshot, mu) if order >= 1 else []
            )
    else:
        moment_sampler = "slow_drive_snapshot"
        schedule = protocol.forward_schedule(reference_tau)
        fld = compile_field(model)
        dt = min(1e-3, reference_tau / 1000.0)
        ens = sample_shell(model, protocol.beta_i, protocol.E0, n_ref, seed,
                           shell_width=shell_width)
        pts = np.array(ens.points, copy=True)
        # grid points ordered by the time the forward ramp reaches them
        ordered = grid if protocol.beta_f >= protocol.beta_i else grid[::-1]
        t_prev = 0.0
        for beta_g in ordered:
            t_g = schedule.time_at_beta(float(beta_g))
            if t_g > t_prev:
                pts, ok = _run_ramp(pts, fld, schedule, t_prev, t_g, dt)
                if not ok.all():
                    bad = int(np.nonzero(ok == 0)[0][0])
                    raise SingularSystem(f"reference drive diverged at point {bad}")
                t_prev = t_g
            basis = build_basis(model, float(beta_g), order)
            snapshot = Ensemble(
                points=pts.copy(),
                meta=EnsembleMeta(seed=seed, sampler="slow_drive_snapshot",
                                  model=model.name, beta=float(beta_g),
                                  E0=protocol.E0,
                                  shell_width=ens.meta.shell_width),
            )
            bases[float(beta_g)] = basis
            solutions[float(beta_g)] = (
                solve_variational_nested(basis, snapshot, mu) if order >= 1 else []
            )

    return AgpTable(
        model_name=model.name,
        protocol_name=protocol.name,
        beta_grid=grid,
        order=order,
        bases=[bases[float(b)] for b in grid],
        solutions=[solutions[float(b)] for b in grid],
        provenance={
            "seed": seed, "reference_tau": reference_tau, "n_ref": n_ref,
            "sampler": moment_sampler,
            "mu": "auto" if mu is None else mu,
        },
    )


def agp_polynomial(table: AgpTable, beta: float,
                   order: Optional[int] = None) -> PhasePolynomial:
    return table.agp_polynomial(beta, order)
