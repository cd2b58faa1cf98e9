"""Trajectory integration of Hamilton's equations for driven polynomial
Hamiltonians, including the counterdiabatic term.

The right-hand side is precompiled into packed term rows ("compiled field"):
each row contributes (c_const + beta*c_beta) * monomial to one rhs component,
multiplied by beta_dot when the row belongs to the CD group.  With the drive
H(beta) = H0 + beta*V and the interval-local gauge-potential combination
A(beta) = P2 + beta*P3 (gamma interpolated linearly in beta), the four weight
channels (1, beta, beta_dot, beta*beta_dot) cover the whole of
H_CD = H(beta) + beta_dot * A(beta) exactly.

Integration is classical fixed-step RK4 with a final partial step landing
exactly on t1.  H_CD mixes positions and momenta (nested brackets), so it is
non-separable and a symplectic splitting would not apply; drift is certified
by tests instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._kernels import rk4_hold, rk4_ramp
from .ensemble import Ensemble
from .errors import NonFinite
from .models import ModelSpec, RampSchedule
from .polyalg import PhasePoint, PhasePolynomial

from .config_defaults import DEFAULTS

#: default timestep for tau >= 1; fast ramps use tau/1000 so every ramp is
#: resolved by at least 1000 steps.
BASE_DT = float(DEFAULTS["integration"]["base_dt"])
_MIN_STEPS = int(DEFAULTS["integration"]["min_steps_per_ramp"])


def default_dt(tau: float) -> float:
    return min(BASE_DT, tau / _MIN_STEPS)


# -- compiled force fields -----------------------------------------------------

# rhs component <- (differentiation variable, sign): Hamilton's equations
# qdot = +dH/dp, pdot = -dH/dq.
_HAMILTON_MAP = ((0, 2, 1.0), (1, 3, 1.0), (2, 0, -1.0), (3, 1, -1.0))


@dataclass(frozen=True)
class CompiledField:
    """Packed gradient rows grouped by beta interval (see module docstring)."""

    edges: np.ndarray    # (n_intervals + 1,) beta interval edges
    offsets: np.ndarray  # (n_intervals + 1,) row offsets
    coord: np.ndarray    # (M,) rhs component index
    group: np.ndarray    # (M,) 0 = Hamiltonian, 1 = CD (times beta_dot)
    cconst: np.ndarray   # (M,)
    cbeta: np.ndarray    # (M,)
    exps: np.ndarray     # (M, 4)
    emax: int


def _gradient_rows(rows: dict, poly: PhasePolynomial, slot: int, group: int) -> None:
    for comp, var, sign in _HAMILTON_MAP:
        for exps, coef in poly.partial(var):
            key = (group, comp, exps)
            pair = rows.setdefault(key, [0.0, 0.0])
            pair[slot] += sign * coef


def _pack_rows(per_interval: list[dict], edges: np.ndarray) -> CompiledField:
    coord, group, cconst, cbeta, exps = [], [], [], [], []
    offsets = [0]
    for rows in per_interval:
        for (grp, comp, e) in sorted(rows):
            cc, cb = rows[(grp, comp, e)]
            if cc == 0.0 and cb == 0.0:
                continue
            coord.append(comp)
            group.append(grp)
            cconst.append(cc)
            cbeta.append(cb)
            exps.append(e)
        offsets.append(len(coord))
    exps_arr = (np.array(exps, dtype=np.int64) if exps
                else np.zeros((0, 4), dtype=np.int64))
    return CompiledField(
        edges=np.asarray(edges, dtype=np.float64),
        offsets=np.array(offsets, dtype=np.int64),
        coord=np.array(coord, dtype=np.int64),
        group=np.array(group, dtype=np.int64),
        cconst=np.array(cconst, dtype=np.float64),
        cbeta=np.array(cbeta, dtype=np.float64),
        exps=exps_arr,
        emax=int(exps_arr.max()) if exps_arr.size else 0,
    )


def compile_field(model: ModelSpec, agp_table=None, cd_order: int = 0) -> CompiledField:
    """Compile gradients of H (and of beta_dot * A for cd_order > 0).

    Gradient polynomials are differentiated once per beta grid interval, not
    re-derived per step; gamma is folded into the interval's (P2, P3) pair.
    """
    base: dict = {}
    _gradient_rows(base, model.H0, 0, 0)
    _gradient_rows(base, model.V, 1, 0)
    if cd_order == 0:
        return _pack_rows([base], np.array([-1e300, 1e300]))
    if agp_table is None:
        raise ValueError("cd_order > 0 requires an AgpTable")
    grid = agp_table.beta_grid
    gam = agp_table.gamma_matrix(cd_order)  # (grid, l)
    per_interval = []
    for j in range(len(grid) - 1):
        rows = dict(base)
        # re-copy value lists so intervals stay independent
        rows = {k: list(v) for k, v in rows.items()}
        db = grid[j + 1] - grid[j]
        basis = agp_table.bases[j]
        for k in range(cd_order):
            slope = (gam[j + 1, k] - gam[j, k]) / db
            c0 = gam[j, k] - slope * grid[j]
            qk = basis.Q[k]
            _gradient_rows(rows, c0 * qk, 0, 1)
            _gradient_rows(rows, slope * qk, 1, 1)
        per_interval.append(rows)
    return _pack_rows(per_interval, grid)


def compile_static_field(hamiltonian: PhasePolynomial) -> CompiledField:
    """Field of a fixed Hamiltonian (hold segments, drift checks)."""
    rows: dict = {}
    _gradient_rows(rows, hamiltonian, 0, 0)
    return _pack_rows([rows], np.array([-1e300, 1e300]))


# -- schedule tables -----------------------------------------------------------

def _beta_arrays(s: RampSchedule, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized beta(t), beta_dot(t); pinned to models.ramp_value by tests."""
    span = s.beta_f - s.beta_i
    if s.kind == "hold":
        return np.full_like(t, s.beta_i), np.zeros_like(t)
    if s.kind == "linear":
        return s.beta_i + span * (t / s.tau), np.full_like(t, span / s.tau)
    angle = np.pi * t / (2.0 * s.tau)
    u = np.sin(angle)
    g = 0.5 * np.pi * u * u
    beta = s.beta_i + span * np.sin(g) ** 2
    bdot = span * (np.pi ** 2 / (4.0 * s.tau)) \
        * np.sin(2.0 * g) * np.sin(2.0 * angle)
    return beta, bdot


def _schedule_tables(s: RampSchedule, t0: float, t1: float, dt: float):
    """Step sizes and (beta, beta_dot) at the start/mid/end of every step."""
    total = t1 - t0
    nfull = int(math.floor(total / dt + 1e-9))
    h_last = total - nfull * dt
    if h_last < 1e-12 * dt:
        h_last = 0.0
    hs = np.full(nfull + (1 if h_last > 0.0 else 0), dt)
    if h_last > 0.0:
        hs[-1] = h_last
    starts = t0 + dt * np.arange(hs.size)
    ends = starts + hs
    if hs.size:
        ends[-1] = t1  # land exactly on t1
    mids = starts + 0.5 * hs
    b0, d0 = _beta_arrays(s, starts)
    bh, dh = _beta_arrays(s, mids)
    b1, d1 = _beta_arrays(s, ends)
    return hs, b0, bh, b1, d0, dh, d1


# -- evolution plans -----------------------------------------------------------

@dataclass(frozen=True)
class EvolutionPlan:
    """Everything needed to integrate one schedule segment."""

    model: ModelSpec
    schedule: RampSchedule
    agp_table: Optional[object] = None
    cd_order: int = 0
    dt: float = field(default=0.0)

    def __post_init__(self):
        dt = self.dt if self.dt > 0.0 else default_dt(self.schedule.tau)
        if self.schedule.kind != "hold" and dt > self.schedule.tau / 100.0:
            raise ValueError(f"dt = {dt} does not resolve tau = {self.schedule.tau}"
                             " (need dt <= tau/100)")
        object.__setattr__(self, "dt", dt)
        if self.cd_order > 0 and self.agp_table is None:
            raise ValueError("cd_order > 0 requires an agp_table")

    def compiled(self) -> CompiledField:
        return compile_field(self.model, self.agp_table, self.cd_order)


def _run_ramp(pts: np.ndarray, fld: CompiledField, s: RampSchedule,
              t0: float, t1: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    x = pts[:, 0].copy()
    y = pts[:, 1].copy()
    px = pts[:, 2].copy()
    py = pts[:, 3].copy()
    ok = np.ones(pts.shape[0], dtype=np.int8)
    hs, b0, bh, b1, d0, dh, d1 = _schedule_tables(s, t0, t1, dt)
    if hs.size:
        rk4_ramp(x, y, px, py, hs, b0, bh, b1, d0, dh, d1,
                 fld.edges, fld.offsets, fld.coord, fld.group,
                 fld.cconst, fld.cbeta, fld.exps, fld.emax, ok)
    return np.column_stack([x, y, px, py]), ok


def _run_hold(pts: np.ndarray, fld_static: CompiledField,
              durations: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    x = pts[:, 0].copy()
    y = pts[:, 1].copy()
    px = pts[:, 2].copy()
    py = pts[:, 3].copy()
    ok = np.ones(pts.shape[0], dtype=np.int8)
    lo, hi = fld_static.offsets[0], fld_static.offsets[1]
    coefs = fld_static.cconst[lo:hi].copy()
    rk4_hold(x, y, px, py, np.asarray(durations, dtype=np.float64), dt,
             fld_static.coord[lo:hi].copy(), coefs,
             fld_static.exps[lo:hi].copy(), fld_static.emax, ok)
    return np.column_stack([x, y, px, py]), ok


def _raise_nonfinite(ok: np.ndarray) -> None:
    bad = np.nonzero(ok == 0)[0]
    if bad.size:
        raise NonFinite(f"trajectory blew up (first offending point {bad[0]})",
                        point_index=int(bad[0]))


def evolve_points(points: np.ndarray, plan: EvolutionPlan,
                  t0: float, t1: float) -> np.ndarray:
    """Integrate raw (n, 4) points from t0 to t1 along the plan's schedule."""
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if t1 == t0:
        return np.array(points, dtype=np.float64, copy=True)
    if plan.schedule.kind == "hold":
        h = plan.model.hamiltonian(plan.schedule.beta_i)
        out, ok = _run_hold(np.asarray(points, dtype=np.float64),
                            compile_static_field(h),
                            np.full(len(points), t1 - t0), plan.dt)
    else:
        out, ok = _run_ramp(np.asarray(points, dtype=np.float64), plan.compiled(),
                            plan.schedule, t0, t1, plan.dt)
    _raise_nonfinite(ok)
    return out


def evolve_point(z0: PhasePoint, plan: EvolutionPlan,
                 t0: float, t1: float) -> PhasePoint:
    out = evolve_points(z0.as_array()[None, :], plan, t0, t1)
    return PhasePoint(*out[0])


def evolve_ensemble(e: Ensemble, plan: EvolutionPlan,
                    t0: float, t1: float) -> Ensemble:
    out = evolve_points(e.points, plan, t0, t1)
    return e.with_points(out, beta=plan.schedule.beta_at(min(t1, plan.schedule.tau)))


def hold_ensemble(e: Ensemble, model: ModelSpec, beta: float,
                  durations: np.ndarray, dt: float = BASE_DT) -> Ensemble:
    """Evolve each point for its own duration under the fixed H(beta)."""
    out, ok = _run_hold(e.points, compile_static_field(model.hamiltonian(beta)),
                        durations, dt)
    _raise_nonfinite(ok)
    return e.with_points(out, beta=beta)


@dataclass(frozen=True)
class ConvergenceReport:
    dt: float
    discrepancy: float  # max-coordinate gap between dt and dt/2 runs


def convergence_check(z0: PhasePoint, plan: EvolutionPlan,
                      t1: float) -> ConvergenceReport:
    """Max-coordinate discrepancy between dt and dt/2 runs over [0, t1]."""
    coarse = evolve_point(z0, plan, 0.0, t1)
    fine_plan = EvolutionPlan(plan.model, plan.schedule, plan.agp_table,
                              plan.cd_order, plan.dt / 2.0)
    fine = evolve_point(z0, fine_plan, 0.0, t1)
    gap = max(abs(coarse.x - fine.x), abs(coarse.y - fine.y),
              abs(coarse.px - fine.px), abs(coarse.py - fine.py))
    return ConvergenceReport(dt=plan.dt, discrepancy=gap)


def trajectory_samples(z0: PhasePoint, plan: EvolutionPlan,
                       times: np.ndarray) -> np.ndarray:
    """States at the given (sorted, within [0, tau]) times; row = (t, x, y, px, py, H)."""
    times = np.asarray(times, dtype=np.float64)
    out = np.empty((times.size, 6))
    state = z0.as_array()[None, :]
    t_prev = 0.0
    for k, t in enumerate(times):
        if t < t_prev:
            raise ValueError("times must be non-decreasing")
        state = evolve_points(state, plan, t_prev, float(t))
        beta = plan.schedule.beta_at(float(t))
        h = plan.model.hamiltonian(beta)
        out[k, 0] = t
        out[k, 1:5] = state[0]
        out[k, 5] = h.evaluate(PhasePoint(*state[0]))
        t_prev = float(t)
    return out
