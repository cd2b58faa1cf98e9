"""Experiment orchestration: forward sweeps, cyclic protocols with waits,
linear ramp-and-reverse cycles, and sweep drivers with persistence.

Every run is reproducible from (config, seed): initial points come from
per-point streams tagged 0, wait times from streams tagged 1, and sweep
members derive their seeds from the base seed and their index.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .agp import AgpTable
from .dynamics import (BASE_DT, default_dt, compile_field,
                       compile_static_field, _run_ramp, _run_hold)
from .ensemble import (EnergyStats, point_rng, sample_shell,
                       stats_from_energies)
from .errors import CdsimError, NonFinite
from .models import ModelSpec, ProtocolSpec, RampSchedule

from .config_defaults import DEFAULTS

DEFAULT_N = int(DEFAULTS["ensemble"]["n_sweep"])

#: randomized wait window: uniform over ~10 unperturbed periods kills aliasing
DEFAULT_WAIT_MAX = float(DEFAULTS["wait"]["t_max"])


@dataclass(frozen=True)
class WaitPolicy:
    """Per-trajectory hold time between the forward and reverse ramps."""

    kind: str  # none | fixed | uniform
    t_fixed: float = 0.0
    t_min: float = 0.0
    t_max: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "fixed", "uniform"):
            raise ValueError(f"unknown wait policy {self.kind!r}")
        if self.kind == "uniform" and self.t_max < self.t_min:
            raise ValueError("uniform wait needs t_max >= t_min")

    @classmethod
    def none(cls) -> "WaitPolicy":
        return cls("none")

    @classmethod
    def fixed(cls, t: float) -> "WaitPolicy":
        return cls("fixed", t_fixed=t)

    @classmethod
    def uniform(cls, t_min: float = 0.0,
                t_max: float = DEFAULT_WAIT_MAX) -> "WaitPolicy":
        return cls("uniform", t_min=t_min, t_max=t_max)

    def draw(self, seed: int, n: int) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(n)
        if self.kind == "fixed":
            return np.full(n, self.t_fixed)
        out = np.empty(n)
        for i in range(n):
            out[i] = point_rng(seed, 1, i).uniform(self.t_min, self.t_max)
        return out

    def describe(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "fixed":
            return f"fixed:{self.t_fixed:g}"
        return f"uniform:{self.t_min:g}:{self.t_max:g}"


@dataclass
class RunRecord:
    """Persisted result of one experiment run."""

    experiment: str           # forward | cyclic | linear_cycle
    protocol: str             # protocol name, or model name for linear cycles
    model: str
    tau_or_v: float           # tau for ramps, velocity for linear cycles
    beta_f: float
    cd_order: int
    wait_kind: str
    seed: int
    n: int
    dt: float
    final_energies: np.ndarray
    stats: EnergyStats
    wallclock_s: float
    config: dict
    config_hash: str

    def manifest(self) -> dict:
        return {
            "experiment": self.experiment,
            "protocol": self.protocol,
            "model": self.model,
            "tau_or_v": self.tau_or_v,
            "beta_f": self.beta_f,
            "cd_order": self.cd_order,
            "wait_kind": self.wait_kind,
            "seed": self.seed,
            "n": self.n,
            "dt": self.dt,
            "stats": {
                "mean": self.stats.mean,
                "variance": self.stats.variance,
                "count": self.stats.count,
                "std_error_of_variance": self.stats.std_error_of_variance,
            },
            "wallclock_s": self.wallclock_s,
            "config": self.config,
            "config_hash": self.config_hash,
            "versions": {"cdsim": __version__, "numpy": np.__version__},
        }

    def summary_row(self) -> dict:
        return {
            "experiment": self.experiment,
            "protocol": self.protocol,
            "tau_or_v": self.tau_or_v,
            "beta_f": self.beta_f,
            "cd_order": self.cd_order,
            "wait_kind": self.wait_kind,
            "n": self.n,
            "sigma2": self.stats.variance,
            "sigma2_err": self.stats.std_error_of_variance,
        }

    def save(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(self.manifest(), indent=2))
        with open(out / "energies.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trajectory", "final_energy"])
            for i, e in enumerate(self.final_energies):
                w.writerow([i, repr(float(e))])
        return out


SUMMARY_COLUMNS = ["experiment", "protocol", "tau_or_v", "beta_f", "cd_order",
                   "wait_kind", "n", "sigma2", "sigma2_err"]


def write_summary_csv(records: list[RunRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        w.writeheader()
        for rec in records:
            w.writerow(rec.summary_row())


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def derive_seed(base_seed: int, index: int) -> int:
    """Stable per-run seed for sweep members."""
    return int(np.random.SeedSequence((base_seed, index)).generate_state(1)[0])


def _record(experiment: str, protocol_name: str, model: ModelSpec,
            tau_or_v: float, beta_f: float, cd_order: int, wait_kind: str,
            seed: int, dt: float, energies: np.ndarray, t_start: float,
            config: dict) -> RunRecord:
    return RunRecord(
        experiment=experiment, protocol=protocol_name, model=model.name,
        tau_or_v=tau_or_v, beta_f=beta_f, cd_order=cd_order,
        wait_kind=wait_kind, seed=seed, n=energies.size, dt=dt,
        final_energies=energies, stats=stats_from_energies(energies),
        wallclock_s=time.perf_counter() - t_start,
        config=config, config_hash=config_hash(config),
    )


def _ramp_or_raise(pts, fld, schedule, t0, t1, dt):
    out, ok = _run_ramp(pts, fld, schedule, t0, t1, dt)
    bad = np.nonzero(ok == 0)[0]
    if bad.size:
        raise NonFinite(f"trajectory {bad[0]} left the finite range",
                        point_index=int(bad[0]))
    return out


def run_forward(protocol: ProtocolSpec, tau: float, cd_order: int = 0,
                n: int = DEFAULT_N, seed: int = 0,
                agp_table: Optional[AgpTable] = None,
                dt: Optional[float] = None,
                beta_f: Optional[float] = None,
                shell_width: Optional[float] = None) -> RunRecord:
    """Sample the initial shell, drive beta_i -> beta_f, report Var[H(beta_f)]."""
    t_start = time.perf_counter()
    if beta_f is not None:
        protocol = replace(protocol, beta_f=float(beta_f))
    if cd_order > 0 and agp_table is None:
        raise ValueError("cd_order > 0 requires an agp_table")
    model = protocol.model
    dt = default_dt(tau) if dt is None else dt
    schedule = protocol.forward_schedule(tau)
    ens = sample_shell(model, protocol.beta_i, protocol.E0, n, seed,
                       shell_width=shell_width)
    fld = compile_field(model, agp_table, cd_order)
    pts = _ramp_or_raise(ens.points, fld, schedule, 0.0, tau, dt)
    energies = model.hamiltonian(protocol.beta_f).evaluate_many(pts)
    config = {
        "experiment": "forward", "protocol": protocol.name, "tau": tau,
        "beta_i": protocol.beta_i, "beta_f": protocol.beta_f,
        "cd_order": cd_order, "n": n, "seed": seed, "dt": dt,
    }
    return _record("forward", protocol.name, model, tau, protocol.beta_f,
                   cd_order, "none", seed, dt, energies, t_start, config)


def run_cyclic(protocol: ProtocolSpec, tau: float, cd_order: int = 0,
               wait: Optional[WaitPolicy] = None, n: int = DEFAULT_N,
               seed: int = 0, agp_table: Optional[AgpTable] = None,
               dt: Optional[float] = None,
               shell_width: Optional[float] = None) -> RunRecord:
    """Forward ramp, per-trajectory hold at beta_f, reverse ramp;
    report Var[H(beta_i)]."""
    t_start = time.perf_counter()
    if cd_order > 0 and agp_table is None:
        raise ValueError("cd_order > 0 requires an agp_table")
    wait = WaitPolicy.uniform() if wait is None else wait
    model = protocol.model
    dt = default_dt(tau) if dt is None else dt
    forward = protocol.forward_schedule(tau)
    ens = sample_shell(model, protocol.beta_i, protocol.E0, n, seed,
                       shell_width=shell_width)
    fld = compile_field(model, agp_table, cd_order)
    pts = _ramp_or_raise(ens.points, fld, forward, 0.0, tau, dt)
    waits = wait.draw(seed, n)
    if waits.max() > 0.0:
        hold_fld = compile_static_field(model.hamiltonian(protocol.beta_f))
        pts, ok = _run_hold(pts, hold_fld, waits, BASE_DT)
        bad = np.nonzero(ok == 0)[0]
        if bad.size:
            raise NonFinite(f"trajectory {bad[0]} left the finite range",
                            point_index=int(bad[0]))
    pts = _ramp_or_raise(pts, fld, forward.reverse(), 0.0, tau, dt)
    energies = model.hamiltonian(protocol.beta_i).evaluate_many(pts)
    config = {
        "experiment": "cyclic", "protocol": protocol.name, "tau": tau,
        "beta_i": protocol.beta_i, "beta_f": protocol.beta_f,
        "cd_order": cd_order, "wait": wait.describe(), "n": n, "seed": seed,
        "dt": dt,
    }
    return _record("cyclic", protocol.name, model, tau, protocol.beta_f,
                   cd_order, wait.describe(), seed, dt, energies, t_start,
                   config)


def run_linear_cycle(model: ModelSpec, beta_f: float, v: float,
                     n: int = DEFAULT_N, seed: int = 0, E0: float = 1.0,
                     dt: Optional[float] = None) -> RunRecord:
    """Linear ramp 0 -> beta_f at speed v, immediate reverse, no wait;
    report Var[H(0)]."""
    t_start = time.perf_counter()
    if v <= 0.0 or beta_f <= 0.0:
        raise ValueError("need v > 0 and beta_f > 0")
    leg_tau = beta_f / v
    dt = default_dt(leg_tau) if dt is None else dt
    up = RampSchedule.linear(0.0, beta_f, leg_tau)
    ens = sample_shell(model, 0.0, E0, n, seed)
    fld = compile_field(model)
    pts = _ramp_or_raise(ens.points, fld, up, 0.0, leg_tau, dt)
    pts = _ramp_or_raise(pts, fld, up.reverse(), 0.0, leg_tau, dt)
    energies = model.hamiltonian(0.0).evaluate_many(pts)
    config = {
        "experiment": "linear_cycle", "model": model.name, "beta_f": beta_f,
        "v": v, "n": n, "seed": seed, "dt": dt, "E0": E0,
    }
    return _record("linear_cycle", model.name, model, v, beta_f, 0, "none",
                   seed, dt, energies, t_start, config)


@dataclass
class SweepResult:
    records: list[RunRecord] = field(default_factory=list)
    failures: list[tuple[dict, str]] = field(default_factory=list)  # (params, error)

    def save(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_summary_csv(self.records, out / "summary.csv")
        for k, rec in enumerate(self.records):
            rec.save(out / f"run_{k:03d}")
        if self.failures:
            (out / "failures.json").write_text(json.dumps(
                [{"params": p, "error": e} for p, e in self.failures], indent=2))
        return out


def sweep(axis: str, *, protocol: Optional[ProtocolSpec] = None,
          model: Optional[ModelSpec] = None, values=None, kind: str = "forward",
          tau: Optional[float] = None, cd_order: int = 0,
          wait: Optional[WaitPolicy] = None, n: int = DEFAULT_N,
          seed: int = 0, agp_table: Optional[AgpTable] = None,
          velocities=None, shell_width: Optional[float] = None) -> SweepResult:
    """One run per axis value; per-run failures are collected, not fatal.

    axis: "tau" (values = taus), "cd_order" (values = orders, needs tau),
    "beta_f" (forward runs at fixed tau), or "beta_f_v" (linear cycles over
    the cross product values x velocities).
    """
    if values is None or len(list(values)) == 0:
        raise ValueError("sweep needs a non-empty values list")
    values = list(values)
    result = SweepResult()

    def attempt(params: dict, fn):
        try:
            result.records.append(fn())
        except CdsimError as exc:
            result.failures.append((params, f"{type(exc).__name__}: {exc}"))

    runner = {"forward": run_forward, "cyclic": run_cyclic}
    idx = 0
    if axis == "tau":
        for tau_v in values:
            kwargs = dict(tau=float(tau_v), cd_order=cd_order, n=n,
                          seed=derive_seed(seed, idx), agp_table=agp_table,
                          shell_width=shell_width)
            if kind == "cyclic":
                kwargs["wait"] = wait
            attempt({"tau": tau_v}, lambda kw=kwargs: runner[kind](protocol, **kw))
            idx += 1
    elif axis == "cd_order":
        if tau is None:
            raise ValueError("cd_order sweep needs tau")
        for order in values:
            kwargs = dict(tau=float(tau), cd_order=int(order), n=n,
                          seed=derive_seed(seed, idx), agp_table=agp_table,
                          shell_width=shell_width)
            if kind == "cyclic":
                kwargs["wait"] = wait
            attempt({"cd_order": order}, lambda kw=kwargs: runner[kind](protocol, **kw))
            idx += 1
    elif axis == "beta_f":
        if tau is None:
            raise ValueError("beta_f sweep needs tau")
        for bf in values:
            attempt({"beta_f": bf},
                    lambda bf=bf, i=idx: run_forward(
                        protocol, float(tau), cd_order=cd_order, n=n,
                        seed=derive_seed(seed, i), agp_table=agp_table,
                        beta_f=float(bf), shell_width=shell_width))
            idx += 1
    elif axis == "beta_f_v":
        if model is None or velocities is None:
            raise ValueError("beta_f_v sweep needs model and velocities")
        for bf in values:
            for v in velocities:
                attempt({"beta_f": bf, "v": v},
                        lambda bf=bf, v=v, i=idx: run_linear_cycle(
                            model, float(bf), float(v), n=n,
                            seed=derive_seed(seed, i)))
                idx += 1
    elif axis == "wait_policy":
        if tau is None:
            raise ValueError("wait_policy sweep needs tau")
        for policy in values:
            attempt({"wait": policy.describe()},
                    lambda p=policy, i=idx: run_cyclic(
                        protocol, float(tau), cd_order=cd_order, wait=p, n=n,
                        seed=derive_seed(seed, i), agp_table=agp_table,
                        shell_width=shell_width))
            idx += 1
    else:
        raise ValueError(f"unknown sweep axis {axis!r}")
    return result
