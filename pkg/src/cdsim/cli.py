"""Command-line entry point: run experiments from TOML configs, tabulate
gauge-potential coefficients, emit prediction tables, and self-check.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import agp as agp_mod
from . import experiments as exp
from .errors import CdsimError, ConfigError, OutOfRange
from .models import ModelSpec, ProtocolSpec, get_model, get_protocol
from .swtheory import prediction_rows

_RUN_KEYS = {
    "": {"kind", "label", "protocol", "model", "n", "seed", "tau", "cd_order",
         "beta_f", "velocity", "dt", "shell_width", "e0"},
    "wait": {"kind", "t_fixed", "t_min", "t_max"},
    "cd": {"grid_size", "reference_tau", "ref_n", "mu", "table"},
    "sweep": {"axis", "values", "velocities"},
    "output": {"dir", "dump_trajectories"},
}

_AGP_KEYS = {
    "": {"protocol", "model", "beta_i", "beta_f", "order", "grid_size",
         "reference_tau", "ref_n", "mu", "seed", "label", "eval_beta"},
    "output": {"dir"},
}


def _validate_keys(doc: dict, schema: dict[str, set], where: str = "") -> None:
    """Unknown keys are a hard error, naming the offender."""
    allowed = schema.get(where, set())
    sections = {k for k in schema if k}
    for key, value in doc.items():
        if where == "" and key in sections:
            if not isinstance(value, dict):
                raise ConfigError(f"section [{key}] must be a table")
            _validate_keys(value, schema, key)
        elif key not in allowed:
            place = f"[{where}] " if where else ""
            raise ConfigError(f"unknown config key {place}{key!r}")


def _load_config(path: str, schema: dict[str, set]) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        doc = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    _validate_keys(doc, schema)
    return doc


def _wait_policy(doc: dict) -> exp.WaitPolicy:
    sec = doc.get("wait", {})
    kind = sec.get("kind", "uniform")
    if kind == "none":
        return exp.WaitPolicy.none()
    if kind == "fixed":
        if "t_fixed" not in sec:
            raise ConfigError("[wait] kind='fixed' needs t_fixed")
        return exp.WaitPolicy.fixed(float(sec["t_fixed"]))
    if kind == "uniform":
        return exp.WaitPolicy.uniform(float(sec.get("t_min", 0.0)),
                                      float(sec.get("t_max", exp.DEFAULT_WAIT_MAX)))
    raise ConfigError(f"unknown wait kind {kind!r}")


def _resolve_protocol(doc: dict) -> ProtocolSpec:
    if "protocol" not in doc:
        raise ConfigError("config needs a 'protocol' name")
    try:
        return get_protocol(doc["protocol"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from None


def _resolve_model(doc: dict) -> ModelSpec:
    if "model" not in doc:
        raise ConfigError("config needs a 'model' name")
    try:
        return get_model(doc["model"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from None


def _ensure_agp_table(doc: dict, protocol: ProtocolSpec, order: int, seed: int):
    sec = doc.get("cd", {})
    if "table" in sec:
        return agp_mod.AgpTable.load(sec["table"])
    mu = sec.get("mu", "auto")
    return agp_mod.tabulate(
        protocol.model, protocol, order,
        grid_size=int(sec.get("grid_size", agp_mod.DEFAULT_GRID_SIZE)),
        mu=None if mu == "auto" else float(mu),
        reference_tau=float(sec.get("reference_tau", agp_mod.DEFAULT_REFERENCE_TAU)),
        n_ref=int(sec.get("ref_n", doc.get("n", exp.DEFAULT_N))),
        seed=seed,
    )


def _dump_trajectories(doc: dict, protocol, table, cd_order, out_dir: Path,
                       n_traj: int = 3) -> None:
    """Strided (t, x, y, px, py, H) debug dump of the first few forward
    trajectories."""
    import csv

    from .dynamics import EvolutionPlan, default_dt, trajectory_samples
    from .ensemble import sample_shell
    from .polyalg import PhasePoint

    tau = float(doc["tau"])
    schedule = protocol.forward_schedule(tau)
    plan = EvolutionPlan(protocol.model, schedule, table, cd_order,
                         float(doc.get("dt") or default_dt(tau)))
    ens = sample_shell(protocol.model, protocol.beta_i, protocol.E0,
                       max(n_traj, 2), int(doc.get("seed", 0)))
    times = np.linspace(0.0, tau, 201)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "trajectories.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trajectory", "t", "x", "y", "px", "py", "H"])
        for k in range(n_traj):
            rows = trajectory_samples(PhasePoint(*ens.points[k]), plan, times)
            for row in rows:
                w.writerow([k] + [repr(float(v)) for v in row])


def run_config(doc: dict, out_root: Path, dump_trajectories: bool = False) -> Path:
    """Execute one validated run config; returns the output directory."""
    kind = doc.get("kind")
    if kind not in ("forward", "cyclic", "linear_cycle"):
        raise ConfigError("kind must be forward, cyclic, or linear_cycle")
    label = doc.get("label", "run")
    n = int(doc.get("n", exp.DEFAULT_N))
    seed = int(doc.get("seed", 0))
    out_dir = out_root / kind / label

    sweep_sec = doc.get("sweep")
    if kind == "linear_cycle":
        model = _resolve_model(doc)
        if sweep_sec is not None:
            if sweep_sec.get("axis", "beta_f_v") != "beta_f_v":
                raise ConfigError("linear_cycle sweeps use axis = 'beta_f_v'")
            res = exp.sweep("beta_f_v", model=model, values=sweep_sec["values"],
                            velocities=sweep_sec.get("velocities",
                                                     [doc.get("velocity", 0.1)]),
                            n=n, seed=seed)
        else:
            rec = exp.run_linear_cycle(model, float(doc["beta_f"]),
                                       float(doc["velocity"]), n=n, seed=seed)
            res = exp.SweepResult(records=[rec])
        return _finish(res, out_dir)

    protocol = _resolve_protocol(doc)
    cd_order = int(doc.get("cd_order", 0))
    max_order = cd_order
    if sweep_sec is not None and sweep_sec.get("axis") == "cd_order":
        values = sweep_sec.get("values") or []
        max_order = max([max_order] + [int(v) for v in values])
    table = _ensure_agp_table(doc, protocol, max_order, seed) \
        if max_order > 0 else None
    wait = _wait_policy(doc) if kind == "cyclic" else None
    common = dict(protocol=protocol, kind=kind, cd_order=cd_order, n=n,
                  seed=seed, agp_table=table, wait=wait,
                  shell_width=doc.get("shell_width"))

    if sweep_sec is not None:
        axis = sweep_sec.get("axis")
        if axis is None:
            raise ConfigError("[sweep] needs an axis")
        values = sweep_sec.get("values")
        if axis == "wait_policy":
            values = [_wait_policy({"wait": {"kind": v}}) if isinstance(v, str)
                      else v for v in values]
        res = exp.sweep(axis, values=values, tau=doc.get("tau"), **common)
    else:
        if "tau" not in doc:
            raise ConfigError("single runs need 'tau'")
        kwargs = dict(tau=float(doc["tau"]), cd_order=cd_order, n=n, seed=seed,
                      agp_table=table, shell_width=doc.get("shell_width"))
        if doc.get("dt"):
            kwargs["dt"] = float(doc["dt"])
        if kind == "cyclic":
            rec = exp.run_cyclic(protocol, wait=wait, **kwargs)
        else:
            if doc.get("beta_f") is not None:
                kwargs["beta_f"] = float(doc["beta_f"])
            rec = exp.run_forward(protocol, **kwargs)
        res = exp.SweepResult(records=[rec])
    if dump_trajectories and "tau" in doc:
        _dump_trajectories(doc, protocol, table, cd_order, out_dir)
    return _finish(res, out_dir)


def _finish(res: exp.SweepResult, out_dir: Path) -> Path:
    out = res.save(out_dir)
    for rec in res.records:
        s = rec.stats
        print(f"{rec.experiment} {rec.protocol} tau_or_v={rec.tau_or_v:g} "
              f"beta_f={rec.beta_f:g} l={rec.cd_order} n={rec.n}: "
              f"sigma2 = {s.variance:.6e} +- {s.std_error_of_variance:.1e}")
    for params, err in res.failures:
        print(f"FAILED {params}: {err}", file=sys.stderr)
    print(f"wrote {out}")
    return out


def run_from_manifest(manifest_path: str | Path) -> exp.RunRecord:
    """Re-execute the run recorded in a manifest (round-trip check)."""
    doc = json.loads(Path(manifest_path).read_text())
    cfg = doc["config"]
    kind = cfg["experiment"]
    if kind == "forward":
        return exp.run_forward(get_protocol(cfg["protocol"]), cfg["tau"],
                               cd_order=cfg["cd_order"], n=cfg["n"],
                               seed=cfg["seed"], dt=cfg["dt"],
                               beta_f=cfg["beta_f"])
    if kind == "cyclic":
        wk = cfg["wait"].split(":")
        wait = {"none": lambda: exp.WaitPolicy.none(),
                "fixed": lambda: exp.WaitPolicy.fixed(float(wk[1])),
                "uniform": lambda: exp.WaitPolicy.uniform(float(wk[1]), float(wk[2])),
                }[wk[0]]()
        return exp.run_cyclic(get_protocol(cfg["protocol"]), cfg["tau"],
                              cd_order=cfg["cd_order"], wait=wait, n=cfg["n"],
                              seed=cfg["seed"], dt=cfg["dt"])
    if kind == "linear_cycle":
        return exp.run_linear_cycle(get_model(cfg["model"]), cfg["beta_f"],
                                    cfg["v"], n=cfg["n"], seed=cfg["seed"],
                                    E0=cfg["E0"], dt=cfg["dt"])
    raise ConfigError(f"manifest has unknown experiment kind {kind!r}")


def cmd_run(args) -> int:
    doc = _load_config(args.config, _RUN_KEYS)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.n is not None:
        doc["n"] = args.n
    if args.label:
        doc["label"] = args.label
    out_root = Path(args.out or doc.get("output", {}).get("dir", "out"))
    dump = args.dump_trajectories or bool(
        doc.get("output", {}).get("dump_trajectories", False))
    run_config(doc, out_root, dump_trajectories=dump)
    return 0


def cmd_agp(args) -> int:
    doc = _load_config(args.config, _AGP_KEYS)
    seed = int(doc.get("seed", 0))
    order = int(doc.get("order", 3))
    if "protocol" in doc:
        protocol = _resolve_protocol(doc)
        model = protocol.model
    else:
        model = _resolve_model(doc)
        if "beta_i" not in doc or "beta_f" not in doc:
            raise ConfigError("model-based agp config needs beta_i and beta_f")
        protocol = ProtocolSpec(model.name, model, float(doc["beta_i"]),
                                float(doc["beta_f"]))
    mu = doc.get("mu", "auto")
    table = agp_mod.tabulate(
        model, protocol, order,
        grid_size=int(doc.get("grid_size", agp_mod.DEFAULT_GRID_SIZE)),
        mu=None if mu == "auto" else float(mu),
        reference_tau=float(doc.get("reference_tau", agp_mod.DEFAULT_REFERENCE_TAU)),
        n_ref=int(doc.get("ref_n", exp.DEFAULT_N)),
        seed=seed,
    )
    out_root = Path(args.out or doc.get("output", {}).get("dir", "out"))
    out_dir = out_root / "agp" / doc.get("label", protocol.name)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "agp_table.json"
    table.save(path)
    for sol in table.solutions_at(order):
        print(f"beta={sol.beta:.4f} action={sol.action_value:.6e} "
              f"residual={sol.residual_norm:.6e} mu={sol.mu:.3e} "
              f"cond={sol.cond:.2e}")
    for b in doc.get("eval_beta", []):
        poly = table.agp_polynomial(float(b))  # OutOfRange -> exit 2
        print(f"A(beta={b}): {len(poly)} terms")
    print(f"wrote {path}")
    return 0


def cmd_predict(args) -> int:
    model = get_model(args.model)
    if args.log:
        betas = np.geomspace(args.beta_min, args.beta_max, args.num)
    else:
        betas = np.linspace(args.beta_min, args.beta_max, args.num)
    rows = prediction_rows(model, betas)
    out = Path(args.out) if args.out else None
    lines = ["model,beta,sigma2_sw"]
    lines += [f"{model.name},{b!r},{s!r}" for b, s in rows]
    text = "\n".join(lines) + "\n"
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_check(args) -> int:
    from .selfcheck import run_selfcheck
    return run_selfcheck(fast=args.fast)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdsim",
        description="Driven nonlinear-oscillator reversibility experiments",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap the numba worker count")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--n", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--label", default=None)
    p_run.add_argument("--dump-trajectories", action="store_true",
                       help="also write a strided trajectory CSV for debugging")
    p_run.set_defaults(fn=cmd_run)

    p_agp = sub.add_parser("agp", help="tabulate gauge-potential coefficients")
    p_agp.add_argument("config")
    p_agp.add_argument("--out", default=None)
    p_agp.set_defaults(fn=cmd_agp)

    p_pred = sub.add_parser("predict", help="emit slow-limit variance table")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--beta-min", type=float, default=0.01)
    p_pred.add_argument("--beta-max", type=float, default=1.0)
    p_pred.add_argument("--num", type=int, default=50)
    p_pred.add_argument("--log", action="store_true")
    p_pred.add_argument("--out", default=None)
    p_pred.set_defaults(fn=cmd_predict)

    p_check = sub.add_parser("check", help="run the invariant/oracle suite")
    p_check.add_argument("--fast", action="store_true")
    p_check.set_defaults(fn=cmd_check)

    args = parser.parse_args(argv)
    if args.threads:
        import numba
        numba.set_num_threads(max(1, args.threads))
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CdsimError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
