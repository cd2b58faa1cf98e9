"""Microcanonical shell sampling and ensemble energy statistics.

Per-point RNG streams are derived from (seed, stream tag, point index) so
sampling is order-independent: point i of a given seed is the same no matter
how the loop is chunked or parallelized.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from ._kernels import eval_terms
from .errors import RejectionStall
from .models import HARMONIC_H0, ModelSpec
from .polyalg import PhasePolynomial

from .config_defaults import DEFAULTS

#: Default half-width factor of the rejection shell, relative to E0.
DEFAULT_SHELL_WIDTH_FACTOR = float(DEFAULTS["ensemble"]["shell_width_factor"])

_PROPOSAL_BATCH = 2048
_STALL_CAP = 4_000_000  # proposals per point before declaring the shell unreachable


@dataclass(frozen=True)
class EnsembleMeta:
    seed: int
    sampler: str
    model: str
    beta: float
    E0: float
    shell_width: float


@dataclass(frozen=True)
class Ensemble:
    """Phase-space points plus the provenance needed to reproduce them."""

    points: np.ndarray  # (n, 4) float64, read-only
    meta: EnsembleMeta

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError("points must be an (n, 4) array")
        if pts.shape[0] < 2:
            raise ValueError("an ensemble needs at least 2 points")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def with_points(self, points: np.ndarray, beta: float) -> "Ensemble":
        """Same provenance, new coordinates (used after evolution)."""
        meta = EnsembleMeta(
            seed=self.meta.seed, sampler=self.meta.sampler, model=self.meta.model,
            beta=beta, E0=self.meta.E0, shell_width=self.meta.shell_width,
        )
        return Ensemble(points=points, meta=meta)

    def energies(self, hamiltonian: PhasePolynomial) -> np.ndarray:
        return hamiltonian.evaluate_many(self.points)

    def save(self, path: str | Path) -> None:
        """CSV point dump plus a JSON metadata sidecar."""
        path = Path(path)
        header = "x,y,px,py"
        np.savetxt(path, self.points, delimiter=",", header=header, comments="")
        sidecar = path.with_suffix(path.suffix + ".meta.json")
        sidecar.write_text(json.dumps(asdict(self.meta), indent=2))


@dataclass(frozen=True)
class EnergyStats:
    mean: float
    variance: float  # unbiased (n-1 denominator)
    count: int
    std_error_of_variance: float  # jackknife


def point_rng(seed: int, tag: int, index: int) -> np.random.Generator:
    """The RNG stream owned by one (seed, tag, point) triple."""
    return np.random.default_rng((seed, tag, index))


def sample_harmonic_shell(E0: float, n: int, seed: int) -> Ensemble:
    """Uniform points on the 3-sphere x^2+y^2+px^2+py^2 = 2 E0.

    |grad H0| is constant on that sphere, so the uniform surface measure is
    exactly the microcanonical measure of the isotropic oscillator.
    """
    if E0 <= 0.0:
        raise ValueError("E0 must be positive")
    if n < 2:
        raise ValueError("need n >= 2")
    radius = math.sqrt(2.0 * E0)
    pts = np.empty((n, 4))
    for i in range(n):
        rng = point_rng(seed, 0, i)
        v = rng.standard_normal(4)
        norm = math.sqrt(v @ v)
        while norm == 0.0:  # probability-zero guard
            v = rng.standard_normal(4)
            norm = math.sqrt(v @ v)
        pts[i] = v * (radius / norm)
    meta = EnsembleMeta(seed=seed, sampler="harmonic_shell", model="",
                        beta=0.0, E0=E0, shell_width=0.0)
    return Ensemble(points=pts, meta=meta)


def sample_general_shell(model: ModelSpec, beta: float, E0: float, n: int,
                         shell_width: float, seed: int) -> Ensemble:
    """Rejection sampling of |H(beta) - E0| <= shell_width/2.

    Proposals are uniform in the box |x|,|y|,|px|,|py| <= sqrt(2 E0), which
    contains the shell because every term of both model families is
    non-negative, so each quadratic term alone is bounded by E0.
    """
    if shell_width <= 0.0:
        raise ValueError("shell_width must be positive for rejection sampling")
    if n < 2:
        raise ValueError("need n >= 2")
    h = model.hamiltonian(beta)
    if h.evaluate_many(np.zeros((1, 4)))[0] >= E0:
        raise ValueError("E0 is not reachable: min of H(beta) is not below E0")
    exps, coefs = h.packed()
    box = math.sqrt(2.0 * E0)
    half = 0.5 * shell_width
    pts = np.empty((n, 4))
    for i in range(n):
        rng = point_rng(seed, 0, i)
        used = 0
        while True:
            batch = rng.uniform(-box, box, size=(_PROPOSAL_BATCH, 4))
            vals = eval_terms(exps, coefs, batch[:, 0].copy(), batch[:, 1].copy(),
                              batch[:, 2].copy(), batch[:, 3].copy())
            hits = np.nonzero(np.abs(vals - E0) <= half)[0]
            if hits.size:
                pts[i] = batch[hits[0]]
                break
            used += _PROPOSAL_BATCH
            if used >= _STALL_CAP:
                raise RejectionStall(
                    f"point {i}: no acceptance in {used} proposals "
                    f"(rate < {1.0 / used:.1e}); shell_width too small or E0 unreachable"
                )
    meta = EnsembleMeta(seed=seed, sampler="box_rejection", model=model.name,
                        beta=beta, E0=E0, shell_width=shell_width)
    return Ensemble(points=pts, meta=meta)


def sample_shell(model: ModelSpec, beta: float, E0: float, n: int, seed: int,
                 shell_width: float | None = None) -> Ensemble:
    """Microcanonical sampler dispatch: exact shells where available.

    Order of preference: the model's own closed-form sampler, the exact
    3-sphere sampler at beta = 0 for the standard harmonic H0, then box
    rejection with the default shell width.
    """
    if model.shell_sampler is not None:
        pts = model.shell_sampler(beta, E0, n, seed)
        meta = EnsembleMeta(seed=seed, sampler=f"{model.name}_exact", model=model.name,
                            beta=beta, E0=E0, shell_width=0.0)
        return Ensemble(points=pts, meta=meta)
    if beta == 0.0 and model.H0 == HARMONIC_H0:
        ens = sample_harmonic_shell(E0, n, seed)
        meta = EnsembleMeta(seed=seed, sampler="harmonic_shell", model=model.name,
                            beta=0.0, E0=E0, shell_width=0.0)
        return Ensemble(points=ens.points, meta=meta)
    width = DEFAULT_SHELL_WIDTH_FACTOR * E0 if shell_width is None else shell_width
    return sample_general_shell(model, beta, E0, n, width, seed)


def stats_from_energies(values: np.ndarray) -> EnergyStats:
    """Mean, unbiased variance, and jackknife standard error of the variance.

    The leave-one-out variances are computed with the closed-form identity
    SS_i = SS - (v_i - mean)^2 * n/(n-1), so the jackknife costs O(n).
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if n < 2:
        raise ValueError("variance needs at least 2 values")
    mean = float(v.mean())
    d = v - mean
    ss = float(d @ d)
    variance = ss / (n - 1)
    if n < 3:
        return EnergyStats(mean, variance, n, 0.0)
    loo_ss = ss - d * d * (n / (n - 1.0))
    loo_var = loo_ss / (n - 2.0)
    centred = loo_var - loo_var.mean()
    se = math.sqrt((n - 1.0) / n * float(centred @ centred))
    return EnergyStats(mean, variance, n, se)


def energy_stats(ens: Ensemble, hamiltonian: PhasePolynomial) -> EnergyStats:
    return stats_from_energies(ens.energies(hamiltonian))
