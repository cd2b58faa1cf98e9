"""Analytic slow-limit energy-variance predictions and the quantum-block
oracle that converges to them.

The slow-limit variance of the final energy after adiabatically switching on
the perturbation beta*V is, to leading order in beta,

    sigma_E^2 = c * E0^4 / (m^4 omega^8) * beta^2

with c = 1/720 for the radial quartic family and c = 7/2880 for the x^2 y^2
family.  The independent oracle builds the non-oscillating (rotating-wave)
part V0 of the perturbation as a matrix on the degenerate block
|n_x, N - n_x> with a fictitious hbar = E0 / (omega N), and measures its
block variance; as N grows this converges to the classical coefficient with
O(1/N) corrections.

Note the variance must be connected: the block-averaged diagonal mean of V0
is nonzero (E0^2/3 for the radial quartic family), so the raw second moment
does not converge to the classical coefficient.  Both values are exposed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: leading-order variance coefficients per model family
SW_COEFFICIENTS = {
    "integrable": 1.0 / 720.0,
    "nonintegrable": 7.0 / 2880.0,
}


@dataclass(frozen=True)
class SwPrediction:
    model: str
    coefficient: float

    def variance(self, beta: float, E0: float = 1.0, m: float = 1.0,
                 omega: float = 1.0) -> float:
        return self.coefficient * E0 ** 4 / (m ** 4 * omega ** 8) * beta ** 2


def _model_name(model) -> str:
    name = getattr(model, "name", model)
    if name not in SW_COEFFICIENTS:
        raise KeyError(f"no slow-limit prediction for model {name!r}")
    return name


def sw_prediction(model) -> SwPrediction:
    name = _model_name(model)
    return SwPrediction(name, SW_COEFFICIENTS[name])


def sw_variance(model, beta: float, E0: float = 1.0, m: float = 1.0,
                omega: float = 1.0) -> float:
    """Leading-order O(beta^2) slow-limit energy variance."""
    if beta < 0.0:
        raise ValueError("beta must be >= 0")
    return sw_prediction(model).variance(beta, E0, m, omega)


def prediction_rows(model, betas) -> list[tuple[float, float]]:
    """(beta, sigma_E^2) rows for overlay CSVs."""
    pred = sw_prediction(model)
    return [(float(b), pred.variance(float(b))) for b in betas]


@dataclass(frozen=True)
class QuantumBlockSpec:
    """One degenerate block n_x + n_y = N with a fictitious hbar.

    hbar_eff * N is pinned to the classical action scale n = E0 / omega.
    """

    N: int
    model: str
    E0: float = 1.0
    m: float = 1.0
    omega: float = 1.0
    hbar_eff: float = field(default=0.0)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        _model_name(self.model)
        if self.hbar_eff == 0.0:
            object.__setattr__(self, "hbar_eff", self.E0 / (self.omega * self.N))


def block_matrix(spec: QuantumBlockSpec) -> np.ndarray:
    """V0 on the block basis |n_x, N - n_x>, n_x = 0..N.

    Diagonal entries are polynomial in (n_x, n_y); the (a_x^dag)^2 a_y^2 +
    h.c. hopping couples n_x <-> n_x +/- 2 with the standard ladder factors.
    """
    n_tot = spec.N
    pref = spec.hbar_eff ** 2 / (8.0 * spec.m ** 2 * spec.omega ** 2)
    nx = np.arange(n_tot + 1, dtype=np.float64)
    ny = n_tot - nx
    if spec.model == "integrable":
        diag = 3.0 * nx ** 2 + 3.0 * ny ** 2 + 4.0 * nx * ny \
            + 5.0 * nx + 5.0 * ny + 4.0
    else:
        diag = 4.0 * nx * ny + 2.0 * nx + 2.0 * ny + 1.0
    mat = np.diag(diag)
    k = np.arange(n_tot - 1, dtype=np.float64)  # couples n_x = k -> k + 2
    hop = np.sqrt((k + 1.0) * (k + 2.0) * (n_tot - k) * (n_tot - k - 1.0))
    mat[(np.arange(n_tot - 1) + 2, np.arange(n_tot - 1))] = hop
    mat[(np.arange(n_tot - 1), np.arange(n_tot - 1) + 2)] = hop
    return pref * mat


@dataclass(frozen=True)
class BlockMoments:
    second_moment: float  # block-averaged <V0^2>
    mean: float           # block-averaged diagonal <V0>
    connected: float      # second_moment - mean^2


def quantum_block_moments(spec: QuantumBlockSpec) -> BlockMoments:
    v0 = block_matrix(spec)
    dim = v0.shape[0]
    second = float(np.trace(v0 @ v0)) / dim
    mean = float(np.trace(v0)) / dim
    return BlockMoments(second, mean, second - mean * mean)


def quantum_block_variance(spec: QuantumBlockSpec) -> float:
    """Connected block variance of V0 (converges to the classical coefficient)."""
    return quantum_block_moments(spec).connected
