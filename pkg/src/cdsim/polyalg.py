"""Exact sparse polynomial algebra over the phase-space variables (x, y, p_x, p_y).

Polynomials are stored as a map from exponent quadruples to float coefficients,
kept in a canonical form: graded-lexicographic term order, no zero terms, and
rounding residue (relative magnitude below ``COEFF_FLOOR``) dropped.  All
operations are pure and values are immutable, so they can be shared freely.

The Poisson bracket uses the convention

    {A, B} = dA/dx dB/dpx - dA/dpx dB/dx + dA/dy dB/dpy - dA/dpy dB/dy

so that zdot = {z, H} reproduces Hamilton's equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from ._kernels import eval_terms
from .errors import DegreeOverflow

VARIABLES = ("x", "y", "px", "py")
_VAR_INDEX = {name: k for k, name in enumerate(VARIABLES)}

# Momentum indices pair with position indices (x, px) and (y, py).
_CANONICAL_PAIRS = ((0, 2), (1, 3))

DEFAULT_DEGREE_CAP = 40
COEFF_FLOOR = 1e-15

Exponents = tuple[int, int, int, int]


@dataclass(frozen=True)
class PhasePoint:
    """A single phase-space point (m = omega = 1 units)."""

    x: float
    y: float
    px: float
    py: float

    def __post_init__(self):
        for name in VARIABLES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"PhasePoint component {name} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.px, self.py], dtype=float)


def _grlex(exps: Exponents) -> tuple[int, Exponents]:
    return (exps[0] + exps[1] + exps[2] + exps[3], exps)


def _canonicalize(terms: dict[Exponents, float]) -> dict[Exponents, float]:
    """Drop zeros and rounding residue; return terms in graded-lex order."""
    if not terms:
        return {}
    largest = max(abs(c) for c in terms.values())
    if largest == 0.0:
        return {}
    floor = COEFF_FLOOR * largest
    return {
        e: c
        for e in sorted(terms, key=_grlex)
        if (c := terms[e]) != 0.0 and abs(c) >= floor
    }


class PhasePolynomial:
    """Immutable sparse polynomial in (x, y, px, py)."""

    __slots__ = ("_terms", "_packed")

    def __init__(self, terms: Mapping[Exponents, float] | None = None):
        mapping: dict[Exponents, float] = {}
        if terms:
            for exps, coef in terms.items():
                key = tuple(int(e) for e in exps)
                if len(key) != 4 or any(e < 0 for e in key):
                    raise ValueError(f"bad exponent quadruple {exps!r}")
                mapping[key] = mapping.get(key, 0.0) + float(coef)
        object.__setattr__(self, "_terms", _canonicalize(mapping))
        object.__setattr__(self, "_packed", None)

    # -- construction ------------------------------------------------------

    @classmethod
    def zero(cls) -> "PhasePolynomial":
        return cls()

    @classmethod
    def constant(cls, value: float) -> "PhasePolynomial":
        return cls({(0, 0, 0, 0): value})

    @classmethod
    def variable(cls, name: str) -> "PhasePolynomial":
        exps = [0, 0, 0, 0]
        exps[_VAR_INDEX[name]] = 1
        return cls({tuple(exps): 1.0})

    @classmethod
    def monomial(cls, exps: Iterable[int], coef: float) -> "PhasePolynomial":
        return cls({tuple(exps): coef})

    # -- inspection ----------------------------------------------------------

    @property
    def terms(self) -> dict[Exponents, float]:
        """Canonically ordered copy of the term map."""
        return dict(self._terms)

    def coefficient(self, exps: Iterable[int]) -> float:
        return self._terms.get(tuple(exps), 0.0)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[Exponents, float]]:
        return iter(self._terms.items())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhasePolynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "PhasePolynomial(0)"
        bits = []
        for exps, coef in self._terms.items():
            mono = "*".join(
                f"{v}^{e}" if e > 1 else v
                for v, e in zip(VARIABLES, exps)
                if e > 0
            )
            bits.append(f"{coef:+g}" + (f"*{mono}" if mono else ""))
        return f"PhasePolynomial({' '.join(bits)})"

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other) -> "PhasePolynomial":
        if isinstance(other, (int, float)):
            other = PhasePolynomial.constant(float(other))
        if not isinstance(other, PhasePolynomial):
            return NotImplemented
        out = dict(self._terms)
        for exps, coef in other._terms.items():
            out[exps] = out.get(exps, 0.0) + coef
        return PhasePolynomial(out)

    __radd__ = __add__

    def __neg__(self) -> "PhasePolynomial":
        return PhasePolynomial({e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> "PhasePolynomial":
        if isinstance(other, (int, float)):
            other = PhasePolynomial.constant(float(other))
        if not isinstance(other, PhasePolynomial):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "PhasePolynomial":
        return (-self) + other

    def __mul__(self, other) -> "PhasePolynomial":
        if isinstance(other, (int, float)):
            scale = float(other)
            return PhasePolynomial({e: c * scale for e, c in self._terms.items()})
        if not isinstance(other, PhasePolynomial):
            return NotImplemented
        return multiply(self, other)

    __rmul__ = __mul__

    # -- serialization -------------------------------------------------------

    def to_terms_list(self) -> list[list[float]]:
        """Canonical [e_x, e_y, e_px, e_py, coefficient] records."""
        return [[*exps, coef] for exps, coef in self._terms.items()]

    @classmethod
    def from_terms_list(cls, records: Iterable[Iterable[float]]) -> "PhasePolynomial":
        terms: dict[Exponents, float] = {}
        for rec in records:
            *exps, coef = rec
            terms[tuple(int(e) for e in exps)] = float(coef)
        return cls(terms)

    # -- evaluation ----------------------------------------------------------

    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        """(exponents (m,4) int64, coefficients (m,)) in canonical order."""
        if self._packed is None:
            if self._terms:
                exps = np.array(list(self._terms.keys()), dtype=np.int64)
                coefs = np.array(list(self._terms.values()), dtype=np.float64)
            else:
                exps = np.zeros((0, 4), dtype=np.int64)
                coefs = np.zeros(0, dtype=np.float64)
            object.__setattr__(self, "_packed", (exps, coefs))
        return self._packed

    def evaluate(self, point: PhasePoint) -> float:
        acc = 0.0
        for exps, coef in self._terms.items():
            acc += (
                coef
                * point.x ** exps[0]
                * point.y ** exps[1]
                * point.px ** exps[2]
                * point.py ** exps[3]
            )
        return acc

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate on an (n, 4) array of phase-space points."""
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError("points must be an (n, 4) array")
        exps, coefs = self.packed()
        return eval_terms(
            exps, coefs, pts[:, 0].copy(), pts[:, 1].copy(),
            pts[:, 2].copy(), pts[:, 3].copy(),
        )

    # -- calculus ------------------------------------------------------------

    def partial(self, var: str | int) -> "PhasePolynomial":
        """Exact partial derivative with respect to one phase-space variable."""
        k = _VAR_INDEX[var] if isinstance(var, str) else int(var)
        out: dict[Exponents, float] = {}
        for exps, coef in self._terms.items():
            e = exps[k]
            if e == 0:
                continue
            lowered = list(exps)
            lowered[k] = e - 1
            out[tuple(lowered)] = coef * e
        return PhasePolynomial(out)

    def poisson_bracket(self, other: "PhasePolynomial",
                        max_degree: int | None = None) -> "PhasePolynomial":
        return poisson_bracket(self, other, max_degree)

    def reflect_momenta(self) -> "PhasePolynomial":
        """The polynomial composed with (px, py) -> (-px, -py)."""
        return PhasePolynomial(
            {e: (-c if (e[2] + e[3]) % 2 else c) for e, c in self._terms.items()}
        )

    def _order_key(self) -> tuple:
        return tuple(self._terms.items())


def add(a: PhasePolynomial, b: PhasePolynomial) -> PhasePolynomial:
    return a + b


def multiply(a: PhasePolynomial, b: PhasePolynomial,
             max_degree: int | None = None) -> PhasePolynomial:
    """Exact product; raises DegreeOverflow above the degree cap.

    The product degree is checked up front (over the reals the top homogeneous
    parts cannot cancel, so deg(ab) = deg(a) + deg(b)).
    """
    cap = DEFAULT_DEGREE_CAP if max_degree is None else max_degree
    if not a._terms or not b._terms:
        return PhasePolynomial.zero()
    if a.degree() + b.degree() > cap:
        raise DegreeOverflow(
            f"product degree {a.degree() + b.degree()} exceeds cap {cap}"
        )
    out: dict[Exponents, float] = {}
    for ea, ca in a._terms.items():
        for eb, cb in b._terms.items():
            key = (ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3])
            out[key] = out.get(key, 0.0) + ca * cb
    return PhasePolynomial(out)


def partial(a: PhasePolynomial, var: str | int) -> PhasePolynomial:
    return a.partial(var)


def _bracket_forward(a: PhasePolynomial, b: PhasePolynomial,
                     cap: int) -> PhasePolynomial:
    out = PhasePolynomial.zero()
    for q, p in _CANONICAL_PAIRS:
        out = out + multiply(a.partial(q), b.partial(p), cap)
        out = out - multiply(a.partial(p), b.partial(q), cap)
    return out


def poisson_bracket(a: PhasePolynomial, b: PhasePolynomial,
                    max_degree: int | None = None) -> PhasePolynomial:
    """{a, b} with the ordering above; exactly antisymmetric.

    The bracket is always computed with the canonically smaller operand first
    and negated when the caller's order is the other way round, so
    {a, b} + {b, a} cancels term-for-term at float level.
    """
    cap = DEFAULT_DEGREE_CAP if max_degree is None else max_degree
    ka, kb = a._order_key(), b._order_key()
    if ka == kb:
        return PhasePolynomial.zero()
    if ka < kb:
        return _bracket_forward(a, b, cap)
    return -_bracket_forward(b, a, cap)


# Shared building blocks -------------------------------------------------------

X = PhasePolynomial.variable("x")
Y = PhasePolynomial.variable("y")
PX = PhasePolynomial.variable("px")
PY = PhasePolynomial.variable("py")

#: angular momentum x*py - y*px
ANGULAR_MOMENTUM = multiply(X, PY) - multiply(Y, PX)
