"""Double-well potentials and the linearization at the wells.

Potentials are polynomials stored by ascending coefficients. The prototype
is the quartic ``W(s) = (s**2 - 1)**2 / 4``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ArgumentError, DomainError

PROTOTYPE_COEFFS = (0.25, 0.0, -0.5, 0.0, 0.25)


@dataclass(frozen=True)
class PotentialSpec:
    """A polynomial double well ``W(s) = sum_j coeffs[j] * s**j``.

    ``c_w`` is the declared quadratic-growth constant for ``W(s) >= c_w (s-1)^2``
    on ``s >= 0``; it is checked by sampling in :func:`validate_hypotheses`.
    """

    kind: str = "prototype"
    coefficients: tuple = PROTOTYPE_COEFFS
    c_w: float = 0.25

    def __post_init__(self):
        if self.kind not in ("prototype", "polynomial"):
            raise ArgumentError(f"potential kind must be 'prototype' or 'polynomial', got {self.kind!r}")
        coeffs = tuple(float(c) for c in self.coefficients)
        if self.kind == "prototype":
            coeffs = PROTOTYPE_COEFFS
        if len(coeffs) == 0 or not all(math.isfinite(c) for c in coeffs):
            raise ArgumentError("potential coefficients must be a non-empty list of finite numbers")
        if not self.c_w > 0:
            raise ArgumentError(f"c_w must be positive, got {self.c_w}")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "_derivs", (
            np.array(coeffs),
            P.polyder(coeffs, 1) if len(coeffs) > 1 else np.zeros(1),
            P.polyder(coeffs, 2) if len(coeffs) > 2 else np.zeros(1),
        ))

    @classmethod
    def prototype(cls, c_w=0.25):
        return cls("prototype", PROTOTYPE_COEFFS, c_w)

    @classmethod
    def polynomial(cls, coeffs, c_w=0.25):
        return cls("polynomial", tuple(coeffs), c_w)

    @classmethod
    def from_config(cls, block):
        """Build from a config table such as ``{kind = "prototype"}``."""
        block = dict(block or {})
        kind = block.pop("kind", "prototype")
        c_w = float(block.pop("c_w", 0.25))
        coeffs = block.pop("coeffs", block.pop("coefficients", PROTOTYPE_COEFFS))
        if block:
            raise ArgumentError(f"unknown potential keys: {sorted(block)}")
        return cls(kind, tuple(coeffs), c_w)

    def to_dict(self):
        return {"kind": self.kind, "coeffs": list(self.coefficients), "c_w": self.c_w}

    @property
    def w2_at_1(self):
        return float(self(1.0, 2))

    def __call__(self, s, order=0):
        if order not in (0, 1, 2):
            raise ArgumentError(f"potential derivative order must be 0, 1 or 2, got {order}")
        return P.polyval(s, self._derivs[order])


def eval_potential(spec: PotentialSpec, s, order: int = 0):
    """Return ``W(s)``, ``W'(s)`` or ``W''(s)`` for ``order`` 0, 1, 2."""
    return spec(s, order)


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "passed": self.passed,
            "hypotheses": {c.name: {"passed": c.passed, "margin": c.margin, "detail": c.detail}
                           for c in self.checks},
        }


def validate_hypotheses(spec: PotentialSpec, n_samples: int = 1000, s_max: float = 3.0,
                        tol: float = 1e-12) -> ValidationReport:
    """Sample-based check of the four double-well hypotheses: evenness,
    positivity away from the wells, zeros of W and W' at 1, and the quadratic
    lower bound ``W(s) >= c_w (s-1)^2``.

    Failures are reported, never raised. Margins are worst cases over the
    sample grid ``s in [0, s_max]``; a negative margin means failure.
    """
    if n_samples < 100:
        raise ArgumentError("n_samples must be at least 100")
    if s_max < 2:
        raise ArgumentError("s_max must be at least 2")
    s = np.linspace(0.0, s_max, n_samples)
    W = spec(s)
    scale = max(1.0, float(np.max(np.abs(W))))
    checks = []

    asym = float(np.max(np.abs(W - spec(-s))))
    checks.append(HypothesisCheck("w1", asym <= tol * scale, -asym,
                                  "max |W(s) - W(-s)| (polynomial, so C^5 holds)"))

    off = np.abs(s - 1.0) > 0.5 * (s[1] - s[0])
    wmin = float(np.min(W[off]))
    checks.append(HypothesisCheck("w2", wmin > 0, wmin, "min W(s) over s >= 0 away from s = 1"))

    w1, dw1 = float(spec(1.0)), float(spec(1.0, 1))
    worst = max(abs(w1), abs(dw1))
    exact = spec.kind == "prototype"
    ok3 = worst == 0.0 if exact else worst <= tol
    checks.append(HypothesisCheck("w3", ok3, -worst, f"W(1) = {w1:.3e}, W'(1) = {dw1:.3e}"))

    growth = W - spec.c_w * (s - 1.0) ** 2
    gmin = float(np.min(growth))
    ok4 = gmin >= -tol * scale and 0 < spec.c_w <= 1
    checks.append(HypothesisCheck("w4", ok4, gmin, f"min W(s) - c_w (s-1)^2 with c_w = {spec.c_w}"))

    w2 = spec.w2_at_1
    checks.append(HypothesisCheck("w2_at_1", w2 > 0, w2, "W''(1) > 0 for a hyperbolic well"))
    return ValidationReport(checks)


@dataclass(frozen=True)
class LinearizationConstants:
    """Decay rate ``gamma`` and frequency ``delta`` at the wells.

    ``roots`` are ordered ``(g + d i, -g - d i, g - d i, -g + d i)``.
    """

    gamma: float
    delta: float
    q: float
    roots: tuple
    w2_at_1: float = 2.0

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "delta": self.delta,
            "q": self.q,
            "w2_at_1": self.w2_at_1,
            "roots": [[r.real, r.imag] for r in self.roots],
        }


def _quartic_roots(q, w2):
    # 2 y^2 + 2 q y + w2 = 0 with y = r^2, then complex square roots
    disc = np.sqrt(complex(4 * q * q - 8 * w2))
    ys = ((-2 * q + disc) / 4, (-2 * q - disc) / 4)
    roots = []
    for y in ys:
        r = np.sqrt(y)
        roots.extend([r, -r])
    return roots


def linearization(spec: PotentialSpec, q: float, tol: float = 1e-10) -> LinearizationConstants:
    """Eigenvalues of the linearized Euler-Lagrange system at ``s = 1``.

    The closed form ``gamma = sqrt(sqrt(2 W''(1)) - q) / 2`` and
    ``delta = sqrt(sqrt(2 W''(1)) + q) / 2`` is reconciled against roots of
    ``2 r^4 + 2 q r^2 + W''(1)`` found independently.
    """
    w2 = spec.w2_at_1
    if not w2 > 0:
        raise DomainError(f"W''(1) = {w2} must be positive")
    bound = math.sqrt(2.0 * w2)
    if not q < bound:
        raise DomainError(f"q = {q} must satisfy q < sqrt(2 W''(1)) = {bound:.12g} for real gamma > 0")
    if not q > -bound:
        raise DomainError(f"q = {q} must satisfy q > -sqrt(2 W''(1)) = {-bound:.12g} for real delta")
    gamma = 0.5 * math.sqrt(bound - q)
    delta = 0.5 * math.sqrt(bound + q)
    closed = (complex(gamma, delta), complex(-gamma, -delta), complex(gamma, -delta), complex(-gamma, delta))

    numeric = _quartic_roots(q, w2)
    matched = []
    for c in closed:
        j = int(np.argmin([abs(c - r) for r in numeric]))
        r = numeric.pop(j)
        if abs(r - c) > tol:
            raise ArithmeticError(f"root {r} does not match closed form {c}")
        matched.append(r)
    for r in matched:
        if abs(2 * r**4 + 2 * q * r**2 + w2) > tol:
            raise ArithmeticError(f"root {r} does not solve the characteristic polynomial")
    return LinearizationConstants(gamma, delta, float(q), closed, w2)


@dataclass(frozen=True)
class SternbergReport:
    order_checked: int
    condition_holds: bool
    spectral_spread_plus: float
    spectral_spread_minus: float
    q_smoothness: int
    min_abs_resonance: float
    min_abs_real_resonance: float

    def to_dict(self):
        return {
            "order_checked": self.order_checked,
            "condition_holds": self.condition_holds,
            "spectral_spread_plus": self.spectral_spread_plus,
            "spectral_spread_minus": self.spectral_spread_minus,
            "q_smoothness": self.q_smoothness,
            "min_abs_resonance": self.min_abs_resonance,
            "min_abs_real_resonance": self.min_abs_real_resonance,
        }


def multi_indices(size, total):
    """All tuples of ``size`` non-negative integers summing to ``total``."""
    for cut in itertools.combinations(range(total + size - 1), size - 1):
        bounds = (-1,) + cut + (total + size - 1,)
        yield tuple(bounds[i + 1] - bounds[i] - 1 for i in range(size))


def q_smoothness(Q, rho_plus, rho_minus, has_plus=True, has_minus=True):
    """Largest ``K >= 0`` allowed by the spectral spreads for a given ``Q``."""
    def best(limit):
        return int(math.floor(limit + 1e-12))

    if has_plus and has_minus:
        return max(best(min(M / rho_plus, (Q - M) / rho_minus)) for M in range(1, Q))
    if has_minus:
        return best(Q / rho_minus)
    return best(Q / rho_plus)


def sternberg_check(consts: LinearizationConstants, order: int = 2, tol: float = 1e-12) -> SternbergReport:
    """Non-resonance check of order 2 and the resulting Q-smoothness."""
    if order != 2:
        raise ArgumentError(f"only order 2 is supported, got {order}")
    if not consts.gamma > 0:
        raise DomainError("gamma must be positive")
    lam = np.array(consts.roots, dtype=complex)
    min_abs = min_re = math.inf
    for m in multi_indices(len(lam), order):
        combo = np.dot(m, lam)
        res = lam - combo
        min_abs = min(min_abs, float(np.min(np.abs(res))))
        min_re = min(min_re, float(np.min(np.abs(res.real))))
    scale = float(np.max(np.abs(lam)))
    holds = min_abs > tol * scale and min_re > tol * scale

    re = lam.real
    plus, minus = np.abs(re[re > 0]), np.abs(re[re < 0])
    rho_p = float(plus.max() / plus.min()) if plus.size else math.nan
    rho_m = float(minus.max() / minus.min()) if minus.size else math.nan
    K = q_smoothness(order, rho_p, rho_m, plus.size > 0, minus.size > 0)
    return SternbergReport(order, bool(holds), rho_p, rho_m, K, min_abs, min_re)
