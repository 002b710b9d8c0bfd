"""The second-order energy and its rescaled one-dimensional form.

On the torus, gradient and Hessian terms are evaluated by Parseval with the
same wavenumber symbols the flow uses, so the discrete energy is exactly the
Lyapunov functional of the discrete flow. On intervals the energy is the
finite-difference functional

    h * sum(w_i W(u_i)) / eps - eps q h * sum(((u_{i+1} - u_i) / h)^2)
        + eps^3 h * sum(((u_{i+1} - 2 u_i + u_{i-1}) / h^2)^2)

with trapezoid weights ``w`` and second differences at interior nodes only,
so free endpoints pick up the natural condition ``u'' = 0`` by themselves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DomainError
from .field import Field, derivative

RESOLUTION_FLOOR = 8.0


class UnderResolvedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EnergyParams:
    epsilon: float
    q: float = 0.1

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ArgumentError(f"epsilon must be positive, got {self.epsilon}")
        if not math.isfinite(self.q):
            raise ArgumentError(f"q must be finite, got {self.q}")

    def check(self, spec):
        bound = math.sqrt(2.0 * spec.w2_at_1)
        if not self.q < bound:
            raise DomainError(f"q = {self.q} must be below sqrt(2 W''(1)) = {bound:.12g}")
        return self

    def with_epsilon(self, epsilon):
        return EnergyParams(epsilon, self.q)

    def to_dict(self):
        return {"epsilon": self.epsilon, "q": self.q}


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    potential_term: float
    gradient_term: float
    hessian_term: float

    def to_dict(self):
        return {
            "total": self.total,
            "potential_term": self.potential_term,
            "gradient_term": self.gradient_term,
            "hessian_term": self.hessian_term,
        }


def _breakdown(pot, grad, hess):
    return EnergyBreakdown(pot + grad + hess, pot, grad, hess)


# --- torus -------------------------------------------------------------------

def torus_quadratic_forms(u, length=1.0):
    """Return (int u_x^2, int u_xx^2) on a periodic grid via Parseval."""
    n = u.size
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    mult = np.full(k.size, 2.0)
    mult[0] = 1.0
    if n % 2 == 0:
        mult[-1] = 1.0
    power = mult * np.abs(np.fft.rfft(u)) ** 2 * (length / n**2)
    k2 = k * k
    return float(np.sum(k2 * power)), float(np.sum(k2 * k2 * power))


def torus_energy(u, eps, q, spec, length=1.0):
    pot = float(np.mean(spec(u))) * length / eps
    g2, h2 = torus_quadratic_forms(u, length)
    return _breakdown(pot, -eps * q * g2, eps**3 * h2)


# --- interval ----------------------------------------------------------------

class IntervalEnergy:
    """Finite-difference energy on ``n`` equispaced nodes with spacing ``h``.

    Also provides the gradient with respect to nodal values and the
    pentadiagonal Hessian in the upper banded layout of
    :func:`scipy.linalg.solveh_banded`.
    """

    def __init__(self, n, h, eps, q, spec):
        self.n, self.h, self.eps, self.q, self.spec = n, h, eps, q, spec
        w = np.ones(n)
        w[0] = w[-1] = 0.5
        self.w = w
        self.c_pot = h / eps
        self.c_grad = eps * q / h
        self.c_hess = eps**3 / h**3

    def terms(self, u):
        d1 = np.diff(u)
        d2 = u[2:] - 2.0 * u[1:-1] + u[:-2]
        pot = self.c_pot * float(np.dot(self.w, self.spec(u)))
        grad = -self.c_grad * float(np.dot(d1, d1))
        hess = self.c_hess * float(np.dot(d2, d2))
        return _breakdown(pot, grad, hess)

    def value(self, u):
        return self.terms(u).total

    def gradient(self, u):
        d1 = np.diff(u)
        d2 = u[2:] - 2.0 * u[1:-1] + u[:-2]
        g = self.c_pot * self.w * self.spec(u, 1)
        # D1^T d1
        t1 = np.zeros_like(u)
        t1[:-1] -= d1
        t1[1:] += d1
        # D2^T d2
        t2 = np.zeros_like(u)
        t2[:-2] += d2
        t2[1:-1] -= 2.0 * d2
        t2[2:] += d2
        return g - 2.0 * self.c_grad * t1 + 2.0 * self.c_hess * t2

    def hessian_bands(self, u):
        """Rows (diag+2, diag+1, diag) of the symmetric Hessian, upper form."""
        n = self.n
        # D1^T D1: tridiagonal (1, 2, ..., 2, 1) with -1 off-diagonal
        a1_diag = np.full(n, 2.0)
        a1_diag[0] = a1_diag[-1] = 1.0
        a1_off = -np.ones(n - 1)
        # D2^T D2: pentadiagonal; rows of D2 cover nodes 1..n-2
        a2_diag = np.full(n, 6.0)
        a2_diag[[0, -1]] = 1.0
        a2_diag[[1, -2]] = 5.0
        a2_off1 = np.full(n - 1, -4.0)
        a2_off1[[0, -1]] = -2.0
        a2_off2 = np.ones(n - 2)
        diag = self.c_pot * self.w * self.spec(u, 2) - 2 * self.c_grad * a1_diag + 2 * self.c_hess * a2_diag
        off1 = -2 * self.c_grad * a1_off + 2 * self.c_hess * a2_off1
        off2 = 2 * self.c_hess * a2_off2
        ab = np.zeros((3, n))
        ab[0, 2:] = off2
        ab[1, 1:] = off1
        ab[2] = diag
        return ab

    def el_residual(self, u):
        """Strong-form residual ``2 eps^4 u'''' + 2 q eps^2 u'' + W'(u)``.

        Equals ``eps * gradient / (h w)``; exact for the five-point stencil at
        nodes 2..n-3, and including the natural-condition ghost value at the
        nodes next to the ends.
        """
        return self.eps * self.gradient(u) / (self.h * self.w)


def _check_resolution(f, eps):
    res = eps / f.grid.h
    if res < RESOLUTION_FLOOR:
        warnings.warn(f"field under-resolved: eps/h = {res:.3g} < {RESOLUTION_FLOOR}",
                      UnderResolvedWarning, stacklevel=3)


def energy_eps(f: Field, p: EnergyParams, spec) -> EnergyBreakdown:
    """Second-order energy ``int W(u)/eps - eps q u_x^2 + eps^3 u_xx^2``."""
    _check_resolution(f, p.epsilon)
    g = f.grid
    if g.periodic:
        return torus_energy(f.samples, p.epsilon, p.q, spec, g.length)
    return IntervalEnergy(g.n, g.h, p.epsilon, p.q, spec).terms(f.samples)


def energy_rescaled(f: Field, q: float, spec) -> EnergyBreakdown:
    """Rescaled energy ``int W(v) - q (v')^2 + (v'')^2`` on an interval."""
    g = f.grid
    if g.periodic:
        raise ArgumentError("the rescaled energy is defined on intervals, not on the torus")
    return IntervalEnergy(g.n, g.h, 1.0, q, spec).terms(f.samples)


def interpolation_margin(f: Field, p: EnergyParams, spec) -> float:
    """``int (W(u) + eps^4 u''^2) - q eps^2 int u'^2``; nonnegative certifies the inequality."""
    g = f.grid
    eps = p.epsilon
    if eps > g.length:
        raise ArgumentError(f"epsilon = {eps} exceeds the domain length {g.length}")
    if g.periodic:
        pot = float(np.mean(spec(f.samples))) * g.length
        g2, h2 = torus_quadratic_forms(f.samples, g.length)
    else:
        e = IntervalEnergy(g.n, g.h, 1.0, 1.0, spec).terms(f.samples)
        pot, g2, h2 = e.potential_term, -e.gradient_term, e.hessian_term
    return pot + eps**4 * h2 - p.q * eps**2 * g2


def bad_set_measure(f: Field, p: EnergyParams, delta: float) -> float:
    """Measure of ``{dist(u, {-1, 1}) >= delta or |eps u'| >= delta}``."""
    if not 0 < delta < 1:
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    u = f.samples
    du = derivative(f, 1).samples
    bad = (np.abs(np.abs(u) - 1.0) >= delta) | (np.abs(p.epsilon * du) >= delta)
    return float(np.sum(f.grid.weights[bad]))
