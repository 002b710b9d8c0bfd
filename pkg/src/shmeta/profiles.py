"""Constrained minimizers of the energy on intervals and the experiments built on them.

All interval problems share one discretization: the finite-difference energy
of :class:`shmeta.energy.IntervalEnergy`, minimized over the unpinned nodes
by Newton's method with a banded (pentadiagonal) Hessian, a diagonal shift
whenever the Hessian is not positive definite, and Armijo backtracking.
Pinned nodes carry the boundary data; everything else, including the
natural condition ``w'' = 0`` at ends whose slope is free, comes out of the
discrete energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from .energy import EnergyParams, IntervalEnergy, bad_set_measure, energy_rescaled
from .errors import ArgumentError, ConvergenceError, DomainError, ResolutionError
from .field import Field, Grid, _fd_weights, find_zeros
from .potential import LinearizationConstants, linearization

ZERO_DIRICHLET = "zero-dirichlet"
CLAMPED = "clamped"

# Default spacing of rescaled grids: 64 nodes per unit of the layer variable x/eps.
RESCALED_H = 1.0 / 64


@dataclass(frozen=True)
class BoundaryData:
    """Offsets ``(value - well, slope)`` at the left (``alpha``) and right (``beta``) ends."""

    alpha: tuple = (0.0, 0.0)
    beta: tuple = (0.0, 0.0)
    well: int = -1

    def __post_init__(self):
        if self.well not in (1, -1):
            raise ArgumentError(f"well must be +1 or -1, got {self.well}")
        for name in ("alpha", "beta"):
            v = tuple(float(c) for c in getattr(self, name))
            if len(v) != 2 or not all(math.isfinite(c) for c in v):
                raise ArgumentError(f"{name} must be a finite pair")
            object.__setattr__(self, name, v)

    @property
    def size(self):
        return max(math.hypot(*self.alpha), math.hypot(*self.beta))


@dataclass
class MinimizerReport:
    energy: float
    iterations: int
    el_residual: float
    endpoint_curvature: float
    natural_residual: float
    newton_step: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class IntervalMinimizer:
    field: Field
    report: MinimizerReport
    params: EnergyParams
    constraint: str


def _newton(energy: IntervalEnergy, u, lo, hi, max_iter=200, step_tol=1e-12):
    """Minimize ``energy`` over nodes ``lo..hi-1``, the rest held fixed."""
    u = np.array(u, dtype=float)
    E = energy.value(u)
    step = math.inf
    for it in range(1, max_iter + 1):
        g = energy.gradient(u)[lo:hi]
        ab = energy.hessian_bands(u)[:, lo:hi].copy()
        shift = 0.0
        scale = float(np.max(np.abs(ab[2])))
        while True:
            try:
                if shift:
                    ab[2] += shift
                d = -solveh_banded(ab, g, check_finite=False)
                break
            except LinAlgError:
                if shift:
                    ab[2] -= shift
                shift = 1e-8 * scale if shift == 0.0 else 10.0 * shift
        slope = float(g @ d)
        step = float(np.max(np.abs(d)))
        alpha = 1.0
        while True:
            trial = u.copy()
            trial[lo:hi] += alpha * d
            Et = energy.value(trial)
            if Et <= E + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
            if alpha < 1e-12:
                trial = None
                break
        if trial is None:
            # rounding floor: the Newton step no longer lowers the computed energy
            if step <= 1e-8:
                return u, E, it, step
            raise ConvergenceError("line search failed in interval minimization",
                                   {"iterations": it, "newton_step": step, "energy": E})
        u, E = trial, Et
        if step * alpha <= step_tol:
            return u, E, it, step
    raise ConvergenceError(f"Newton iteration did not converge in {max_iter} steps",
                           {"iterations": max_iter, "newton_step": step, "energy": E})


def el_tolerance(eps, h, u_max=1.0):
    """``1e-6/eps``, raised to the rounding floor of the fourth-difference
    term ``2 eps^4 D4 u / h^4`` on very fine grids."""
    floor = 64.0 * (eps / h) ** 4 * np.finfo(float).eps * max(1.0, u_max)
    return max(1e-6 / eps, floor)


def _default_init(grid, constraint, bdata, eps):
    x = grid.x
    a, b = grid.a, grid.b
    if constraint == ZERO_DIRICHLET:
        w = math.sqrt(2.0) * eps
        return np.tanh((x - a) / w) * np.tanh((b - x) / w)
    s = bdata.well
    ramp = (x - a) / (b - a)
    left = s + bdata.alpha[0] + bdata.alpha[1] * (x - a)
    right = s + bdata.beta[0] + bdata.beta[1] * (x - b)
    return (1 - ramp) * left + ramp * right


def minimize_interval(grid: Grid, constraint: str, p: EnergyParams, spec,
                      bdata: BoundaryData | None = None, init: Field | None = None,
                      el_tol: float | None = None, max_iter: int = 200) -> IntervalMinimizer:
    """Minimize the energy on an interval under zero-Dirichlet or clamped data.

    ``zero-dirichlet`` pins the end values to 0 and leaves slopes free, so
    the natural condition ``w'' = 0`` holds weakly at both ends; the default
    start is the ``+1``-interior tanh ramp (the other branch is its
    negation, with equal energy for symmetric wells). ``clamped`` pins value
    and slope at both ends through the two outermost nodes.

    The report gives the strong Euler-Lagrange residual
    ``2 eps^4 w'''' + 2 q eps^2 w'' + W'(w)`` (sup over nodes 2..n-3), the
    one-sided extrapolation of ``eps^2 |w''|`` at free-slope ends, and the
    discrete natural-condition residual at the nodes next to those ends.
    """
    if grid.periodic:
        raise ArgumentError("minimize_interval needs an interval grid")
    if constraint not in (ZERO_DIRICHLET, CLAMPED):
        raise ArgumentError(f"constraint must be {ZERO_DIRICHLET!r} or {CLAMPED!r}, got {constraint!r}")
    eps, h, n = p.epsilon, grid.h, grid.n
    if n < 8:
        raise ArgumentError("interval minimization needs at least 8 nodes")
    if el_tol is None:
        el_tol = el_tolerance(eps, h)
    energy = IntervalEnergy(n, h, eps, p.q, spec)
    if constraint == CLAMPED:
        bdata = bdata or BoundaryData()
    u = np.array(init.samples if init is not None else _default_init(grid, constraint, bdata, eps), dtype=float)
    if u.shape != (n,):
        raise ArgumentError("init field does not match the grid")

    if constraint == ZERO_DIRICHLET:
        u[0] = u[-1] = 0.0
        lo, hi = 1, n - 1
    else:
        s = bdata.well
        u[0] = s + bdata.alpha[0]
        u[1] = u[0] + h * bdata.alpha[1]
        u[-1] = s + bdata.beta[0]
        u[-2] = u[-1] - h * bdata.beta[1]
        lo, hi = 2, n - 2

    u, E, iters, step = _newton(energy, u, lo, hi, max_iter)

    res = energy.el_residual(u)
    el = float(np.max(np.abs(res[2:-2])))
    if constraint == ZERO_DIRICHLET:
        # fourth-order one-sided second difference at each end
        w6 = _fd_weights(tuple(range(6)), 2)
        endpoint = eps**2 * max(abs(w6 @ u[:6]), abs(w6 @ u[::-1][:6])) / h**2
        natural = float(max(abs(res[1]), abs(res[-2])))
    else:
        endpoint = natural = 0.0
    report = MinimizerReport(E, iters, el, endpoint, natural, step)
    if el > el_tol:
        raise ConvergenceError(f"Euler-Lagrange residual {el:.3e} above tolerance {el_tol:.3e}",
                               report.to_dict())
    return IntervalMinimizer(Field(grid, u), report, p, constraint)


# --- rescaled helpers ---------------------------------------------------------

def rescaled_grid(length, h=RESCALED_H, even=True):
    """Interval grid ``[0, length]`` with spacing close to ``h``; an even
    interval count puts a node at the midpoint."""
    m = max(8, int(round(length / h)))
    if even and m % 2:
        m += 1
    return Grid.interval(0.0, length, m + 1)


def zero_dirichlet_rescaled(D, q, spec, h=RESCALED_H):
    """Zero-Dirichlet minimizer of the rescaled energy on ``[0, D]``."""
    return minimize_interval(rescaled_grid(D, h), ZERO_DIRICHLET, EnergyParams(1.0, q), spec)


def midpoint_state(m: IntervalMinimizer):
    """Value and derivatives (orders 1-3) at the midpoint node of a minimizer."""
    u, h = m.field.samples, m.field.grid.h
    n = u.size
    if n % 2 == 0:
        raise ArgumentError("midpoint state needs a node at the midpoint")
    i = n // 2
    v = u[i - 2:i + 3]
    d1 = (v[3] - v[1]) / (2 * h)
    d2 = (v[3] - 2 * v[2] + v[1]) / h**2
    d3 = (v[4] - 2 * v[3] + 2 * v[1] - v[0]) / (2 * h**3)
    return float(v[2]), float(d1), float(d2), float(d3)


# --- m1 -----------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileConstants:
    m1: float
    m_plus: float
    m_minus: float
    q: float
    truncation_L: float
    grid_n: int
    truncation_gap: float = 0.0
    resolution_gap: float = 0.0
    raw: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "m1": self.m1, "m_plus": self.m_plus, "m_minus": self.m_minus, "q": self.q,
            "truncation_L": self.truncation_L, "grid_n": self.grid_n,
            "truncation_gap": self.truncation_gap, "resolution_gap": self.resolution_gap,
            "raw": dict(self.raw),
        }


def _heteroclinic_energy(q, spec, L, n):
    """Discrete minimum on ``[-L, L]`` with ``n`` intervals, clamped to -1 and +1."""
    g = Grid.interval(-L, L, n + 1)
    init = Field(g, np.tanh(g.x / math.sqrt(2.0)))
    bd = BoundaryData((-2.0, 0.0), (0.0, 0.0), well=1)  # -1 = +1 - 2 on the left
    m = minimize_interval(g, CLAMPED, EnergyParams(1.0, q), spec, bdata=bd, init=init)
    return m.report.energy


def _half_line_energy(q, spec, L, n, sign):
    """Discrete minimum on ``[0, L]`` with ``n`` intervals, zero at 0 and clamped to ``sign`` at L."""
    g = Grid.interval(0.0, L, n + 1)
    init = Field(g, sign * np.tanh(g.x / math.sqrt(2.0)))
    bd = BoundaryData((-sign, 0.0), (0.0, 0.0), well=sign)
    e = IntervalEnergy(g.n, g.h, 1.0, q, spec)
    u = np.array(init.samples)
    u[0] = 0.0
    u[-1] = u[-2] = bd.well
    # value pinned at the origin, slope free there; two clamped nodes at L
    u, E, _, _ = _newton(e, u, 1, g.n - 2)
    return E


def _richardson(coarse, fine):
    return (4.0 * fine - coarse) / 3.0


def estimate_m1(q: float, spec, L: float = 20.0, n: int = 4096, tol: float = 1e-6) -> ProfileConstants:
    """Optimal heteroclinic energy on the line and the half-line values.

    ``n`` is the number of grid intervals on ``[-L, L]``. Each value is the
    Richardson extrapolation of the discrete minima at ``n`` and ``2n``
    intervals (the scheme is second order in the spacing). The truncation
    study repeats the computation on ``[-2L, 2L]`` at the same spacing.
    """
    if L < 20:
        raise ArgumentError(f"L must be at least 20, got {L}")
    if n < 4096:
        raise ArgumentError(f"n must be at least 4096, got {n}")
    if n % 2:
        raise ArgumentError("n must be even so that the origin is a node")
    linearization(spec, q)  # rejects q outside the hyperbolic range

    raw = {}
    for tag, LL, nn in (("L_n", L, n), ("L_2n", L, 2 * n), ("2L_2n", 2 * L, 2 * n), ("2L_4n", 2 * L, 4 * n)):
        raw[tag] = _heteroclinic_energy(q, spec, LL, nn)
    m1 = _richardson(raw["L_n"], raw["L_2n"])
    m1_2L = _richardson(raw["2L_2n"], raw["2L_4n"])
    trunc = abs(m1 - m1_2L)
    resol = abs(raw["L_2n"] - m1)
    raw["m1_2L"] = m1_2L
    if trunc > tol:
        raise ResolutionError(f"truncation study disagrees: |m1(L) - m1(2L)| = {trunc:.3e} > {tol:.1e}")

    half = n // 2
    mp = _richardson(_half_line_energy(q, spec, L, half, 1), _half_line_energy(q, spec, L, 2 * half, 1))
    mm = _richardson(_half_line_energy(q, spec, L, half, -1), _half_line_energy(q, spec, L, 2 * half, -1))
    return ProfileConstants(m1, mp, mm, float(q), float(L), int(n), trunc, resol, raw)


# --- eta test profile ---------------------------------------------------------

def construct_eta(mid_value: float, mid_slope: float, s_k: int, consts: LinearizationConstants,
                  grid: Grid) -> Field:
    """Damped-oscillation continuation from ``(mid_value, mid_slope)`` toward ``s_k``.

    ``eta(x) = s + (a e^{-g x}) cos(d x) + ((mid_slope + g a) / d) e^{-g x} sin(d x)``
    with ``a = mid_value - s``, so ``eta(0) = mid_value``, ``eta'(0) = mid_slope``.
    """
    if s_k not in (1, -1):
        raise ArgumentError(f"s_k must be +1 or -1, got {s_k}")
    if grid.periodic or grid.a != 0.0:
        raise ArgumentError("construct_eta needs an interval grid starting at 0")
    g, d = consts.gamma, consts.delta
    if abs(d) < 1e-12:
        raise DomainError("oscillation frequency delta is degenerate (|delta| < 1e-12)")
    a = mid_value - s_k
    b = (mid_slope + g * a) / d
    x = grid.x
    damp = np.exp(-g * x)
    return Field(grid, s_k + damp * (a * np.cos(d * x) + b * np.sin(d * x)))


# --- fits ---------------------------------------------------------------------

@dataclass
class FitResult:
    """Least-squares line ``y = slope * x + intercept``."""

    slope: float
    intercept: float
    r_squared: float
    points: list

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared,
                "points": [[float(x), float(y)] for x, y in self.points]}


def fit_line(xs, ys) -> FitResult:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ArgumentError(f"a fit needs at least 3 points, got {xs.size}")
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), min(1.0, max(0.0, r2)), list(zip(xs.tolist(), ys.tolist())))


@dataclass
class ExperimentResult:
    """A fit (``None`` when fewer than three points survive) with its table."""

    fit: FitResult | None
    rows: list
    expected_slope: float
    excluded: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def slope_error(self):
        if self.fit is None:
            return math.inf
        return abs(self.fit.slope - self.expected_slope) / abs(self.expected_slope)

    def to_dict(self):
        out = {"expected_slope": self.expected_slope, "excluded": self.excluded,
               "fit": self.fit.to_dict() if self.fit else None}
        out.update(self.extra)
        return out


def _fit_or_none(xs, ys):
    return fit_line(xs, ys) if len(xs) >= 3 else None


# --- experiments --------------------------------------------------------------

UNDERFLOW = 1e-13
MIN_SPAN = 2.5


def midpoint_decay_experiment(d_over_eps_values, p: EnergyParams, spec, h=RESCALED_H) -> ExperimentResult:
    """Decay of the midpoint state of zero-Dirichlet minimizers with interval length.

    For each rescaled length ``D = d/eps`` the minimizer on ``[0, D]`` is
    computed; its midpoint value ``v`` and derivatives are compared with the
    well ``s``. The fitted ordinate is ``log sqrt((v - s)^2 + v''^2)``, the
    distance of the midpoint state to the equilibrium ``(s, 0, 0, 0)`` (odd
    derivatives vanish there by symmetry); the plain value distance is in
    the table. Expected slope ``-gamma/2``. Distances below 1e-13 are
    excluded as underflow.
    """
    D = sorted(float(v) for v in d_over_eps_values)
    if len(D) < 4 or D[-1] < MIN_SPAN * D[0]:
        raise ArgumentError(f"need at least 4 values of d/eps spanning a factor of {MIN_SPAN}")
    consts = linearization(spec, p.q)
    rows, xs, ys, excluded = [], [], [], []
    for Di in D:
        m = zero_dirichlet_rescaled(Di, p.q, spec, h)
        v, d1, d2, d3 = midpoint_state(m)
        s = 1.0 if v >= 0 else -1.0
        dist = abs(v - s)
        state = math.sqrt((v - s) ** 2 + d1**2 + d2**2 + d3**2)
        rows.append({"d_over_eps": Di, "mid_value": v, "value_distance": dist, "slope": d1,
                     "curvature": d2, "third": d3, "state_distance": state,
                     "el_residual": m.report.el_residual, "energy": m.report.energy})
        if state < UNDERFLOW:
            excluded.append({"d_over_eps": Di, "reason": "underflow"})
            continue
        xs.append(Di)
        ys.append(math.log(state))
    return ExperimentResult(_fit_or_none(xs, ys), rows, -consts.gamma / 2, excluded)


def eta_energy_experiment(d_over_eps_values, p: EnergyParams, spec, X=40.0, h=RESCALED_H) -> ExperimentResult:
    """Rescaled energy of the eta continuation of minimizer midpoint data on ``[0, X]``.

    Expected to decay like ``exp(-gamma d/eps)``.
    """
    consts = linearization(spec, p.q)
    grid = rescaled_grid(X, h)
    rows, xs, ys, excluded = [], [], [], []
    for Di in sorted(float(v) for v in d_over_eps_values):
        m = zero_dirichlet_rescaled(Di, p.q, spec, h)
        v, d1, _, _ = midpoint_state(m)
        s = 1 if v >= 0 else -1
        eta = construct_eta(v, d1, s, consts, grid)
        e = energy_rescaled(eta, p.q, spec).total
        rows.append({"d_over_eps": Di, "mid_value": v, "mid_slope": d1, "eta_energy": e})
        if not e > UNDERFLOW:
            excluded.append({"d_over_eps": Di, "reason": "underflow" if e >= 0 else "negative"})
            continue
        xs.append(Di)
        ys.append(math.log(e))
    return ExperimentResult(_fit_or_none(xs, ys), rows, -consts.gamma, excluded)


def zero_gaps_on_torus(zero_layout):
    z = np.sort(np.asarray(zero_layout, dtype=float) % 1.0)
    if z.size < 2 or z.size % 2:
        raise ArgumentError("the zero layout needs an even number (>= 2) of points on the torus")
    gaps = np.diff(np.append(z, z[0] + 1.0))
    if np.any(gaps <= 0):
        raise ArgumentError("zero positions must be distinct")
    return gaps


def glued_energy(gaps, eps, q, spec, h=RESCALED_H, cache=None):
    """Energy of the field glued from zero-Dirichlet minimizers on each gap.

    By the change of variables ``z = x/eps`` the energy on a gap of length
    ``d`` equals the rescaled energy on ``[0, d/eps]``.
    """
    total = 0.0
    per = []
    for d in gaps:
        D = float(d) / eps
        key = round(D, 12)
        if cache is not None and key in cache:
            e = cache[key]
        else:
            e = zero_dirichlet_rescaled(D, q, spec, h).report.energy
            if cache is not None:
                cache[key] = e
        per.append(e)
        total += e
    return total, per


def matched_m1(q, spec, h=RESCALED_H, L=40.0):
    """Twice the discrete half-line minimum at spacing ``h``: the value the
    glued energies converge to on the same grid as the gaps grow."""
    n = int(round(L / h))
    return 2.0 * _half_line_energy(q, spec, n * h, n, 1)


def lower_bound_experiment(zero_layout, eps_values, p: EnergyParams, spec,
                           consts: LinearizationConstants | None = None, m1: float | None = None,
                           alpha0: float = 0.1, h=RESCALED_H, noise_floor: float = 1e-11) -> ExperimentResult:
    """Energy defect ``N m1 - E`` of glued minimizers against ``min_k d_k/eps``.

    ``m1`` defaults to the matched-resolution value of :func:`matched_m1`, so
    that the discretization error of the two sides cancels. Non-positive
    defects are saturated points (the lower bound is already met) and
    defects below ``noise_floor`` are underflow; both are excluded from the
    fit. Expected slope ``-gamma``.
    """
    gaps = zero_gaps_on_torus(zero_layout)
    if gaps.min() < alpha0:
        raise ArgumentError(f"zero spacing {gaps.min():.4g} is below alpha0 = {alpha0}")
    consts = consts or linearization(spec, p.q)
    if m1 is None:
        m1 = matched_m1(p.q, spec, h)
    N = gaps.size
    rows, xs, ys, excluded = [], [], [], []
    cache = {}
    for eps in sorted(float(e) for e in eps_values):
        E, per = glued_energy(gaps, eps, p.q, spec, h, cache)
        defect = N * m1 - E
        x = float(gaps.min() / eps)
        rows.append({"epsilon": eps, "min_gap_over_eps": x, "energy": E, "defect": defect,
                     "interval_energies": per})
        if defect <= 0:
            excluded.append({"epsilon": eps, "reason": "saturated", "defect": defect})
        elif defect < noise_floor:
            excluded.append({"epsilon": eps, "reason": "underflow", "defect": defect})
        else:
            xs.append(x)
            ys.append(math.log(defect))
    return ExperimentResult(_fit_or_none(xs, ys), rows, -consts.gamma, excluded,
                            {"m1": m1, "N": int(N), "gaps": gaps.tolist()})


def bound_prediction(gaps, eps, m1, C, gamma):
    """``N m1 - C sum_k exp(-d_k gamma / eps)``."""
    gaps = np.asarray(gaps, dtype=float)
    return gaps.size * m1 - C * float(np.sum(np.exp(-gaps * gamma / eps)))


def bad_set_experiment(eps_values, p: EnergyParams, spec, delta=0.1, length=0.5,
                       h_over_eps=RESCALED_H) -> ExperimentResult:
    """Bad-set measure of zero-Dirichlet minimizers on ``(0, length)`` against eps.

    Fitted linearly (measure against eps), so the slope estimates the
    constant in ``measure <= C eps``.
    """
    rows, xs, ys = [], [], []
    for eps in sorted(float(e) for e in eps_values):
        m_int = int(round(length / (eps * h_over_eps)))
        grid = Grid.interval(0.0, length, m_int + 1)
        pe = EnergyParams(eps, p.q)
        m = minimize_interval(grid, ZERO_DIRICHLET, pe, spec)
        meas = bad_set_measure(m.field, pe, delta)
        rows.append({"epsilon": eps, "measure": meas, "ratio": meas / eps,
                     "interior_zeros": int(find_zeros(m.field).size)})
        xs.append(eps)
        ys.append(meas)
    fit = _fit_or_none(xs, ys)
    return ExperimentResult(fit, rows, float("nan"), [], {"delta": delta})
