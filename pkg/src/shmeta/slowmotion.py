"""Near-jump initial data, interface tracking, and departure-time sweeps."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .energy import EnergyParams
from .errors import ArgumentError, BudgetExceeded, ComplianceError, DegenerateFieldError
from .field import Field, Grid, distance, find_zeros
from .flow import SI, FlowConfig, FlowState, SpectralFlow, Trajectory, evolve, scheme_name
from .potential import PotentialSpec, linearization
from .profiles import ExperimentResult, estimate_m1, fit_line


@dataclass(frozen=True)
class JumpFunction:
    """A {-1, +1}-valued step function on the unit torus.

    The value is ``leading_sign`` on ``[0, x_1)`` and flips at every jump.
    """

    jump_locations: tuple
    leading_sign: int = 1

    def __post_init__(self):
        z = tuple(sorted(float(x) % 1.0 for x in self.jump_locations))
        if len(z) < 2 or len(z) % 2:
            raise ArgumentError(f"need an even number (>= 2) of jumps on the torus, got {len(z)}")
        if self.leading_sign not in (1, -1):
            raise ArgumentError("leading_sign must be +1 or -1")
        object.__setattr__(self, "jump_locations", z)
        if self.min_gap <= 0:
            raise ArgumentError("jump locations must be distinct")

    @property
    def N(self):
        return len(self.jump_locations)

    @property
    def gaps(self):
        z = np.array(self.jump_locations)
        return np.diff(np.append(z, z[0] + 1.0))

    @property
    def min_gap(self):
        return float(self.gaps.min())

    def flipped(self):
        return JumpFunction(self.jump_locations, -self.leading_sign)

    def sample(self, grid: Grid) -> Field:
        x = grid.x
        crossed = np.searchsorted(np.array(self.jump_locations), x, side="right")
        return Field(grid, self.leading_sign * np.where(crossed % 2, -1.0, 1.0))


H_EXP = "exp-d-gamma"
H_POWER = "power"


@dataclass(frozen=True)
class SlowMotionConfig:
    delta: float = 0.05
    eps_values: tuple = (0.03, 0.04, 0.05, 0.06)
    q: float = 0.0
    h_kind: str = H_EXP
    h_power: float = 2.0
    departure_threshold: float | None = None
    grid_n: int | None = None
    scheme: str = SI
    tau: float = 0.5
    descent_steps: int = 200
    descent_tau: float = 0.25
    t_start: float = 100.0
    t_max: float = 1e6
    budget_seconds: float = 120.0
    parallelism: int = 1

    def __post_init__(self):
        if not self.delta > 0:
            raise ArgumentError("delta must be positive")
        object.__setattr__(self, "scheme", scheme_name(self.scheme))
        if self.h_kind not in (H_EXP, H_POWER):
            raise ArgumentError(f"h_kind must be {H_EXP!r} or {H_POWER!r}")
        if not self.eps_values or min(self.eps_values) <= 0:
            raise ArgumentError("eps_values must be positive")
        if self.threshold <= 0:
            raise ArgumentError("departure threshold must be positive")
        if self.budget_seconds <= 0 or self.t_max <= 0 or self.t_start <= 0:
            raise ArgumentError("budgets must be positive")

    @property
    def threshold(self):
        return self.delta if self.departure_threshold is None else self.departure_threshold

    def check_against(self, v: JumpFunction):
        bound = min(1.0, v.min_gap / 8)
        if not self.delta < bound:
            raise ArgumentError(f"delta = {self.delta} must be below min(1, d/8) = {bound:.4g}")

    def inv_h(self, eps, d, gamma):
        """``1/h(eps)``: the allowed energy excess of the initial data."""
        if self.h_kind == H_EXP:
            return math.exp(-d * gamma / eps)
        return eps**self.h_power

    def to_dict(self):
        out = dict(self.__dict__)
        out["eps_values"] = list(self.eps_values)
        out["departure_threshold"] = self.threshold
        return out


def default_grid_n(eps):
    """Smallest power of two with at least 16/eps samples (and >= 256)."""
    return max(256, 1 << math.ceil(math.log2(16.0 / eps)))


def jump_seed(grid: Grid, v: JumpFunction, eps: float) -> np.ndarray:
    """Smooth periodic seed ``s * prod_k tanh(sin(pi (x - x_k)) / (pi sqrt(2) eps))``."""
    x = grid.x
    u = np.full(x.size, float(v.leading_sign))
    w = math.sqrt(2.0) * eps
    for xk in v.jump_locations:
        u *= np.tanh(np.sin(np.pi * (x - xk)) / (np.pi * w))
    return u


@lru_cache(maxsize=16)
def _m1_cached(q, coeffs, c_w):
    return estimate_m1(q, PotentialSpec("polynomial", coeffs, c_w)).m1


def reference_m1(q, spec):
    return _m1_cached(float(q), tuple(spec.coefficients), spec.c_w)


@dataclass
class ComplianceReport:
    l1_to_jump: float
    energy: float
    energy_excess: float
    allowed_excess: float
    delta: float
    zeros: list
    zeros_within_2delta: bool

    @property
    def h1(self):
        """L1 distance to the jump function is at most ``delta``."""
        return self.l1_to_jump <= self.delta

    @property
    def h2(self):
        """Energy excess over ``N m1`` is at most ``1/h(eps)``."""
        return self.energy_excess <= self.allowed_excess

    @property
    def compliant(self):
        return self.h1 and self.h2

    def to_dict(self):
        d = dict(self.__dict__)
        d.update(h1=self.h1, h2=self.h2, compliant=self.compliant)
        return d


def make_initial_data(v: JumpFunction, p: EnergyParams, spec, cfg: SlowMotionConfig | None = None,
                      n: int | None = None, m1: float | None = None, strict: bool = True):
    """Tanh seed relaxed by semi-implicit energy descent, with a compliance report.

    The descent runs on the whole torus; away from the layers the seed sits
    at the wells to exponential accuracy, so only the layers change.
    ``strict`` raises :class:`ComplianceError` when the L1 distance to the jump
    function exceeds ``delta`` or the energy excess exceeds ``1/h(eps)``.
    """
    cfg = cfg or SlowMotionConfig(q=p.q)
    cfg.check_against(v)
    n = n or cfg.grid_n or default_grid_n(p.epsilon)
    grid = Grid.torus(n)
    u = Field(grid, jump_seed(grid, v, p.epsilon))
    if cfg.descent_steps > 0:
        fc = FlowConfig(cfg.descent_tau, cfg.descent_tau * cfg.descent_steps, SI,
                        history_stride=cfg.descent_steps, snapshot_stride=cfg.descent_steps)
        u = evolve(FlowState.initial(u, p, spec), fc, p, spec, record_snapshots=False).final.field
    consts = linearization(spec, p.q)
    m1 = reference_m1(p.q, spec) if m1 is None else m1
    e = SpectralFlow(n, p, spec).energy_total(u.samples)
    excess = e - v.N * m1
    try:
        zeros = find_zeros(u).tolist()
    except DegenerateFieldError:  # the layers annihilated during the descent
        zeros = []
    near = len(zeros) == v.N and all(
        min(abs((z - xk + 0.5) % 1.0 - 0.5) for z in zeros) < 2 * cfg.delta for xk in v.jump_locations)
    rep = ComplianceReport(distance(u, v.sample(grid), "L1"), e, excess,
                           cfg.inv_h(p.epsilon, v.min_gap, consts.gamma), cfg.delta, zeros, near)
    if strict and not rep.compliant:
        raise ComplianceError(
            f"initial data violate the preparation bounds: L1 = {rep.l1_to_jump:.4g} (delta {cfg.delta}), "
            f"energy excess = {rep.energy_excess:.4g} (allowed {rep.allowed_excess:.4g})", rep)
    return u, rep


# --- tracking -----------------------------------------------------------------

@dataclass
class InterfaceTrack:
    times: list
    zeros: list
    paths: list
    collisions: list = field(default_factory=list)

    def counts(self):
        return [len(z) for z in self.zeros]


def _periodic_gap(a, b):
    return abs((a - b + 0.5) % 1.0 - 0.5)


def track_interfaces(traj: Trajectory, min_separation: float | None = None) -> InterfaceTrack:
    """Zeros of every snapshot, linked over time by nearest-neighbour matching.

    ``paths[i]`` lists the positions of the i-th initial interface until it
    disappears (``None`` afterwards); count drops are recorded as collisions.
    """
    times, zs = [], []
    for t, s in zip(traj.snapshot_times, traj.snapshots):
        f = Field(traj.grid, s)
        try:
            z = find_zeros(f, min_separation)
        except DegenerateFieldError:  # identically zero snapshot: nothing to track
            z = np.array([])
        times.append(t)
        zs.append(z.tolist())
    paths = [[z] for z in (zs[0] if zs else [])]
    collisions = []
    for k in range(1, len(zs)):
        cur = list(zs[k])
        alive = [i for i, p in enumerate(paths) if p[-1] is not None]
        if len(cur) < len(zs[k - 1]):
            collisions.append({"time": times[k], "before": len(zs[k - 1]), "after": len(cur)})
        taken = set()
        for i in alive:
            last = paths[i][-1]
            best, bj = math.inf, None
            for j, z in enumerate(cur):
                if j not in taken and _periodic_gap(z, last) < best:
                    best, bj = _periodic_gap(z, last), j
            if bj is None:
                paths[i].append(None)
            else:
                taken.add(bj)
                paths[i].append(cur[bj])
        for i, p in enumerate(paths):
            if i not in alive:
                p.append(None)
    return InterfaceTrack(times, zs, paths, collisions)


def departure_time(traj: Trajectory, u0: Field, threshold: float):
    """First snapshot time whose L1 distance from ``u0`` exceeds ``threshold``."""
    if not threshold > 0:
        raise ArgumentError("threshold must be positive")
    for t, s in zip(traj.snapshot_times, traj.snapshots):
        if distance(Field(u0.grid, s), u0, "L1") > threshold:
            return t
    return None


# --- timescale sweep ------------------------------------------------------------

def observation_time(delta, d, gamma, eps):
    """``delta^2 exp((d - 4 delta) gamma / eps)``."""
    return delta**2 * math.exp((d - 4 * delta) * gamma / eps)


def _run_departure(args):
    v, eps, cfg, spec, m1 = args
    p = EnergyParams(eps, cfg.q)
    consts = linearization(spec, cfg.q)
    u0, rep = make_initial_data(v, p, spec, cfg, m1=m1, strict=False)
    d = v.min_gap
    t_obs = observation_time(cfg.delta, d, consts.gamma, eps)
    threshold = cfg.threshold
    u0s = np.asarray(u0.samples)
    sup_l1 = [0.0]

    def l1(state):
        dist = float(np.mean(np.abs(state.field.samples - u0s)))
        if state.time <= t_obs:
            sup_l1[0] = max(sup_l1[0], dist)
        return dist > threshold

    state = FlowState.initial(u0, p, spec)
    deadline = time.monotonic() + cfg.budget_seconds
    t_end = max(cfg.t_start, cfg.tau)
    departed = None
    status = "budget"
    while True:
        fc = FlowConfig(cfg.tau, t_end, cfg.scheme, history_stride=10**9, snapshot_stride=10**9)
        try:
            tr = evolve(state, fc, p, spec, stop=l1, deadline=deadline, record_snapshots=False)
        except BudgetExceeded:
            status = "budget"
            break
        state = tr.final
        if tr.stopped_early:
            departed = state.time
            status = "departed"
            break
        if t_end >= cfg.t_max:
            status = "t_max"
            break
        t_end = min(2 * t_end, cfg.t_max)
    return {
        "epsilon": eps, "grid_n": u0.grid.n, "T_departure": departed, "status": status,
        "t_reached": state.time, "T_obs": t_obs, "E0": rep.energy, "E_end": state.energy.total,
        "sup_l1_before_T_obs": sup_l1[0], "departed_before_T_obs": departed is not None and departed < t_obs,
        **{f"compliance_{k}": val for k, val in rep.to_dict().items() if k != "zeros"},
    }


def timescale_experiment(v: JumpFunction, cfg: SlowMotionConfig, spec) -> ExperimentResult:
    """Departure times over an eps sweep, fitted as ``log T`` against ``1/eps``.

    ``expected_slope`` is the persistence lower bound ``(d - 4 delta) gamma``.
    Runs that hit the budget without departing are listed in ``excluded``
    and the result is flagged partial.
    """
    cfg.check_against(v)
    consts = linearization(spec, cfg.q)
    m1 = reference_m1(cfg.q, spec)
    jobs = [(v, float(e), cfg, spec, m1) for e in sorted(cfg.eps_values)]
    workers = max(1, min(cfg.parallelism, len(jobs), os.cpu_count() or 1))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_run_departure, jobs))
    else:
        rows = [_run_departure(j) for j in jobs]
    xs, ys, excluded = [], [], []
    for r in rows:
        if r["T_departure"] is None or r["T_departure"] <= 0:
            excluded.append({"epsilon": r["epsilon"], "reason": r["status"], "t_reached": r["t_reached"]})
            continue
        xs.append(1.0 / r["epsilon"])
        ys.append(math.log(r["T_departure"]))
    fit = fit_line(xs, ys) if len(xs) >= 3 else None
    target = (v.min_gap - 4 * cfg.delta) * consts.gamma
    partial = bool(excluded)
    return ExperimentResult(fit, rows, target, excluded,
                            {"partial": partial, "lower_bound_slope": target, "m1": m1,
                             "largest_eps_departed": any(r["epsilon"] == max(cfg.eps_values) and
                                                         r["T_departure"] is not None for r in rows)})
