"""Time stepping for the fourth-order gradient flow on the unit torus.

The flow is

    u_t = -W'(u) - 2 eps^2 q u_xx - 2 eps^4 u_xxxx = -eps * dE/du,

so that ``dE/dt = -(1/eps) int u_t^2``. Two schemes are provided:

* minimizing movements: ``u_n`` minimizes
  ``J(v) = E(v) + |v - u_{n-1}|^2 / (2 eps tau)``, solved by preconditioned
  gradient descent with Armijo backtracking, warm-started at ``u_{n-1}``;
* semi-implicit: the linear part implicit, ``W'`` explicit, in Fourier space.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .energy import EnergyBreakdown, EnergyParams
from .errors import ArgumentError, BudgetExceeded, StepFailure, StepSizeError
from .field import Field, Grid

MM = "minimizing-movements"
SI = "semi-implicit"
_SCHEME_ALIASES = {"mm": MM, MM: MM, "si": SI, SI: SI}

# Largest semi-implicit step validated as energy-stable for the quartic well.
SI_TAU_MAX = 0.5
_EPS_MACH = np.finfo(float).eps


def scheme_name(s):
    try:
        return _SCHEME_ALIASES[s]
    except KeyError:
        raise ArgumentError(f"scheme must be 'mm' or 'si', got {s!r}") from None


@dataclass(frozen=True)
class FlowConfig:
    tau: float
    t_end: float
    scheme: str = MM
    inner_tol: float = 1e-8
    inner_max_iters: int = 100
    history_stride: int = 1
    snapshot_stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", scheme_name(self.scheme))
        if not self.tau > 0:
            raise ArgumentError(f"tau must be positive, got {self.tau}")
        if not self.t_end >= self.tau:
            raise ArgumentError(f"t_end = {self.t_end} must be at least tau = {self.tau}")
        if not self.inner_tol > 0:
            raise ArgumentError(f"inner_tol must be positive, got {self.inner_tol}")
        if self.inner_max_iters < 1:
            raise ArgumentError("inner_max_iters must be at least 1")
        if self.history_stride < 1 or self.snapshot_stride < 1:
            raise ArgumentError("strides must be at least 1")
        if self.scheme == SI and self.tau > SI_TAU_MAX:
            raise ArgumentError(f"semi-implicit tau = {self.tau} exceeds the stability bound {SI_TAU_MAX}")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.tau))

    def to_dict(self):
        return {
            "tau": self.tau, "t_end": self.t_end, "scheme": self.scheme,
            "inner_tol": self.inner_tol, "inner_max_iters": self.inner_max_iters,
            "history_stride": self.history_stride, "snapshot_stride": self.snapshot_stride,
        }


@dataclass
class FlowState:
    """Current time and field plus the running energy/dissipation ledger.

    ``energy_history`` is shared between a state and the states stepped from
    it, so that long runs do not copy it; treat it as append-only.
    """

    time: float
    field: Field
    energy_history: list = field(default_factory=list)
    dissipation_accum: float = 0.0
    step_index: int = 0
    energy: Optional[EnergyBreakdown] = None
    last_increment_sq: float = 0.0
    inner_iters: int = 0

    @classmethod
    def initial(cls, f: Field, p: EnergyParams, spec):
        if not f.grid.periodic:
            raise ArgumentError("flows run on the torus")
        e = SpectralFlow(f.grid.n, p, spec).energy(f.samples)
        return cls(0.0, f, [(0.0, e)], 0.0, 0, e)


class SpectralFlow:
    """Fourier symbols and energy for one (grid, eps, q, W) combination."""

    def __init__(self, n, p: EnergyParams, spec):
        self.n, self.eps, self.q, self.spec = n, p.epsilon, p.q, spec
        k = 2.0 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)
        k2 = k * k
        # L2 gradient symbol of the quadratic part of E; 2x its energy density
        self.lin = 2.0 * self.eps**3 * k2 * k2 - 2.0 * self.eps * self.q * k2
        mult = np.full(k.size, 2.0)
        mult[0] = 1.0
        if n % 2 == 0:
            mult[-1] = 1.0
        self.mult = mult
        self.k2 = k2
        # roundoff floor of the discrete gradient, per unit sup-norm of the field
        self.grad_floor = 4.0 * _EPS_MACH * math.sqrt(np.mean(self.lin**2))

    def energy(self, u, uh=None) -> EnergyBreakdown:
        if uh is None:
            uh = np.fft.rfft(u)
        power = self.mult * np.abs(uh) ** 2 / self.n**2
        pot = float(np.mean(self.spec(u))) / self.eps
        grad = -self.eps * self.q * float(np.sum(self.k2 * power))
        hess = self.eps**3 * float(np.sum(self.k2 * self.k2 * power))
        return EnergyBreakdown(pot + grad + hess, pot, grad, hess)

    def energy_total(self, u, uh=None):
        if uh is None:
            uh = np.fft.rfft(u)
        quad = 0.5 * float(np.sum(self.mult * self.lin * np.abs(uh) ** 2)) / self.n**2
        return float(np.mean(self.spec(u))) / self.eps + quad

    def l2_gradient(self, u, uh=None):
        """``eps * dE/du`` divided by eps, i.e. ``W'(u)/eps + L u``."""
        if uh is None:
            uh = np.fft.rfft(u)
        return self.spec(u, 1) / self.eps + np.fft.irfft(self.lin * uh, self.n)


def _check_state(state, cfg, scheme):
    if not state.field.grid.periodic:
        raise ArgumentError("flows run on the torus")
    if cfg.scheme != scheme:
        raise ArgumentError(f"config scheme is {cfg.scheme!r}, expected {scheme!r}")


def _advance(state, cfg, eps, new_u, e_new, incr_sq, iters):
    tau = cfg.tau
    diss = state.dissipation_accum + incr_sq / (eps * tau)
    k = state.step_index + 1
    t = k * tau
    if k % cfg.history_stride == 0:
        state.energy_history.append((t, e_new))
    return FlowState(t, state.field.with_samples(new_u), state.energy_history, diss, k,
                     e_new, incr_sq, iters)


def step_minimizing_movements(state: FlowState, cfg: FlowConfig, p: EnergyParams, spec,
                              _ops: SpectralFlow | None = None) -> FlowState:
    """One minimizing-movements step from ``state``.

    Stops once the L2 norm of the discrete J-gradient is below
    ``max(inner_tol, roundoff floor)``, or when it is within ten times that
    and the predicted decrease of J is below rounding. Armijo backtracking makes every
    accepted iterate decrease J up to its rounding, so ``J(u_n) <= J(u_{n-1}) = E(u_{n-1})``
    holds to within a few units of rounding in ``E``.
    """
    _check_state(state, cfg, MM)
    ops = _ops or SpectralFlow(state.field.grid.n, p, spec)
    eps, tau, n = p.epsilon, cfg.tau, ops.n
    u = np.asarray(state.field.samples)
    prox = 1.0 / (eps * tau)
    # spectral preconditioner: proximal term + well curvature + linear symbol
    precond = prox + (spec.w2_at_1 + 0.5 * p.q**2) / eps + ops.lin

    def J(v, vh):
        return ops.energy_total(v, vh) + 0.5 * prox * float(np.mean((v - u) ** 2))

    v, vh = u.copy(), np.fft.rfft(u)
    Jv = J(v, vh)
    tol = max(cfg.inner_tol, ops.grad_floor * max(1.0, float(np.max(np.abs(u)))))
    gnorm = math.inf
    for it in range(cfg.inner_max_iters + 1):
        G = ops.l2_gradient(v, vh) + prox * (v - u)
        gnorm = math.sqrt(float(np.mean(G * G)))
        if gnorm <= tol:
            break
        if it == cfg.inner_max_iters:
            raise StepFailure(
                f"minimizing-movements inner solver stalled at |grad J| = {gnorm:.3e} "
                f"(tolerance {tol:.3e}) after {it} iterations",
                state.field.with_samples(v), state.time)
        d = -np.fft.irfft(np.fft.rfft(G) / precond, n)
        slope = float(np.mean(G * d))
        j_round = 4 * _EPS_MACH * max(1.0, abs(Jv))
        if -slope <= j_round and gnorm <= 10 * tol:
            # predicted decrease of J is below its rounding: nothing left to gain
            break
        # when J cannot resolve the predicted decrease, accept steps that keep J within rounding
        slack = 2 * j_round if -slope <= j_round else 0.0
        alpha = 1.0
        while True:
            w = v + alpha * d
            wh = np.fft.rfft(w)
            Jw = J(w, wh)
            if Jw <= Jv + 1e-4 * alpha * slope + slack:
                break
            alpha *= 0.5
            if alpha < 1e-10:
                if gnorm <= 100 * tol:
                    # at the roundoff floor: no representable descent left
                    w, wh, Jw = v, vh, Jv
                    break
                raise StepFailure(
                    f"line search failed at |grad J| = {gnorm:.3e}", state.field.with_samples(v), state.time)
        if w is v:
            break
        v, vh, Jv = w, wh, Jw
    e_new = ops.energy(v, vh)
    incr_sq = float(np.mean((v - u) ** 2))
    return _advance(state, cfg, eps, v, e_new, incr_sq, it)


def si_denominator(n, p: EnergyParams, tau):
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)
    k2 = k * k
    return 1.0 - tau * (2.0 * p.epsilon**2 * p.q * k2 - 2.0 * p.epsilon**4 * k2 * k2)


def step_semi_implicit(state: FlowState, cfg: FlowConfig, p: EnergyParams, spec,
                       _ops: SpectralFlow | None = None, _denom=None) -> FlowState:
    """One linearly implicit step; ``W'`` is taken at the old time level."""
    _check_state(state, cfg, SI)
    ops = _ops or SpectralFlow(state.field.grid.n, p, spec)
    denom = si_denominator(ops.n, p, cfg.tau) if _denom is None else _denom
    if np.min(np.abs(denom)) < 1e-12:
        raise StepSizeError(f"tau = {cfg.tau} makes a mode singular; use a smaller tau",
                            state.field, state.time)
    u = np.asarray(state.field.samples)
    uh = (np.fft.rfft(u) - cfg.tau * np.fft.rfft(spec(u, 1))) / denom
    v = np.fft.irfft(uh, ops.n)
    e_new = ops.energy(v, uh)
    incr_sq = float(np.mean((v - u) ** 2))
    return _advance(state, cfg, p.epsilon, v, e_new, incr_sq, 0)


@dataclass
class Trajectory:
    config: FlowConfig
    params: EnergyParams
    final: FlowState
    energy_history: list
    dissipation_accum: float
    snapshot_times: list
    snapshots: list
    observations: dict = field(default_factory=dict)
    stopped_early: bool = False
    inner_iters: int = 0

    @property
    def tau(self):
        return self.config.tau

    @property
    def grid(self) -> Grid:
        return self.final.field.grid

    def energies(self):
        return np.array([e.total for _, e in self.energy_history])

    def history_times(self):
        return np.array([t for t, _ in self.energy_history])

    def dissipation_residual(self):
        """``E(0) - E(T) - accumulated dissipation``."""
        e = self.energy_history
        return e[0][1].total - self.final.energy.total - self.dissipation_accum

    def snapshot_fields(self):
        return [Field(self.grid, s) for s in self.snapshots]


def evolve(state: FlowState, cfg: FlowConfig, p: EnergyParams, spec,
           observers: dict | list | None = None, observer_stride: int = 1,
           stop: Callable | None = None, deadline: float | None = None,
           record_snapshots: bool = True) -> Trajectory:
    """Step until ``cfg.t_end``.

    ``observers`` maps names to callables ``obs(state)``; each is invoked at
    t = 0 and every ``observer_stride`` steps, and its return values are
    collected in ``Trajectory.observations[name]``. ``stop(state)`` returning
    true ends the run early. ``deadline`` is a ``time.monotonic()`` value
    past which :class:`BudgetExceeded` is raised.
    """
    if observers is None:
        observers = {}
    elif not isinstance(observers, dict):
        observers = {getattr(o, "__name__", f"observer{i}"): o for i, o in enumerate(observers)}
    if observer_stride < 1:
        raise ArgumentError("observer_stride must be at least 1")
    if not state.energy_history:
        raise ArgumentError("state has no energy history; build it with FlowState.initial")
    ops = SpectralFlow(state.field.grid.n, p, spec)
    if cfg.scheme == SI:
        denom = si_denominator(ops.n, p, cfg.tau)

        def step(s):
            return step_semi_implicit(s, cfg, p, spec, ops, denom)
    else:
        def step(s):
            return step_minimizing_movements(s, cfg, p, spec, ops)

    obs_out = {name: [] for name in observers}
    snap_t, snaps = [], []

    def observe(s):
        if record_snapshots and s.step_index % cfg.snapshot_stride == 0:
            snap_t.append(s.time)
            snaps.append(np.asarray(s.field.samples))
        if s.step_index % observer_stride == 0:
            for name, fn in observers.items():
                obs_out[name].append((s.time, fn(s)))

    observe(state)
    stopped = False
    iters = 0
    for _ in range(cfg.n_steps - state.step_index):
        try:
            state = step(state)
        except StepFailure as exc:
            exc.time = state.time
            raise
        iters += state.inner_iters
        observe(state)
        if stop is not None and stop(state):
            stopped = True
            break
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceeded(f"time budget exhausted at t = {state.time:.6g}")
    if state.energy_history[-1][0] != state.time:
        state.energy_history.append((state.time, state.energy))
    return Trajectory(cfg, p, state, state.energy_history, state.dissipation_accum,
                      snap_t, snaps, obs_out, stopped, iters)


def mass_identity_residual(traj: Trajectory, p: EnergyParams, spec) -> float:
    """Largest ``|int u(t_m) - int u_0 + sum_{j<m} tau int W'(u_j)|``.

    The discrete mass balance of the flow, with the reaction integral
    sampled at the left end of each step. Needs a snapshot at every step.
    """
    if traj.config.snapshot_stride != 1 or len(traj.snapshots) < 2:
        raise ArgumentError("mass identity needs snapshots at every step (stride 1, at least two)")
    S = np.asarray(traj.snapshots)
    mass = S.mean(axis=1)
    react = spec(S, 1).mean(axis=1)
    predicted = mass[0] - traj.tau * np.concatenate(([0.0], np.cumsum(react[:-1])))
    return float(np.max(np.abs(mass - predicted)))
