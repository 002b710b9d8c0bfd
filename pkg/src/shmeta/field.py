"""Sampled fields on the unit torus or on an interval.

Torus fields are differentiated spectrally; interval fields use centered
finite differences with one-sided closures at the endpoints.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ArgumentError, DegenerateFieldError

TORUS = "torus"
INTERVAL = "interval"


@dataclass(frozen=True)
class Grid:
    topology: str
    a: float
    b: float
    n: int

    def __post_init__(self):
        if self.topology not in (TORUS, INTERVAL):
            raise ArgumentError(f"unknown topology {self.topology!r}")
        if int(self.n) != self.n or self.n < 16:
            raise ArgumentError(f"grid needs n >= 16 samples, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if self.topology == TORUS:
            if (self.a, self.b) != (0.0, 1.0):
                raise ArgumentError("the torus is the unit interval [0, 1) with periodic ends")
            if self.n & (self.n - 1):
                raise ArgumentError(f"torus grids need a power-of-two n, got {self.n}")
        elif not self.b > self.a:
            raise ArgumentError(f"interval needs b > a, got [{self.a}, {self.b}]")

    @classmethod
    def torus(cls, n):
        return cls(TORUS, 0.0, 1.0, n)

    @classmethod
    def interval(cls, a, b, n):
        return cls(INTERVAL, float(a), float(b), n)

    @property
    def periodic(self):
        return self.topology == TORUS

    @property
    def length(self):
        return self.b - self.a

    @property
    def h(self):
        return self.length / self.n if self.periodic else self.length / (self.n - 1)

    @property
    def x(self):
        if self.periodic:
            return np.arange(self.n) / self.n
        return np.linspace(self.a, self.b, self.n)

    @property
    def weights(self):
        """Quadrature weights: uniform on the torus, trapezoid on intervals."""
        w = np.full(self.n, self.h)
        if not self.periodic:
            w[0] = w[-1] = 0.5 * self.h
        return w

    def wavenumbers(self):
        """Angular wavenumbers for ``numpy.fft.rfft`` output."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.length / self.n)


class Field:
    """Nodal samples on a :class:`Grid`. Samples are stored read-only."""

    __slots__ = ("grid", "samples")

    def __init__(self, grid: Grid, samples):
        u = np.array(samples, dtype=float)
        if u.shape != (grid.n,):
            raise ArgumentError(f"expected {grid.n} samples, got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise ArgumentError("field samples must be finite")
        u.flags.writeable = False
        self.grid = grid
        self.samples = u

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(grid.x))

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.n, float(value)))

    @property
    def x(self):
        return self.grid.x

    def with_samples(self, samples):
        return Field(self.grid, samples)

    def __neg__(self):
        return Field(self.grid, -self.samples)

    def __repr__(self):
        return f"Field({self.grid.topology}, n={self.grid.n}, range=[{self.samples.min():.4g}, {self.samples.max():.4g}])"


# --- differentiation ---------------------------------------------------------

def spectral_derivative(u, length, order):
    """Derivative of a periodic sample vector; Nyquist dropped for odd orders."""
    n = u.size
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    symbol = (1j * k) ** order
    if order % 2 and n % 2 == 0:
        symbol[-1] = 0.0
    return np.fft.irfft(symbol * np.fft.rfft(u), n)


@lru_cache(maxsize=64)
def _fd_weights(offsets, order):
    # Vandermonde solve on integer offsets; stencils here are at most 6 wide
    off = np.array(offsets, dtype=float)
    m = off.size
    A = np.vander(off, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(A, rhs)


def fd_derivative(u, h, order):
    """Second-order finite differences, one-sided near the ends."""
    n = u.size
    half = (order + 1) // 2
    width = order + 2
    out = np.empty(n)
    centered = np.arange(-half, half + 1)
    w = _fd_weights(tuple(centered), order)
    interior = slice(half, n - half)
    acc = np.zeros(n - 2 * half)
    for c, o in zip(w, centered):
        acc += c * u[half + o: n - half + o]
    out[interior] = acc
    for i in list(range(half)) + list(range(n - half, n)):
        start = min(max(i - width // 2, 0), n - width)
        offs = tuple(range(start - i, start - i + width))
        wi = _fd_weights(offs, order)
        out[i] = wi @ u[start:start + width]
    return out / h**order


def derivative(f: Field, order: int) -> Field:
    """``order``-th derivative of ``f``, ``order`` in 1..4."""
    if order not in (1, 2, 3, 4):
        raise ArgumentError(f"derivative order must be in 1..4, got {order}")
    g = f.grid
    if g.periodic:
        d = spectral_derivative(f.samples, g.length, order)
    else:
        d = fd_derivative(f.samples, g.h, order)
    return Field(g, d)


# --- quadrature --------------------------------------------------------------

def integrate(f: Field) -> float:
    g = f.grid
    if g.periodic:
        return float(np.mean(f.samples) * g.length)
    return float(np.trapezoid(f.samples, dx=g.h))


def _check_same_grid(f, g):
    if f.grid != g.grid:
        raise ArgumentError(f"grid mismatch: {f.grid} vs {g.grid}")


def distance(f: Field, g: Field, norm: str = "L1") -> float:
    _check_same_grid(f, g)
    diff = f.samples - g.samples
    norm = norm.upper()
    if norm == "L1":
        return integrate(Field(f.grid, np.abs(diff)))
    if norm == "L2":
        return math.sqrt(integrate(Field(f.grid, diff * diff)))
    if norm in ("LINF", "INF"):
        return float(np.max(np.abs(diff)))
    raise ArgumentError(f"unknown norm {norm!r}")


# --- zeros -------------------------------------------------------------------

def find_zeros(f: Field, min_separation: float | None = None) -> np.ndarray:
    """Sign-change zeros of ``f`` located by linear interpolation.

    Zeros closer than ``min_separation`` (default four grid spacings) are
    merged, keeping the first; on the torus the wrap-around pair counts.
    Touching zeros without a sign change are ignored.
    """
    g = f.grid
    h = g.h
    if min_separation is None:
        min_separation = 4 * h
    if min_separation < 2 * h * (1 - 1e-12):
        raise ArgumentError(f"min_separation {min_separation} is below two grid spacings ({2 * h})")
    u = f.samples
    if np.max(np.abs(u)) <= 1e-14:
        raise DegenerateFieldError("field is identically zero to within 1e-14")
    x = g.x
    nz = np.flatnonzero(u != 0.0)
    if g.periodic:
        nxt = np.roll(nz, -1)
    else:
        nxt = nz[1:]
        nz = nz[:-1]
    zeros = []
    for i, j in zip(nz, nxt):
        if np.sign(u[i]) == np.sign(u[j]):
            continue
        xi, xj = x[i], x[j]
        if g.periodic and j <= i:
            xj = xj + g.length
        if (j - i) % g.n > 1:
            # exact zeros sit between the two nonzero nodes; take their middle
            z = 0.5 * (xi + xj)
        else:
            z = xi + (xj - xi) * u[i] / (u[i] - u[j])
        if g.periodic:
            z = z % g.length
        zeros.append(z)
    zeros.sort()
    merged = []
    for z in zeros:
        if merged and z - merged[-1] < min_separation:
            continue
        merged.append(z)
    if g.periodic and len(merged) > 1 and merged[0] + g.length - merged[-1] < min_separation:
        merged.pop()
    return np.array(merged)


def zero_gaps(zeros, length=1.0, periodic=True):
    """Gaps ``d_k = x_{k+1} - x_k``, including the periodic wrap gap."""
    zeros = np.asarray(zeros, dtype=float)
    if zeros.size == 0:
        return zeros
    if not periodic:
        return np.diff(zeros)
    return np.diff(np.append(zeros, zeros[0] + length))


# --- I/O ---------------------------------------------------------------------

def write_field_csv(f: Field, path, header_comment=None):
    """Write ``x,u`` columns at 17 significant digits, with an optional ``#`` line first."""
    with open(path, "w", newline="") as fh:
        if header_comment is not None:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u"])
        for xi, ui in zip(f.x, f.samples):
            w.writerow([f"{xi:.17g}", f"{ui:.17g}"])


def read_field_csv(path, topology=None):
    """Read an ``x,u`` CSV; ``#`` lines are skipped.

    The topology defaults to torus when x spans [0, 1) uniformly.
    """
    xs, us = [], []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
        for row in csv.DictReader(lines):
            xs.append(float(row["x"]))
            us.append(float(row["u"]))
    xs = np.array(xs)
    n = xs.size
    if topology is None:
        spacing = 1.0 / n if n else 0.0
        on_torus = n >= 16 and abs(xs[0]) < 1e-12 and abs(xs[-1] - (1.0 - spacing)) < 1e-9
        topology = TORUS if on_torus else INTERVAL
    grid = Grid.torus(n) if topology == TORUS else Grid.interval(xs[0], xs[-1], n)
    return Field(grid, us)


def zeros_to_json(zeros):
    return json.dumps([float(f"{z:.17g}") for z in zeros])
