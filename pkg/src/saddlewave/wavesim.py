"""Finite-difference simulation of the scaled Schrodinger flow.

The wave function ``Phi = q + i p`` lives on a uniform cell-centred grid
over the box ``[-M, M]^dim``.  The Hamiltonian

    H = -(r0^2 / 2) Laplace_h + V / r0^2

uses the standard (2 dim + 1)-point Laplacian with Dirichlet (zero ghost
cells) or periodic boundaries.  Because ``H`` is real symmetric, the flow
splits into ``dq/dt = H p``, ``dp/dt = -H q``, which is integrated with
the symplectic leapfrog scheme.  Every leapfrog step is a polynomial in
``H``, so steps of different length commute and running the scheme with
``-H`` undoes a run exactly up to rounding.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Union

import numba
import numpy as np

from .errors import ConfigError, DimensionMismatch, GridTooLarge, NumericalInstability

MAX_GRID_POINTS = 2**25


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``mesh`` cell centres per axis on ``[-half_width, half_width]``."""

    dim: int
    half_width: float
    mesh: int
    boundary: str = "dirichlet"

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.mesh

    @property
    def shape(self):
        return (self.mesh,) * self.dim

    @property
    def size(self):
        return self.mesh**self.dim

    @property
    def cell_volume(self):
        return self.spacing**self.dim

    def axis(self):
        """Coordinates of the cell centres along one axis."""
        a = self.spacing
        return -self.half_width + (np.arange(self.mesh) + 0.5) * a

    def points(self):
        """All grid points, shape ``shape + (dim,)``."""
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.dim), indexing="ij"), axis=-1)

    def flat_points(self):
        return self.points().reshape(-1, self.dim)


def build_grid(dim: int, half_width: float, mesh: int, boundary: str = "dirichlet",
               max_points: int = MAX_GRID_POINTS) -> GridSpec:
    """Validated :class:`GridSpec`."""
    if dim not in (1, 2, 3):
        raise ConfigError(f"grid dimension must be 1, 2 or 3, got {dim}")
    if mesh < 2:
        raise ConfigError("mesh must be at least 2")
    if not half_width > 0:
        raise ConfigError("half_width must be positive")
    if boundary not in ("dirichlet", "periodic"):
        raise ConfigError(f"boundary must be 'dirichlet' or 'periodic', got {boundary!r}")
    if mesh**dim > max_points:
        raise GridTooLarge(f"{mesh}^{dim} grid points exceed the cap of {max_points}")
    return GridSpec(int(dim), float(half_width), int(mesh), boundary)


# ---------------------------------------------------------------------------
# kernels; arrays are always viewed as 3-D, with unit axes for dim < 3

@numba.njit(cache=True)
def _neighbours(i, n, periodic):
    # indices of the two neighbours along an axis and their weights (0 when absent)
    if n == 1:
        return 0, 0, 0.0, 0.0
    im, ip, wm, wp = i - 1, i + 1, 1.0, 1.0
    if im < 0:
        if periodic:
            im = n - 1
        else:
            im, wm = 0, 0.0
    if ip > n - 1:
        if periodic:
            ip = 0
        else:
            ip, wp = 0, 0.0
    return im, ip, wm, wp


@numba.njit(cache=True)
def _apply(u, out, diag, off, periodic):
    # innermost axis always has length >= 2; outer unit axes are inactive
    n0, n1, n2 = u.shape
    for i in range(n0):
        im, ip, wim, wip = _neighbours(i, n0, periodic)
        for j in range(n1):
            jm, jp, wjm, wjp = _neighbours(j, n1, periodic)
            for k in range(1, n2 - 1):
                s = (wim * u[im, j, k] + wip * u[ip, j, k]
                     + wjm * u[i, jm, k] + wjp * u[i, jp, k]
                     + u[i, j, k - 1] + u[i, j, k + 1])
                out[i, j, k] = diag[i, j, k] * u[i, j, k] + off * s
            for k in (0, n2 - 1):
                km, kp, wkm, wkp = _neighbours(k, n2, periodic)
                s = (wim * u[im, j, k] + wip * u[ip, j, k]
                     + wjm * u[i, jm, k] + wjp * u[i, jp, k]
                     + wkm * u[i, j, km] + wkp * u[i, j, kp])
                out[i, j, k] = diag[i, j, k] * u[i, j, k] + off * s


@numba.njit(cache=True)
def _axpy(y, a, x):
    n0, n1, n2 = y.shape
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                y[i, j, k] += a * x[i, j, k]


@numba.njit(cache=True)
def _leapfrog(q, p, diag, off, periodic, steps):
    hq = np.empty_like(q)
    hp = np.empty_like(p)
    _apply(q, hq, diag, off, periodic)
    for s in range(steps.shape[0]):
        h = steps[s]
        _axpy(p, -0.5 * h, hq)
        _apply(p, hp, diag, off, periodic)
        _axpy(q, h, hp)
        _apply(q, hq, diag, off, periodic)
        _axpy(p, -0.5 * h, hq)


def _as3d(u, grid):
    return u.reshape((1,) * (3 - grid.dim) + grid.shape)


@dataclass(frozen=True)
class DiscreteHamiltonian:
    """Finite-difference Hamiltonian on a grid.

    ``potential`` holds the (already shifted) potential values ``V`` on the
    grid; ``sign = -1`` represents ``-H``.
    """

    grid: GridSpec
    r0: float
    potential: np.ndarray
    sign: float = 1.0

    @property
    def off_diagonal(self):
        return -self.sign * self.r0**2 / (2.0 * self.grid.spacing**2)

    @property
    def diagonal(self):
        g = self.grid
        return self.sign * (self.r0**2 * g.dim / g.spacing**2 + self.potential / self.r0**2)

    def norm_bound(self):
        """Gershgorin bound on the spectral norm."""
        g = self.grid
        return (self.r0**2 * 2 * g.dim / g.spacing**2
                + float(np.max(np.abs(self.potential))) / self.r0**2)

    def negated(self):
        return replace(self, sign=-self.sign)

    def apply(self, u):
        """``H u`` for a flat vector ``u``."""
        u = np.ascontiguousarray(u, dtype=float)
        if u.shape != (self.grid.size,):
            raise DimensionMismatch(f"vector of length {self.grid.size} expected")
        out = np.empty_like(u)
        _apply(_as3d(u, self.grid), _as3d(out, self.grid),
               _as3d(np.ascontiguousarray(self.diagonal), self.grid),
               self.off_diagonal, self.grid.boundary == "periodic")
        return out


def discretize(grid: GridSpec, potential: Union[Callable, np.ndarray], r0: float,
               reference=None) -> DiscreteHamiltonian:
    """Sample ``potential`` on ``grid``.

    ``potential`` is a vectorised callable on points of shape ``(..., dim)``
    or an array of grid shape.  When ``reference`` is given, the potential
    is shifted so that its value at that point is zero.
    """
    if not r0 > 0:
        raise ConfigError("r0 must be positive")
    if callable(potential):
        V = np.asarray(potential(grid.points()), dtype=float)
        if reference is not None:
            V = V - float(potential(np.asarray(reference, dtype=float)))
    else:
        V = np.asarray(potential, dtype=float)
        if reference is not None:
            raise ConfigError("reference shift needs a callable potential")
    if V.shape != grid.shape:
        raise DimensionMismatch(f"potential has shape {V.shape}, grid is {grid.shape}")
    if not np.all(np.isfinite(V)):
        raise NumericalInstability("potential is not finite on the grid")
    return DiscreteHamiltonian(grid, float(r0), np.ascontiguousarray(V))


@dataclass(frozen=True)
class WaveState:
    """Wave function ``q + i p`` (flat vectors) at time ``t``."""

    grid: GridSpec
    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    @property
    def psi(self):
        return (self.q + 1j * self.p).reshape(self.grid.shape)

    def probabilities(self):
        """Cell probabilities ``q^2 + p^2`` (flat)."""
        return self.q * self.q + self.p * self.p

    def norm(self):
        return float(np.sqrt(np.sum(self.probabilities())))


def initial_gaussian(grid: GridSpec, center, r0: float) -> WaveState:
    """Real Gaussian amplitude whose density has variance ``r0^2`` per axis."""
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.shape != (grid.dim,):
        raise DimensionMismatch(f"center must have {grid.dim} entries")
    if not r0 > 0:
        raise ConfigError("r0 must be positive")
    pts = grid.flat_points()
    amp = np.exp(-np.sum((pts - center) ** 2, axis=1) / (4.0 * r0**2))
    nrm = np.sqrt(np.sum(amp * amp))
    if nrm == 0 or not np.isfinite(nrm):
        raise NumericalInstability(
            f"initial packet (r0={r0:g}) has no mass on the grid (spacing {grid.spacing:g})")
    return WaveState(grid, amp / nrm, np.zeros_like(amp), 0.0)


def auto_dt(H: DiscreteHamiltonian) -> float:
    return 0.5 / H.norm_bound()


def _step_sizes(t_e, dt):
    n = max(1, math.ceil(t_e / dt - 1e-9))
    steps = np.full(n, dt)
    steps[-1] = t_e - (n - 1) * dt
    return steps


def evolve(H: DiscreteHamiltonian, state: WaveState, t_e: float,
           dt: Optional[float] = None) -> WaveState:
    """Advance ``state`` by ``t_e`` with leapfrog steps of size ``dt``.

    The last step is shortened to land on ``t_e`` exactly.  ``dt`` defaults
    to ``0.5 / ||H||``; a supplied ``dt`` must satisfy ``dt ||H|| < 2``.
    """
    if state.grid != H.grid:
        raise DimensionMismatch("state and Hamiltonian live on different grids")
    if t_e < 0:
        raise ValueError("t_e must be non-negative")
    if t_e == 0:
        return WaveState(state.grid, state.q.copy(), state.p.copy(), state.t)
    bound = H.norm_bound()
    if dt is None:
        dt = 0.5 / bound
    elif not dt > 0 or dt * bound >= 2.0:
        raise NumericalInstability(f"dt={dt:g} violates the leapfrog limit 2/||H|| = {2.0 / bound:g}")
    g = state.grid
    q = state.q.copy()
    p = state.p.copy()
    _leapfrog(_as3d(q, g), _as3d(p, g), _as3d(np.ascontiguousarray(H.diagonal), g),
              H.off_diagonal, g.boundary == "periodic", _step_sizes(t_e, dt))
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise NumericalInstability("wave function became non-finite")
    return WaveState(g, q, p, state.t + H.sign * t_e)


def evolve_snapshots(H: DiscreteHamiltonian, state: WaveState, times: Sequence[float],
                     dt: Optional[float] = None) -> list[WaveState]:
    """States at each of the increasing ``times`` (measured from ``state.t``)."""
    out = []
    cur = state
    last = 0.0
    for t in times:
        if t < last:
            raise ValueError("snapshot times must be non-decreasing")
        cur = evolve(H, cur, t - last, dt)
        out.append(cur)
        last = t
    return out


def simulate(potential: Callable, grid: GridSpec, r0: float, t_e: float, center=None,
             dt: Optional[float] = None) -> WaveState:
    """Evolve a Gaussian packet centred at ``center`` for time ``t_e``.

    The potential is shifted by its value at ``center`` first.
    """
    center = np.zeros(grid.dim) if center is None else np.asarray(center, dtype=float)
    H = discretize(grid, potential, r0, reference=center)
    return evolve(H, initial_gaussian(grid, center, r0), t_e, dt)


# ---------------------------------------------------------------------------
# measurement and statistics

class PositionSampler:
    """Inverse-CDF sampler of cell centres weighted by ``|Phi|^2``."""

    def __init__(self, state: WaveState):
        prob = state.probabilities()
        cdf = np.cumsum(prob)
        if not np.isfinite(cdf[-1]) or cdf[-1] <= 0:
            raise NumericalInstability("state has no probability mass")
        self.cdf = cdf
        self.grid = state.grid
        self._axis = state.grid.axis()

    def index(self, rng: np.random.Generator, size=None):
        u = rng.random(size) * self.cdf[-1]
        idx = np.searchsorted(self.cdf, u, side="right")
        return np.minimum(idx, self.cdf.shape[0] - 1)

    def __call__(self, rng: np.random.Generator, size=None):
        idx = self.index(rng, size)
        multi = np.stack(np.unravel_index(idx, self.grid.shape), axis=-1)
        return self._axis[multi]


def measure(state: WaveState, rng: np.random.Generator, size=None):
    """Sample grid points with probability ``|Phi_j|^2``; ``(dim,)`` or ``(size, dim)``."""
    return PositionSampler(state)(rng, size)


def _marginal(state: WaveState, axis: int):
    g = state.grid
    if not 0 <= axis < g.dim:
        raise DimensionMismatch(f"axis {axis} out of range for dim {g.dim}")
    prob = state.probabilities().reshape(g.shape)
    other = tuple(i for i in range(g.dim) if i != axis)
    m = prob.sum(axis=other) if other else prob
    return m / m.sum()


def marginal_mean(state: WaveState, axis: int) -> float:
    return float(np.dot(_marginal(state, axis), state.grid.axis()))


def marginal_variance(state: WaveState, axis: int) -> float:
    """Variance of the position marginal along ``axis``."""
    m = _marginal(state, axis)
    x = state.grid.axis()
    mu = np.dot(m, x)
    return float(np.dot(m, (x - mu) ** 2))


def covariance(state: WaveState) -> np.ndarray:
    pts = state.grid.flat_points()
    prob = state.probabilities()
    prob = prob / prob.sum()
    mu = prob @ pts
    d = pts - mu
    return (d * prob[:, None]).T @ d


def tv_distance(state: WaveState, law) -> float:
    """Total variation between the grid distribution and a law with ``pdf``.

    The law is discretised by its density at cell centres times the cell
    volume.
    """
    g = state.grid
    ref = law.pdf(g.flat_points()) * g.cell_volume
    return 0.5 * float(np.sum(np.abs(state.probabilities() - ref)))


def quadrant_masses(state: WaveState) -> dict:
    """2-D only: probability in the ``x*y > 0`` and ``x*y < 0`` quadrant pairs."""
    if state.grid.dim != 2:
        raise DimensionMismatch("quadrant masses need a 2-D grid")
    pts = state.grid.flat_points()
    prob = state.probabilities()
    s = pts[:, 0] * pts[:, 1]
    return {"diag": float(prob[s > 0].sum()), "antidiag": float(prob[s < 0].sum())}


_AXES = "xyz"


def write_snapshot_csv(state: WaveState, path) -> None:
    """Per-cell dump: grid indices, coordinates, Re, Im and probability."""
    g = state.grid
    idx = np.indices(g.shape).reshape(g.dim, -1).T
    pts = g.axis()[idx]
    prob = state.probabilities()
    header = ([f"i{_AXES[k]}" for k in range(g.dim)] + [_AXES[k] for k in range(g.dim)]
              + ["re", "im", "prob"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n in range(g.size):
            w.writerow([*idx[n].tolist(), *(f"{v:.9g}" for v in pts[n]),
                        f"{state.q[n]:.9g}", f"{state.p[n]:.9g}", f"{prob[n]:.9g}"])
