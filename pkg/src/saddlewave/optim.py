"""Perturbed gradient methods that escape saddles with wave-packet kicks.

All methods share one loop shape: record the iterate, and if the
gradient is small draw a perturbation ``xi``, step a fixed distance
``(2/3) sqrt(eps/rho)`` along ``+-xi`` (whichever is lower), otherwise
take an ordinary first-order step.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, HessianUnavailable
from .landscapes import Landscape, evaluate, finite_difference_hessian, gradient
from .perturb import PDEOptions, ScheduleParams, apply_perturbation, quantum_simulation_sample


@dataclass
class Event:
    t: int
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    """Iterates and events of one run.

    ``origins[t]`` is the point the first-order step of iteration ``t``
    started from: ``iterates[t]`` unless a perturbation moved it.
    """

    algorithm: str
    iterates: list = field(default_factory=list)
    fvals: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    origins: list = field(default_factory=list)
    momenta: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    events: list = field(default_factory=list)
    certified_point: Optional[np.ndarray] = None

    def record(self, x, f, gnorm, v=None, energy=None):
        self.iterates.append(np.array(x, dtype=float))
        self.fvals.append(float(f))
        self.grad_norms.append(float(gnorm))
        if v is not None:
            self.momenta.append(np.array(v, dtype=float))
            self.energies.append(float(energy))

    def event(self, t, kind, **payload):
        self.events.append(Event(t, kind, payload))

    @property
    def x_final(self):
        return self.certified_point if self.certified_point is not None else self.iterates[-1]

    def events_of(self, kind):
        return [e for e in self.events if e.kind == kind]

    def perturbed_steps(self):
        """Iteration indices at which a perturbation was applied."""
        return {e.t for e in self.events if e.kind in ("qs_call", "perturb_classical")}

    def to_csv(self, path):
        """Columns ``t, f, grad_norm, event`` (events at one step joined by ';')."""
        by_t = {}
        for e in self.events:
            by_t.setdefault(e.t, []).append(e.kind)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "f", "grad_norm", "event"])
            for t, (f, g) in enumerate(zip(self.fvals, self.grad_norms)):
                w.writerow([t, f"{f:.9g}", f"{g:.9g}", ";".join(by_t.get(t, []))])


def uniform_ball(rng: np.random.Generator, n: int, radius: float):
    """Uniform point in the ``n``-ball of the given radius."""
    z = rng.standard_normal(n)
    z /= np.linalg.norm(z)
    return radius * rng.random() ** (1.0 / n) * z


def _start(landscape, x0):
    x = np.array(x0, dtype=float)
    if x.shape != (landscape.dim,):
        raise DimensionMismatch(f"x0 must have shape ({landscape.dim},)")
    return x


def gd_step(landscape: Landscape, x, eta, grad=None):
    """``x - eta * grad``; the exact gradient is used when ``grad`` is None."""
    g = gradient(landscape, x) if grad is None else grad
    return np.asarray(x, dtype=float) - eta * g


# ---------------------------------------------------------------------------
# noisy gradients

@dataclass(frozen=True)
class NoisyGradientModel:
    """Gradient estimates with error at most ``400 omega0 n sqrt(delta_q ell)``."""

    delta_q: float
    ell: float
    n: int
    omega0: float = 1.0

    @property
    def bound(self):
        return 400.0 * self.omega0 * self.n * math.sqrt(self.delta_q * self.ell)


def jordan_delta_q(delta, eps, ell, n):
    """Evaluation accuracy that keeps gradient errors harmless for PGD."""
    return (1.0 / (2.0 * ell)) * (delta * eps / (1000.0 * n**2)) ** 2


def noisy_gradient(landscape: Landscape, x, model: NoisyGradientModel, rng: np.random.Generator):
    """Exact gradient plus an error drawn uniformly from the ball of radius ``model.bound``.

    A zero bound returns the exact gradient without consuming random numbers.
    """
    g = gradient(landscape, x)
    if model.bound == 0:
        return g
    return g + uniform_ball(rng, landscape.dim, model.bound)


# ---------------------------------------------------------------------------
# PGD family

def _perturbed_gd(landscape, x0, params, grad_fn, perturb_fn, kind, name, early_stop,
                  exact=True):
    x = _start(landscape, x0)
    traj = Trajectory(name)
    for t in range(params.T + 1):
        g = grad_fn(x)
        fx = float(evaluate(landscape, x))
        traj.record(x, fx, np.linalg.norm(g if exact else gradient(landscape, x)))
        if t == params.T:
            break
        if np.linalg.norm(g) <= params.eps:
            x_new, info = perturb_fn(x, g)
            f_new = float(evaluate(landscape, x_new))
            traj.event(t, kind, x_before=x.copy(), x_after=x_new.copy(), f_before=fx,
                       f_after=f_new, **info)
            if early_stop and fx - f_new < params.script_F_prime:
                traj.certified_point = x.copy()
                traj.event(t, "sosp_certified", x=x.copy(), f=fx)
                return traj
            x = x_new
            g = grad_fn(x)
        traj.origins.append(x.copy())
        x = x - params.eta * g
    return traj


def pgd_qs(landscape: Landscape, x0, params: ScheduleParams, backend: str = "analytic",
           rng: Optional[np.random.Generator] = None, *, t_e: Optional[float] = None,
           pde: Optional[PDEOptions] = None, early_stop: bool = False) -> Trajectory:
    """Gradient descent with wave-packet perturbations at small gradients.

    Parameters
    ----------
    landscape : Landscape
    x0 : array
        Start point.
    params : ScheduleParams
        Uses ``eps, rho, eta, r0, T, script_F_prime`` and ``script_T_prime``
        (the default evolution time).
    backend : {"analytic", "pde"}
    rng : numpy Generator
    t_e : float, optional
        Overrides the evolution time.
    pde : PDEOptions, optional
        Grid settings for the ``pde`` backend.
    early_stop : bool
        Stop when a perturbation fails to lower ``f`` by ``script_F_prime``
        and certify the point it was applied at.
    """
    rng = np.random.default_rng() if rng is None else rng

    def grad_fn(x):
        return gradient(landscape, x)

    def perturb_fn(x, g):
        smp = quantum_simulation_sample(landscape, x, params, t_e, backend, rng, pde, grad=g)
        return apply_perturbation(landscape, x, smp.xi, params.eps, params.rho), {"xi": smp.xi}

    return _perturbed_gd(landscape, x0, params, grad_fn, perturb_fn, "qs_call",
                         "pgd_qs", early_stop)


def pgd_classical(landscape: Landscape, x0, params: ScheduleParams,
                  rng: Optional[np.random.Generator] = None, radius: Optional[float] = None,
                  *, early_stop: bool = False) -> Trajectory:
    """Gradient descent with uniform-ball kicks of radius ``params.r0`` at small gradients."""
    rng = np.random.default_rng() if rng is None else rng
    radius = params.r0 if radius is None else radius

    def grad_fn(x):
        return gradient(landscape, x)

    def perturb_fn(x, g):
        xi = uniform_ball(rng, landscape.dim, radius)
        return x + xi, {"xi": xi}

    return _perturbed_gd(landscape, x0, params, grad_fn, perturb_fn, "perturb_classical",
                         "pgd_classical", early_stop)


def pgd_jordan(landscape: Landscape, x0, params: ScheduleParams, model: NoisyGradientModel,
               backend: str = "analytic", rng: Optional[np.random.Generator] = None, *,
               t_e: Optional[float] = None, pde: Optional[PDEOptions] = None,
               early_stop: bool = False) -> Trajectory:
    """:func:`pgd_qs` driven by noisy gradient estimates everywhere.

    The recorded ``grad_norms`` are exact; the estimates only steer the run.
    """
    rng = np.random.default_rng() if rng is None else rng
    admissible = jordan_delta_q(params.delta, params.eps, params.ell, params.n)
    if model.delta_q > admissible * (1 + 1e-12):
        warnings.warn(f"delta_q={model.delta_q:g} exceeds the admissible {admissible:g}",
                      stacklevel=2)

    def grad_fn(x):
        return noisy_gradient(landscape, x, model, rng)

    def perturb_fn(x, g):
        smp = quantum_simulation_sample(landscape, x, params, t_e, backend, rng, pde, grad=g)
        return apply_perturbation(landscape, x, smp.xi, params.eps, params.rho), {"xi": smp.xi}

    return _perturbed_gd(landscape, x0, params, grad_fn, perturb_fn, "qs_call",
                         "pgd_jordan", early_stop, exact=model.bound == 0)


# ---------------------------------------------------------------------------
# accelerated variant

def nce(landscape: Landscape, x, v, s):
    """Negative-curvature exploitation step; returns ``(x_next, 0)``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv >= s or nv == 0:
        return x.copy(), np.zeros_like(x)
    d = s * v / nv
    plus, minus = x + d, x - d
    best = plus if evaluate(landscape, plus) <= evaluate(landscape, minus) else minus
    return best, np.zeros_like(x)


def agd_hamiltonian(landscape: Landscape, x, v, eta_prime):
    """Energy ``f(x) + ||v||^2 / (2 eta')`` of a momentum state."""
    v = np.asarray(v, dtype=float)
    return float(evaluate(landscape, x)) + float(v @ v) / (2.0 * eta_prime)


def agd_step(landscape: Landscape, x, v, eta_prime, theta, gamma, s):
    """One momentum step with the negative-curvature safeguard.

    Returns ``(x_next, v_next, event)`` where ``event`` is ``None``,
    ``"nce_momentum_reset"`` or ``"nce_step"``.  The safeguard compares ``f(x)``
    with a strongly concave model around ``y = x + (1 - theta) v``; it is
    only evaluated when ``x != y`` since the test is vacuous otherwise.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    y = x + (1.0 - theta) * v
    gy = gradient(landscape, y)
    x1 = y - eta_prime * gy
    v1 = x1 - x
    d = x - y
    if np.any(d):
        fx = float(evaluate(landscape, x))
        model = float(evaluate(landscape, y)) + float(gy @ d) - 0.5 * gamma * float(d @ d)
        if fx <= model:
            kind = "nce_momentum_reset" if np.linalg.norm(v) >= s else "nce_step"
            x1, v1 = nce(landscape, x, v, s)
            return x1, v1, kind
    return x1, v1, None


def pagd_qs(landscape: Landscape, x0, params: ScheduleParams, backend: str = "analytic",
            rng: Optional[np.random.Generator] = None, *, t_e: Optional[float] = None,
            pde: Optional[PDEOptions] = None, early_stop: bool = False) -> Trajectory:
    """Accelerated gradient descent with wave-packet perturbations.

    Small-gradient iterations take the perturbation and reset the momentum;
    other iterations take a momentum step with step size ``eta'``.
    Momenta and the energy ``f + ||v||^2/(2 eta')`` are recorded.
    """
    rng = np.random.default_rng() if rng is None else rng
    x = _start(landscape, x0)
    v = np.zeros_like(x)
    traj = Trajectory("pagd_qs")
    for t in range(params.T + 1):
        g = gradient(landscape, x)
        fx = float(evaluate(landscape, x))
        energy = agd_hamiltonian(landscape, x, v, params.eta_prime)
        traj.record(x, fx, np.linalg.norm(g), v, energy)
        if t == params.T:
            break
        traj.origins.append(x.copy())
        if np.linalg.norm(g) <= params.eps:
            smp = quantum_simulation_sample(landscape, x, params, t_e, backend, rng, pde, grad=g)
            x_new = apply_perturbation(landscape, x, smp.xi, params.eps, params.rho)
            f_new = float(evaluate(landscape, x_new))
            traj.event(t, "qs_call", x_before=x.copy(), x_after=x_new.copy(), f_before=fx,
                       f_after=f_new, xi=smp.xi)
            if early_stop and fx - f_new < params.script_F_prime:
                traj.certified_point = x.copy()
                traj.event(t, "sosp_certified", x=x.copy(), f=fx)
                return traj
            x, v = x_new, np.zeros_like(x)
        else:
            x, v, kind = agd_step(landscape, x, v, params.eta_prime, params.theta,
                                  params.gamma, params.s)
            if kind is not None:
                traj.event(t, kind)
    return traj


# ---------------------------------------------------------------------------
# certificates and trajectory checks

@dataclass(frozen=True)
class SOSPCertificate:
    passed: bool
    grad_norm: float
    lambda_min: float
    eps: float
    curvature_threshold: float

    def __bool__(self):
        return self.passed


def is_eps_sosp(landscape: Landscape, x, eps, rho) -> SOSPCertificate:
    """Check ``||grad f|| <= eps`` and ``lambda_min(Hess f) >= -sqrt(rho eps)``."""
    x = np.asarray(x, dtype=float)
    gn = float(np.linalg.norm(gradient(landscape, x)))
    try:
        w, _ = landscape.hessian_eigh(x)
    except HessianUnavailable:
        w = np.linalg.eigvalsh(finite_difference_hessian(landscape, x))
    lam = float(np.min(w))
    thr = -math.sqrt(rho * eps)
    return SOSPCertificate(gn <= eps and lam >= thr, gn, lam, float(eps), thr)


def descent_violations(landscape: Landscape, traj: Trajectory, eta, slack=1e-9):
    """Non-perturbed steps with ``f(x+) - f(x) > -eta ||grad f(x)||^2 / 2 + slack``."""
    bad = []
    skip = traj.perturbed_steps()
    for t in range(len(traj.iterates) - 1):
        if t in skip:
            continue
        x = traj.iterates[t]
        g = gradient(landscape, x)
        lhs = traj.fvals[t + 1] - traj.fvals[t]
        if lhs > -0.5 * eta * float(g @ g) + slack:
            bad.append(t)
    return bad


def hamiltonian_violations(traj: Trajectory, slack=1e-9):
    """Momentum iterations at which the recorded energy increased."""
    skip = traj.perturbed_steps()
    return [t for t in range(len(traj.energies) - 1)
            if t not in skip and traj.energies[t + 1] > traj.energies[t] + slack]


def localization_violations(traj: Trajectory, eta, c):
    """Gradient-only windows breaking the improve-or-localize bound.

    For every window ``[t0, t1]`` without perturbations, every ``tau`` in
    it must satisfy ``||x_tau - x_t0|| <= 2 sqrt(eta L |f(x_t0) - f(x_t1)|)
    + 2 eta L sqrt(c)`` with ``L = t1 - t0``.  Returns ``(t0, t1, tau)``
    triples that fail.
    """
    skip = traj.perturbed_steps()
    X = np.asarray(traj.iterates)
    F = np.asarray(traj.fvals)
    n = len(X)
    bad = []
    # maximal runs of consecutive gradient-only iterations
    start = 0
    while start < n - 1:
        if start in skip:
            start += 1
            continue
        end = start
        while end < n - 1 and end not in skip:
            end += 1
        # steps start..end-1 are gradient-only, iterates start..end
        for t0 in range(start, end):
            dist = np.linalg.norm(X[t0 + 1:end + 1] - X[t0], axis=1)
            run = np.maximum.accumulate(dist)
            L = np.arange(1, end - t0 + 1)
            bound = 2 * np.sqrt(eta * L * np.abs(F[t0] - F[t0 + 1:end + 1])) + 2 * eta * L * math.sqrt(c)
            for k in np.nonzero(run > bound * (1 + 1e-12) + 1e-15)[0]:
                tau = t0 + 1 + int(np.argmax(dist[:k + 1]))
                bad.append((t0, t0 + 1 + int(k), tau))
        start = end
    return bad
