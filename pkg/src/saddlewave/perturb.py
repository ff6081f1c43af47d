"""Step-size and perturbation schedules, and wave-packet perturbations.

The perturbation is drawn by preparing a Gaussian packet at the current
iterate, letting it evolve for time ``t_e`` in the potential

    V(y) = f(x + y) - f(x) - <grad f(x), y>

and measuring its position.  Subtracting the linear term keeps the packet
centred while it spreads along directions of negative curvature.  The
``analytic`` backend uses the exact Gaussian law of the quadratic model of
``f`` at ``x``; the ``pde`` backend simulates the flow on a grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import analytic, wavesim
from .errors import ConfigError, DimensionMismatch, NumericalInstability
from .landscapes import Landscape, evaluate, gradient

ALGORITHMS = ("pgd", "pagd", "jordan")


@dataclass(frozen=True)
class ScheduleParams:
    """Constants shared by the perturbed first-order methods.

    Derived fields satisfy the defining relations (``eta = 1/ell``,
    ``gamma = theta^2/eta``, ...) unless they were listed in
    ``overrides``; this is checked on construction.
    """

    eps: float
    delta: float
    ell: float
    rho: float
    n: int
    f_gap: float
    delta0: float
    eta: float
    eta_prime: float
    script_T_prime: float
    script_F_prime: float
    r0: float
    C_r: float
    C0: float
    alpha: float
    M: float
    kappa: float
    theta: float
    gamma: float
    s: float
    script_T: float
    c_A: float
    chi: float
    script_E: float
    T: int
    algorithm: str = "pgd"
    overrides: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("eps", "ell", "rho", "f_gap", "eta", "eta_prime", "r0", "M", "C_r"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.T < 0:
            raise ConfigError("T must be non-negative")
        bad = [name for name, want in _relations(self).items()
               if name not in self.overrides and not _close(getattr(self, name), want)]
        if bad:
            raise ConfigError(f"schedule relations violated for {bad}")

    def replace(self, **kw):
        """Copy with fields overridden (recorded in ``overrides``)."""
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        d["overrides"] = frozenset(self.overrides | set(kw))
        return ScheduleParams(**d)


def _close(a, b):
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=0.0) or a == b


def _relations(p):
    eps, rho, ell = p.eps, p.rho, p.ell
    return {
        "eta": 1.0 / ell,
        "eta_prime": 1.0 / (4.0 * ell),
        "script_F_prime": (2.0 / 81.0) * math.sqrt(eps**3 / rho),
        "kappa": ell / math.sqrt(rho * eps),
        "theta": 1.0 / (4.0 * math.sqrt(p.kappa)),
        "gamma": p.theta**2 / p.eta,
        "s": p.gamma / (4.0 * rho),
        "script_T": math.sqrt(p.kappa) * p.chi * p.c_A,
        "M": min(p.r0 / p.C_r, 1.0),
    }


def schedule_from(ell, rho, eps, delta, f_gap, n, overrides: Optional[dict] = None, *,
                  C_r=0.1, C0=1.0, c_A=4.0, alpha=1.0, chi=1.0, algorithm="pgd",
                  domain_radius=None) -> ScheduleParams:
    """Derive every schedule constant from the problem constants.

    Parameters
    ----------
    ell, rho : float
        Gradient and Hessian Lipschitz constants (``rho > 0``; any upper
        bound works for quadratics).
    eps, delta : float
        Target stationarity and failure probability.
    f_gap : float
        Upper bound on ``f(x0) - inf f``.
    n : int
        Dimension.
    overrides : dict, optional
        Replacement values; quantities derived from an overridden value
        are recomputed from it.
    algorithm : {"pgd", "pagd", "jordan"}
        Selects the iteration budget ``T`` (and ``delta0`` for "jordan").
    domain_radius : float, optional
        Caps the simulation half-width ``M``.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
    for name, v in (("ell", ell), ("rho", rho), ("eps", eps), ("f_gap", f_gap)):
        if not (np.isfinite(v) and v > 0):
            raise ConfigError(f"{name} must be positive and finite, got {v}")
    if not 0 < delta < 1:
        raise ConfigError("delta must lie in (0, 1)")
    ov = dict(overrides or {})
    unknown = set(ov) - {f.name for f in fields(ScheduleParams)}
    if unknown:
        raise ConfigError(f"unknown schedule overrides: {sorted(unknown)}")

    def pick(name, value):
        return ov[name] if name in ov else value

    C_r, C0, c_A = pick("C_r", C_r), pick("C0", C0), pick("c_A", c_A)
    alpha, chi = pick("alpha", alpha), pick("chi", chi)
    n = int(n)
    root = math.sqrt(eps**3 / rho)
    d0_scale = 1.0 if algorithm == "jordan" else 2.0
    delta0 = pick("delta0", d0_scale / (81.0 * f_gap) * root)
    eta = pick("eta", 1.0 / ell)
    eta_prime = pick("eta_prime", 1.0 / (4.0 * ell))
    F_prime = pick("script_F_prime", (2.0 / 81.0) * root)
    T_prime = pick("script_T_prime",
                   8.0 / (rho * eps) ** 0.25
                   * math.log(ell / (delta0 * math.sqrt(rho * eps))
                              * (n + 2.0 * math.log(3.0 / delta0))))
    r0 = pick("r0", 4.0 * C_r**3 / (9.0 * T_prime**4)
              * (delta0 / 3.0 / (n**1.5 + 2.0 * C0 * n * ell * math.log(T_prime) ** alpha)) ** 2)
    M = pick("M", min(r0 / C_r, 1.0 if domain_radius is None else min(domain_radius, 1.0)))
    kappa = pick("kappa", ell / math.sqrt(rho * eps))
    theta = pick("theta", 1.0 / (4.0 * math.sqrt(kappa)))
    gamma = pick("gamma", theta**2 / eta)
    s = pick("s", gamma / (4.0 * rho))
    script_T = pick("script_T", math.sqrt(kappa) * chi * c_A)
    script_E = pick("script_E", root * c_A ** -7)
    if algorithm == "pgd":
        T = 4.0 * max(f_gap / F_prime, f_gap / (eta * eps**2))
    elif algorithm == "jordan":
        T = 4.0 * max(f_gap / F_prime, 2.0 * f_gap / (eta * eps**2))
    else:
        T = 3.0 * max(f_gap / F_prime, f_gap * script_T / script_E)
    T = int(pick("T", math.ceil(T)))
    overridden = set(ov)
    if "M" not in ov and domain_radius is not None and domain_radius < min(r0 / C_r, 1.0):
        overridden.add("M")
    return ScheduleParams(
        eps=float(eps), delta=float(delta), ell=float(ell), rho=float(rho), n=n,
        f_gap=float(f_gap), delta0=delta0, eta=eta, eta_prime=eta_prime,
        script_T_prime=T_prime, script_F_prime=F_prime, r0=r0, C_r=C_r, C0=C0, alpha=alpha,
        M=M, kappa=kappa, theta=theta, gamma=gamma, s=s, script_T=script_T, c_A=c_A,
        chi=chi, script_E=script_E, T=T, algorithm=algorithm, overrides=frozenset(overridden))


def schedule_for(landscape: Landscape, eps, delta, f_gap=None, overrides=None, *, x0=None,
                 rho=None, **kw):
    """:func:`schedule_from` with constants taken from ``landscape``.

    ``f_gap`` defaults to ``f(x0) - f_star`` when both are known.  Quadratic
    landscapes have ``rho = 0``; pass any positive ``rho`` for them.
    """
    rho = landscape.rho if rho is None else rho
    if rho <= 0:
        raise ConfigError(f"{landscape.name} has rho = 0; pass a positive rho")
    if f_gap is None:
        if x0 is None or not np.isfinite(landscape.f_star):
            raise ConfigError(f"cannot infer f_gap for {landscape.name}; pass f_gap")
        f_gap = float(evaluate(landscape, x0)) - landscape.f_star
    kw.setdefault("domain_radius", landscape.domain_radius)
    return schedule_from(landscape.ell, rho, eps, delta, f_gap, landscape.dim, overrides, **kw)


@dataclass
class PDEOptions:
    """Grid settings for the ``pde`` backend; ``half_width`` defaults to ``params.M``."""

    mesh: int = 128
    boundary: str = "dirichlet"
    half_width: Optional[float] = None
    dt: Optional[float] = None


@dataclass(frozen=True)
class PerturbationSample:
    xi: np.ndarray
    t_e: float
    r0: float
    backend: str
    grid: Optional[wavesim.GridSpec] = None


class PacketSampler:
    """An evolved packet at ``x_tilde`` from which perturbations are drawn.

    Preparing is the expensive part (a decomposition or a PDE solve);
    :meth:`draw` is cheap, so many samples can share one packet.
    """

    def __init__(self, landscape: Landscape, x_tilde, r0: float, t_e: float,
                 backend: str = "analytic", pde: Optional[PDEOptions] = None,
                 grad=None, M: Optional[float] = None):
        x_tilde = np.asarray(x_tilde, dtype=float)
        if x_tilde.shape != (landscape.dim,):
            raise DimensionMismatch(f"x_tilde must have shape ({landscape.dim},)")
        if not (r0 > 0 and t_e >= 0):
            raise ConfigError("need r0 > 0 and t_e >= 0")
        self.landscape, self.x_tilde, self.r0, self.t_e = landscape, x_tilde, float(r0), float(t_e)
        self.backend = backend
        self.grid = None
        if backend == "analytic":
            w, U = landscape.hessian_eigh(x_tilde)
            self.law = analytic.evolved_law(eig=(w, U), t=t_e, r=r0)
        elif backend == "pde":
            pde = pde or PDEOptions()
            hw = pde.half_width if pde.half_width is not None else M
            if hw is None:
                raise ConfigError("pde backend needs a half-width")
            self.grid = wavesim.build_grid(landscape.dim, hw, pde.mesh, pde.boundary)
            g0 = gradient(landscape, x_tilde) if grad is None else np.asarray(grad, dtype=float)
            f0 = float(evaluate(landscape, x_tilde))

            def potential(y):
                return evaluate(landscape, x_tilde + y) - f0 - y @ g0

            state = wavesim.simulate(potential, self.grid, r0, t_e, dt=pde.dt)
            self.state = state
            self._sampler = wavesim.PositionSampler(state)
        else:
            raise ConfigError(f"unknown backend {backend!r}")

    def offset(self, rng: np.random.Generator):
        """A raw position draw relative to ``x_tilde``."""
        if self.backend == "analytic":
            return analytic.sample(self.law, rng)
        return self._sampler(rng)

    def draw(self, rng: np.random.Generator) -> PerturbationSample:
        if self.backend == "analytic":
            y, log_scale = analytic.sample_direction(self.law, rng)
            # directions are all that matter downstream; clamp absurd magnitudes
            xi = y * math.exp(min(log_scale, 300.0))
        else:
            xi = self._sampler(rng)
            if not np.any(xi):
                xi = self._sampler(rng)
        if not np.all(np.isfinite(xi)):
            raise NumericalInstability("perturbation is not finite")
        if not np.any(xi):
            raise NumericalInstability("degenerate perturbation: measured the origin twice")
        return PerturbationSample(xi=np.asarray(xi, dtype=float), t_e=self.t_e, r0=self.r0,
                                  backend=self.backend, grid=self.grid)


def quantum_simulation_sample(landscape: Landscape, x_tilde, params: ScheduleParams,
                              t_e: Optional[float] = None, backend: str = "analytic",
                              rng: Optional[np.random.Generator] = None,
                              pde: Optional[PDEOptions] = None, grad=None) -> PerturbationSample:
    """One wave-packet perturbation at ``x_tilde`` with the schedule's ``r0``.

    ``t_e`` defaults to ``params.script_T_prime``.  ``grad`` replaces the
    gradient used to tilt the potential (e.g. a noisy estimate).
    """
    rng = np.random.default_rng() if rng is None else rng
    t_e = params.script_T_prime if t_e is None else t_e
    sampler = PacketSampler(landscape, x_tilde, params.r0, t_e, backend, pde, grad=grad, M=params.M)
    return sampler.draw(rng)


def perturbation_step(xi, eps, rho):
    """Step of length ``(2/3) sqrt(eps/rho)`` along ``xi``."""
    xi = np.asarray(xi, dtype=float)
    nrm = np.linalg.norm(xi)
    if nrm == 0 or not np.isfinite(nrm):
        raise NumericalInstability("cannot normalise the perturbation")
    return (2.0 / 3.0) * math.sqrt(eps / rho) * xi / nrm


def apply_perturbation(landscape: Landscape, x_t, xi, eps, rho):
    """The better of ``x_t +- Delta``; ties go to ``x_t + Delta``."""
    x_t = np.asarray(x_t, dtype=float)
    step = perturbation_step(xi, eps, rho)
    plus, minus = x_t + step, x_t - step
    return plus if evaluate(landscape, plus) <= evaluate(landscape, minus) else minus
