"""Test objective functions with known saddle structure.

Every landscape is vectorised over leading axes: ``value(x)`` accepts an
array of shape ``(..., dim)`` and returns shape ``(...)``; ``gradient``
returns ``(..., dim)`` and ``hessian`` returns ``(..., dim, dim)``.
This lets the same callables serve as optimisation objectives and as
potentials sampled on a simulation grid.

The smoothness constants ``ell`` (gradient Lipschitz) and ``rho``
(Hessian Lipschitz) of the built-in landscapes are exact on the stated
domain, which is the box ``|x_i| <= domain_radius`` when a radius is set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DimensionMismatch, HessianUnavailable


@dataclass(frozen=True)
class Landscape:
    """A smooth objective with its smoothness constants.

    Parameters
    ----------
    name : str
        Registry name.
    dim : int
        Input dimension.
    value, grad : callable
        Vectorised objective and gradient.
    hess : callable, optional
        Vectorised Hessian. ``None`` means unavailable.
    ell, rho : float
        Gradient and Hessian Lipschitz constants on the domain.
    domain_radius : float, optional
        Half-width of the box on which ``ell`` and ``rho`` hold.
        ``None`` means they hold globally.
    f_star : float
        Global minimum value (``-inf`` when unbounded below).
    saddle : array, optional
        A strict saddle point, used as the default start of experiments.
    eig : callable, optional
        ``eig(x) -> (w, U)`` returning Hessian eigenvalues and eigenvector
        columns; used to avoid dense decompositions where the spectrum is
        known in closed form.
    """

    name: str
    dim: int
    value: Callable
    grad: Callable
    hess: Optional[Callable]
    ell: float
    rho: float
    domain_radius: Optional[float] = None
    f_star: float = -np.inf
    saddle: Optional[np.ndarray] = None
    eig: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return evaluate(self, x)

    def hessian_eigh(self, x):
        """Eigenvalues (ascending) and eigenvector columns of the Hessian at ``x``."""
        x = _check_point(self, x)
        if self.eig is not None:
            return self.eig(x)
        w, U = np.linalg.eigh(hessian(self, x))
        return w, U


def _check_point(landscape, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != landscape.dim:
        raise DimensionMismatch(
            f"{landscape.name} expects points with last axis {landscape.dim}, got shape {x.shape}")
    return x


def evaluate(landscape: Landscape, x):
    """Objective value at ``x`` (shape ``(..., dim)``)."""
    return landscape.value(_check_point(landscape, x))


def gradient(landscape: Landscape, x):
    """Gradient at ``x``; same shape as ``x``."""
    return landscape.grad(_check_point(landscape, x))


def hessian(landscape: Landscape, x):
    """Hessian at ``x``; shape ``(..., dim, dim)``."""
    if landscape.hess is None:
        raise HessianUnavailable(f"{landscape.name} has no Hessian")
    return landscape.hess(_check_point(landscape, x))


# ---------------------------------------------------------------------------
# built-in landscapes

def quad2d() -> Landscape:
    """f = -x^2/2 + 3 y^2/2, a strict saddle at the origin."""
    h = np.array([-1.0, 3.0])

    def value(x):
        return 0.5 * np.sum(h * x * x, axis=-1)

    def grad(x):
        return h * x

    def hess(x):
        return np.broadcast_to(np.diag(h), x.shape[:-1] + (2, 2)).copy()

    def eig(x):
        return h.copy(), np.eye(2)

    return Landscape("quad2d", 2, value, grad, hess, ell=3.0, rho=0.0,
                     domain_radius=3.0, saddle=np.zeros(2), eig=eig)


def quartic2d() -> Landscape:
    """f = x^4/12 - x^2/2 + y^2/2; saddle at 0, minima at (+-sqrt(3), 0)."""

    def value(x):
        a, b = x[..., 0], x[..., 1]
        return a**4 / 12.0 - 0.5 * a * a + 0.5 * b * b

    def grad(x):
        a, b = x[..., 0], x[..., 1]
        return np.stack([a**3 / 3.0 - a, b], axis=-1)

    def hess(x):
        a = x[..., 0]
        H = np.zeros(x.shape[:-1] + (2, 2))
        H[..., 0, 0] = a * a - 1.0
        H[..., 1, 1] = 1.0
        return H

    def eig(x):
        w = np.array([x[0] ** 2 - 1.0, 1.0])
        order = np.argsort(w, kind="stable")
        return w[order], np.eye(2)[:, order]

    # on |x| <= 3: |x^2 - 1| <= 8 and |x1^2 - x2^2| <= 6 |x1 - x2|
    return Landscape("quartic2d", 2, value, grad, hess, ell=8.0, rho=6.0,
                     domain_radius=3.0, f_star=-0.75, saddle=np.zeros(2), eig=eig)


def cubic2d() -> Landscape:
    """f = x^3 - y^3 - 2xy + 6; saddle at the origin, unbounded below."""

    def value(x):
        a, b = x[..., 0], x[..., 1]
        return a**3 - b**3 - 2.0 * a * b + 6.0

    def grad(x):
        a, b = x[..., 0], x[..., 1]
        return np.stack([3.0 * a * a - 2.0 * b, -3.0 * b * b - 2.0 * a], axis=-1)

    def hess(x):
        a, b = x[..., 0], x[..., 1]
        H = np.empty(x.shape[:-1] + (2, 2))
        H[..., 0, 0] = 6.0 * a
        H[..., 0, 1] = -2.0
        H[..., 1, 0] = -2.0
        H[..., 1, 1] = -6.0 * b
        return H

    # spectral norm of the Hessian peaks at (3, -3) with value 18 + 2;
    # the Hessian difference is diag(6 dx, -6 dy), norm <= 6 |d|
    return Landscape("cubic2d", 2, value, grad, hess, ell=20.0, rho=6.0,
                     domain_radius=3.0, saddle=np.zeros(2))


def diagquad(n: int = 10, eps: float = 0.01) -> Landscape:
    """f = x^T diag(-eps, 1, ..., 1) x / 2 in ``n`` dimensions."""
    n = int(n)
    if n < 1:
        raise ConfigError("diagquad needs n >= 1")
    eps = float(eps)
    if eps <= 0:
        raise ConfigError("diagquad needs eps > 0")
    h = np.ones(n)
    h[0] = -eps

    def value(x):
        return 0.5 * np.sum(h * x * x, axis=-1)

    def grad(x):
        return h * x

    def hess(x):
        return np.broadcast_to(np.diag(h), x.shape[:-1] + (n, n)).copy()

    def eig(x):
        return h.copy(), np.eye(n)

    return Landscape("diagquad", n, value, grad, hess, ell=max(1.0, eps), rho=0.0,
                     saddle=np.zeros(n), eig=eig, params={"n": n, "eps": eps})


def shifted_quad1d(lam: float = -1.0, d: float = 0.0) -> Landscape:
    """f = lam (x - d)^2 / 2 in one dimension."""
    lam, d = float(lam), float(d)

    def value(x):
        return 0.5 * lam * (x[..., 0] - d) ** 2

    def grad(x):
        return lam * (x - d)

    def hess(x):
        return np.full(x.shape[:-1] + (1, 1), lam)

    def eig(x):
        return np.array([lam]), np.eye(1)

    return Landscape("shifted_quad1d", 1, value, grad, hess, ell=abs(lam), rho=0.0,
                     f_star=0.0 if lam >= 0 else -np.inf, saddle=np.array([d]), eig=eig,
                     params={"lam": lam, "d": d})


def quadratic(H, name: str = "quadratic") -> Landscape:
    """f = x^T H x / 2 for a symmetric matrix ``H``."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ConfigError("quadratic needs a square matrix")
    H = 0.5 * (H + H.T)
    n = H.shape[0]
    w, U = np.linalg.eigh(H)

    def value(x):
        return 0.5 * np.einsum("...i,ij,...j->...", x, H, x)

    def grad(x):
        return x @ H

    def hess(x):
        return np.broadcast_to(H, x.shape[:-1] + (n, n)).copy()

    def eig(x):
        return w.copy(), U.copy()

    return Landscape(name, n, value, grad, hess, ell=float(np.max(np.abs(w))), rho=0.0,
                     saddle=np.zeros(n), eig=eig, params={"H": H})


def custom(name, dim, value, grad, hess=None, *, ell=None, rho=None, box=None,
           n_samples=2000, seed=0, **kw) -> Landscape:
    """Wrap user callables, estimating missing constants by sampling ``box``."""
    if ell is None or rho is None:
        if hess is None or box is None:
            raise ConfigError("custom landscape needs ell and rho, or hess and box to estimate them")
        est_ell, est_rho = estimate_constants(hess, dim, box, n_samples=n_samples, seed=seed)
        ell = est_ell if ell is None else ell
        rho = est_rho if rho is None else rho
    return Landscape(name, dim, value, grad, hess, ell=float(ell), rho=float(rho),
                     domain_radius=box, **kw)


def estimate_constants(hess, dim, box, n_samples=2000, seed=0):
    """Monte Carlo lower estimates of (ell, rho) on the box ``|x_i| <= box``."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box, box, size=(n_samples, dim))
    H = hess(pts)
    ell = float(np.max(np.linalg.norm(H, ord=2, axis=(-2, -1))))
    other = rng.uniform(-box, box, size=(n_samples, dim))
    dist = np.linalg.norm(pts - other, axis=-1)
    dH = np.linalg.norm(H - hess(other), ord=2, axis=(-2, -1))
    ok = dist > 1e-12
    rho = float(np.max(dH[ok] / dist[ok])) if np.any(ok) else 0.0
    return ell, rho


def finite_difference_hessian(landscape: Landscape, x, h: float = 1e-5):
    """Central-difference Hessian from the gradient (symmetrised)."""
    x = _check_point(landscape, x)
    n = landscape.dim
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        H[:, i] = (gradient(landscape, x + e) - gradient(landscape, x - e)) / (2 * h)
    return 0.5 * (H + H.T)


REGISTRY: dict[str, Callable[..., Landscape]] = {
    "quad2d": quad2d,
    "quartic2d": quartic2d,
    "cubic2d": cubic2d,
    "diagquad": diagquad,
    "shifted_quad1d": shifted_quad1d,
}


def register(name: str, factory: Callable[..., Landscape]) -> None:
    REGISTRY[name] = factory


def make_landscape(name: str, **params) -> Landscape:
    """Build a registered landscape by name."""
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown landscape {name!r}; known: {sorted(REGISTRY)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None
