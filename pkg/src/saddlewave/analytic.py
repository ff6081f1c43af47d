"""Closed-form evolution of a Gaussian wave packet in a quadratic potential.

For the free Schrodinger flow ``i dPhi/dt = (-Laplace/2 + f) Phi`` started
from a unit-variance Gaussian, the position density of each Hessian
eigendirection stays Gaussian with variance ``sigma2(t; lam)``.  In the
scaled flow ``i dPhi/dt = (-(r0^2/2) Laplace + f / r0^2) Phi`` with initial
variance ``r0^2`` the covariance becomes ``r0^2 U diag(sigma2) U^T``.

Variances are handled internally as logarithms so that long evolutions on
strongly negative curvature do not overflow before the sampled direction
is normalised.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch

# below this |lam| the free-particle law is used
LAMBDA_ZERO = 1e-12


def _broadcast(t, lam):
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return np.broadcast_arrays(t, lam)


def log_variance_sigma2(t, lam):
    """Natural log of ``sigma2(t; lam)``, overflow-free for large ``t``."""
    t, lam = _broadcast(t, lam)
    out = np.empty(t.shape)
    zero = np.abs(lam) < LAMBDA_ZERO
    pos = lam >= LAMBDA_ZERO
    neg = lam <= -LAMBDA_ZERO

    out[zero] = np.log1p(t[zero] ** 2 / 4.0)

    a = np.sqrt(lam[pos])
    u = a * t[pos]
    out[pos] = np.log(np.cos(u) ** 2 + np.sin(u) ** 2 / (4.0 * a * a))

    a = np.sqrt(-lam[neg])
    u = a * np.abs(t[neg])
    e = np.exp(-2.0 * u)
    one_minus_e = -np.expm1(-2.0 * u)
    # cosh^2 + sinh^2/(4a^2) with the e^{2u}/4 factor pulled out
    out[neg] = (2.0 * u - np.log(4.0)
                + np.log((1.0 + e) ** 2 + one_minus_e**2 / (4.0 * a * a)))
    return out if out.ndim else float(out)


def variance_sigma2(t, lam):
    """Position variance along an eigendirection with curvature ``lam``.

    Unit initial variance, unscaled flow.  Vectorised over ``t`` and ``lam``.

    Examples
    --------
    >>> round(variance_sigma2(1.0, 0.0), 6)
    1.25
    """
    t, lam = _broadcast(t, lam)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    return np.exp(log_variance_sigma2(t, lam))


def mean_offset(t, lam, d):
    """Mean of a packet started at 0 in the quadratic ``lam (x - d)^2 / 2``.

    The mean follows the classical trajectory, so it is the same in the
    scaled and unscaled flows.
    """
    t, lam, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, lam, d)))
    out = np.zeros(t.shape)
    pos = lam >= LAMBDA_ZERO
    neg = lam <= -LAMBDA_ZERO
    out[pos] = d[pos] * (1.0 - np.cos(np.sqrt(lam[pos]) * t[pos]))
    out[neg] = d[neg] * (1.0 - np.cosh(np.sqrt(-lam[neg]) * t[neg]))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GaussianLaw:
    """Gaussian ``N(mean, r^2 U diag(sigma2) U^T)``; ``U`` has eigenvector columns."""

    mean: np.ndarray
    eigvecs: np.ndarray
    log_eigvars: np.ndarray
    r: float
    eigvals: Optional[np.ndarray] = None

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def eigvars(self):
        return np.exp(self.log_eigvars)

    @property
    def cov(self):
        U = self.eigvecs
        return (U * (self.r**2 * self.eigvars)) @ U.T

    def marginal_variance(self, axis):
        U = self.eigvecs
        return float(np.sum(U[axis] ** 2 * self.r**2 * self.eigvars))

    def logpdf(self, x):
        """Log density at points ``x`` of shape ``(..., dim)``."""
        x = np.asarray(x, dtype=float)
        z = (x - self.mean) @ self.eigvecs
        lv = self.log_eigvars + 2.0 * np.log(self.r)
        quad = np.sum(z * z * np.exp(-lv), axis=-1)
        return -0.5 * quad - 0.5 * np.sum(lv) - 0.5 * self.dim * np.log(2 * np.pi)

    def pdf(self, x):
        return np.exp(self.logpdf(x))


def evolved_law(H=None, t=0.0, r=1.0, center=None, *, eig=None, quad_center=None):
    """Law of the packet after time ``t`` in the quadratic with Hessian ``H``.

    Parameters
    ----------
    H : (n, n) array, optional
        Symmetric Hessian.  May be omitted when ``eig`` is given.
    t : float
        Evolution time, ``t >= 0``.
    r : float
        Initial standard deviation (the scaled-flow ``r0``).
    center : (n,) array, optional
        Initial packet centre; default origin.
    eig : tuple, optional
        Precomputed ``(w, U)`` eigen-decomposition of ``H``.
    quad_center : (n,) array, optional
        Minimiser/critical point of the quadratic when it differs from
        ``center``; the mean is then shifted along each eigendirection.
    """
    if eig is None:
        H = np.asarray(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DimensionMismatch("Hessian must be square")
        if not np.allclose(H, H.T, rtol=1e-10, atol=1e-12):
            raise ValueError("Hessian must be symmetric")
        w, U = np.linalg.eigh(0.5 * (H + H.T))
    else:
        w, U = (np.asarray(a, dtype=float) for a in eig)
    if t < 0:
        raise ValueError("t must be non-negative")
    if r <= 0:
        raise ValueError("r must be positive")
    n = w.shape[0]
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if center.shape != (n,):
        raise DimensionMismatch(f"center has shape {center.shape}, expected ({n},)")
    mean = center.copy()
    if quad_center is not None:
        d = U.T @ (np.asarray(quad_center, dtype=float) - center)
        mean = center + U @ mean_offset(t, w, d)
    return GaussianLaw(mean=mean, eigvecs=U, log_eigvars=np.atleast_1d(log_variance_sigma2(t, w)),
                       r=float(r), eigvals=w)


def sample(law: GaussianLaw, rng: np.random.Generator, size=None):
    """Draw from ``law``; returns ``(dim,)`` or ``(size, dim)``."""
    shape = (law.dim,) if size is None else (size, law.dim)
    z = rng.standard_normal(shape)
    std = law.r * np.exp(0.5 * law.log_eigvars)
    return law.mean + (z * std) @ law.eigvecs.T


def sample_direction(law: GaussianLaw, rng: np.random.Generator):
    """Centred draw rescaled by a common factor, plus that log factor.

    Returns ``(y, log_scale)`` with ``y * exp(log_scale)`` distributed as
    ``x - mean``.  ``y`` is always finite, which matters when the variance
    along a negative-curvature direction overflows a float.
    """
    z = rng.standard_normal(law.dim)
    half = 0.5 * law.log_eigvars
    m = float(np.max(half))
    y = (z * np.exp(half - m)) @ law.eigvecs.T
    return y, m + np.log(law.r)


def write_law_csv(law: GaussianLaw, path):
    """One row per eigendirection: index, eigenvalue, variance, mean, eigenvector."""
    n = law.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "eigval", "var", "mean"] + [f"u{i}" for i in range(n)])
        ev = law.eigvals if law.eigvals is not None else np.full(n, np.nan)
        var = law.r**2 * law.eigvars
        for k in range(n):
            w.writerow([k, f"{ev[k]:.9g}", f"{var[k]:.9g}", f"{law.mean[k]:.9g}"]
                       + [f"{u:.9g}" for u in law.eigvecs[:, k]])
