"""Quick invariant checks behind ``saddlewave validate``.

Each check returns ``(name, passed, detail)``; all are small enough to run
in a few seconds.
"""
from __future__ import annotations

import numpy as np

from . import analytic, landscapes, optim, perturb, wavesim


def check_variance_law():
    t = np.linspace(0.0, 10.0, 100)
    lam = np.linspace(-4.0, 4.0, 100)
    T, Lm = np.meshgrid(t, lam, indexing="ij")
    s2 = analytic.variance_sigma2(T, Lm)
    free = 1.0 + T**2 / 4.0
    bad = int(np.sum((Lm < 0) & (s2 < free * (1 - 1e-12))))
    pos = Lm > 0
    a = np.sqrt(np.abs(Lm))
    lo = np.minimum(1.0, 1.0 / (2 * a)) ** 2
    hi = np.maximum(1.0, 1.0 / (2 * a)) ** 2
    bad += int(np.sum(pos & ((s2 < lo * (1 - 1e-12)) | (s2 > hi * (1 + 1e-12)))))
    jump = float(np.max(np.abs(analytic.variance_sigma2(t, 2e-12) - analytic.variance_sigma2(t, -2e-12))))
    return "variance law bounds and continuity", bad == 0 and jump < 1e-6, \
        f"violations={bad} jump={jump:.2e}"


def check_gradients():
    rng = np.random.default_rng(0)
    worst = 0.0
    for name in ("quad2d", "quartic2d", "cubic2d"):
        land = landscapes.make_landscape(name)
        for x in rng.uniform(-2, 2, size=(20, 2)):
            h = 1e-6
            fd = np.array([(land(x + h * e) - land(x - h * e)) / (2 * h) for e in np.eye(2)])
            g = landscapes.gradient(land, x)
            worst = max(worst, float(np.max(np.abs(fd - g)) / (1 + np.max(np.abs(g)))))
    return "landscape gradients vs finite differences", worst < 1e-6, f"max rel err={worst:.2e}"


def check_leapfrog():
    grid = wavesim.build_grid(2, 3.0, 64)
    land = landscapes.quartic2d()
    H = wavesim.discretize(grid, land.value, 0.5, reference=np.zeros(2))
    s0 = wavesim.initial_gaussian(grid, np.zeros(2), 0.5)
    s1 = wavesim.evolve(H, s0, 1.0)
    back = wavesim.evolve(H.negated(), s1, 1.0)
    drift = abs(s1.norm() - 1.0)
    err = float(np.sqrt(np.sum((back.q - s0.q) ** 2 + (back.p - s0.p) ** 2)))
    return "leapfrog norm and time reversal", drift < 1e-6 and err < 1e-5, \
        f"drift={drift:.2e} reversal={err:.2e}"


def check_trajectories(n_runs=10):
    land = landscapes.quartic2d()
    params = perturb.schedule_for(land, 0.05, 0.1, x0=np.zeros(2), overrides={"T": 100})
    bad_d = bad_h = 0
    for seed in range(n_runs):
        rng = np.random.default_rng(seed)
        x0 = rng.uniform(-2.0, 2.0, 2)
        tr = optim.pgd_qs(land, x0, params, rng=rng)
        bad_d += len(optim.descent_violations(land, tr, params.eta))
        tr = optim.pagd_qs(land, x0, params, rng=np.random.default_rng(seed))
        bad_h += len(optim.hamiltonian_violations(tr))
    return "descent and energy monotonicity", bad_d == 0 and bad_h == 0, \
        f"descent violations={bad_d} energy violations={bad_h}"


CHECKS = (check_variance_law, check_gradients, check_leapfrog, check_trajectories)


def run_all():
    return [check() for check in CHECKS]
