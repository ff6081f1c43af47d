"""Experiment harness: packet dispersion, mini-batch escape comparisons and
dimension sweeps, with deterministic CSV output.

Every experiment is a pure function of its :class:`ExperimentSpec`; sample
``i`` draws from ``default_rng([seed, i, arm])`` so its result does not
depend on how many samples are requested, and different seeds give
disjoint sample streams.
"""
from __future__ import annotations

import csv
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import analytic, optim, perturb, wavesim
from .errors import ConfigError
from .landscapes import Landscape, evaluate, gradient, make_landscape

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("dispersion", "landscape_evolution", "minibatch_compare", "dimension_sweep", "escape")
LANDSCAPE_KEYS = {
    "diagquad": ("n", "eps"),
    "shifted_quad1d": ("lam", "d"),
}
PROFILES = {
    "ci": {"mesh": 256, "samples": 200},
    "paper": {"mesh": 512, "samples": 1000},
}
ARM_CLASSICAL, ARM_QUANTUM = 0, 1


@dataclass
class ExperimentSpec:
    """Flat experiment configuration; see the README for the key reference."""

    kind: str
    landscape: str = "quad2d"
    n: Optional[int] = None
    lam: Optional[float] = None
    d: Optional[float] = None
    seed: int = 0
    samples: int = 200
    # packet
    r: float = 0.5
    t_e: Optional[float] = None     # "schedule" or None: script_T_prime (escape), 1.5 otherwise
    times: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    snapshot_times: Optional[list] = None
    center: Optional[list] = None
    backend: Optional[str] = None
    mesh: int = 256
    half_width: Optional[float] = None
    boundary: str = "dirichlet"
    dt: Optional[float] = None      # "auto" or None: stability-limited step
    # gradient descent arms
    eta: float = 0.05
    T_c: int = 50
    T_q: int = 10
    threshold: Optional[float] = None
    bins: int = 30
    powers: list = field(default_factory=lambda: [1, 2, 3])
    eps: float = 0.01
    # single trajectories
    algorithm: str = "pgd_qs"
    x0: Optional[list] = None
    delta: float = 0.1
    rho: Optional[float] = None
    f_gap: Optional[float] = None
    T: Optional[int] = None
    early_stop: bool = False
    delta_q: Optional[float] = None
    schedule: dict = field(default_factory=dict)
    # output
    out: str = "out"
    dump_snapshots: bool = False
    gnuplot: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.samples) < 1:
            raise ConfigError("samples must be >= 1")
        if self.r <= 0:
            raise ConfigError("r must be positive")
        if self.t_e == "schedule":
            if self.kind != "escape":
                raise ConfigError("t_e = 'schedule' only applies to escape runs")
            self.t_e = None
        if self.t_e is None and self.kind != "escape":
            self.t_e = 1.5
        if self.t_e is not None:
            if isinstance(self.t_e, (str, bool)) or not self.t_e >= 0:
                raise ConfigError("t_e must be 'schedule' or a non-negative number")
            self.t_e = float(self.t_e)
        if self.dt == "auto":
            self.dt = None
        if self.dt is not None and (isinstance(self.dt, (str, bool)) or not self.dt > 0):
            raise ConfigError("dt must be 'auto' or a positive number")
        if self.snapshot_times is not None:
            self.times = list(self.snapshot_times)
            self.dump_snapshots = True
        if self.backend is None:
            self.backend = "analytic" if self.kind in ("escape", "dimension_sweep") else "pde"
        if self.half_width is None and self.kind != "escape":
            self.half_width = 3.0
        if self.backend not in ("pde", "analytic"):
            raise ConfigError("backend must be 'pde' or 'analytic'")
        if min(self.T_c, self.T_q) < 0 or self.bins < 1:
            raise ConfigError("T_c, T_q must be >= 0 and bins >= 1")
        if self.kind == "dimension_sweep" and self.landscape != "diagquad":
            raise ConfigError("dimension_sweep runs on diagquad")
        if self.kind == "escape" and self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {sorted(ALGORITHMS)}")

    def make_landscape(self, **extra) -> Landscape:
        params = {}
        for key in LANDSCAPE_KEYS.get(self.landscape, ()):
            v = extra.get(key, getattr(self, key))
            if v is not None:
                params[key] = v
        return make_landscape(self.landscape, **params)


_SPEC_FIELDS = {f.name for f in fields(ExperimentSpec)}
_SCHEDULE_FIELDS = {f.name for f in fields(perturb.ScheduleParams)} - {
    "eps", "delta", "ell", "rho", "n", "f_gap", "algorithm", "overrides"}


def spec_from_dict(cfg: dict, profile: Optional[str] = None, seed: Optional[int] = None,
                   out: Optional[str] = None) -> ExperimentSpec:
    """Build a spec from flat config keys.

    Profile values fill in keys the config leaves unset; ``seed`` and
    ``out`` (from the command line) win over the config.  Keys naming
    schedule constants (``r0``, ``script_T_prime``, ...) become schedule
    overrides; anything else unknown is an error.
    """
    cfg = dict(cfg)
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"profile must be one of {sorted(PROFILES)}")
        for k, v in PROFILES[profile].items():
            cfg.setdefault(k, v)
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["out"] = out
    if "kind" not in cfg:
        raise ConfigError("config needs a 'kind'")
    schedule = dict(cfg.pop("schedule", {}))
    for k in list(cfg):
        if k not in _SPEC_FIELDS:
            if k in _SCHEDULE_FIELDS:
                schedule[k] = cfg.pop(k)
            else:
                raise ConfigError(f"unknown config key {k!r}")
    for k, typ in (("seed", int), ("samples", int), ("mesh", int), ("T_c", int), ("T_q", int),
                   ("bins", int)):
        if k in cfg:
            if isinstance(cfg[k], bool) or not isinstance(cfg[k], (int, float)) \
                    or int(cfg[k]) != cfg[k]:
                raise ConfigError(f"{k} must be an integer")
            cfg[k] = typ(cfg[k])
    try:
        return ExperimentSpec(schedule=schedule, **cfg)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config {path}: {exc}") from None


def sample_rng(seed, i, arm):
    return np.random.default_rng([seed, i, arm])


# ---------------------------------------------------------------------------
# dispersion

@dataclass
class DispersionResult:
    times: np.ndarray
    variances: np.ndarray           # (len(times), dim)
    means: np.ndarray
    masses: Optional[np.ndarray]    # (len(times), 2) quadrant-pair masses, 2-D only
    states: list
    norms: np.ndarray


def run_dispersion(spec: ExperimentSpec) -> DispersionResult:
    """Evolve a packet on a grid and record marginal statistics at ``spec.times``."""
    land = spec.make_landscape()
    if land.dim > 3:
        raise ConfigError("grid simulation needs dimension <= 3")
    grid = wavesim.build_grid(land.dim, spec.half_width, spec.mesh, spec.boundary)
    center = np.zeros(land.dim) if spec.center is None else np.asarray(spec.center, dtype=float)
    H = wavesim.discretize(grid, land.value, spec.r, reference=center)
    times = sorted(float(t) for t in spec.times)
    states = wavesim.evolve_snapshots(H, wavesim.initial_gaussian(grid, center, spec.r), times,
                                      spec.dt)
    var = np.array([[wavesim.marginal_variance(s, k) for k in range(land.dim)] for s in states])
    mean = np.array([[wavesim.marginal_mean(s, k) for k in range(land.dim)] for s in states])
    masses = None
    if land.dim == 2:
        masses = np.array([[m["diag"], m["antidiag"]]
                           for m in map(wavesim.quadrant_masses, states)])
    return DispersionResult(np.array(times), var, mean, masses, states,
                            np.array([s.norm() for s in states]))


# ---------------------------------------------------------------------------
# escape comparisons

@dataclass
class HistogramResult:
    """Joint histogram of final function values for the two arms."""

    edges: np.ndarray
    counts_classical: np.ndarray
    counts_quantum: np.ndarray
    f_classical: np.ndarray
    f_quantum: np.ndarray
    threshold: float
    label: str = ""

    @property
    def summary(self):
        out = {}
        for arm, f in (("classical", self.f_classical), ("quantum", self.f_quantum)):
            out[f"{arm}_mean"] = float(np.mean(f))
            out[f"{arm}_median"] = float(np.median(f))
            out[f"{arm}_escape"] = float(np.mean(f < self.threshold))
        return out


def histogram(f_c, f_q, threshold, bins=30, label=""):
    lo = float(min(f_c.min(), f_q.min()))
    hi = float(max(f_c.max(), f_q.max()))
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    cc, _ = np.histogram(f_c, edges)
    cq, _ = np.histogram(f_q, edges)
    return HistogramResult(edges, cc, cq, np.asarray(f_c), np.asarray(f_q), threshold, label)


def default_threshold(spec: ExperimentSpec, land: Landscape) -> float:
    if spec.threshold is not None:
        return float(spec.threshold)
    if land.name == "quartic2d":
        return -0.5
    if land.name == "diagquad":
        # lowest value reachable inside the start ball: -eps r^2 / 2
        return -0.5 * land.params["eps"] * spec.r**2
    raise ConfigError(f"no default escape threshold for {land.name}; set 'threshold'")


def descend(land: Landscape, x, eta, steps):
    """``steps`` plain gradient steps from one start point; returns final f."""
    for _ in range(steps):
        x = x - eta * gradient(land, x)
    return float(evaluate(land, x))


def _arms(spec, land, quantum_draw, T_c, T_q):
    base = land.saddle if land.saddle is not None else np.zeros(land.dim)
    if spec.center is not None:
        base = np.asarray(spec.center, dtype=float)
    f_c = np.empty(spec.samples)
    f_q = np.empty(spec.samples)
    for i in range(spec.samples):
        rng = sample_rng(spec.seed, i, ARM_CLASSICAL)
        x = base + optim.uniform_ball(rng, land.dim, spec.r)
        f_c[i] = descend(land, x, spec.eta, T_c)
        rng = sample_rng(spec.seed, i, ARM_QUANTUM)
        f_q[i] = descend(land, base + quantum_draw(rng), spec.eta, T_q)
    return f_c, f_q


def run_minibatch_compare(spec: ExperimentSpec) -> HistogramResult:
    """Uniform-ball starts with ``T_c`` GD steps against packet-sampled starts
    with ``T_q`` GD steps, both around the landscape's saddle."""
    land = spec.make_landscape()
    base = land.saddle if spec.center is None else np.asarray(spec.center, dtype=float)
    pde = perturb.PDEOptions(mesh=spec.mesh, boundary=spec.boundary, half_width=spec.half_width,
                             dt=spec.dt)
    packet = perturb.PacketSampler(land, base, spec.r, spec.t_e, spec.backend, pde)
    f_c, f_q = _arms(spec, land, packet.offset, spec.T_c, spec.T_q)
    return histogram(f_c, f_q, default_threshold(spec, land), spec.bins, land.name)


def run_dimension_sweep(spec: ExperimentSpec) -> dict:
    """Per ``n = 10^p``: packet law at ``t_e = p`` with ``30 p`` GD steps against
    uniform-ball starts with ``50 p^2 + 50`` steps.

    Explicit ``t_e``/``T_q``/``T_c`` schedules can be set with
    ``schedule = {t_e = [...], T_q = [...], T_c = [...]}`` per power.
    """
    results = {}
    sched = spec.schedule
    for k, p in enumerate(spec.powers):
        p = int(p)
        n = 10**p
        land = spec.make_landscape(n=n)
        t_e = float(sched["t_e"][k]) if "t_e" in sched else float(p)
        T_q = int(sched["T_q"][k]) if "T_q" in sched else 30 * p
        T_c = int(sched["T_c"][k]) if "T_c" in sched else 50 * p * p + 50
        law = analytic.evolved_law(eig=land.eig(np.zeros(n)), t=t_e, r=spec.r)

        def draw(rng, law=law):
            return analytic.sample(law, rng)

        f_c, f_q = _arms(spec, land, draw, T_c, T_q)
        results[n] = histogram(f_c, f_q, default_threshold(spec, land), spec.bins, f"n={n}")
    return results


# ---------------------------------------------------------------------------
# single trajectories

ALGORITHMS = {"gd", "pgd", "pgd_qs", "pagd_qs", "pgd_jordan"}


def run_escape(spec: ExperimentSpec) -> optim.Trajectory:
    """One optimisation trajectory as configured."""
    land = spec.make_landscape()
    x0 = land.saddle if spec.x0 is None else np.asarray(spec.x0, dtype=float)
    overrides = dict(spec.schedule)
    if spec.T is not None:
        overrides["T"] = spec.T
    algo = {"gd": "pgd", "pgd": "pgd", "pgd_qs": "pgd", "pagd_qs": "pagd",
            "pgd_jordan": "jordan"}[spec.algorithm]
    params = perturb.schedule_for(land, spec.eps, spec.delta, spec.f_gap, overrides, x0=x0,
                                  rho=spec.rho, algorithm=algo)
    rng = np.random.default_rng(spec.seed)
    pde = perturb.PDEOptions(mesh=spec.mesh, boundary=spec.boundary, half_width=spec.half_width,
                             dt=spec.dt)
    if spec.algorithm == "gd":
        traj = optim.Trajectory("gd")
        x = np.array(x0, dtype=float)
        for t in range(params.T + 1):
            g = gradient(land, x)
            traj.record(x, evaluate(land, x), np.linalg.norm(g))
            if t < params.T:
                traj.origins.append(x.copy())
                x = x - params.eta * g
        return traj
    if spec.algorithm == "pgd":
        return optim.pgd_classical(land, x0, params, rng, early_stop=spec.early_stop)
    if spec.algorithm == "pgd_qs":
        return optim.pgd_qs(land, x0, params, spec.backend, rng, t_e=spec.t_e, pde=pde,
                            early_stop=spec.early_stop)
    if spec.algorithm == "pagd_qs":
        return optim.pagd_qs(land, x0, params, spec.backend, rng, t_e=spec.t_e, pde=pde,
                             early_stop=spec.early_stop)
    dq = spec.delta_q
    if dq is None:
        dq = optim.jordan_delta_q(spec.delta, spec.eps, land.ell, land.dim)
    model = optim.NoisyGradientModel(dq, land.ell, land.dim)
    return optim.pgd_jordan(land, x0, params, model, spec.backend, rng, t_e=spec.t_e, pde=pde,
                            early_stop=spec.early_stop)


# ---------------------------------------------------------------------------
# output

def _fmt(v):
    return f"{float(v):.9g}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_dat(path, header, rows):
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(str(v) for v in row) + "\n")


def emit_csv(result, path, gnuplot: bool = False) -> None:
    """Write a result as CSV with a header row and 9-significant-digit floats.

    Dispersion results give ``t, var_x, var_y[, var_z]``; histograms give
    ``bin_lo, bin_hi, count_classical, count_quantum``; trajectories give
    ``t, f, grad_norm, event``; wave states give a per-cell snapshot.
    """
    path = os.fspath(path)
    if isinstance(result, DispersionResult):
        dim = result.variances.shape[1]
        header = ["t"] + [f"var_{'xyz'[k]}" for k in range(dim)]
        rows = [[_fmt(t)] + [_fmt(v) for v in var]
                for t, var in zip(result.times, result.variances)]
    elif isinstance(result, HistogramResult):
        header = ["bin_lo", "bin_hi", "count_classical", "count_quantum"]
        rows = [[_fmt(result.edges[i]), _fmt(result.edges[i + 1]),
                 int(result.counts_classical[i]), int(result.counts_quantum[i])]
                for i in range(len(result.counts_classical))]
    elif isinstance(result, optim.Trajectory):
        result.to_csv(path)
        return
    elif isinstance(result, wavesim.WaveState):
        wavesim.write_snapshot_csv(result, path)
        return
    else:
        raise TypeError(f"cannot emit {type(result).__name__}")
    _write_rows(path, header, rows)
    if gnuplot:
        _write_dat(os.path.splitext(path)[0] + ".dat", header, rows)


def emit_samples(result: HistogramResult, path) -> None:
    """Per-sample final values, from which every summary number follows."""
    rows = [[i, _fmt(a), _fmt(b)] for i, (a, b) in
            enumerate(zip(result.f_classical, result.f_quantum))]
    _write_rows(path, ["sample", "f_classical", "f_quantum"], rows)


def emit_summary(result: HistogramResult, path) -> None:
    s = result.summary
    rows = [[k, _fmt(v)] for k, v in s.items()] + [["threshold", _fmt(result.threshold)]]
    _write_rows(path, ["statistic", "value"], rows)


def emit_masses(result: DispersionResult, path) -> None:
    rows = [[_fmt(t), _fmt(a), _fmt(b)] for t, (a, b) in zip(result.times, result.masses)]
    _write_rows(path, ["t", "mass_diag", "mass_antidiag"], rows)


def write_outputs(spec: ExperimentSpec, result) -> list:
    """Write all files for a result into ``spec.out``; returns their paths."""
    os.makedirs(spec.out, exist_ok=True)
    written = []

    def out(name):
        p = os.path.join(spec.out, name)
        written.append(p)
        return p

    if isinstance(result, DispersionResult):
        emit_csv(result, out(f"{spec.kind}.csv"), spec.gnuplot)
        if result.masses is not None:
            emit_masses(result, out("masses.csv"))
        if spec.dump_snapshots:
            for k, s in enumerate(result.states):
                emit_csv(s, out(f"snapshot_{k:03d}.csv"))
    elif isinstance(result, HistogramResult):
        emit_csv(result, out("histogram.csv"), spec.gnuplot)
        emit_samples(result, out("samples.csv"))
        emit_summary(result, out("summary.csv"))
    elif isinstance(result, dict):
        for n, h in result.items():
            emit_csv(h, out(f"histogram_n{n}.csv"), spec.gnuplot)
            emit_samples(h, out(f"samples_n{n}.csv"))
            emit_summary(h, out(f"summary_n{n}.csv"))
    elif isinstance(result, optim.Trajectory):
        emit_csv(result, out("trajectory.csv"))
    return written


def run(spec: ExperimentSpec):
    """Dispatch on ``spec.kind``."""
    if spec.kind in ("dispersion", "landscape_evolution"):
        return run_dispersion(spec)
    if spec.kind == "minibatch_compare":
        return run_minibatch_compare(spec)
    if spec.kind == "dimension_sweep":
        return run_dimension_sweep(spec)
    return run_escape(spec)


def spec_dict(spec: ExperimentSpec) -> dict:
    return asdict(spec)
