import numpy as np
import pytest

from saddlewave import bench as B
from saddlewave.cli import main
from saddlewave.errors import ConfigError


def spec(**kw):
    return B.spec_from_dict(kw)


def write_cfg(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_spec_defaults_and_profile():
    s = B.spec_from_dict({"kind": "dispersion"}, profile="paper")
    assert s.mesh == 512 and s.samples == 1000 and s.backend == "pde" and s.half_width == 3.0
    s = B.spec_from_dict({"kind": "dimension_sweep", "landscape": "diagquad", "mesh": 64},
                         profile="ci", seed=9)
    assert s.mesh == 64 and s.seed == 9 and s.backend == "analytic"
    s = spec(kind="escape", landscape="quartic2d", r0=0.5)
    assert s.schedule == {"r0": 0.5} and s.half_width is None


@pytest.mark.parametrize("cfg", [
    {"kind": "nope"},
    {"kind": "dispersion", "mystery": 1},
    {"kind": "dispersion", "samples": 0},
    {"kind": "dispersion", "samples": 2.5},
    {"kind": "dispersion", "backend": "quantum"},
    {"kind": "dimension_sweep", "landscape": "quad2d"},
    {"kind": "escape", "algorithm": "sgd"},
    {"landscape": "quad2d"},
])
def test_spec_rejects_bad_configs(cfg):
    with pytest.raises(ConfigError):
        B.spec_from_dict(cfg)


def test_dispersion_columns_and_initial_variance(tmp_path):
    s = spec(kind="dispersion", mesh=128, times=[0.0, 0.5], out=str(tmp_path))
    res = B.run(s)
    assert res.variances[0, 1] == pytest.approx(0.25, abs=0.005)
    assert np.all(np.abs(res.norms - 1) < 1e-6)
    paths = B.write_outputs(s, res)
    lines = open(paths[0]).read().splitlines()
    assert lines[0] == "t,var_x,var_y" and len(lines) == 3


def test_cubic_valley_holds_more_mass():
    res = B.run(spec(kind="landscape_evolution", landscape="cubic2d", mesh=128, times=[1.0]))
    diag, anti = res.masses[0]
    assert diag > anti


def test_shifted_quad_mean():
    res = B.run(spec(kind="dispersion", landscape="shifted_quad1d", lam=-1.0, d=0.1, mesh=512,
                     half_width=4.0, times=[1.0]))
    assert res.means[0, 0] == pytest.approx(0.1 * (1 - np.cosh(1.0)), abs=0.01)


def test_minibatch_smoke_single_sample():
    res = B.run(spec(kind="minibatch_compare", landscape="quartic2d", samples=1, mesh=64))
    assert res.counts_classical.sum() == 1 and res.counts_quantum.sum() == 1


def test_minibatch_counts_and_isolation():
    base = dict(kind="minibatch_compare", landscape="quartic2d", mesh=64, eta=0.05)
    small = B.run(spec(samples=5, **base))
    big = B.run(spec(samples=10, **base))
    assert big.counts_classical.sum() == 10 and big.counts_quantum.sum() == 10
    assert np.array_equal(small.f_classical, big.f_classical[:5])
    assert np.array_equal(small.f_quantum, big.f_quantum[:5])
    s = small.summary
    assert 0 <= s["classical_escape"] <= 1
    assert s["quantum_median"] == pytest.approx(np.median(small.f_quantum))


def test_different_seeds_give_different_samples():
    base = dict(kind="minibatch_compare", landscape="quartic2d", mesh=64, samples=5,
                backend="analytic")
    a = B.run(spec(seed=0, **base))
    b = B.run(spec(seed=1, **base))
    assert not np.any(np.isin(a.f_classical, b.f_classical))


def test_dimension_sweep_smoke():
    res = B.run(spec(kind="dimension_sweep", landscape="diagquad", eps=0.01, r=0.1, samples=1,
                     powers=[1]))
    assert list(res) == [10]
    assert res[10].counts_quantum.sum() == 1
    assert res[10].threshold == pytest.approx(-0.5 * 0.01 * 0.01)


def test_dimension_sweep_schedule_override():
    s = spec(kind="dimension_sweep", landscape="diagquad", eps=0.01, r=0.1, samples=3,
             powers=[1], schedule={"t_e": [0.0], "T_q": [0], "T_c": [0]})
    res = B.run(s)
    # with no steps and no evolution both arms sit within r of the saddle
    assert np.all(np.abs(res[10].f_quantum) < 1.0)


def test_escape_algorithms_run():
    for algo in ("gd", "pgd", "pgd_qs", "pagd_qs", "pgd_jordan"):
        tr = B.run(spec(kind="escape", landscape="quartic2d", algorithm=algo, eps=0.05, T=40,
                        x0=[0.01, 0.0]))
        assert len(tr.iterates) <= 41
    tr = B.run(spec(kind="escape", landscape="quartic2d", algorithm="pgd_qs", eps=0.05, T=2000,
                    early_stop=True))
    assert tr.certified_point is not None


def test_emit_csv_rejects_unknown(tmp_path):
    with pytest.raises(TypeError):
        B.emit_csv(object(), tmp_path / "x.csv")


def test_histogram_csv_layout(tmp_path):
    h = B.histogram(np.array([0.0, 1.0]), np.array([0.5, 0.5]), 0.2, bins=4)
    B.emit_csv(h, tmp_path / "h.csv", gnuplot=True)
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "bin_lo,bin_hi,count_classical,count_quantum"
    assert lines[1] == "0,0.25,1,0"
    assert (tmp_path / "h.dat").exists()


def test_cli_exit_codes(tmp_path, capsys):
    bad = write_cfg(tmp_path, 'kind = "dispersion"\nwhat = 1\n')
    assert main(["simulate", "--config", bad]) == 2
    assert main(["simulate"]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 2
    broken = write_cfg(tmp_path, "kind = [", "broken.toml")
    assert main(["bench", "--config", broken]) == 2
    wrong = write_cfg(tmp_path, 'kind = "escape"\n', "wrong.toml")
    assert main(["bench", "--config", wrong]) == 2
    huge = write_cfg(tmp_path, 'kind = "dispersion"\nmesh = 100000\n', "huge.toml")
    assert main(["simulate", "--config", huge]) == 2
    lost = write_cfg(tmp_path, 'kind = "dispersion"\nlandscape = "shifted_quad1d"\n'
                     'center = [50.0]\nr = 0.01\nmesh = 64\n', "lost.toml")
    assert main(["simulate", "--config", lost]) == 3
    capsys.readouterr()


def test_cli_validate(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4


def test_cli_outputs_are_byte_identical(tmp_path, capsys):
    cfg = write_cfg(tmp_path, 'kind = "minibatch_compare"\nlandscape = "quartic2d"\n'
                    'samples = 20\nmesh = 64\n')
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["bench", "--config", cfg, "--seed", "4", "--out", str(out)]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert runs[0] == runs[1]
    assert set(runs[0]) == {"histogram.csv", "samples.csv", "summary.csv"}
    capsys.readouterr()


def test_time_and_step_keys():
    s = spec(kind="dispersion", dt="auto", snapshot_times=[0.0, 0.2])
    assert s.dt is None and s.times == [0.0, 0.2] and s.dump_snapshots
    assert spec(kind="minibatch_compare").t_e == 1.5
    assert spec(kind="escape", t_e="schedule").t_e is None
    assert spec(kind="escape", t_e=2).t_e == 2.0
    for bad in ({"kind": "dispersion", "dt": "fast"}, {"kind": "dispersion", "dt": -1.0},
                {"kind": "minibatch_compare", "t_e": "schedule"},
                {"kind": "escape", "t_e": -1.0}):
        with pytest.raises(ConfigError):
            B.spec_from_dict(bad)


def test_snapshot_dump_files(tmp_path):
    s = spec(kind="dispersion", mesh=16, snapshot_times=[0.0, 0.1], out=str(tmp_path))
    paths = B.write_outputs(s, B.run(s))
    names = sorted(p.rsplit("/", 1)[-1] for p in paths)
    assert names == ["dispersion.csv", "masses.csv", "snapshot_000.csv", "snapshot_001.csv"]


def test_escape_uses_configured_evolution_time():
    base = dict(kind="escape", landscape="quad2d", algorithm="pgd_qs", eps=0.1, rho=1.0,
                f_gap=1.0, T=1, x0=[0.0, 0.0])
    a = B.run(spec(t_e=0.0, **base)).events_of("qs_call")[0].payload["xi"]
    b = B.run(spec(t_e=50.0, **base)).events_of("qs_call")[0].payload["xi"]
    # the long evolution concentrates the draw on the negative direction
    assert abs(b[0]) / np.linalg.norm(b) > 0.999
    assert not np.allclose(a / np.linalg.norm(a), b / np.linalg.norm(b))


@pytest.mark.parametrize("path", sorted(
    __import__("pathlib").Path(__file__).resolve().parent.parent.glob("configs/*.toml")))
def test_shipped_configs_parse(path):
    s = B.spec_from_dict(B.load_config(path), profile="ci")
    assert s.kind in B.KINDS
