import math

import numpy as np
import pytest

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from flocksim.cli import (
    _SCHEMA,
    ConfigError,
    config_hash,
    estimate_transition,
    load_config,
    main,
    parse_config,
)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


MINIMAL_KOLM = """
[run]
mode = "kolmogorov"
output_dir = "%s"

[kolmogorov]
gamma = 1.0
K = 1.0
epsilon = 0.0
"""

TRAJ_TOML = """
[run]
mode = "trajectory"
output_dir = "%s"

[model]
L = 2
N = 2
h = 0.5
K = 1.0
r = 1

[trajectory]
dt = 0.01
t_max = 2.0
n_traj = %d
seed = 5
sample_spacing = 0.5
record_rho = true
"""


# -- transition estimation ----------------------------------------------------


def test_transition_synthetic_line():
    h = np.arange(0.1, 1.01, 0.1)
    u = 2.0 / 3.0 - 0.04 * h
    est = estimate_transition(h, u)
    assert not est.censored
    assert est.h_star == pytest.approx(0.5, abs=1e-12)


def test_transition_censored_when_flat():
    h = [0.5, 1.0, 1.5]
    u = [2.0 / 3.0] * 3
    est = estimate_transition(h, u)
    assert est.censored
    assert est.h_star == pytest.approx(1.5)


def test_transition_error_budget():
    h = [0.0, 1.0]
    u = [2.0 / 3.0, 2.0 / 3.0 - 0.08]
    bare = estimate_transition(h, u)
    noisy = estimate_transition(h, u, u_errors=[0.01, 0.01])
    assert bare.err == pytest.approx(0.5)  # half the grid spacing
    assert noisy.err > bare.err
    assert bare.h_star == pytest.approx(0.25)


def test_transition_input_validation():
    with pytest.raises(ValueError):
        estimate_transition([0.1], [0.5])
    with pytest.raises(ValueError):
        estimate_transition([0.2, 0.1], [0.6, 0.5])


# -- config parsing -----------------------------------------------------------


def _raw_minimal(mode="kolmogorov"):
    raw = {"run": {"mode": mode}}
    if mode == "phase-scan":
        raw["phase_scan"] = {"h_values": [0.2, 3.0]}
    return raw


def test_parse_minimal_configs():
    for mode in ("kolmogorov", "classical", "hydro", "trajectory"):
        cfg = parse_config(_raw_minimal(mode))
        assert cfg["run"]["mode"] == mode
        assert cfg["run"]["label"] == mode.replace("-", "_")


def test_parse_diagnostics_name_the_key():
    with pytest.raises(ConfigError, match="mode"):
        parse_config({"run": {}})
    with pytest.raises(ConfigError, match="hh"):
        parse_config({"run": {"mode": "trajectory"}, "model": {"hh": 1.0}})
    with pytest.raises(ConfigError, match=r"\[weird\]"):
        parse_config({"run": {"mode": "kolmogorov"}, "weird": {}})
    with pytest.raises(ConfigError, match="n_traj"):
        parse_config({"run": {"mode": "trajectory"}, "trajectory": {"n_traj": "many"}})
    with pytest.raises(ConfigError, match="h_values"):
        parse_config({"run": {"mode": "phase-scan"}})
    with pytest.raises(ConfigError, match="mode"):
        parse_config({"run": {"mode": "fly"}})


def test_parse_model_cross_checks():
    raw = {"run": {"mode": "trajectory"}, "model": {"L": 4, "r": 4}}
    with pytest.raises(ConfigError, match=r"\[model\]"):
        parse_config(raw)
    cfg = parse_config({"run": {"mode": "trajectory"}, "model": {"L": 4}})
    assert cfg["model"]["N"] == 4  # -1 resolves to half filling


def test_parse_kolmogorov_broadcast():
    raw = {"run": {"mode": "kolmogorov"}, "kolmogorov": {"K": [1.0, 2.0, 3.0], "gamma": 0.5}}
    cfg = parse_config(raw)
    assert cfg["kolmogorov"]["gamma"] == [0.5, 0.5, 0.5]
    assert cfg["kolmogorov"]["epsilon"] == [0.0, 0.0, 0.0]
    with pytest.raises(ConfigError, match="length must be"):
        parse_config(
            {"run": {"mode": "kolmogorov"}, "kolmogorov": {"K": [1.0, 2.0], "epsilon": [0.1, 0.2, 0.3]}}
        )


def test_parse_phase_scan_checks():
    base = {"run": {"mode": "phase-scan"}, "trajectory": {"t_max": 10.0}}
    with pytest.raises(ConfigError, match="window_hi"):
        parse_config({**base, "phase_scan": {"h_values": [0.1, 0.2], "window_lo": 5.0, "window_hi": 3.0}})
    with pytest.raises(ConfigError, match="window_hi"):
        parse_config({**base, "phase_scan": {"h_values": [0.1, 0.2], "window_lo": 5.0, "window_hi": 50.0}})
    with pytest.raises(ConfigError, match="h_values"):
        parse_config({**base, "phase_scan": {"h_values": [0.2, 0.1], "window_lo": 1.0, "window_hi": 9.0}})
    with pytest.raises(ConfigError, match="L_values"):
        parse_config(
            {
                **base,
                "model": {"L": 8, "r": 4},
                "phase_scan": {"h_values": [0.1], "L_values": [2], "window_lo": 1.0, "window_hi": 9.0},
            }
        )


def test_defaults_page_is_valid_toml(capsys):
    assert main(["print-defaults"]) == 0
    text = capsys.readouterr().out
    raw = tomllib.loads(text)
    for section in _SCHEMA:
        assert section in raw
    assert raw["hydro"]["sigma2"] == 0.125
    assert "mode" not in raw["run"]  # required keys appear as comments only
    raw["run"]["mode"] = "hydro"
    cfg = parse_config(raw)
    assert cfg["run"]["label"] == "hydro"


# -- end-to-end runs ----------------------------------------------------------


def test_kolmogorov_run_reference_row(tmp_path, capsys):
    cfg_file = _write(tmp_path, "k.toml", MINIMAL_KOLM % (tmp_path / "out"))
    assert main(["run", str(cfg_file)]) == 0
    table = (tmp_path / "out" / "kolmogorov_rates.tsv").read_text().splitlines()
    assert table[0].startswith("# config=")
    assert table[1] == "# gamma\tK\tepsilon\trate_forward\trate_backward\tratio"
    row = [float(x) for x in table[2].split("\t")]
    assert row[5] == pytest.approx(0.36788, abs=5e-6)


def test_validate_and_error_exits(tmp_path, capsys):
    cfg_file = _write(tmp_path, "k.toml", MINIMAL_KOLM % (tmp_path / "out"))
    assert main(["validate", str(cfg_file)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ok ")
    assert main(["validate", str(tmp_path / "absent.toml")]) == 1
    bad = _write(tmp_path, "bad.toml", "[run]\nmode = 'trajectory'\n[model]\nhh = 1\n")
    assert main(["run", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "hh" in err


def test_runtime_failure_exit_code(tmp_path, capsys):
    blow = _write(
        tmp_path,
        "blow.toml",
        f"""
[run]
mode = "hydro"
output_dir = "{tmp_path / 'out'}"

[hydro]
closure = "constant"
L = 16
K = 8.0
q = 0.0
t_max = 60.0
initial = "uniform"
rho0 = 0.5
m0 = 0.5
""",
    )
    assert main(["run", str(blow)]) == 2
    assert "blew up" in capsys.readouterr().err


def test_trajectory_run_reproducible_and_env_override(tmp_path, monkeypatch, capsys):
    cfg_file = _write(tmp_path, "t.toml", TRAJ_TOML % (tmp_path / "a", 4))
    assert main(["run", str(cfg_file)]) == 0
    monkeypatch.setenv("FLOCKSIM_OUTPUT_DIR", str(tmp_path / "b"))
    assert main(["run", str(cfg_file)]) == 0
    monkeypatch.delenv("FLOCKSIM_OUTPUT_DIR")
    a = (tmp_path / "a" / "trajectory_moments.tsv").read_bytes()
    b = (tmp_path / "b" / "trajectory_moments.tsv").read_bytes()
    assert a == b  # byte-identical numeric tables
    assert (tmp_path / "b" / "trajectory_coherence.tsv").exists()
    meta = (tmp_path / "a" / "trajectory.meta.toml").read_text()
    assert "config_hash" in meta and "seed = 5" in meta


def test_single_trajectory_series_file(tmp_path, capsys):
    cfg_file = _write(tmp_path, "one.toml", TRAJ_TOML % (tmp_path / "o1", 1))
    assert main(["run", str(cfg_file)]) == 0
    cfg_file2 = _write(tmp_path, "one2.toml", TRAJ_TOML % (tmp_path / "o2", 1))
    assert main(["run", str(cfg_file2)]) == 0
    t1 = (tmp_path / "o1" / "trajectory_moments.tsv").read_text().splitlines()[2:]
    t2 = (tmp_path / "o2" / "trajectory_moments.tsv").read_text().splitlines()[2:]
    assert t1 == t2
    assert len(t1) == 5  # t = 0, 0.5, ..., 2.0


def test_threads_do_not_change_statistics(tmp_path, capsys):
    serial = _write(tmp_path, "s.toml", TRAJ_TOML % (tmp_path / "s", 10))
    threaded = _write(
        tmp_path,
        "p.toml",
        (TRAJ_TOML % (tmp_path / "p", 10)) + "threads = 3\nchunk_size = 3\n",
    )
    serial2 = _write(
        tmp_path,
        "s2.toml",
        (TRAJ_TOML % (tmp_path / "s2", 10)) + "threads = 1\nchunk_size = 3\n",
    )
    assert main(["run", str(serial)]) == 0
    assert main(["run", str(threaded)]) == 0
    assert main(["run", str(serial2)]) == 0

    def rows(d, name):
        return (tmp_path / d / name).read_text().splitlines()[2:]

    # same chunking, different thread count: identical rows
    assert rows("p", "trajectory_moments.tsv") == rows("s2", "trajectory_moments.tsv")
    # chunking changes only the summation order; statistics agree closely
    a = np.array([[float(x) for x in r.split("\t")] for r in rows("s", "trajectory_moments.tsv")])
    b = np.array([[float(x) for x in r.split("\t")] for r in rows("p", "trajectory_moments.tsv")])
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_oracle_compare_mode(tmp_path, capsys):
    cfg_file = _write(
        tmp_path,
        "oc.toml",
        f"""
[run]
mode = "oracle-compare"
output_dir = "{tmp_path / 'out'}"

[model]
L = 2
N = 1
h = 0.5
K = 1.0
r = 1

[trajectory]
dt = 0.005
t_max = 2.0
n_traj = 60
sample_spacing = 1.0

[oracle]
dt = 0.002
""",
    )
    assert main(["run", str(cfg_file)]) == 0
    lines = (tmp_path / "out" / "oracle_compare_compare.tsv").read_text().splitlines()
    header = lines[1].lstrip("# ").split("\t")
    assert header == ["time", "m2_traj", "m2_oracle", "abs_diff", "m2_stderr", "sigmas"]
    data = np.array([[float(x) for x in r.split("\t")] for r in lines[2:]])
    assert data.shape == (3, 6)
    dist = (tmp_path / "out" / "oracle_compare_distance.tsv").read_text().splitlines()[2]
    _, d, bound = (float(x) for x in dist.split("\t"))
    assert 0.0 <= d <= bound


def test_phase_scan_mode(tmp_path, capsys):
    cfg_file = _write(
        tmp_path,
        "ps.toml",
        f"""
[run]
mode = "phase-scan"
output_dir = "{tmp_path / 'out'}"

[model]
L = 2
N = 2
K = 1.0
r = 1

[trajectory]
dt = 0.02
t_max = 8.0
seed = 3
sample_spacing = 1.0

[phase_scan]
h_values = [0.2, 3.0]
L_values = [2]
n_traj = 24
window_lo = 4.0
window_hi = 8.0
""",
    )
    assert main(["run", str(cfg_file)]) == 0
    lines = (tmp_path / "out" / "phase_scan_scan.tsv").read_text().splitlines()
    data = np.array([[float(x) for x in r.split("\t")] for r in lines[2:]])
    assert data.shape == (2, 5)
    assert list(data[:, 1]) == [0.2, 3.0]
    trans = (tmp_path / "out" / "phase_scan_transition.tsv").read_text().splitlines()[2]
    row = [float(x) for x in trans.split("\t")]
    assert row[1] == 2.0 and row[4] in (0.0, 1.0)
    if row[4] == 0.0:
        assert 0.2 <= row[2] <= 3.0


def test_classical_mode(tmp_path, capsys):
    cfg_file = _write(
        tmp_path,
        "c.toml",
        f"""
[run]
mode = "classical"
output_dir = "{tmp_path / 'out'}"

[classical]
L = 16
K = 2.0
n_histories = 4
n_sweeps = 40
record_every = 20
seed = 9
""",
    )
    assert main(["run", str(cfg_file)]) == 0
    lines = (tmp_path / "out" / "classical_m2.tsv").read_text().splitlines()
    data = np.array([[float(x) for x in r.split("\t")] for r in lines[2:]])
    assert data.shape == (3, 3)
    assert list(data[:, 0]) == [0.0, 20.0, 40.0]
    assert data[0, 1] == 0.0  # paired start has zero magnetization


def test_hydro_mode_tables(tmp_path, capsys):
    cfg_file = _write(
        tmp_path,
        "h.toml",
        f"""
[run]
mode = "hydro"
output_dir = "{tmp_path / 'out'}"
label = "wall"

[hydro]
closure = "density"
L = 20
K = 4.0
gamma_rho = 0.2
gamma_m = 0.6
gamma_align = 0.1
t_max = 3.0
sample_spacing = 1.0
initial = "gaussian"
""",
    )
    assert main(["run", str(cfg_file)]) == 0
    summary = (tmp_path / "out" / "wall_summary.tsv").read_text().splitlines()
    data = np.array([[float(x) for x in r.split("\t")] for r in summary[2:]])
    assert data.shape == (4, 6)
    mass = data[:, 1]
    assert np.allclose(mass, mass[0], atol=1e-8)  # density is conserved
    grid = (tmp_path / "out" / "wall_fields_m.tsv").read_text().splitlines()
    assert grid[1].lstrip("# ").split("\t")[:2] == ["time", "site_0"]
    assert len(grid[2].split("\t")) == 21


def test_config_hash_distinguishes(tmp_path):
    cfg1 = load_config(_write(tmp_path, "a.toml", MINIMAL_KOLM % "x"))
    cfg2 = load_config(_write(tmp_path, "b.toml", (MINIMAL_KOLM % "x").replace("K = 1.0", "K = 2.0")))
    assert config_hash(cfg1) != config_hash(cfg2)
    assert config_hash(cfg1) == config_hash(load_config(_write(tmp_path, "c.toml", MINIMAL_KOLM % "x")))
