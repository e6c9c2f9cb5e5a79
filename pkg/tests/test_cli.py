"""Command-line behavior through ``main(argv)``."""

import numpy as np
import pytest

from roomloc.cli import (
    EXIT_INFEASIBLE,
    EXIT_INPUT,
    EXIT_NUMERICAL,
    format_measurements,
    format_pgm,
    gray_levels,
    main,
    parse_measurements,
    parse_pgm,
)
from roomloc.config import dump, dumps, load
from roomloc.experiments import ExperimentConfig, scenario_catalog, scenario_grid
from roomloc.geometry import sample_mics
from roomloc.wavefields import SourceSet, mfs_forward

RECT = "[room]\nshape = rectangle\nlx = 1\nly = 1\n"
STAR = "[room]\nshape = star\n"


def write(path, text):
    path.write_text(text)
    return str(path)


def lines_of(capsys):
    return [ln for ln in capsys.readouterr().out.splitlines() if ln.strip()]


# --- formats ------------------------------------------------------------------


def test_gray_levels_round_half_up():
    assert gray_levels([0.0, 1.0, 0.5, 2 / 255 * 0.5, np.nan]).tolist() == [0, 255, 128, 1, 0]


def test_pgm_round_trip_and_orientation():
    m = np.array([[0.0, 0.25], [0.5, 1.0], [0.75, 0.1]])
    text = format_pgm(m)
    assert text.splitlines()[:3] == ["P2", "2 3", "255"]
    assert text.splitlines()[3] == "0 64"  # first image row = smallest y
    assert np.array_equal(parse_pgm(text), gray_levels(m))


def test_measurement_round_trip():
    rng = np.random.default_rng(0)
    blocks = [(10.0, rng.random((3, 2)), rng.standard_normal(3) + 1j * rng.standard_normal(3)),
              (12.5, rng.random((2, 2)), rng.standard_normal(2) + 0j)]
    back = parse_measurements(format_measurements(blocks))
    for (k, m, p), (k2, m2, p2) in zip(blocks, back):
        assert k == k2 and np.array_equal(m, m2) and np.array_equal(p, p2)


# --- eigs -----------------------------------------------------------------------


def test_eigs_unit_square(tmp_path, capsys):
    cfg = write(tmp_path / "sq.ini", RECT)
    assert main(["eigs", cfg, "3", "5"]) == 0
    out = lines_of(capsys)
    assert "eig 3.141593" in out and "eig 4.442883" in out
    assert all(ln.split()[0] in ("eig", "mid") and len(ln.split()[1].split(".")[1]) == 6 for ln in out)


def test_eigs_empty_and_bad_interval(tmp_path, capsys):
    cfg = write(tmp_path / "sq.ini", RECT)
    assert main(["eigs", cfg, "3.2", "4.4"]) == 0
    assert lines_of(capsys) == []
    assert main(["eigs", cfg, "5", "3"]) == EXIT_INPUT
    assert main(["eigs", cfg, "-1", "3"]) == EXIT_INPUT


def test_eigs_star_room_mode_near_998(tmp_path, capsys):
    cfg = write(tmp_path / "star.ini", STAR)
    assert main(["eigs", cfg, "9.9", "10.1"]) == 0
    eigs = [float(ln.split()[1]) for ln in lines_of(capsys) if ln.startswith("eig")]
    assert any(9.93 <= k <= 10.03 for k in eigs)


# --- sweep ----------------------------------------------------------------------


SWEEP = STAR + """
[output]
name = tiny
[solver]
n_fb = 11
grid_spacing = 0.1
[sweep]
x_axis = n_mics
x_values = 20, 40
y_axis = n_fb
y_values = 11
trials = 2
"""


def test_sweep_outputs_consistent_and_reproducible(tmp_path, capsys):
    cfg = write(tmp_path / "tiny.ini", SWEEP)
    assert main(["sweep", cfg, "--seed", "3", "--out", str(tmp_path / "a")]) == 0
    assert main(["sweep", cfg, "--seed", "3", "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    capsys.readouterr()
    csv_a = (tmp_path / "a" / "tiny.csv").read_text()
    assert csv_a == (tmp_path / "b" / "tiny.csv").read_text()
    rows = [ln.split(",") for ln in csv_a.splitlines()]
    assert rows[0][:3] == ["n_mics", "n_fb", "success"]
    pgm = parse_pgm((tmp_path / "a" / "tiny.pgm").read_text())
    vals = np.array([[float(r[2]) for r in rows[1:]]])
    assert np.array_equal(pgm, gray_levels(vals))


def test_sweep_missing_room_section(tmp_path, capsys):
    cfg = write(tmp_path / "bad.ini", "[mics]\ncount = 5\n")
    assert main(["sweep", cfg, "--out", str(tmp_path)]) == EXIT_INPUT
    assert "[room]" in capsys.readouterr().err


def test_sweep_unknown_key_line_number(tmp_path, capsys):
    cfg = write(tmp_path / "bad.ini", RECT + "[mics]\ncont = 5\n")
    assert main(["sweep", cfg, "--out", str(tmp_path)]) == EXIT_INPUT
    assert "line 6" in capsys.readouterr().err


def test_sweep_numerical_failure_keeps_csv(tmp_path, capsys):
    # sources cannot be placed 5 apart in a 1 x 1 room: every trial fails
    cfg = write(tmp_path / "fail.ini", RECT + "[region]\ncenter = 0.5, 0.5\ndiameter = 0.8\n"
                "[sources]\nmin_sep = 5\n[output]\nname = fail\n[sweep]\ntrials = 1\n")
    assert main(["sweep", cfg, "--out", str(tmp_path)]) == EXIT_NUMERICAL
    text = (tmp_path / "fail.csv").read_text()
    assert text.splitlines()[1].split(",")[6] == "1"  # errors column


def test_presets_listing_and_export(tmp_path, capsys):
    assert main(["presets"]) == 0
    names = [ln.split()[0] for ln in lines_of(capsys)]
    assert names == list(scenario_catalog())
    out = tmp_path / "cmpnfb.ini"
    assert main(["preset", "cmpnfb", "--out", str(out)]) == 0
    assert load(str(out)) == scenario_catalog()["cmpnfb"]
    assert main(["preset", "nope"]) == EXIT_INPUT


# --- simulate / locate -------------------------------------------------------------


def test_simulate_is_seeded(tmp_path, capsys):
    cfg = write(tmp_path / "s.ini", dumps(scenario_catalog()["l1"]))
    assert main(["simulate", cfg, "--seed", "4", "--out", str(tmp_path / "a.meas")]) == 0
    assert main(["simulate", cfg, "--seed", "4", "--out", str(tmp_path / "b.meas")]) == 0
    assert main(["simulate", cfg, "--seed", "5", "--out", str(tmp_path / "c.meas")]) == 0
    a, b, c = ((tmp_path / f"{n}.meas").read_text() for n in "abc")
    assert a == b and a != c
    assert (tmp_path / "a_truth.csv").read_text().count("\n") == 5


def test_locate_on_grid_source(tmp_path, capsys):
    cfg = ExperimentConfig(n_sources=1, n_mics=40, n_fb=11, grid_spacing=0.1)
    cfg_path = tmp_path / "one.ini"
    dump(cfg, str(cfg_path))
    grid = scenario_grid(cfg)
    target = grid[len(grid) // 3]
    rng = np.random.default_rng(0)
    mics = sample_mics(cfg.room, cfg.region, 40, "mixed", rng).points
    p, _ = mfs_forward(cfg.room, 10.0, SourceSet(target[None], np.array([1.0 + 0j])), mics)
    meas = write(tmp_path / "one.meas", format_measurements([(10.0, mics, p)]))
    assert main(["locate", meas, str(cfg_path), "--n", "1"]) == 0
    out = lines_of(capsys)
    assert len(out) == 1
    x, y, amp = (float(v) for v in out[0].split(","))
    assert (x, y) == (round(target[0], 6), round(target[1], 6))
    assert amp == pytest.approx(1.0, rel=0.1)


@pytest.mark.parametrize(
    "text",
    [
        "10.0, 3\n0.1, 0.2, 1.0, 0.0\n0.3, 0.1, 0.5, 0.5\n",  # truncated block
        "10.0, 1\n0.1, 0.2, nan, 0.0\n",
        "10.0, 1\n0.1, 0.2, 1.0\n",
        "-1, 1\n0.1, 0.2, 1.0, 0.0\n",
        "",
    ],
)
def test_locate_rejects_bad_files(tmp_path, capsys, text):
    cfg = tmp_path / "c.ini"
    dump(ExperimentConfig(), str(cfg))
    meas = write(tmp_path / "bad.meas", text)
    assert main(["locate", meas, str(cfg)]) == EXIT_INPUT
    assert capsys.readouterr().out == ""


def test_locate_missing_file(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    dump(ExperimentConfig(), str(cfg))
    assert main(["locate", str(tmp_path / "nothing.meas"), str(cfg)]) == EXIT_INPUT


def test_locate_bp_replicates_four_source_map(tmp_path, capsys):
    cfg = write(tmp_path / "l1.ini", dumps(scenario_catalog()["l1"]))
    meas = str(tmp_path / "l1.meas")
    assert main(["simulate", cfg, "--seed", "2", "--out", meas]) == 0
    capsys.readouterr()
    assert main(["locate", meas, cfg, "--solver", "bp"]) == 0
    est = np.array([[float(v) for v in ln.split(",")[:2]] for ln in lines_of(capsys)])
    truth = np.loadtxt(tmp_path / "l1_truth.csv", delimiter=",", skiprows=1)[:, :2]
    assert len(est) == 4
    d = np.linalg.norm(truth[:, None] - est[None], axis=-1)
    assert np.all(d.min(axis=1) <= 0.2)
    grid_csv = np.loadtxt(tmp_path / "l1_alpha.csv", delimiter=",", skiprows=1)
    assert grid_csv.shape[1] == 3 and np.all(grid_csv[:, 2] >= 0)


def test_locate_bp_infeasible(tmp_path, capsys):
    cfg = ExperimentConfig(n_sources=1, n_mics=30, n_fb=3, grid_spacing=0.6, bp_eps_rel=1e-9, method="bp")
    cfg_path = tmp_path / "c.ini"
    dump(cfg, str(cfg_path))
    rng = np.random.default_rng(1)
    mics = sample_mics(cfg.room, cfg.region, 30, "mixed", rng).points
    p = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    meas = write(tmp_path / "x.meas", format_measurements([(10.0, mics, p)]))
    assert main(["locate", meas, str(cfg_path), "--solver", "bp"]) == EXIT_INFEASIBLE
