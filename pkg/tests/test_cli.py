import subprocess
import sys
import textwrap

import numpy as np
import pytest

from toporelax.cli import load_run_config, main
from toporelax.diagnostics import read_series_csv
from toporelax.errors import ConfigurationError
from toporelax.links import make_circle, save_curve_csv
from toporelax.snapshot import read_snapshot, snapshot_roundtrip

PI = np.pi


def write_ini(path, text):
    path.write_text(textwrap.dedent(text))
    return path


# woltjer ------------------------------------------------------------------------

def test_woltjer_zero(tmp_path, capsys):
    assert main(["woltjer", "--helicity", "0", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "E=0," in out
    snap = read_snapshot(tmp_path / "woltjer.snap")
    assert np.all(snap.fields["B"] == 0)


def test_woltjer_unit(tmp_path, capsys):
    assert main(["woltjer", "--helicity", "1", "--L", "6.283185307179586", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("lambda=1, E=1, H=1")


def test_woltjer_descent(tmp_path, capsys):
    assert main(["woltjer", "--helicity", "1", "--descent", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    dE = float(out.strip().rsplit("dE=", 1)[1])
    assert abs(dE) <= 1e-6


def test_woltjer_descent_budget_exceeded(tmp_path, capsys):
    rc = main(["woltjer", "--helicity", "1", "--descent", "--max-steps", "2", "--out", str(tmp_path)])
    assert rc == 2
    assert "descent convergence" in capsys.readouterr().err


def test_woltjer_needs_helicity(capsys):
    assert main(["woltjer"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_unknown_command(capsys):
    assert main(["frobnicate"]) == 1


# hopf-pair argument errors ---------------------------------------------------------

def test_hopf_pair_coarse_grid(tmp_path, capsys):
    assert main(["hopf-pair", "--n", "8", "--out", str(tmp_path)]) == 1
    assert "grid too coarse" in capsys.readouterr().err


def test_hopf_pair_zero_t_end(tmp_path, capsys):
    assert main(["hopf-pair", "--t-end", "0.0", "--out", str(tmp_path)]) == 1
    assert "t_end" in capsys.readouterr().err


def test_hopf_pair_bad_scheme(tmp_path):
    assert main(["hopf-pair", "--scheme", "euler", "--out", str(tmp_path)]) == 1


# relax and config files ---------------------------------------------------------------

def test_relax_two_rings(tmp_path, capsys):
    ini = write_ini(tmp_path / "rings.ini", """
        [run]
        scheme = vallis
        t_end = 0.05
        n = 64
        record_every = 1

        [link]
        preset = two-rings
    """)
    out = tmp_path / "out"
    assert main(["relax", "--config", str(ini), "--out", str(out), "--plot"]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("final_E=") and line.endswith("floor=0.000000")
    header, data = read_series_csv(out / "series.csv")
    E = data[:, header.index("E_mag")]
    assert np.all(np.diff(E) <= 1e-10 * E[0])
    assert "Hgroup_R1" in header and "Hgroup_R2" in header
    svg = (out / "series.svg").read_text()
    assert svg.startswith("<svg") and "E_mag" in svg
    snapshot_roundtrip(out / "final.snap")
    assert (out / "summary.txt").read_text().strip() == line


def test_relax_hopf_single_floor(tmp_path, capsys):
    ini = write_ini(tmp_path / "single.ini", """
        [run]
        t_end = 0.02
        [link]
        preset = hopf-single
    """)
    assert main(["relax", "--config", str(ini), "--out", str(tmp_path / "o")]) == 0
    line = capsys.readouterr().out.strip()
    floor = float(line.rsplit("floor=", 1)[1])
    assert floor == pytest.approx(2.0, rel=2e-2)


def test_relax_custom_tubes(tmp_path, capsys):
    c = make_circle((PI, PI - 1.5, PI), (0, 0, 1), 1.0)
    save_curve_csv(c, tmp_path / "ring.csv")
    ini = write_ini(tmp_path / "custom.ini", f"""
        [run]
        t_end = 0.02
        [tube A]
        curve = ring.csv
        [tube B]
        circle = {PI}, {PI + 1.5}, {PI}, 0, 1, 0, 1.0
        flux = -1
    """)
    cfg = load_run_config(ini)
    assert cfg.link.labels == ("A", "B")
    assert cfg.link.tubes[1].flux == -1
    assert main(["relax", "--config", str(ini), "--out", str(tmp_path / "o")]) == 0


def test_relax_malformed_curve(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("0,0,0\n1,0,0\n1,x,0\n")
    ini = write_ini(tmp_path / "bad.ini", """
        [run]
        t_end = 0.1
        [tube K]
        curve = bad.csv
    """)
    assert main(["relax", "--config", str(ini), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "bad.csv:3:" in err


@pytest.mark.parametrize("body,msg", [
    ("[run]\nt_end = 0\n[link]\npreset = two-rings\n", "t_end"),
    ("[run]\nspeed = 3\n[link]\npreset = two-rings\n", "unknown"),
    ("[run]\nt_end = 1\n", "no link"),
    ("[link]\npreset = two-rings\n", "missing \\[run\\]"),
    ("[run]\n[link]\npreset = torus\n", "unknown link preset"),
    ("[run]\nn = 32\n[link]\npreset = two-rings\n", "grid too coarse"),
    ("[run]\n[tube A]\ncircle = 1, 2, 3\n", "expected 7 numbers"),
    ("[run]\n[tube A]\nradius = 0.3\n", "exactly one of"),
])
def test_config_errors(tmp_path, body, msg):
    p = tmp_path / "c.ini"
    p.write_text(body)
    with pytest.raises(ConfigurationError, match=msg):
        load_run_config(p)


def test_missing_config_file(tmp_path, capsys):
    assert main(["relax", "--config", str(tmp_path / "nope.ini")]) == 1


def test_restart_config(tmp_path):
    p = write_ini(tmp_path / "restart.ini", """
        [run]
        t_end = 1
        snapshot = prev/final.snap
    """)
    cfg = load_run_config(p)
    assert cfg.snapshot == tmp_path / "prev" / "final.snap"
    assert cfg.link is None


def test_corrupt_restart_snapshot(tmp_path, capsys):
    (tmp_path / "final.snap").write_bytes(b"garbage")
    p = write_ini(tmp_path / "restart.ini", """
        [run]
        t_end = 1
        snapshot = final.snap
    """)
    assert main(["relax", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "bad magic" in capsys.readouterr().err


def test_runs_are_deterministic(tmp_path):
    ini = write_ini(tmp_path / "d.ini", """
        [run]
        t_end = 0.03
        record_every = 1
        [link]
        preset = hopf-single
    """)
    for tag in ("a", "b"):
        assert main(["relax", "--config", str(ini), "--out", str(tmp_path / tag)]) == 0
    for name in ("series.csv", "initial.snap", "final.snap", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "toporelax", "woltjer", "--helicity", "-1", "--n", "16", "--out", str(tmp_path)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("lambda=-1, E=1")
