import math

import numpy as np
import pytest

from stepflow import storage
from stepflow.cli import main
from stepflow.config import RunConfig


def mini_config_text(**overrides):
    values = dict(
        label="clidemo", re=500.0, tau=0.05, step_height_ratio=0.5,
        channel_length=2.0, hx=0.05, t_end=2.0, dt=1e-3,
        probes=((0.8, 0.75), (1.5, 0.6)), seed=11,
    )
    values.update(overrides)
    return RunConfig(**values).to_text()


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "mini.cfg"
    cfg_path.write_text(mini_config_text())
    out = root / "out"
    rc = main(["run", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    return out


class TestRun:
    def test_artifacts(self, run_dir):
        assert (run_dir / "summary.csv").exists()
        assert (run_dir / "average.snap").exists()
        assert len(list(run_dir.glob("fields/*.snap"))) == 4
        assert len(list(run_dir.glob("spectra/*.csv"))) == 4  # 2 probes x 2

    def test_bad_config_exits_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("re = 100\nbogus = 1\n")
        rc = main(["run", "--config", str(bad)])
        err = capsys.readouterr().err
        assert rc == 2
        assert "error kind=ConfigError" in err
        assert "bogus" in err


class TestAverage:
    def test_two_snapshot_trapezoid(self, run_dir, tmp_path):
        out = tmp_path / "avg.snap"
        rc = main(["average", "--run", str(run_dir), "--from", "1.5",
                   "--to", "2.0", "--every", "0.5", "--out", str(out)])
        assert rc == 0
        meta, avg = storage.read_average_snapshot(out)
        assert avg.n_frames == 2
        snaps = sorted(run_dir.glob("fields/*.snap"))
        _, ux1, *_ = storage.read_snapshot(snaps[-2])
        _, ux2, *_ = storage.read_snapshot(snaps[-1])
        assert np.allclose(avg.ux_av, 0.5 * (ux1 + ux2), atol=1e-15)

    def test_empty_window_rejected(self, run_dir, capsys):
        rc = main(["average", "--run", str(run_dir), "--from", "90",
                   "--to", "99"])
        assert rc == 2
        assert "error kind=" in capsys.readouterr().err


class TestPostProcessors:
    def test_streamfunc(self, run_dir, tmp_path):
        out = tmp_path / "psi.csv"
        rc = main(["streamfunc", "--avg", str(run_dir / "average.snap"),
                   "--out", str(out)])
        assert rc == 0
        header, rows = storage.read_csv(out)
        assert header == ["x", "y", "psi"]
        assert len(rows) == 20 * 40

    def test_reattach_prints_length(self, run_dir, capsys):
        rc = main(["reattach", "--avg", str(run_dir / "average.snap")])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.startswith("L_s/h = ")
        token = out.split("=")[1].strip()
        if token != "unbounded":
            float(token)

    def test_spectrum_cutoff_column(self, run_dir, tmp_path):
        probe = run_dir / "probes" / "p1.csv"
        out = tmp_path / "spec.csv"
        rc = main(["spectrum", "--probe", str(probe), "--t-start", "0",
                   "--out", str(out)])
        assert rc == 0
        header, rows = storage.read_csv(out)
        assert header == ["k", "E", "reliable"]
        assert len(rows) == 20  # N = 40 samples
        flags = [int(r[2]) for r in rows]
        assert flags == [1] * 5 + [0] * 15  # cutoff at N/8 = 5

    def test_spectrum_t_start_truncates(self, run_dir, tmp_path):
        probe = run_dir / "probes" / "p1.csv"
        out = tmp_path / "spec2.csv"
        rc = main(["spectrum", "--probe", str(probe), "--t-start", "1.0",
                   "--out", str(out)])
        assert rc == 0
        _, rows = storage.read_csv(out)
        assert len(rows) == 10  # 20 remaining samples

    def test_trace(self, run_dir, tmp_path):
        out = tmp_path / "traj.csv"
        rc = main(["trace", "--run", str(run_dir), "--seeds",
                   "0.6,0.8;1.2,0.7", "--dt", "0.01", "--out", str(out)])
        assert rc == 0
        header, rows = storage.read_csv(out)
        assert header == ["particle", "t", "x", "y"]
        assert {r[0] for r in rows} == {"0", "1"}

    def test_postprocessors_are_pure(self, run_dir, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for out in (a, b):
            rc = main(["streamfunc", "--avg", str(run_dir / "average.snap"),
                       "--out", str(out)])
            assert rc == 0
        assert a.read_bytes() == b.read_bytes()


class TestReport:
    def test_figures_rendered(self, run_dir, tmp_path):
        rc = main(["report", "--run", str(run_dir), "--out", str(tmp_path)])
        assert rc == 0
        names = {p.name for p in tmp_path.glob("*.png")}
        assert {"probes.png", "spectra.png", "averaged_flow.png"} <= names

    def test_empty_dir_rejected(self, tmp_path, capsys):
        rc = main(["report", "--run", str(tmp_path)])
        assert rc == 2


class TestSweep:
    def test_sweep_writes_summary(self, tmp_path):
        cfg_path = tmp_path / "mini.cfg"
        cfg_path.write_text(mini_config_text(t_end=1.0))
        rc = main(["sweep", "--config", str(cfg_path), "--taus", "0.02,0.05",
                   "--out", str(tmp_path / "sweep")])
        assert rc == 0
        header, rows = storage.read_csv(tmp_path / "sweep" / "sweep_summary.csv")
        assert len(rows) == 2


class TestTables:
    def test_unknown_label_rejected(self, capsys):
        rc = main(["tables", "--only", "t9r9"])
        assert rc == 2
        assert "unknown table runs" in capsys.readouterr().err

    def test_single_desk_row(self, tmp_path):
        rc = main(["tables", "--only", "t3r1", "--scale", "desk",
                   "--t0-factor", "0.0125", "--coarsen", "2",
                   "--out", str(tmp_path), "--no-fields"])
        assert rc == 0
        header, rows = storage.read_csv(tmp_path / "tables_summary.csv")
        assert len(rows) == 1
        assert rows[0][0] == "t3r1"
        assert rows[0][6] == "desk"
