import numpy as np
import pytest

from optliq import ValidationError, reduce
from optliq.cli import load_profile, run, save_profile
from optliq.storage import read_key_value

from conftest import PRESET_PARAMS

# cheap-but-real solver settings used throughout the CLI tests
FAST = ["--abs-tol", "1e-3", "--N", "20", "--L", "1.5", "--h", "2e-5"]


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def saved_profile(tmp_path_factory, quick_profile):
    path = tmp_path_factory.mktemp("prof") / "profile.csv"
    save_profile(quick_profile, str(path))
    return str(path)


class TestPreset:
    def test_preset_prints_key_values(self, capsys):
        assert run(["preset", "1"]) == 0
        out = capsys.readouterr().out
        cfg = dict(line.split("=") for line in out.strip().splitlines())
        assert float(cfg["rho"]) == 0.05
        assert float(cfg["eta"]) == 7.5e-6
        assert float(cfg["sigma"]) == 0.2

    def test_preset_output_is_a_valid_config_file(self, tmp_path, capsys):
        run(["preset", "3"])
        out = capsys.readouterr().out
        cfg_file = tmp_path / "p3.cfg"
        cfg_file.write_text(out)
        cfg = read_key_value(str(cfg_file))
        assert float(cfg["lambda"]) == 0.03


class TestSeries:
    def test_series_prints_k1(self, capsys):
        assert run(["series", "--a", "2", "--b", "0.5", "--n", "1"]) == 0
        out = capsys.readouterr().out
        k1 = float(next(l.split("=")[1] for l in out.splitlines()
                        if l.startswith("k_1")))
        assert k1 == pytest.approx(-1.490712, abs=1e-6)
        assert "K1 = 11" in out
        assert "K2 = 4" in out

    def test_series_requires_consistent_inputs(self, capsys):
        assert run(["series", "--a", "2", "--n", "2"]) == 1
        assert run(["series", "--a", "2", "--b", "0.5", "--rho", "0.05", "--n", "2"]) == 1

    def test_series_csv_out(self, tmp_path, capsys):
        out = tmp_path / "series.csv"
        assert run(["series", "--a", "2", "--b", "0.5", "--n", "4",
                    "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# optliq")
        assert lines[1] == "i,k_i"
        assert len(lines) == 6


class TestSolve:
    def test_solve_with_preset_records_reduced_pair(self, tmp_path, capsys):
        out = tmp_path / "profile.csv"
        code = run(["solve", "--preset", "1", *FAST, "--out", str(out)])
        assert code == 0
        meta = read_key_value(str(out) + ".meta")
        assert float(meta["a"]) == pytest.approx(2.0, rel=1e-12)
        assert float(meta["b"]) == pytest.approx(0.5, rel=1e-12)
        assert (tmp_path / "profile.csv.png").exists()

    def test_solve_no_plot(self, tmp_path, capsys):
        out = tmp_path / "p.csv"
        assert run(["solve", "--a", "2", "--b", "0.5", *FAST, "--no-plot",
                    "--out", str(out)]) == 0
        assert not (tmp_path / "p.csv.png").exists()

    def test_solve_deterministic_outputs(self, tmp_path, capsys):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        run(["solve", "--a", "2", "--b", "0.5", *FAST, "--no-plot", "--out", str(a)])
        run(["solve", "--a", "2", "--b", "0.5", *FAST, "--no-plot", "--out", str(b)])
        assert read_bytes(a) == read_bytes(b)
        assert read_bytes(str(a) + ".meta") == read_bytes(str(b) + ".meta")

    def test_solve_rejects_mixed_parameter_styles(self, capsys):
        assert run(["solve", "--a", "2", "--b", "0.5", "--rho", "0.05"]) == 1
        assert run(["solve", "--a", "2"]) == 1

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "caps.cfg"
        cfg.write_text("max_L_iter=1\nmax_N_iter=1\nmax_T_iter=2\nabs_tol=1e-12\n")
        code = run(["solve", "--a", "2", "--b", "0.5", "--config", str(cfg),
                    "--no-plot", "--out", str(tmp_path / "x.csv")])
        assert code == 2

    def test_config_file_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "m.cfg"
        cfg.write_text("rho=0.05\nlambda=0\nr=0\nsigma=0.2\neta=7.5e-6\nabs_tol=1e-3\n")
        out = tmp_path / "c.csv"
        # flag --sigma overrides the file value
        code = run(["solve", "--config", str(cfg), "--sigma", "0.4",
                    *FAST, "--no-plot", "--out", str(out)])
        assert code == 0
        meta = read_key_value(str(out) + ".meta")
        # a = 2(lam - r + sigma^2)/sigma^2 = 2 regardless; b pins sigma
        b_sigma04 = -2 * (0 - 0.05 + 0.16) / 0.16
        assert float(meta["b"]) == pytest.approx(b_sigma04, rel=1e-12)


class TestProfileRoundTrip:
    def test_round_trip_bit_exact(self, tmp_path, quick_profile):
        path = tmp_path / "prof.csv"
        save_profile(quick_profile, str(path))
        loaded = load_profile(str(path))
        assert np.array_equal(loaded.x, quick_profile.x)
        assert np.array_equal(loaded.u, quick_profile.u)
        assert loaded.a == quick_profile.a
        assert loaded.b == quick_profile.b
        assert loaded.L == quick_profile.L
        assert loaded.series.coeffs == quick_profile.series.coeffs
        # evaluation agrees exactly after the round trip
        xs = np.geomspace(1e-5, quick_profile.L, 17)
        u0, du0 = quick_profile.eval(xs)
        u1, du1 = loaded.eval(xs)
        assert np.array_equal(u0, u1) and np.array_equal(du0, du1)

    def test_truncated_file_rejected(self, tmp_path, saved_profile):
        broken = tmp_path / "broken.csv"
        lines = open(saved_profile).read().splitlines()
        broken.write_text("\n".join(lines[:3]) + "\n")
        import shutil
        shutil.copy(saved_profile + ".meta", str(broken) + ".meta")
        with pytest.raises(ValidationError):
            load_profile(str(broken))

    def test_missing_sidecar_rejected(self, tmp_path, saved_profile):
        import shutil
        alone = tmp_path / "alone.csv"
        shutil.copy(saved_profile, alone)
        with pytest.raises(ValidationError):
            load_profile(str(alone))

    def test_mismatched_params_rejected_at_simulate(self, saved_profile, capsys):
        code = run(["simulate", "--profile", saved_profile, "--rho", "0.08",
                    "--lambda", "0", "--r", "0", "--sigma", "0.2", "--eta",
                    "7.5e-6", "--paths", "5", "--no-plot"])
        assert code == 1
        assert "does not match" in capsys.readouterr().err


class TestImpact:
    def test_impact_csv_schema(self, tmp_path, saved_profile, capsys):
        out = tmp_path / "impact.csv"
        code = run(["impact", "--preset", "1", "--profile", saved_profile,
                    "--zmin", "0.1", "--zmax", "10", "--points", "7",
                    "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# optliq")
        assert lines[1] == "z,s,x,I,tau"
        assert len(lines) == 9
        assert (tmp_path / "impact.csv.png").exists()

    def test_impact_validation(self, saved_profile, capsys):
        assert run(["impact", "--preset", "1", "--profile", saved_profile,
                    "--zmin", "10", "--zmax", "1"]) == 1


class TestSimulateCmd:
    def test_summary_and_per_path_and_traj(self, tmp_path, saved_profile, capsys):
        out = tmp_path / "sim.csv"
        pp = tmp_path / "paths.csv"
        tj = tmp_path / "traj.csv"
        code = run(["simulate", "--preset", "1", "--profile", saved_profile,
                    "--paths", "40", "--dt", "5e-5", "--seed", "9",
                    "--out", str(out), "--per-path-out", str(pp),
                    "--traj-out", str(tj), "--traj-paths", "8"])
        assert code == 0
        head = out.read_text().splitlines()
        assert head[1].startswith("n_paths,n_completed,n_capped,mean_T_days")
        assert pp.read_text().splitlines()[1] == "path_id,T_days,revenue"
        assert tj.read_text().splitlines()[1] == "path_id,t,S,Z,v"
        assert (tmp_path / "sim.csv.png").exists()
        assert (tmp_path / "traj.csv.png").exists()

    def test_byte_identical_reruns(self, tmp_path, saved_profile, capsys):
        outs = []
        for name, workers in (("s1.csv", "1"), ("s2.csv", "4")):
            out = tmp_path / name
            code = run(["simulate", "--preset", "1", "--profile", saved_profile,
                        "--paths", "60", "--dt", "5e-5", "--seed", "31",
                        "--workers", workers, "--no-plot", "--out", str(out)])
            assert code == 0
            outs.append(read_bytes(out))
        assert outs[0] == outs[1]


class TestOracle:
    def test_oracle_reports_comparison(self, saved_profile, capsys):
        code = run(["oracle", "--preset", "1", "--profile", saved_profile,
                    "--x0", "0.1", "--paths", "300", "--seed", "3", "--no-plot"])
        assert code == 0
        out = capsys.readouterr().out
        assert "monte carlo u" in out
        assert "profile     u" in out


class TestErrors:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert run(["solve", "--definitely-not-a-flag", "1"]) == 1

    def test_unknown_command(self, capsys):
        assert run(["frobnicate"]) == 1

    def test_missing_params_reported(self, capsys):
        assert run(["impact", "--s", "100"]) == 1
        assert "missing model parameter" in capsys.readouterr().err
