import math

import pytest

from sixvertex import ConfigInvalid, IoError
from sixvertex.harness.cli import main
from sixvertex.harness.config import KINDS, default_config, load_config, parse_config
from sixvertex.harness.experiments import run_experiment, run_with_series
from sixvertex.harness.io import ResultRecord, emit, emit_series, format_records, parse, parse_records

SMALL_E3 = dict(sizes=(50,), replicas=5, options=dict(width=400))

INI_E3 = """
[experiment]
kind = E3
sizes = 50
replicas = 5
seed = 3

[profile]
kind = constant
rho = 0.4

[options]
width = 400
"""


class TestConfig:
    @pytest.mark.parametrize("kind", KINDS)
    def test_defaults_valid(self, kind):
        cfg = default_config(kind)
        assert cfg.kind == kind and cfg.seed == 0 and cfg.params.kappa == pytest.approx(1.5)

    def test_e3_defaults(self):
        cfg = default_config("e3")
        assert cfg.sizes == (500,) and cfg.replicas == 100 and cfg.profile.rho == 0.4

    def test_parse(self):
        cfg = parse_config(INI_E3)
        assert cfg.kind == "E3" and cfg.seed == 3 and cfg.sizes == (50,)
        assert cfg.opt("width") == 400 and cfg.tol("z") == 3.0

    def test_override_wins(self):
        assert parse_config(INI_E3, seed=9, replicas=None).seed == 9

    def test_points_profile(self):
        cfg = parse_config("[experiment]\nkind = E1\n[profile]\nkind = table\n"
                           "points = 0 0.2; 0.5 0.7; 1 0.7\n")
        prof = cfg.profile.density()
        assert prof(0.25) == 0.2 and prof(0.75) == 0.7

    @pytest.mark.parametrize("text", [
        "[experiment]\nsizes = 10\n",
        "[experiment]\nkind = E9\n",
        "[experiment]\nkind = E3\nsizes = 20 10\n",
        "[experiment]\nkind = E3\nreplicas = 0\n",
        "[experiment]\nkind = E3\ncolour = red\n",
        "[experiment]\nkind = E3\n[params]\nb1 = 0.6\nb2 = 0.5\n",
        "[experiment]\nkind = E3\n[profile]\nrho = 1.5\n",
        "[experiment]\nkind = E3\n[extra]\n",
        "[experiment]\nkind = E3\nformat = xml\n",
        "not an ini file",
    ])
    def test_invalid(self, text):
        with pytest.raises(ConfigInvalid):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_config(tmp_path / "absent.ini")

    def test_profile_file(self, tmp_path):
        (tmp_path / "prof.txt").write_text("# domain torus\n0 0.3\n1 0.3\n")
        (tmp_path / "c.ini").write_text("[experiment]\nkind = E1\n[profile]\nkind = table\nfile = prof.txt\n")
        assert load_config(tmp_path / "c.ini").profile.density()(0.5) == 0.3

    def test_hash(self):
        a = default_config("E3", **SMALL_E3)
        assert a.hash == default_config("E3", **SMALL_E3).hash
        assert a.hash != default_config("E3", **{**SMALL_E3, "seed": 1}).hash
        assert len(a.hash) == 16

    def test_unknown_tolerance(self):
        with pytest.raises(ConfigInvalid):
            default_config("E3").tol("nope")


def _records():
    return [ResultRecord("E3", 0, 50, "site_density", 0.4, 0.4, 0.01, True, 1.5, "abc"),
            ResultRecord("E3", 0, 50, "edge_density", -0.0, 0.5, float("nan"), False, 1.5, "abc")]


class TestIO:
    def test_empty(self, tmp_path):
        with pytest.raises(IoError):
            format_records([])
        with pytest.raises(IoError):
            emit([], tmp_path / "x.csv")

    @pytest.mark.parametrize("fmt", ["csv", "jsonl"])
    def test_roundtrip(self, fmt, tmp_path):
        path = emit(_records(), tmp_path / f"r.{fmt}", fmt)
        back = parse(path)
        assert [r.statistic for r in back] == ["site_density", "edge_density"]
        assert back[0].value == 0.4 and back[0].passed and not back[1].passed
        assert math.isnan(back[1].sigma) and math.isnan(back[0].seconds)

    def test_nine_decimals_and_no_timing(self):
        text = format_records(_records())
        assert "0.400000000" in text and ",0.000000000," in text and "1.5" not in text
        assert "1.500000000" in format_records(_records(), timing=True)

    def test_bad_header(self):
        with pytest.raises(IoError):
            parse_records("a,b\n1,2\n")
        with pytest.raises(IoError):
            parse_records("{not json}\n", "jsonl")

    def test_unwritable(self, tmp_path):
        with pytest.raises(IoError):
            emit(_records(), tmp_path / "missing" / "r.csv")

    def test_series(self, tmp_path):
        p = emit_series({"b": ([0.0, 1.0], [2.0, 3.0]), "a": ([0.5], [0.25])}, tmp_path / "s.csv")
        assert p.read_text().splitlines() == ["series,x,y", "a,0.500000000,0.250000000",
                                              "b,0.000000000,2.000000000",
                                              "b,1.000000000,3.000000000"]


class TestExperiments:
    def test_e3_targets(self):
        recs = run_experiment(default_config("E3", **SMALL_E3))
        got = {r.statistic: r for r in recs}
        assert got["edge_density"].target == pytest.approx(0.5)
        assert got["site_density"].target == pytest.approx(0.4)
        assert got["pair_product"].target == pytest.approx(0.16)
        assert all(r.config_hash == default_config("E3", **SMALL_E3).hash for r in recs)

    def test_byte_identical(self):
        cfg = default_config("E3", **SMALL_E3)
        assert format_records(run_experiment(cfg)) == format_records(run_experiment(cfg))

    def test_e1_records_per_size(self):
        recs = run_experiment(default_config("E1", sizes=(32, 64), replicas=2))
        assert [r.N for r in recs] == [32, 64]
        assert all(r.statistic == "max_rectangle_deviation" and r.target == 0.0 for r in recs)

    def test_e1_constant_profile(self):
        recs = run_experiment(default_config("E1", sizes=(32,), replicas=2,
                                             profile=dict(kind="constant", rho=0.4)))
        assert recs[0].value < 0.1

    def test_e2_shock(self):
        recs, series = run_with_series(default_config("E2", sizes=(100, 200), replicas=4))
        ratios = [r for r in recs if r.statistic == "shock_location_ratio"]
        assert [r.N for r in ratios] == [100, 200]
        assert all(r.target == 1.0 and abs(r.value - 1.0) < 0.1 for r in ratios)
        assert any(k.startswith("E2 density") for k in series)

    def test_e2_needs_two_states(self):
        with pytest.raises(ConfigInvalid):
            run_experiment(default_config("E2", sizes=(100,), replicas=1, profile=dict(kind="constant")))

    def test_errors_prefixed(self):
        with pytest.raises(Exception, match="^E6"):
            run_experiment(default_config("E6", sizes=(200,), options=dict(steps=40, vmax=12)))


class TestCli:
    def test_pass_exit_and_summary(self, tmp_path, capsys):
        ini = tmp_path / "e3.ini"
        ini.write_text(INI_E3)
        out = tmp_path / "e3.csv"
        assert main(["--config", str(ini), "--out", str(out)]) == 0
        err = capsys.readouterr().err.splitlines()
        assert err[0].startswith("# E3 seed=3 replicas=5")
        assert sum(line.startswith("PASS E3") for line in err) == 3
        assert len(parse(out)) == 3

    def test_stdout_jsonl(self, tmp_path, capsys):
        ini = tmp_path / "e3.ini"
        ini.write_text(INI_E3)
        assert main(["--config", str(ini), "--format", "jsonl"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(parse_records("\n".join(lines), "jsonl")) == 3

    def test_fail_exit(self, tmp_path):
        ini = tmp_path / "e1.ini"
        ini.write_text("[experiment]\nkind = E1\nsizes = 16\nreplicas = 1\n[tolerances]\nmax_deviation = 0\n")
        assert main(["--config", str(ini), "--out", str(tmp_path / "o.csv")]) == 1

    def test_config_error_exit(self, tmp_path, capsys):
        ini = tmp_path / "bad.ini"
        ini.write_text("[experiment]\nkind = E3\nreplicas = -1\n")
        assert main(["--config", str(ini)]) == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_io_error_exit(self, tmp_path):
        ini = tmp_path / "e3.ini"
        ini.write_text(INI_E3)
        assert main(["--config", str(ini), "--out", str(tmp_path / "no" / "x.csv")]) == 3

    def test_runtime_error_exit(self, tmp_path, capsys):
        ini = tmp_path / "e6.ini"
        ini.write_text("[experiment]\nkind = E6\nsizes = 200\n[options]\nsteps = 40\n")
        assert main(["--config", str(ini)]) == 3
        assert "E6" in capsys.readouterr().err
