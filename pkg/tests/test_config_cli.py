import json

import pytest

from mfx import cli, config
from mfx.config import ConfigError


@pytest.fixture(scope="module")
def basket_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("basket")
    assert cli.main(["fixture", "basket", "--out", str(root), "--pairs", "EUR/USD,USD/JPY",
                     "--seconds", "60000"]) == 0
    return root


@pytest.fixture(scope="module")
def shock_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("shock")
    assert cli.main(["fixture", "shock", "--out", str(root)]) == 0
    return root


class TestConfig:
    def test_load_and_precedence(self, tmp_path):
        (tmp_path / "a.csv").write_text("1,2,1\n")
        (tmp_path / "c.ini").write_text("[data]\nEUR/USD = a.csv\n[analysis]\nm = 3\nq = 1, 4\n[run]\nseed = 9\n")
        cfg = config.load(tmp_path / "c.ini")
        assert cfg.m == 3 and cfg.q == [1.0, 4.0] and cfg.seed == 9
        assert cfg.data["EUR/USD"] == str((tmp_path / "a.csv").resolve())
        assert cfg.sources["m"] == "config" and cfg.sources["jobs"] == "default"
        args = cli.build_parser().parse_args(["mfdfa", "--m", "1"])
        cli.apply_flags(cfg, args)
        assert cfg.m == 1 and cfg.sources["m"] == "flag"
        config.validate(cfg)

    def test_unknown_key(self, tmp_path):
        (tmp_path / "c.ini").write_text("[analysis]\nbogus = 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            config.load(tmp_path / "c.ini")

    def test_missing_file_reference(self, tmp_path):
        (tmp_path / "c.ini").write_text("[data]\nEUR/USD = nowhere.csv\n")
        with pytest.raises(ConfigError):
            config.validate(config.load(tmp_path / "c.ini"))

    def test_hash_ignores_output_only(self):
        a, b = config.AnalysisConfig(), config.AnalysisConfig(output="/elsewhere")
        assert a.hash() == b.hash()
        assert a.hash() != config.AnalysisConfig(m=3).hash()


class TestCli:
    def test_rho_both_q_blocks(self, basket_dir, tmp_path):
        out = tmp_path / "o"
        code = cli.main(["rho", "-c", str(basket_dir / "mfx.ini"), "--q", "1", "--q", "4",
                         "--avg-scales", "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "rho" / "matrix_avg.json").read_text())
        assert [b["q"] for b in doc["blocks"]] == [1.0, 4.0]
        assert doc["meta"]["config_hash"] and doc["meta"]["version"]
        assert (out / "rho" / "matrix_avg_q1.csv").read_text().startswith("# mfx ")
        man = json.loads((out / "manifest.json").read_text())
        assert "rho/matrix_avg.json" in man["artifacts"]

    def test_arb_planted_shock(self, shock_dir, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["arb", "-c", str(shock_dir / "mfx.ini"), "--triangle", "EUR,USD,CHF",
                         "--threshold", "0", "--out", str(out)]) == 0
        lines = (out / "arb" / "events.jsonl").read_text().splitlines()
        assert len(lines) == 1
        ev = json.loads(lines[0])
        assert ev["direction"] == "alpha1" and ev["samples"] == 5

    @pytest.mark.parametrize("cmd", ["ingest", "mfdfa", "mfcca", "dendro", "tails", "index"])
    def test_subcommands_run(self, basket_dir, tmp_path, cmd):
        out = tmp_path / cmd
        assert cli.main([cmd, "-c", str(basket_dir / "mfx.ini"), "--out", str(out)]) == 0
        assert (out / "manifest.json").exists()

    def test_surrogate_and_cache_roundtrip(self, basket_dir, tmp_path):
        ing = tmp_path / "ing"
        assert cli.main(["ingest", "-c", str(basket_dir / "mfx.ini"), "--out", str(ing)]) == 0
        out = tmp_path / "s"
        code = cli.main(["surrogate", "--pair", f"EUR/USD={ing / 'returns' / 'EURUSD.mfx'}",
                         "--kind", "fourier-phase", "--count", "3", "--out", str(out)])
        assert code == 0
        assert len(list((out / "surrogate" / "EURUSD").glob("*.mfx"))) == 3
        man = json.loads((out / "surrogate" / "ensemble.json").read_text())
        assert man["kind"] == "fourier-phase" and man["rng"] == "PCG64"

    def test_verbose_precedence(self, basket_dir, tmp_path, capsys):
        cli.main(["index", "-c", str(basket_dir / "mfx.ini"), "--m", "1", "--verbose", "--out", str(tmp_path)])
        err = capsys.readouterr().err
        assert "m = 1 (flag)" in err and "delta_t = 10.0 (config)" in err and "jobs = 1 (default)" in err

    def test_exit_codes(self, basket_dir, shock_dir, tmp_path, capsys):
        ini = str(basket_dir / "mfx.ini")
        assert cli.main(["mfdfa", "--pair", "X/Y=/does/not/exist", "--out", str(tmp_path)]) == 1
        assert cli.main(["rho", "-c", ini, "--q", "0", "--out", str(tmp_path)]) == 1
        bad = tmp_path / "bad.csv"
        bad.write_text("garbage\nmore garbage\n")
        assert cli.main(["mfdfa", "--pair", f"EUR/USD={bad}", "--out", str(tmp_path)]) == 2
        assert cli.main(["tails", "-c", str(shock_dir / "mfx.ini"), "--out", str(tmp_path)]) == 2
        assert cli.main(["mfdfa", "-c", ini, "--fit-range", "20", "21", "--out", str(tmp_path)]) == 0
        assert "error" in capsys.readouterr().err

    def test_numerical_exit_code(self, tmp_path, capsys):
        import numpy as np
        from mfx import ingest
        ingest.write_returns(tmp_path / "flat.mfx", ingest.ReturnSeries("EUR/USD", 10.0, 0, np.zeros(2000)))
        code = cli.main(["mfdfa", "--pair", f"EUR/USD={tmp_path / 'flat.mfx'}", "--q", "0",
                         "--out", str(tmp_path / "o")])
        assert code == 3
        assert "numerical error" in capsys.readouterr().err

    def test_inputs_untouched(self, basket_dir, tmp_path):
        before = {p.name: p.read_bytes() for p in basket_dir.glob("*.csv")}
        cli.main(["report", "-c", str(basket_dir / "mfx.ini"), "--out", str(tmp_path / "r")])
        assert before == {p.name: p.read_bytes() for p in basket_dir.glob("*.csv")}
