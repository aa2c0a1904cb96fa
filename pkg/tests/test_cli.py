import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from sera import io
from sera.cli import ConfigurationError, RunConfig, load_config, main, parse_overrides
from sera.synthesis import gen_sample_points
from sera.quadrature import A_SERO


def run(*args, env=None):
    res = CliRunner().invoke(main, [str(a) for a in args], env=env)
    return res


@pytest.fixture(scope="module")
def spikes_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("spikes")
    cfg = out / "cfg.json"
    cfg.write_text(json.dumps({"centers": [[-3.0], [0.0], [3.0]], "amplitudes": [1.5, -1.2, 1.8],
                               "eta": 3.0, "out": str(out)}))
    assert run("--config", cfg, "gen").exit_code == 0
    return out, cfg


class TestConfig:
    def test_overrides_typed(self):
        o = parse_overrides(["--rho", "3", "--check-precision", "false", "--centers", "[[1.0]]",
                             "--refine=theorem", "--S", "none"])
        assert o == {"rho": 3.0, "check_precision": False, "centers": [[1.0]], "refine": "theorem",
                     "S": None}

    @pytest.mark.parametrize("args", [["--nope", "1"], ["rho", "2"], ["--rho"], ["--rho", "x"]])
    def test_bad_overrides(self, args):
        with pytest.raises(ConfigurationError):
            parse_overrides(args)

    def test_precedence(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"n": 5, "rho": 3}')
        cfg = load_config(p, {"rho": 4.0}, {"n": 3.0, "mu": 2.0})
        assert (cfg.n, cfg.rho, cfg.mu) == (5, 4.0, 2.0)
        p.write_text('{"unknown": 1}')
        with pytest.raises(ConfigurationError):
            load_config(p, {})

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            RunConfig(rho=0.5)
        with pytest.raises(ConfigurationError):
            RunConfig(kind="other")


class TestGen:
    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("gen", "--out", a, "--seed", 4).exit_code == 0
        assert run("gen", "--out", b, "--seed", 4).exit_code == 0
        assert (a / "samples.csv").read_bytes() == (b / "samples.csv").read_bytes()
        ta = json.loads((a / "target.json").read_text())
        tb = json.loads((b / "target.json").read_text())
        ta["config"].pop("out"), tb["config"].pop("out")
        assert ta == tb

    def test_L_and_count(self, tmp_path):
        assert run("gen", "--out", tmp_path, "--L", 2, "--target-radius", 3).exit_code == 0
        meta = json.loads((tmp_path / "target.json").read_text())
        assert meta["config"]["L"] == 2 and meta["target"]["count"] == 2
        pts, _ = io.read_table(tmp_path / "samples.csv")
        assert len(pts) == len(gen_sample_points(1, A_SERO, 8.0)) == meta["sample_count"]

    def test_noise_labelled(self, tmp_path):
        assert run("gen", "--out", tmp_path, "--noise-level", 0.001).exit_code == 0
        meta = json.loads((tmp_path / "target.json").read_text())
        assert meta["observation_noise"]["level"] == 0.001


class TestWeights:
    def test_cache_and_diagnostics(self, tmp_path):
        run("gen", "--out", tmp_path, "--sample-level", 3)
        r1 = run("weights", "--out", tmp_path, "--sample-level", 3)
        assert r1.exit_code == 0 and r1.output.startswith("solved")
        d = json.loads((tmp_path / "weights.json").read_text())
        assert d["diagnostics"]["product_orthogonality_residual"] <= 1e-6
        r2 = run("weights", "--out", tmp_path, "--sample-level", 3)
        assert r2.output.startswith("cached")
        r3 = run("weights", "--out", tmp_path, "--sample-level", 3, "--weights-mode", "single-moment")
        assert r3.output.startswith("solved")
        d3 = json.loads((tmp_path / "weights.json").read_text())
        assert d3["diagnostics"]["n_constraints"] == d["diagnostics"]["n_constraints"]

    def test_malformed_csv(self, tmp_path):
        (tmp_path / "samples.csv").write_text("y_1,value\n0.0,1.0\n0.5\n")
        r = run("weights", "--out", tmp_path)
        assert r.exit_code == 2 and ":3:" in r.output


class TestRecover:
    def test_three_spikes(self, spikes_dir):
        out, cfg = spikes_dir
        r = run("--config", cfg, "recover")
        assert r.exit_code == 0, r.output
        s = json.loads((out / "spikes.json").read_text())
        assert s["count"] == 3 and s["config"]["eta"] == 3.0
        assert "sufficiency" in s["diagnostics"]
        for name in ("field_n.csv", "field_N.csv"):
            assert (out / name).read_text().startswith("x_1,value\n")

    def test_zero_data(self, tmp_path):
        assert run("gen", "--out", tmp_path, "--centers", "[]", "--amplitudes", "[]").exit_code == 0
        r = run("recover", "--out", tmp_path)
        assert r.exit_code == 0
        assert json.loads((tmp_path / "spikes.json").read_text())["count"] == 0

    def test_exit_codes(self, spikes_dir, tmp_path):
        out, cfg = spikes_dir
        assert run("recover", "--out", tmp_path / "missing").exit_code == 2
        assert run("recover", "--bogus", 1).exit_code == 2
        r = run("--config", cfg, "recover", "--refine", "theorem")
        assert r.exit_code == 3
        fail = json.loads((out / "spikes.json").read_text())
        assert fail["error"] == "PrecisionError"
        assert run("verify", "--out", tmp_path, env={"SERA_THREADS": "zero"}).exit_code == 2

    def test_does_not_mutate_inputs(self, spikes_dir):
        out, cfg = spikes_dir
        before = (out / "samples.csv").read_bytes()
        run("--config", cfg, "recover")
        assert (out / "samples.csv").read_bytes() == before


class TestSeparate:
    def test_single_exponential(self, tmp_path):
        run("gen", "--out", tmp_path, "--kind", "expsum", "--exponents", "[[1.0]]", "--coefficients", "[1.0]")
        r = run("separate", "--out", tmp_path)
        assert r.exit_code == 0, r.output
        s = json.loads((tmp_path / "separation.json").read_text())
        assert s["count"] == 1 and abs(s["coefficients"][0] - 1) <= 0.1
        y, a = s["spikes"]["rescaled_centers"][0][0], s["spikes"]["rescaled_amplitudes"][0]
        assert s["coefficients"][0] == pytest.approx(math.pi ** -0.5 * math.exp(-y * y) * a, rel=1e-12)

    def test_zero(self, tmp_path):
        run("gen", "--out", tmp_path, "--kind", "expsum", "--exponents", "[[0.0]]", "--coefficients", "[0.0]")
        r = run("separate", "--out", tmp_path)
        assert r.exit_code == 0
        assert json.loads((tmp_path / "separation.json").read_text())["count"] == 0


class TestVerify:
    def test_default(self, tmp_path):
        r = run("verify", "--out", tmp_path, env={"SERA_THREADS": "1"})
        assert r.exit_code == 0
        rep = json.loads((tmp_path / "verify.json").read_text())
        assert rep["passed"] and rep["n"] == 3 and rep["q"] == 1
        assert all({"name", "value", "tolerance", "passed"} <= set(i) for i in rep["items"])

    def test_tight(self, tmp_path):
        r = run("verify", "--out", tmp_path, "--tolerances", '{"mehler_special": 1e-30}')
        assert r.exit_code == 0
        rep = json.loads((tmp_path / "verify.json").read_text())
        assert not rep["passed"]
        assert [i["name"] for i in rep["items"] if not i["passed"]] == ["mehler_special"]
