import argparse

import numpy as np
import pytest

from nlft.harness import (
    ConfigError,
    build_parser,
    check_caps,
    config_hash,
    main,
    parse_complex,
    parse_list,
    parse_zgrid,
    resolve_settings,
)
from nlft.io import read_ray_csv, read_sidecar


def run(capsys, argv, environ=None):
    code = main(argv, environ or {})
    out, err = capsys.readouterr()
    return code, out, err


class TestSettings:
    def args(self, argv):
        return build_parser().parse_args(argv)

    def test_defaults(self):
        s = resolve_settings("gibbs", self.args(["gibbs"]), {})
        assert s["R_list"] == [5.0, 10.0, 15.0, 20.0] and s["mk"] == 8 and s["workers"] == 1

    def test_priority(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("mk = 5\nmz=6  # comment\nstep=0.2\n")
        argv = ["gibbs", "--config", str(cfg), "--mk", "4"]
        s = resolve_settings("gibbs", self.args(argv), {"NLFT_MZ": "7", "NLFT_MK": "9"})
        assert (s["mk"], s["mz"], s["step"]) == (4, 7, 0.2)

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("bogus=1\n")
        with pytest.raises(ConfigError):
            resolve_settings("gibbs", self.args(["gibbs", "--config", str(cfg)]), {})

    def test_bad_env_value(self):
        with pytest.raises(ConfigError):
            resolve_settings("gibbs", self.args(["gibbs"]), {"NLFT_MK": "eight"})

    def test_caps(self):
        check_caps({"mz": 9, "R_list": [20.0]})
        with pytest.raises(ConfigError, match="allow-large"):
            check_caps({"mz": 10})
        with pytest.raises(ConfigError):
            check_caps({"R_list": [5.0, 25.0]})
        check_caps({"mz": 10, "allow_large": True})

    def test_hash_ignores_workers(self):
        a = config_hash("gibbs", {"mk": 8, "workers": 1, "out": "a"})
        b = config_hash("gibbs", {"mk": 8, "workers": 4, "out": "b"})
        assert a == b != config_hash("gibbs", {"mk": 7, "workers": 1})


@pytest.mark.parametrize("text,value", [("1.5,2", 1.5 + 2j), ("-0.5", -0.5 + 0j), ("0.3+1i", 0.3 + 1j)])
def test_parse_complex(text, value):
    assert parse_complex(text) == value


def test_parse_errors():
    with pytest.raises(ConfigError):
        parse_complex("a,b")
    with pytest.raises(ConfigError):
        parse_list("1,x")
    with pytest.raises(ConfigError):
        parse_zgrid("disc:4")


def test_parse_zgrid():
    kind, zs, grid, mask = parse_zgrid("grid:4,1.5")
    assert kind == "grid" and zs.size == mask.sum() and np.all(np.abs(zs) <= 1)
    assert parse_zgrid("ray:5")[1].tolist() == [0, 0.25, 0.5, 0.75, 1]


class TestMain:
    def test_forward_then_invert(self, tmp_path, capsys):
        out = str(tmp_path / "runs")
        code, text, _ = run(capsys, ["forward", "--phantom", "unit", "--R", "4", "--mz", "5", "--step", "1", "--out", out])
        assert code == 0
        run_dir = text.splitlines()[0]
        tau = f"{run_dir}/tau.csv"
        ray = read_ray_csv(tau)
        assert np.all(ray.values == 0)
        meta = read_sidecar(tau)
        assert meta["command"] == "forward" and meta["R"] == 4.0 and meta["version"].startswith("nlft ")
        code, text, _ = run(capsys, ["invert-shortcut", "--tau", tau, "--mk", "5", "--zgrid", "ray:3", "--out", out])
        assert code == 0
        assert "max_abs_imag: 0.0" in text
        assert (tmp_path / "runs").is_dir()
        assert not any(p.name.endswith(".partial") for p in (tmp_path / "runs").iterdir())

    def test_cap_exit_code(self, tmp_path, capsys):
        code, _, err = run(capsys, ["forward", "--phantom", "unit", "--R", "4", "--out", str(tmp_path)], {"NLFT_MZ": "12"})
        assert code == 2 and "allow-large" in err
        assert not any(tmp_path.iterdir())

    def test_missing_input(self, tmp_path, capsys):
        code, _, err = run(capsys, ["invert-shortcut", "--tau", str(tmp_path / "none.csv"), "--out", str(tmp_path)])
        assert code == 2
        assert not any(p.name.endswith(".partial") for p in tmp_path.iterdir())

    def test_unknown_phantom(self, tmp_path, capsys):
        code, _, err = run(capsys, ["forward", "--phantom", "sigma9", "--R", "2", "--out", str(tmp_path)])
        assert code == 2 and "unknown phantom" in err

    def test_noise_run(self, tmp_path, capsys):
        code, text, _ = run(capsys, ["noise", "--mk", "5", "--sk", "3", "--mz", "5", "--p-list", "1,50", "--out", str(tmp_path)])
        assert code == 0
        assert "crossings" in text
