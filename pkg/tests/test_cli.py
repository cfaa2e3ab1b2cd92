import json
import subprocess
import sys
from pathlib import Path

import pytest

from cospectral.cli import build_id, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

F2 = {"family": "free", "rank": 2}


def write(tmp_path, name, cfg):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def run_cli(tmp_path, command, cfg, *extra):
    out = tmp_path / "out.json"
    code = main([command, "--config", write(tmp_path, "cfg", cfg), "--out", str(out), "--no-timing", *extra])
    return code, out


def envelope(path):
    return json.loads(Path(path).read_text())


class TestWalkRadius:
    cfg = {"seed": 3, "group": F2, "nu": {"kind": "uniform"}, "lazy": True, "K": 8, "N": 2000}

    def test_ok(self, tmp_path):
        code, out = run_cli(tmp_path, "walk-radius", self.cfg)
        env = envelope(out)
        assert code == 0 and env["status"] == "ok"
        assert env["config"] == self.cfg
        assert env["schema_version"] == "1.0" and env["build_id"] == build_id()
        assert env["wall_time"] is None and env["errors"] == []
        assert 0 < env["payload"]["estimate"]["value"] <= 1

    def test_not_symmetric(self, tmp_path, capsys):
        cfg = dict(self.cfg, nu={"kind": "atoms", "atoms": [{"word": [1], "prob": 0.5}, {"word": [2], "prob": 0.5}]})
        code, out = run_cli(tmp_path, "walk-radius", cfg)
        env = envelope(out)
        assert code == 1 and env["status"] == "error"
        assert "step distribution not symmetric" in env["errors"][0]["message"]
        assert "step distribution not symmetric" in capsys.readouterr().err

    def test_unknown_field(self, tmp_path):
        code, out = run_cli(tmp_path, "walk-radius", dict(self.cfg, colour="red"))
        assert code == 1 and envelope(out)["errors"]

    def test_seed_required(self, tmp_path):
        cfg = {k: v for k, v in self.cfg.items() if k != "seed"}
        code, _ = run_cli(tmp_path, "walk-radius", cfg)
        assert code == 1

    def test_workers_byte_identical(self, tmp_path):
        texts = []
        for w in ("1", "3"):
            code, out = run_cli(tmp_path, "walk-radius", self.cfg, "--workers", w)
            assert code == 0
            texts.append(out.read_bytes())
        assert texts[0] == texts[1]

    def test_csv(self, tmp_path):
        code, out = run_cli(tmp_path, "walk-radius", self.cfg, "--format", "csv")
        lines = out.read_text().splitlines()
        assert code == 0
        assert lines[0] == "k,hits,samples,p_hat,ci_lo,ci_hi" and len(lines) == 9
        assert envelope(str(out) + ".envelope.json")["status"] == "ok"


class TestSpectralRadius:
    def test_partial_sweep(self, tmp_path):
        cfg = {"seed": 0, "group": F2, "radii": [2, 4, 8], "max_states": 500}
        code, out = run_cli(tmp_path, "spectral-radius", cfg, "--format", "csv")
        assert code == 2
        rows = out.read_text().splitlines()
        assert [r.split(",")[0] for r in rows[1:]] == ["2", "4"]
        assert envelope(str(out) + ".envelope.json")["status"] == "nonconvergent"

    def test_complete(self, tmp_path):
        cfg = {"seed": 0, "group": {"family": "free_abelian", "dim": 1}, "radii": [5, 10]}
        code, out = run_cli(tmp_path, "spectral-radius", cfg)
        assert code == 0
        norms = [r["value"] for r in envelope(out)["payload"]["sweep"]]
        assert norms[0] <= norms[1] <= 1


class TestOtherCommands:
    @pytest.mark.parametrize("name", ["finrel", "mean-ergodic", "spectral-radius"])
    def test_shipped_configs(self, tmp_path, name):
        out = tmp_path / "out.json"
        code = main([name, "--config", str(CONFIGS / f"{name}.json"), "--out", str(out), "--no-timing"])
        assert code == 0 and envelope(out)["status"] == "ok"

    def test_percolate_csv(self, tmp_path):
        cfg = {"seed": 2, "group": F2, "p_levels": [0.5, 1.0], "K": 3, "N": 50, "window": 4}
        code, out = run_cli(tmp_path, "percolate", cfg, "--format", "csv")
        lines = out.read_text().splitlines()
        assert code == 0
        assert lines[0] == "p,k,hits_lower,hits_upper,samples,uinf_proxy_rate"
        assert len(lines) == 1 + 2 * 3

    def test_smallpieces(self, tmp_path):
        cfg = {"seed": 2, "rank": 2, "p": 0.5, "K": 10, "N": 20000}
        code, out = run_cli(tmp_path, "smallpieces", cfg)
        assert code in (0, 2)
        assert envelope(out)["payload"] is not None

    def test_finrel_bad_subrelation(self, tmp_path):
        cfg = {"seed": 0, "n": 4, "R_perms": [[1, 0, 3, 2]], "S_classes": [[0, 1, 2, 3]], "K": 3, "tol": 0.01}
        code, out = run_cli(tmp_path, "finrel", cfg)
        assert code == 1 and envelope(out)["status"] == "error"

    def test_verify_subset(self, tmp_path, capsys):
        code, out = run_cli(tmp_path, "verify", {"seed": 0, "criteria": ["A6", "A7"]})
        env = envelope(out)
        assert code == 0 and env["payload"]["all_passed"]
        err = capsys.readouterr().err
        assert "A6 PASS" in err and "A7 PASS" in err

    def test_missing_config(self, tmp_path):
        out = tmp_path / "out.json"
        assert main(["walk-radius", "--out", str(out)]) == 1

    def test_module_entry_point(self, tmp_path):
        path = write(tmp_path, "me", {"seed": 0, "angle": 1.0, "xi": [1.0, 0.0], "n_max": 10})
        proc = subprocess.run(
            [sys.executable, "-m", "cospectral", "mean-ergodic", "--config", path, "--no-timing"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["command"] == "mean-ergodic"
