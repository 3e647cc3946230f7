"""CLI surface: subcommands, exit codes, file outputs."""

import pytest

from lupe.cli import main

RUN_CFG = """
seed = 11

[grid]
nx = 8
ny = 8
nz = 4

[physics]
mu_v = 2e-2
nu_v = 2e-2

[noise]
mode = bt nx=1 ny=0 m=0 amp=0.3

[closure]
kind = filtered_k
ell = 0.15

[scheme]
dt = 2e-3
t_end = 0.02

[init]
kind = random
kmax = 2
mmax = 2
v_norm = 1.0

[output]
snapshots = true
"""

BT_ONLY_CFG = RUN_CFG.replace("t_end = 0.02", "t_end = 0.04")

BC_SWEEP_CFG = RUN_CFG.replace(
    "mode = bt nx=1 ny=0 m=0 amp=0.3",
    "mode = bt nx=1 ny=0 m=0 amp=0.3\nmode = bc nx=1 ny=0 m=1 amp=1.0 dir=x",
)


@pytest.fixture()
def cfg_path(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(RUN_CFG)
    return p


class TestRunCommand:
    def test_run_outputs(self, cfg_path, tmp_path):
        out = tmp_path / "out1"
        code = main(["run", "--config", str(cfg_path), "--outdir", str(out), "--quiet"])
        assert code == 0
        assert (out / "diagnostics.csv").exists()
        assert (out / "diagnostics.png").exists()
        assert (out / "state_final.lupe").exists()

    def test_identical_seeds_identical_csv(self, cfg_path, tmp_path):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["run", "--config", str(cfg_path), "--outdir", str(out1),
              "--seed", "7", "--quiet"])
        main(["run", "--config", str(cfg_path), "--outdir", str(out2),
              "--seed", "7", "--quiet"])
        assert (out1 / "diagnostics.csv").read_bytes() == \
            (out2 / "diagnostics.csv").read_bytes()

    def test_bad_config_exits_2(self, tmp_path, capsys):
        p = tmp_path / "bad.cfg"
        p.write_text("[grid]\nnx = 7\n")
        with pytest.raises(SystemExit) as err:
            main(["run", "--config", str(p)])
        assert err.value.code == 2

    def test_missing_config_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["run", "--config", str(tmp_path / "nope.cfg")])
        assert err.value.code == 2


class TestEnsembleCommand:
    def test_ensemble_outputs(self, cfg_path, tmp_path):
        out = tmp_path / "ens"
        code = main(["ensemble", "--config", str(cfg_path), "--members", "3",
                     "--outdir", str(out)])
        assert code == 0
        assert (out / "ensemble.csv").exists()
        assert (out / "ensemble.png").exists()


class TestVerifyCommand:
    def test_small_grid_passes(self, capsys):
        code = main(["verify", "--nx", "8", "--ny", "8", "--nz", "4"])
        out = capsys.readouterr().out
        assert code == 0
        assert "FAIL" not in out
        assert out.count("PASS") >= 10


class TestStudyCommand:
    def test_equivalence_pass(self, tmp_path, capsys):
        p = tmp_path / "bt.cfg"
        p.write_text(BT_ONLY_CFG)
        out = tmp_path / "eq"
        code = main(["study", "equivalence", "--config", str(p),
                     "--outdir", str(out)])
        assert code == 0
        assert "PASS" in capsys.readouterr().out

    def test_equivalence_rejects_baroclinic(self, tmp_path):
        p = tmp_path / "bc.cfg"
        p.write_text(BC_SWEEP_CFG)
        code = main(["study", "equivalence", "--config", str(p),
                     "--outdir", str(tmp_path / "x")])
        assert code == 2

    def test_budget_outputs(self, cfg_path, tmp_path, capsys):
        out = tmp_path / "bud"
        code = main(["study", "budget", "--config", str(cfg_path),
                     "--outdir", str(out)])
        assert code == 0
        assert (out / "budget.csv").exists()
        assert (out / "budget.png").exists()


class TestBlowUpExitCode:
    def test_run_blow_up_exits_3_with_partial_outputs(self, tmp_path):
        p = tmp_path / "explode.cfg"
        p.write_text(RUN_CFG.replace("dt = 2e-3", "dt = 50.0")
                     .replace("t_end = 0.02", "t_end = 500.0")
                     .replace("v_norm = 1.0", "v_norm = 50.0"))
        out = tmp_path / "boom"
        import numpy as np

        with np.errstate(over="ignore", invalid="ignore"):
            code = main(["run", "--config", str(p), "--outdir", str(out), "--quiet"])
        assert code == 3
        assert (out / "diagnostics.csv").exists()
