"""Monitored norms, CSV schema, ensemble statistics, energy budget."""

import numpy as np
import pytest

from lupe.grid import COS, build_grid
from lupe import fields as F
from lupe.noise import ModeSpec, build_noise_model
from lupe import operators as OP
from lupe.closures import EDDY_VISC, STRONG, ClosureSpec
from lupe.diagnostics import (
    CSV_COLUMNS,
    diagnostics_csv,
    energy_budget,
    ensemble_statistics,
    make_recorder,
    record,
    statistics_csv,
)
from lupe.stepper import Problem, SchemeSpec, initial_state, run

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="module")
def grid():
    return build_grid(TWO_PI, TWO_PI, 1.0, 8, 8, 4)


@pytest.fixture(scope="module")
def coefs():
    return OP.Coefs(mu_v=2e-2, nu_v=2e-2, mu_T=2e-2, nu_T=2e-2,
                    mu_S=2e-2, nu_S=2e-2, f=0.4)


class TestRecord:
    def test_zero_state(self, grid, coefs):
        r = record(F.StateU.zeros(grid), coefs)
        assert r.normH2 == 0.0 and r.normV2 == 0.0 and r.normDA2 == 0.0
        assert r.barotropicV2 == 0.0 and r.dzL2 == 0.0 and r.baroclinicL4 == 0.0
        assert r.wL2 == 0.0 and r.wHgamma == 0.0 and r.cfl == 0.0

    def test_analytic_single_mode_norms(self, grid, coefs):
        # vx = cos(x) cos(pi z) on the 2pi x 2pi x 1 box:
        # ||U||_H^2 = pi^2, ||U||_V^2 = pi^2 (1 + pi^2)
        X, Y, Z = grid.mesh_physical(quadrature=True)
        ones = np.ones((grid.nx, grid.ny, grid.nzq))
        vx = F.from_phys(grid, np.cos(X) * np.cos(np.pi * Z) * ones, COS)
        U = F.StateU(vx, *(F.ScalarField3D.zeros(grid) for _ in range(3)))
        r = record(U, coefs)
        assert np.isclose(r.normH2, np.pi**2, rtol=1e-12)
        assert np.isclose(r.normV2, np.pi**2 * (1 + np.pi**2), rtol=1e-12)

    def test_monitor_decomposition(self, grid, coefs):
        # V-energy of the velocity splits into barotropic + baroclinic parts
        for seed in range(10):
            U = initial_state(grid, "random", kmax=2, mmax=2, v_norm=1.3, seed=seed)
            v_only = F.StateU(U.vx, U.vy, F.ScalarField3D.zeros(grid),
                              F.ScalarField3D.zeros(grid))
            total = OP.norm2("V", v_only)
            bar = sum(F.grad_norm2(F.vertical_average(f)) for f in (U.vx, U.vy))
            bc = sum(F.grad_norm2(F.baroclinic_part(f)) for f in (U.vx, U.vy))
            assert abs(total - (bar + bc)) <= 1e-10 * max(total, 1.0)

    def test_energy_additivity_H(self, grid, coefs):
        for seed in range(10):
            U = initial_state(grid, "random", kmax=2, mmax=2, v_norm=1.0, seed=seed)
            for f in (U.vx, U.vy):
                tot = F.l2_norm2(f)
                parts = F.l2_norm2(F.vertical_average(f)) + F.l2_norm2(F.baroclinic_part(f))
                assert abs(tot - parts) <= 1e-10 * max(tot, 1.0)

    def test_nan_halts(self, grid, coefs):
        U = F.StateU.zeros(grid)
        U.vx.coeffs[0, 0, 0] = np.nan
        with pytest.raises(FloatingPointError):
            record(U, coefs)


class TestCSV:
    def test_column_order(self):
        assert CSV_COLUMNS[:10] == ("t", "normH2", "normV2", "normDA2",
                                    "barotropicV2", "dzL2", "baroclinicL4",
                                    "wL2", "wHgamma", "cfl")
        assert all(c.startswith("budget_") for c in CSV_COLUMNS[10:])

    def test_round_trip_readable(self, grid, coefs):
        U = initial_state(grid, "random", kmax=2, mmax=2, v_norm=1.0, seed=1)
        txt = diagnostics_csv([record(U, coefs, t=0.5)])
        lines = txt.strip().split("\n")
        assert lines[0].split(",") == list(CSV_COLUMNS)
        vals = [float(v) for v in lines[1].split(",")]
        assert vals[0] == 0.5


class TestEnsembleStatistics:
    def test_mean_var_max_shapes(self, grid, coefs):
        model = build_noise_model(grid, [ModeSpec("bt", 1, 0, 0, 0.2)])
        prob = Problem(model=model, closure=ClosureSpec(STRONG),
                       scheme=SchemeSpec(dt=2e-3, t_end=0.02), coefs=coefs)
        U0 = initial_state(grid, "random", kmax=2, mmax=2, v_norm=1.0, seed=2)
        rec = make_recorder(coefs, dt=2e-3)
        from lupe.stepper import run_ensemble

        trajs, _ = run_ensemble(prob, U0, 3, 4, rec)
        stats = ensemble_statistics([t.diagnostics for t in trajs])
        n_t = len(trajs[0].diagnostics)
        n_c = len(CSV_COLUMNS) - 1
        assert stats["mean"].shape == (n_t, n_c)
        assert (stats["var"] >= 0).all()
        assert (stats["max"] + 1e-15 >= stats["mean"]).all()
        txt = statistics_csv(stats)
        assert txt.startswith("t,mean_normH2")

    def test_requires_trajectories(self):
        with pytest.raises(ValueError):
            ensemble_statistics([])


class TestEnergyBudget:
    def test_deterministic_budget_closes(self, grid, coefs):
        model = build_noise_model(grid, [])
        prob = Problem(model=model, closure=ClosureSpec(STRONG),
                       scheme=SchemeSpec(dt=2e-3, t_end=0.04), coefs=coefs)
        U0 = initial_state(grid, "random", kmax=2, mmax=2, v_norm=1.0, seed=3)
        rec = make_recorder(coefs, dt=2e-3)
        traj = run(prob, U0, 0, record_fn=rec)
        b = energy_budget(traj.diagnostics)
        assert np.abs(b["budget_resid"]).max() < 1e-10
        # noise-free: martingale terms identically zero
        for name in ("budget_mart", "budget_qv", "budget_cross"):
            assert np.abs(b[name]).max() == 0.0
        # the summed terms reproduce the recorded energy increments
        hh = np.array([r.normH2 for r in traj.diagnostics])
        assert np.allclose(b["dH2"], np.diff(hh), atol=1e-12)

    def test_transport_injection_balances_diffusion(self, grid):
        """Pure transport noise: ensemble-mean noise injection matches the
        mean stochastic-diffusion dissipation inside the drift work."""
        c = OP.Coefs(mu_v=1e-10, nu_v=1e-10, mu_T=1e-10, nu_T=1e-10,
                     mu_S=1e-10, nu_S=1e-10, f=0.0, g=0.0)
        model = build_noise_model(grid, [ModeSpec("bt", 0, 0, 0, 1.0)])
        prob = Problem(model=model, closure=ClosureSpec(STRONG),
                       scheme=SchemeSpec(dt=1e-3, t_end=0.02), coefs=c)
        X, Y, Z = grid.mesh_physical(quadrature=True)
        T0 = F.from_phys(grid, np.cos(X) * np.ones((grid.nx, grid.ny, grid.nzq)), COS)
        U0 = F.StateU(F.ScalarField3D.zeros(grid), F.ScalarField3D.zeros(grid),
                      T0, F.ScalarField3D.zeros(grid))
        rec = make_recorder(c, dt=1e-3)
        inj, fsig = [], []
        ops = prob.model_ops()
        for mem in range(32):
            traj = run(prob, U0, 5, member=mem, record_fn=rec, ops=ops)
            b = energy_budget(traj.diagnostics)
            inj.append(b["budget_qv"].sum())
            fsig.append(b["budget_fsig"].sum())
        inj = np.array(inj)
        fsig = np.array(fsig)
        se = inj.std(ddof=1) / np.sqrt(len(inj))
        # fsig work is deterministic dissipation -dt a |grad T|^2 at leading order
        assert abs(inj.mean() + fsig.mean()) <= 3 * se + 0.05 * abs(fsig.mean())

    def test_eddy_viscosity_channel_sign(self, grid, coefs):
        model = build_noise_model(grid, [ModeSpec("bc", 1, 0, 1, 0.2, 0.0, "x")])
        cl = ClosureSpec(EDDY_VISC, alpha=0.1, gamma_r=2.5)
        prob = Problem(model=model, closure=cl,
                       scheme=SchemeSpec(dt=1e-3, t_end=0.02), coefs=coefs)
        U0 = initial_state(grid, "random", kmax=2, mmax=2, v_norm=1.0, seed=4)
        rec = make_recorder(coefs, gamma_r=cl.gamma_r, dt=1e-3)
        traj = run(prob, U0, 9, record_fn=rec)
        whg = np.array([r.wHgamma for r in traj.diagnostics])
        assert (whg >= 0).all()

    def test_missing_budget_logs(self, grid, coefs):
        U = initial_state(grid, "random", kmax=2, mmax=2, v_norm=1.0, seed=5)
        recs = [record(U, coefs, t=0.0)]
        with pytest.raises(ValueError):
            energy_budget(recs)


class TestDissipativeBaseline:
    def test_noise_free_sup_energy_is_initial(self, grid):
        # no noise, no buoyancy coupling: the energy decays monotonically,
        # so its supremum over the run is the initial value
        c = OP.Coefs(mu_v=5e-2, nu_v=5e-2, mu_T=5e-2, nu_T=5e-2,
                     mu_S=5e-2, nu_S=5e-2, f=0.5, g=0.0)
        model = build_noise_model(grid, [])
        prob = Problem(model=model, closure=ClosureSpec(STRONG),
                       scheme=SchemeSpec(dt=2e-3, t_end=0.1), coefs=c)
        U0 = initial_state(grid, "random", kmax=2, mmax=2, v_norm=1.0, seed=6)
        rec = make_recorder(c, dt=2e-3)
        traj = run(prob, U0, 0, record_fn=rec)
        hh = np.array([r.normH2 for r in traj.diagnostics])
        assert hh.argmax() == 0
        assert (np.diff(hh) <= 1e-14).all()
