"""Acceptance suite: one test per exit criterion, stated tolerances pinned.

Each test prints a PASS/FAIL line (bypassing capture) and asserts both the
criterion and its runtime budget.  Monte-Carlo criteria use counter-based
member streams, so results are reproducible bit for bit.
"""

import time

import numpy as np

from lupe.grid import COS, build_grid
from lupe import fields as F
from lupe.noise import ModeSpec, build_noise_model
from lupe import operators as OP
from lupe.closures import (
    APPROX_FILTERED_K,
    EDDY_VISC,
    ENERGY_BALANCED,
    FILTERED_K,
    STRONG,
    ClosureSpec,
)
from lupe.config import RunConfig
from lupe.diagnostics import energy_budget, make_recorder
from lupe.stepper import Problem, SchemeSpec, initial_state, run
from lupe.studies import (
    continuity_study,
    convergence_study,
    equivalence_study,
    lemma1_study,
    quasibarotropic_gap_sweep,
)
from lupe.verify import run_verify

TWO_PI = 2.0 * np.pi


def _report(capsys, label, ok, detail, elapsed, budget):
    line = (f"ACCEPTANCE {label}: {'PASS' if ok else 'FAIL'} - {detail} "
            f"[{elapsed:.1f}s / {budget:.0f}s]")
    with capsys.disabled():
        print("\n" + line)
    assert ok, line
    assert elapsed < budget, f"{label} exceeded its runtime budget: {line}"


def test_01_invariant_suite(capsys):
    """Invariant suite at 16 x 16 x 8 inside one minute."""
    t0 = time.perf_counter()
    checks = run_verify(16, 16, 8, seed=0)
    elapsed = time.perf_counter() - t0
    failed = [c.name for c in checks if not c.passed]
    _report(capsys, "1 invariant-suite", not failed,
            f"{len(checks)} invariants, failures: {failed or 'none'}", elapsed, 60)


def test_02_transport_compensation(capsys):
    """Passive scalar under one constant barotropic mode: the ensemble-mean
    L2 energy stays at its initial value within 3 standard errors plus an
    O(dt) bias band (transport injection balanced by stochastic diffusion)."""
    t0 = time.perf_counter()
    grid = build_grid(TWO_PI, TWO_PI, 1.0, 8, 8, 4)
    c = OP.Coefs(mu_v=1e-12, nu_v=1e-12, mu_T=1e-12, nu_T=1e-12,
                 mu_S=1e-12, nu_S=1e-12, f=0.0, g=0.0)
    model = build_noise_model(grid, [ModeSpec("bt", 0, 0, 0, 1.0, 0.0)])
    X, Y, Z = grid.mesh_physical(quadrature=True)
    T0 = F.from_phys(grid, np.cos(X) * np.ones((grid.nx, grid.ny, grid.nzq)), COS)
    U0 = F.StateU(F.ScalarField3D.zeros(grid), F.ScalarField3D.zeros(grid),
                  T0, F.ScalarField3D.zeros(grid))
    dt = 1e-3
    prob = Problem(model=model, closure=ClosureSpec(STRONG),
                   scheme=SchemeSpec(dt=dt, t_end=100 * dt), coefs=c)
    e0 = OP.norm2("H", U0)
    ops = prob.model_ops()
    finals = np.array([
        OP.norm2("H", run(prob, U0, seed=2024, member=m, ops=ops).states[-1])
        for m in range(256)
    ])
    elapsed = time.perf_counter() - t0
    se = finals.std(ddof=1) / np.sqrt(len(finals))
    drift = finals.mean() - e0
    band = 3 * se + dt * e0
    _report(capsys, "2 transport-compensation", abs(drift) <= band,
            f"mean drift {drift:+.3e} vs band {band:.3e} (E0 = {e0:.4f})",
            elapsed, 120)


def _equivalence_config(nx, ny, nz, t_end, extra_modes=(), ell=0.2, seed=3):
    grid = build_grid(TWO_PI, TWO_PI, 1.0, nx, ny, nz)
    coefs = OP.Coefs(mu_v=2e-2, nu_v=2e-2, mu_T=2e-2, nu_T=2e-2,
                     mu_S=2e-2, nu_S=2e-2, f=0.5)
    specs = [ModeSpec("bt", 1, 0, 0, 0.3, 0.3)] + list(extra_modes)
    return RunConfig(grid=grid, coefs=coefs, mode_specs=specs,
                     closure=ClosureSpec(FILTERED_K, ell=ell),
                     scheme=SchemeSpec(dt=1e-3, t_end=t_end),
                     init=dict(kind="random", kmax=2, mmax=2, v_norm=1.0, seed=1),
                     seed=seed)


def test_03_closure_equivalence(capsys):
    """Filtered and quasi-barotropic problems coincide for purely barotropic
    noise on shared Brownian paths: sup-H gap below 1e-10 over 200 steps."""
    t0 = time.perf_counter()
    cfg = _equivalence_config(16, 16, 8, t_end=0.2)
    res = equivalence_study(cfg)
    elapsed = time.perf_counter() - t0
    _report(capsys, "3 closure-equivalence", res["max_gap"] < 1e-10,
            f"max sup-H gap {res['max_gap']:.3e} (threshold 1e-10)", elapsed, 60)


def test_04_quasibarotropic_gap_scaling(capsys):
    """Sweeping the baroclinic amplitude over a decade, the closure gap
    scales quadratically: log-log slope within [1.7, 2.3]."""
    t0 = time.perf_counter()
    cfg = _equivalence_config(8, 8, 4, t_end=0.2,
                              extra_modes=[ModeSpec("bc", 1, 0, 1, 1.0, 0.0, "x")])
    cfg.init = dict(kind="zero")
    res = quasibarotropic_gap_sweep(cfg, [0.0125, 0.025, 0.05, 0.125])
    elapsed = time.perf_counter() - t0
    _report(capsys, "4 gap-scaling", 1.7 <= res["slope"] <= 2.3,
            f"log-log slope {res['slope']:.3f} over gaps "
            + ", ".join(f"{g:.2e}" for g in res["gaps"]), elapsed, 300)


def test_05_vanishing_noise_continuity(capsys):
    """Scaling the noise down to zero, the median pathwise distance in the
    sup-V / integrated-D(A) topology decreases strictly and hits exactly
    zero at scale zero."""
    t0 = time.perf_counter()
    grid = build_grid(TWO_PI, TWO_PI, 1.0, 12, 12, 6)
    coefs = OP.Coefs(mu_v=3e-2, nu_v=3e-2, mu_T=3e-2, nu_T=3e-2,
                     mu_S=3e-2, nu_S=3e-2, f=0.5)
    specs = [ModeSpec("bt", 1, 0, 0, 0.25, 0.3),
             ModeSpec("bc", 1, 0, 1, 0.15, 0.0, "x")]
    cfg = RunConfig(grid=grid, coefs=coefs, mode_specs=specs,
                    closure=ClosureSpec(APPROX_FILTERED_K, ell=0.15),
                    scheme=SchemeSpec(dt=2e-3, t_end=0.5, substeps_output=5),
                    init=dict(kind="random", kmax=2, mmax=2, v_norm=0.8, seed=2),
                    seed=17)
    res = continuity_study(cfg, [1.0, 1e-2, 1e-4, 0.0], members=32)
    elapsed = time.perf_counter() - t0
    ok = res["monotone"] and res["zero_exact"]
    meds = ", ".join(f"{m:.3e}" for m in res["medians"])
    _report(capsys, "5 vanishing-noise-continuity", ok,
            f"median distances [{meds}] monotone={res['monotone']} "
            f"zero-exact={res['zero_exact']}", elapsed, 600)


def test_06_energy_estimate_plateau(capsys):
    """E[sup ||U||_H^2] and E[int ||U||_V^2] across three Galerkin ranks:
    plateau within 20% over the resolution doubling, no member blow-up."""
    t0 = time.perf_counter()
    grid = build_grid(TWO_PI, TWO_PI, 1.0, 16, 16, 8)
    coefs = OP.Coefs(mu_v=5e-2, nu_v=5e-2, mu_T=5e-2, nu_T=5e-2,
                     mu_S=5e-2, nu_S=5e-2, f=0.5)
    specs = [ModeSpec("bt", 1, 0, 0, 0.15, 0.3),
             ModeSpec("bc", 1, 0, 1, 0.1, 0.0, "x")]
    cfg = RunConfig(grid=grid, coefs=coefs, mode_specs=specs,
                    closure=ClosureSpec(FILTERED_K, ell=0.15),
                    scheme=SchemeSpec(dt=2.5e-3, t_end=1.0, substeps_output=2),
                    init=dict(kind="random", kmax=2, mmax=2, v_norm=1.0, seed=4),
                    seed=29)
    res = lemma1_study(cfg, members=64, p=2)
    elapsed = time.perf_counter() - t0
    ok = res["plateau"] and not res["any_blowup"]
    _report(capsys, "6 energy-estimate-plateau", ok,
            f"sup change {res['sup_rel_change']:.3f}, "
            f"integral change {res['int_rel_change']:.3f}, "
            f"blow-ups {sum(len(b) for b in res['blowups'])}", elapsed, 900)


def test_07_strong_convergence_order(capsys):
    """Fixed Brownian paths, dt in {4d, 2d, d} against a d/16 reference:
    observed strong order at least 0.45 for the quasi-barotropic closure
    with mixed noise."""
    t0 = time.perf_counter()
    grid = build_grid(TWO_PI, TWO_PI, 1.0, 8, 8, 4)
    coefs = OP.Coefs(mu_v=2e-2, nu_v=2e-2, mu_T=2e-2, nu_T=2e-2,
                     mu_S=2e-2, nu_S=2e-2, f=0.5)
    specs = [ModeSpec("bt", 1, 0, 0, 0.3, 0.3),
             ModeSpec("bc", 1, 0, 1, 0.25, 0.0, "x")]
    cfg = RunConfig(grid=grid, coefs=coefs, mode_specs=specs,
                    closure=ClosureSpec(APPROX_FILTERED_K, ell=0.2),
                    scheme=SchemeSpec(dt=8e-3, t_end=0.12),
                    init=dict(kind="random", kmax=2, mmax=2, v_norm=1.0, seed=3),
                    seed=21)
    res = convergence_study(cfg, levels=3, ref_factor=16, members=16)
    elapsed = time.perf_counter() - t0
    _report(capsys, "7 strong-convergence", res["order"] >= 0.45,
            f"observed order {res['order']:.3f}, errors "
            + ", ".join(f"{e:.2e}" for e in res["errors"]), elapsed, 300)


def test_08_dissipative_channels(capsys):
    """The (hyper)viscous closures log a nonnegative alpha ||w||_{H^gamma}^2
    channel every step, and their deterministic budget residuals close to
    below 1e-10 per step."""
    t0 = time.perf_counter()
    grid = build_grid(TWO_PI, TWO_PI, 1.0, 8, 8, 4)
    coefs = OP.Coefs(mu_v=2e-2, nu_v=2e-2, mu_T=2e-2, nu_T=2e-2,
                     mu_S=2e-2, nu_S=2e-2, f=0.5)
    specs = [ModeSpec("bt", 1, 0, 0, 0.2, 0.3),
             ModeSpec("bc", 1, 0, 1, 0.15, 0.0, "x")]
    model = build_noise_model(grid, specs)
    empty = build_noise_model(grid, [])
    U0 = initial_state(grid, "random", kmax=2, mmax=2, v_norm=1.0, seed=5)

    details = []
    ok = True
    for closure in (ClosureSpec(EDDY_VISC, alpha=0.1, gamma_r=2.5),
                    ClosureSpec(ENERGY_BALANCED, alpha=0.1, gamma_r=1.5)):
        rec = make_recorder(coefs, gamma_r=closure.gamma_r, dt=1e-3)
        # stochastic run: channel nonnegative at every step
        prob = Problem(model=model, closure=closure,
                       scheme=SchemeSpec(dt=1e-3, t_end=0.1), coefs=coefs)
        traj = run(prob, U0, seed=41, member=0, record_fn=rec)
        whg_min = min(closure.alpha * r.wHgamma for r in traj.diagnostics)
        # deterministic run: exact budget closure
        dprob = Problem(model=empty, closure=closure,
                        scheme=SchemeSpec(dt=1e-3, t_end=0.1), coefs=coefs)
        dtraj = run(dprob, U0, seed=0, member=0, record_fn=rec)
        resid = np.abs(energy_budget(dtraj.diagnostics)["budget_resid"]).max()
        ok = ok and whg_min >= 0.0 and resid < 1e-10
        details.append(f"{closure.kind}: min channel {whg_min:.2e}, "
                       f"max residual {resid:.2e}")
    elapsed = time.perf_counter() - t0
    _report(capsys, "8 dissipative-channels", ok, "; ".join(details), elapsed, 120)
