"""Built-in invariant suite backing the `verify` subcommand.

Each check is a pure function of a freshly built grid/model/state; the
suite prints one PASS/FAIL line per invariant and the CLI exits nonzero if
any check fails.  Default resolution 16 x 16 x 8 finishes well inside a
minute on a laptop.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import fields as F
from .closures import ClosureSpec, FILTERED_K
from .grid import SIN, build_grid
from .noise import ModeSpec, build_noise_model, mode_divergence, variance_tensor_at_nodes
from .operators import (
    Coefs,
    aK_apply,
    advection_B,
    coriolis,
    diffusion_A,
    filter_apply,
    gaussian_filter,
    inner_product,
    norm2,
    vertical_velocity,
)
from .stepper import Problem, SchemeSpec, initial_state, run


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_state(grid, seed, v_norm=1.0, coefs=None):
    return initial_state(grid, "random", kmax=3, mmax=min(3, grid.nz - 1),
                         v_norm=v_norm, seed=seed, coefs=coefs)


def _mixed_model(grid, amp=0.25):
    return build_noise_model(grid, [
        ModeSpec("bt", 1, 0, 0, amp, 0.3),
        ModeSpec("bt", 0, 0, 0, 0.5 * amp, 0.9),
        ModeSpec("bc", 1, 0, 1, amp, -np.pi / 2, "x"),
        ModeSpec("bc", 1, 1, 1, 0.6 * amp, 0.4, "y"),
    ])


def run_verify(nx: int = 16, ny: int = 16, nz: int = 8, seed: int = 0) -> list:
    grid = build_grid(2 * np.pi, 2 * np.pi, 1.0, nx, ny, nz)
    c = Coefs(mu_v=2e-2, nu_v=3e-2, mu_T=1e-2, nu_T=2e-2, mu_S=1e-2, nu_S=1e-2, f=0.8)
    rng = np.random.default_rng(seed)
    checks = []

    # transform round trip
    samp = rng.standard_normal((nx, ny, nz))
    f = F.forward_transform(grid, samp)
    f._samples = None  # exercise the synthesis path, not the cache
    err = np.abs(F.inverse_transform(f) - samp).max() / np.abs(samp).max()
    checks.append(CheckResult("transform-round-trip", err < 1e-12, f"rel err {err:.2e}"))

    # Parseval
    U = _random_state(grid, 1, coefs=c)
    phys = F.to_phys(U.vx)
    quad = F.quadrature_integral(grid, phys**2)
    spec = F.l2_norm2(U.vx)
    err = abs(quad - spec) / abs(spec)
    checks.append(CheckResult("parseval", err < 1e-10, f"rel err {err:.2e}"))

    # projector algebra
    v = U.vx
    A1, R1 = F.vertical_average(v), F.baroclinic_part(v)
    scale = np.abs(v.coeffs).max()
    errs = [
        np.abs(F.vertical_average(A1).coeffs - A1.coeffs).max(),
        np.abs(F.baroclinic_part(R1).coeffs - R1.coeffs).max(),
        np.abs(F.vertical_average(R1).coeffs).max(),
        np.abs((A1 + R1).coeffs - v.coeffs).max(),
        abs(F.l2_inner(A1, R1)),
    ]
    P1 = F.leray_project(U)
    P2 = F.leray_project(P1)
    errs.append(max(np.abs(a.coeffs - b.coeffs).max() for a, b in zip(P1.fields(), P2.fields())))
    # A commutes with the barotropic projector
    AU = diffusion_A(U, c)
    errs.append(np.abs(F.vertical_average(AU.vx).coeffs
                       - diffusion_A(F.StateU(A1, F.vertical_average(U.vy), U.T, U.S), c).vx.coeffs).max())
    err = max(errs) / max(scale, 1.0)
    checks.append(CheckResult("projector-algebra", err < 1e-12, f"max err {err:.2e}"))

    # trilinear anti-symmetry
    worst = 0.0
    for k in range(5):
        Ua = _random_state(grid, 10 + k, coefs=c)
        Qa = _random_state(grid, 20 + k, coefs=c)
        val = abs(inner_product("H", advection_B(Ua.vx, Ua.vy, Qa), Qa))
        bound = 1e-8 * np.sqrt(norm2("V", Ua, c)) * norm2("V", Qa, c)
        worst = max(worst, val / bound)
    checks.append(CheckResult("trilinear-anti-symmetry", worst < 1.0,
                              f"max |b(U,Q,Q)| at {worst:.2e} of the 1e-8 bound"))

    # Coriolis energy neutrality
    cx, cy = coriolis(U.vx, U.vy, c.f)
    val = abs(F.l2_inner(cx, U.vx) + F.l2_inner(cy, U.vy))
    ref = norm2("H", U)
    checks.append(CheckResult("coriolis-neutrality", val < 1e-12 * max(ref, 1.0),
                              f"(Gamma U, U)_H = {val:.2e}"))

    # rigid lid over a short stochastic run
    model = _mixed_model(grid)
    prob = Problem(model=model, closure=ClosureSpec(FILTERED_K, ell=0.2),
                   scheme=SchemeSpec(dt=2e-3, t_end=0.04), coefs=c)
    traj = run(prob, U, seed=seed, member=0, keep_states=True)
    div = max(F.rigid_lid_divergence(s) for s in traj.states)
    checks.append(CheckResult("rigid-lid-divergence", div < 1e-10, f"max {div:.2e}"))

    # w reconstruction; sine parity makes w(z = 0) = 0 exact by construction
    w = vertical_velocity(U.vx, U.vy)
    resid = np.sqrt(F.l2_norm2(F.dx(U.vx) + F.dy(U.vy) + F.dz(w)))
    surf = np.abs(w.coeffs @ np.sin(np.zeros(grid.nz))).max()
    checks.append(CheckResult("w-reconstruction", resid < 1e-10 and surf == 0.0,
                              f"div resid {resid:.2e}, w(z=0) = {surf:.1f}"))

    # a^K positivity and the two-sided identity
    K = gaussian_filter(grid, 0.25)
    gw = (F.dx(w), F.dy(w), F.dz(w))
    ak = aK_apply(model, K, gw)
    lhs = sum(F.l2_inner(a, b) for a, b in zip(ak, gw))
    rhs = 0.0
    for mode in model.modes:
        s = F.from_phys(grid, F.to_phys(mode.phi_x) * F.to_phys(gw[0])
                        + F.to_phys(mode.phi_y) * F.to_phys(gw[1])
                        + F.to_phys(mode.phi_z) * F.to_phys(gw[2]), SIN)
        rhs += F.l2_norm2(filter_apply(K, s))
    ok = lhs >= -1e-12 and abs(lhs - rhs) < 1e-10 * max(rhs, 1.0)
    checks.append(CheckResult("aK-positivity", ok,
                              f"(aK grad w, grad w) = {lhs:.3e}, mode sum {rhs:.3e}"))

    # parabolicity versus brute force
    impl = float(np.linalg.eigvalsh(variance_tensor_at_nodes(model))[..., -1].max())
    brute = _parabolicity_brute_force(model, n_dirs=10_000, seed=seed)
    err = abs(impl - brute) / max(impl, 1.0)
    checks.append(CheckResult("parabolicity-brute-force", err < 1e-3,
                              f"eig {impl:.6f} vs search {brute:.6f}"))

    # mode divergences and variance-tensor PSD
    dmax = max(mode_divergence(m) for m in model.modes)
    checks.append(CheckResult("divergence-free-modes", dmax < 1e-10, f"max {dmax:.2e}"))
    eig_min = float(np.linalg.eigvalsh(variance_tensor_at_nodes(model))[..., 0].min())
    checks.append(CheckResult("variance-tensor-psd", eig_min >= -1e-12,
                              f"min eigenvalue {eig_min:.2e}"))

    return checks


def _parabolicity_brute_force(model, n_dirs: int = 10_000, seed: int = 0) -> float:
    a = variance_tensor_at_nodes(model).reshape(-1, 3, 3)
    rng = np.random.default_rng(seed)
    best = 0.0
    chunk = 512
    for start in range(0, n_dirs, chunk):
        m = min(chunk, n_dirs - start)
        xi = rng.standard_normal((m, 3))
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
        vals = np.einsum("nij,mi,mj->nm", a, xi, xi, optimize=True)
        best = max(best, float(vals.max()))
    return best


def format_report(checks) -> str:
    lines = []
    for ch in checks:
        lines.append(f"{'PASS' if ch.passed else 'FAIL'}  {ch.name}: {ch.detail}")
    n_fail = sum(not ch.passed for ch in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} invariants passed")
    return "\n".join(lines)


def main_verify(nx: int = 16, ny: int = 16, nz: int = 8, seed: int = 0) -> int:
    t0 = time.time()
    checks = run_verify(nx, ny, nz, seed)
    print(format_report(checks))
    print(f"elapsed {time.time() - t0:.1f} s")
    return 0 if all(c.passed for c in checks) else 1
