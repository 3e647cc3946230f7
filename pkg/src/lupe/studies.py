"""Comparative Monte-Carlo studies monitoring the well-posedness estimates.

Every study returns a plain dict of arrays/scalars that the CLI renders to
CSV and figures.  Expectations are plain Monte-Carlo means with bootstrap
confidence intervals; the studies report plateaus and orderings rather than
absolute constants.
"""

from __future__ import annotations

import numpy as np

from .closures import APPROX_FILTERED_K, FILTERED_K, ClosureSpec
from .config import RunConfig
from .diagnostics import RecorderSpec, make_recorder
from .grid import build_grid
from .noise import BAROCLINIC
from .operators import norm2
from .stepper import (
    CounterBrownian,
    Problem,
    ReplayBrownian,
    SchemeSpec,
    coarsen_increments,
    run,
    run_ensemble,
)


def _bootstrap_ci(samples: np.ndarray, n_boot: int = 400, seed: int = 0):
    rng = np.random.default_rng(seed)
    n = len(samples)
    means = rng.choice(samples, size=(n_boot, n), replace=True).mean(axis=1)
    return float(np.percentile(means, 2.5)), float(np.percentile(means, 97.5))


# ---------------------------------------------------------------------------
# energy estimate across Galerkin ranks
# ---------------------------------------------------------------------------

def default_ranks(grid):
    """Three resolutions ending at the configured one; first-to-last doubles."""
    def shrink(n, f):
        m = max(4, int(round(n * f)))
        return m + (m % 2)

    return [
        (shrink(grid.nx, 0.5), shrink(grid.ny, 0.5), max(2, grid.nz // 2)),
        (shrink(grid.nx, 0.75), shrink(grid.ny, 0.75), max(2, (3 * grid.nz) // 4)),
        (grid.nx, grid.ny, grid.nz),
    ]


def lemma1_study(cfg: RunConfig, members: int = 16, p: int = 2, ranks=None) -> dict:
    """Estimate E[sup_t ||U||_H^p] and E[int ||U||_H^{p-2} ||U||_V^2 dt]
    across Galerkin ranks and report whether they plateau."""
    if p < 2 or p % 2:
        raise ValueError("p must be an even integer >= 2")
    if members < 16:
        raise ValueError("need at least 16 members")
    ranks = ranks if ranks is not None else default_ranks(cfg.grid)

    out = {"ranks": ranks, "p": p, "members": members,
           "sup_mean": [], "sup_ci": [], "int_mean": [], "int_ci": [],
           "blowups": []}
    for nx, ny, nz in ranks:
        sub = cfg.with_grid(build_grid(cfg.grid.lx, cfg.grid.ly, cfg.grid.h,
                                       nx, ny, nz, cfg.grid.dealias_fraction))
        problem = sub.problem()
        state0 = sub.initial_state()
        rec = RecorderSpec(sub.coefs, gamma_r=sub.closure.gamma_r)
        trajs, blowups = run_ensemble(problem, state0, sub.seed, members, rec)
        sups, ints = [], []
        for traj in trajs:
            if traj is None or traj.blew_up:
                continue
            hh = np.array([r.normH2 for r in traj.diagnostics])
            vv = np.array([r.normV2 for r in traj.diagnostics])
            tt = np.array(traj.times)
            sups.append((hh ** (p / 2)).max())
            ints.append(np.trapezoid(hh ** ((p - 2) / 2) * vv, tt))
        sups = np.array(sups)
        ints = np.array(ints)
        out["sup_mean"].append(sups.mean())
        out["sup_ci"].append(_bootstrap_ci(sups))
        out["int_mean"].append(ints.mean())
        out["int_ci"].append(_bootstrap_ci(ints))
        out["blowups"].append(blowups)

    sup = np.array(out["sup_mean"])
    intg = np.array(out["int_mean"])
    out["sup_rel_change"] = float(abs(sup[-1] - sup[0]) / max(abs(sup[0]), 1e-300))
    out["int_rel_change"] = float(abs(intg[-1] - intg[0]) / max(abs(intg[0]), 1e-300))
    out["plateau"] = bool(out["sup_rel_change"] < 0.2 and out["int_rel_change"] < 0.2)
    out["any_blowup"] = any(len(b) for b in out["blowups"])
    return out


# ---------------------------------------------------------------------------
# vanishing-noise continuity
# ---------------------------------------------------------------------------

def continuity_study(cfg: RunConfig, noise_scales, members: int = 32) -> dict:
    """Pathwise distance to the deterministic run as the noise vanishes.

    For each scale Y the model runs with noise Y^{1/2} sigma on the member's
    Brownian path; the distance is sup_t ||U^Y - U^0||_V^2 plus the time
    integral of ||U^Y - U^0||_{D(A)}^2 over the sampled times.
    """
    scales = list(noise_scales)
    if any(s < 0 for s in scales):
        raise ValueError("noise scales must be >= 0")
    if sorted(scales, reverse=True) != scales:
        raise ValueError("noise scales must be given in decreasing order")
    if 0.0 not in scales:
        raise ValueError("the scale list must include 0")

    base_model = cfg.noise_model()
    state0 = cfg.initial_state()

    def run_member(scale: float, member: int):
        model = base_model.scaled(np.sqrt(scale))
        prob = Problem(model=model, closure=cfg.closure, scheme=cfg.scheme,
                       coefs=cfg.coefs)
        return run(prob, state0, cfg.seed, member=member, keep_states=True)

    ref = run_member(0.0, 0)
    times = np.array(ref.times)

    distances = {s: [] for s in scales}
    for s in scales:
        n_mem = 1 if s == 0.0 else members
        for mem in range(n_mem):
            traj = run_member(s, mem)
            dv = np.array([norm2("V", a - b, cfg.coefs)
                           for a, b in zip(traj.states, ref.states)])
            da = np.array([norm2("DA", a - b, cfg.coefs)
                           for a, b in zip(traj.states, ref.states)])
            distances[s].append(float(dv.max() + np.trapezoid(da, times)))

    medians = [float(np.median(distances[s])) for s in scales]
    positive = [m for s, m in zip(scales, medians) if s > 0]
    out = {
        "scales": scales,
        "medians": medians,
        "distances": {s: distances[s] for s in scales},
        "monotone": all(a > b for a, b in zip(positive, positive[1:])),
        "zero_exact": distances[0.0][0] == 0.0,
    }
    return out


# ---------------------------------------------------------------------------
# closure equivalence and quasi-barotropic gap scaling
# ---------------------------------------------------------------------------

def _pair_gap(cfg: RunConfig, mode_specs) -> float:
    """sup_t H-norm gap between the filtered and quasi-barotropic closures
    on one shared Brownian path."""
    from .noise import build_noise_model

    model = build_noise_model(cfg.grid, mode_specs, seed_stream=cfg.seed)
    state0 = cfg.initial_state()
    gaps = None
    trajs = []
    for kind in (FILTERED_K, APPROX_FILTERED_K):
        closure = ClosureSpec(kind=kind, ell=cfg.closure.ell)
        prob = Problem(model=model, closure=closure, scheme=cfg.scheme,
                       coefs=cfg.coefs)
        trajs.append(run(prob, state0, cfg.seed, member=0, keep_states=True))
    gaps = [np.sqrt(norm2("H", a - b))
            for a, b in zip(trajs[0].states, trajs[1].states)]
    return float(max(gaps))


def equivalence_study(cfg: RunConfig) -> dict:
    """Pathwise gap between the filtered problem and its quasi-barotropic
    approximation for purely barotropic noise (they coincide)."""
    if any(s.tag == BAROCLINIC for s in cfg.mode_specs):
        raise ValueError("the equivalence study requires purely barotropic noise")
    gap = _pair_gap(cfg, cfg.mode_specs)
    return {"max_gap": gap, "passed": gap < 1e-10}


def quasibarotropic_gap_sweep(cfg: RunConfig, amplitudes) -> dict:
    """Scale the baroclinic mode amplitudes over a sweep and fit the
    log-log slope of the closure gap (quadratic in the amplitude)."""
    amplitudes = sorted(float(a) for a in amplitudes)
    if not any(s.tag == BAROCLINIC for s in cfg.mode_specs):
        raise ValueError("the gap sweep needs at least one baroclinic mode")
    gaps = []
    for r in amplitudes:
        specs = []
        for s in cfg.mode_specs:
            if s.tag == BAROCLINIC:
                from dataclasses import replace

                specs.append(replace(s, amplitude=r * s.amplitude))
            else:
                specs.append(s)
        gaps.append(_pair_gap(cfg, specs))
    slope = float(np.polyfit(np.log(amplitudes), np.log(gaps), 1)[0])
    return {"amplitudes": amplitudes, "gaps": gaps, "slope": slope}


# ---------------------------------------------------------------------------
# per-term energy budget
# ---------------------------------------------------------------------------

def budget_study(cfg: RunConfig) -> dict:
    """Run with budget logging and summarize closure quality and channels."""
    from .diagnostics import energy_budget

    problem = cfg.problem()
    state0 = cfg.initial_state()
    rec = make_recorder(cfg.coefs, gamma_r=cfg.closure.gamma_r, dt=cfg.scheme.dt)
    traj = run(problem, state0, cfg.seed, member=0, record_fn=rec)
    budget = energy_budget(traj.diagnostics)
    whg = np.array([r.wHgamma for r in traj.diagnostics])
    return {
        "budget": budget,
        "records": traj.diagnostics,
        "max_resid": float(np.abs(budget["budget_resid"]).max()),
        "min_wHgamma": float(whg.min()),
        "alpha_channel": cfg.closure.alpha * whg,
    }


# ---------------------------------------------------------------------------
# strong convergence under time refinement
# ---------------------------------------------------------------------------

def convergence_study(cfg: RunConfig, levels: int = 3, ref_factor: int = 16,
                      members: int = 1) -> dict:
    """Strong error at t_end against refined runs on fixed Brownian paths.

    The coarsest step is the configured dt; each level halves it, and the
    reference runs at (finest dt) / ref_factor with the increments of every
    coarser level obtained by block summation, so all levels of one member
    share one path.  With members > 1 the root-mean-square error over the
    member paths estimates the strong error.
    """
    base_dt = cfg.scheme.dt
    n_base = cfg.scheme.n_steps
    fine_per_base = 2 ** (levels - 1) * ref_factor
    n_fine = n_base * fine_per_base
    dt_fine = base_dt / fine_per_base

    model = cfg.noise_model()
    state0 = cfg.initial_state()

    def endpoint(dt: float, incr: np.ndarray, member: int):
        scheme = SchemeSpec(dt=dt, t_end=cfg.scheme.t_end,
                            substeps_output=max(1, int(round(cfg.scheme.t_end / dt))))
        prob = Problem(model=model, closure=cfg.closure, scheme=scheme,
                       coefs=cfg.coefs)
        traj = run(prob, state0, cfg.seed, member=member,
                   brownian=ReplayBrownian(incr))
        return traj.states[-1]

    dts = [base_dt / 2**lev for lev in range(levels)]
    sq_errs = np.zeros(levels)
    for member in range(members):
        source = CounterBrownian(cfg.seed, member, dt_fine, model.n_modes)
        fine = np.array([source.increments(i) for i in range(n_fine)])
        fine = fine.reshape(n_fine, max(model.n_modes, 1))[:, : model.n_modes]
        ref = endpoint(dt_fine, fine, member)
        for lev, dt in enumerate(dts):
            incr = coarsen_increments(fine, int(round(dt / dt_fine)))
            uu = endpoint(dt, incr, member)
            sq_errs[lev] += norm2("H", uu - ref)
    errs = np.sqrt(sq_errs / members)
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return {"dts": dts, "errors": errs.tolist(), "order": slope}
