"""Command-line entry points: run, ensemble, verify, study.

Every report path writes delimited output (CSV) plus a rendered figure
into the output directory.  Exit codes: 0 success, 1 failed verification
or failed study check, 2 usage/config errors, 3 numerical blow-up (with
partial outputs persisted).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config
from .diagnostics import (
    RecorderSpec,
    diagnostics_csv,
    ensemble_statistics,
    make_recorder,
    statistics_csv,
)
from .plots import errorbar_figure, line_figure
from .snapshot import write_snapshot
from .stepper import BlowUpError, run, run_ensemble
from .studies import (
    budget_study,
    continuity_study,
    convergence_study,
    equivalence_study,
    lemma1_study,
    quasibarotropic_gap_sweep,
)
from .verify import main_verify


def _load_config(args) -> RunConfig:
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print("configuration errors:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        raise SystemExit(2)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(2)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "outdir", None):
        cfg.output_dir = args.outdir
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_diag(out: Path, name: str, records) -> Path:
    csv_path = out / f"{name}.csv"
    csv_path.write_text(diagnostics_csv(records))
    t = [r.t for r in records]
    line_figure(out / f"{name}.png", t,
                {"||U||_H^2": [r.normH2 for r in records],
                 "||U||_V^2": [r.normV2 for r in records]},
                xlabel="t", ylabel="energy", title=name)
    return csv_path


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    problem = cfg.problem()
    state0 = cfg.initial_state()
    rec = make_recorder(cfg.coefs, gamma_r=cfg.closure.gamma_r, dt=cfg.scheme.dt)

    progress = (lambda msg: print(msg, file=sys.stderr)) if not args.quiet else (lambda msg: None)
    progress(f"run: {cfg.closure.kind}, dt={cfg.scheme.dt}, t_end={cfg.scheme.t_end}, "
             f"seed={cfg.seed}")
    try:
        traj = run(problem, state0, cfg.seed, member=0, record_fn=rec,
                   keep_states=cfg.snapshots and cfg.snapshot_every > 0)
    except BlowUpError as err:
        if err.trajectory is not None:
            _write_diag(out, "diagnostics", err.trajectory.diagnostics)
        print(f"blow-up: {err}", file=sys.stderr)
        return 3
    path = _write_diag(out, "diagnostics", traj.diagnostics)
    progress(f"wrote {path}")
    if cfg.snapshots:
        if cfg.snapshot_every > 0 and traj.states:
            for i, (t, s) in enumerate(zip(traj.times, traj.states)):
                if i % max(1, cfg.snapshot_every) == 0 or i == len(traj.states) - 1:
                    write_snapshot(s, t, out / f"state_{i:06d}.lupe")
        else:
            write_snapshot(traj.states[-1], traj.times[-1], out / "state_final.lupe")
    return 0


def cmd_ensemble(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    problem = cfg.problem()
    state0 = cfg.initial_state()
    rec = RecorderSpec(cfg.coefs, gamma_r=cfg.closure.gamma_r, dt=cfg.scheme.dt)
    trajs, blowups = run_ensemble(problem, state0, cfg.seed, args.members, rec)
    ok = [t for t in trajs if t is not None and not t.blew_up]
    if blowups:
        print(f"warning: members {blowups} blew up; statistics flagged", file=sys.stderr)
    stats = ensemble_statistics([t.diagnostics for t in ok])
    (out / "ensemble.csv").write_text(statistics_csv(stats))
    cols = list(stats["columns"])
    i_h = cols.index("normH2")
    line_figure(out / "ensemble.png", stats["t"],
                {"mean ||U||_H^2": stats["mean"][:, i_h],
                 "max ||U||_H^2": stats["max"][:, i_h]},
                xlabel="t", ylabel="energy", title=f"ensemble ({len(ok)} members)")
    print(f"wrote {out / 'ensemble.csv'} ({len(ok)} members, {len(blowups)} blow-ups)")
    return 0 if not blowups else 3


def cmd_verify(args) -> int:
    return main_verify(args.nx, args.ny, args.nz, args.seed or 0)


def cmd_study(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)

    if args.kind == "lemma1":
        res = lemma1_study(cfg, members=args.members, p=args.p)
        rows = ["rank,sup_mean,sup_lo,sup_hi,int_mean,int_lo,int_hi,blowups"]
        for r, sm, sci, im, ici, bl in zip(res["ranks"], res["sup_mean"], res["sup_ci"],
                                           res["int_mean"], res["int_ci"], res["blowups"]):
            rows.append(f"{r[0]}x{r[1]}x{r[2]},{sm!r},{sci[0]!r},{sci[1]!r},"
                        f"{im!r},{ici[0]!r},{ici[1]!r},{len(bl)}")
        (out / "lemma1.csv").write_text("\n".join(rows) + "\n")
        labels = [f"{r[0]}x{r[1]}x{r[2]}" for r in res["ranks"]]
        errorbar_figure(out / "lemma1.png", range(len(labels)), res["sup_mean"],
                        [c[0] for c in res["sup_ci"]], [c[1] for c in res["sup_ci"]],
                        xlabel="rank index", ylabel="E[sup ||U||_H^p]",
                        title="energy estimate across Galerkin ranks")
        print(f"sup relative change {res['sup_rel_change']:.3f}, "
              f"integral relative change {res['int_rel_change']:.3f}, "
              f"plateau: {res['plateau']}, blow-ups: {res['any_blowup']}")
        return 0 if res["plateau"] and not res["any_blowup"] else 1

    if args.kind == "continuity":
        scales = [float(s) for s in args.scales.split(",")]
        res = continuity_study(cfg, scales, members=args.members)
        rows = ["scale,median_distance"]
        rows += [f"{s!r},{m!r}" for s, m in zip(res["scales"], res["medians"])]
        (out / "continuity.csv").write_text("\n".join(rows) + "\n")
        pos = [(s, m) for s, m in zip(res["scales"], res["medians"]) if s > 0]
        line_figure(out / "continuity.png", [p[0] for p in pos],
                    {"median distance": [p[1] for p in pos]},
                    xlabel="noise scale", ylabel="pathwise distance",
                    logx=True, logy=True, markers=True, title="vanishing-noise continuity")
        print(f"medians {res['medians']}, monotone: {res['monotone']}, "
              f"zero scale exact: {res['zero_exact']}")
        return 0 if res["monotone"] and res["zero_exact"] else 1

    if args.kind == "equivalence":
        if args.sweep:
            amps = [float(a) for a in args.sweep.split(",")]
            res = quasibarotropic_gap_sweep(cfg, amps)
            rows = ["amplitude,gap"]
            rows += [f"{a!r},{g!r}" for a, g in zip(res["amplitudes"], res["gaps"])]
            (out / "equivalence_sweep.csv").write_text("\n".join(rows) + "\n")
            line_figure(out / "equivalence_sweep.png", res["amplitudes"],
                        {"sup-H gap": res["gaps"]}, xlabel="baroclinic amplitude",
                        ylabel="gap", logx=True, logy=True, markers=True,
                        title=f"gap scaling, slope {res['slope']:.2f}")
            print(f"log-log slope {res['slope']:.3f}")
            return 0 if 1.7 <= res["slope"] <= 2.3 else 1
        try:
            res = equivalence_study(cfg)
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return 2
        print(f"max gap {res['max_gap']:.3e} "
              f"{'PASS' if res['passed'] else 'FAIL'} (threshold 1e-10)")
        return 0 if res["passed"] else 1

    if args.kind == "budget":
        res = budget_study(cfg)
        from .diagnostics import diagnostics_csv

        (out / "budget.csv").write_text(diagnostics_csv(res["records"]))
        b = res["budget"]
        line_figure(out / "budget.png", b["t"],
                    {"dissipation": b["budget_diss"], "pressure work": b["budget_press"],
                     "noise QV": b["budget_qv"], "residual": b["budget_resid"]},
                    xlabel="t", ylabel="per-step energy contribution", title="energy budget")
        print(f"max residual {res['max_resid']:.3e}, "
              f"min alpha channel {res['min_wHgamma']:.3e}")
        return 0

    if args.kind == "convergence":
        res = convergence_study(cfg)
        rows = ["dt,error"]
        rows += [f"{d!r},{e!r}" for d, e in zip(res["dts"], res["errors"])]
        (out / "convergence.csv").write_text("\n".join(rows) + "\n")
        line_figure(out / "convergence.png", res["dts"], {"strong error": res["errors"]},
                    xlabel="dt", ylabel="H-norm error", logx=True, logy=True,
                    markers=True, title=f"strong order {res['order']:.2f}")
        print(f"observed strong order {res['order']:.3f}")
        return 0 if res["order"] >= 0.45 else 1

    print(f"unknown study {args.kind!r}", file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lupe",
                                 description="stochastic primitive equations "
                                             "pseudo-spectral simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single trajectory + diagnostics CSV")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--outdir", default=None)
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_ens = sub.add_parser("ensemble", help="ensemble statistics CSV")
    p_ens.add_argument("--config", required=True)
    p_ens.add_argument("--members", type=int, required=True)
    p_ens.add_argument("--seed", type=int, default=None)
    p_ens.add_argument("--outdir", default=None)
    p_ens.set_defaults(func=cmd_ensemble)

    p_ver = sub.add_parser("verify", help="run the invariant suite")
    p_ver.add_argument("--nx", type=int, default=16)
    p_ver.add_argument("--ny", type=int, default=16)
    p_ver.add_argument("--nz", type=int, default=8)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(func=cmd_verify)

    p_st = sub.add_parser("study", help="diagnostics studies")
    p_st.add_argument("kind", choices=["lemma1", "continuity", "equivalence",
                                       "budget", "convergence"])
    p_st.add_argument("--config", required=True)
    p_st.add_argument("--seed", type=int, default=None)
    p_st.add_argument("--outdir", default=None)
    p_st.add_argument("--members", type=int, default=32)
    p_st.add_argument("--p", type=int, default=2)
    p_st.add_argument("--scales", default="1,0.01,0.0001,0")
    p_st.add_argument("--sweep", default=None,
                      help="comma-separated baroclinic amplitudes for the gap sweep")
    p_st.set_defaults(func=cmd_study)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BlowUpError as err:
        print(f"blow-up: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
