"""Per-step diagnostics: the norms the well-posedness estimates control.

Monitored quantities: the H/V/D(A) norms of the state, the barotropic H1
energy, the vertical-shear L2 norm, the baroclinic L4 norm (the three
globality monitors), the vertical-velocity norms including the
(hyper)viscous channel, the advective CFL number, and the exact discrete
energy-budget terms logged by the stepper.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .fields import (
    StateU,
    baroclinic_part,
    dz,
    grad_norm2,
    l2_norm2,
    to_phys,
    vertical_average,
)
from .operators import Coefs, inner_product, vertical_velocity
from .stepper import BUDGET_COLUMNS

CSV_COLUMNS = (
    "t", "normH2", "normV2", "normDA2", "barotropicV2", "dzL2",
    "baroclinicL4", "wL2", "wHgamma", "cfl",
) + BUDGET_COLUMNS


@dataclass
class DiagnosticsRecord:
    t: float
    normH2: float
    normV2: float
    normDA2: float
    barotropicV2: float
    dzL2: float
    baroclinicL4: float
    wL2: float
    wHgamma: float
    cfl: float
    budget: dict = field(default_factory=dict)

    def row(self) -> list:
        vals = [self.t, self.normH2, self.normV2, self.normDA2,
                self.barotropicV2, self.dzL2, self.baroclinicL4,
                self.wL2, self.wHgamma, self.cfl]
        vals.extend(self.budget.get(cname, 0.0) for cname in BUDGET_COLUMNS)
        return vals


def record(state: StateU, c: Coefs, gamma_r: float = 1.0, t: float = 0.0,
           budget: dict | None = None, dt: float = 0.0) -> DiagnosticsRecord:
    """Compute every monitored norm from the current state."""
    g = state.grid
    w = vertical_velocity(state.vx, state.vy)

    normH2 = inner_product("H", state, state)
    normV2 = inner_product("V", state, state, c)
    normDA2 = inner_product("DA", state, state, c)

    barotropicV2 = sum(grad_norm2(vertical_average(f)) for f in (state.vx, state.vy))
    dzL2 = sum(l2_norm2(dz(f)) for f in (state.vx, state.vy))

    bx = to_phys(baroclinic_part(state.vx))
    by = to_phys(baroclinic_part(state.vy))
    wq = g.volume / (g.nx * g.ny * g.nzq)
    baroclinicL4 = float(((bx * bx + by * by) ** 2).sum() * wq)

    wL2 = l2_norm2(w)
    lam = g.kh2 + g.kz.reshape(1, 1, -1) ** 2
    wz = g._tables["wz_sin"]
    wHgamma = g.volume * float(np.sum(g._tables["wy"] * wz * lam**gamma_r
                                      * np.abs(w.coeffs) ** 2))

    cfl = 0.0
    if dt > 0:
        dx_ = g.lx / g.nx
        dy_ = g.ly / g.ny
        dz_ = g.h / g.nzq
        cfl = dt * max(
            np.abs(to_phys(state.vx)).max() / dx_,
            np.abs(to_phys(state.vy)).max() / dy_,
            np.abs(to_phys(w)).max() / dz_,
        )

    rec = DiagnosticsRecord(
        t=t, normH2=normH2, normV2=normV2, normDA2=normDA2,
        barotropicV2=barotropicV2, dzL2=dzL2, baroclinicL4=baroclinicL4,
        wL2=wL2, wHgamma=wHgamma, cfl=cfl,
        budget=dict(budget) if budget else {},
    )
    if not np.isfinite(rec.row()).all():
        raise FloatingPointError("non-finite diagnostic value")
    return rec


def make_recorder(c: Coefs, gamma_r: float = 1.0, dt: float = 0.0):
    """Recorder callback for the run loop."""

    def _rec(state: StateU, t: float, budget: dict | None) -> DiagnosticsRecord:
        return record(state, c, gamma_r=gamma_r, t=t, budget=budget, dt=dt)

    return _rec


@dataclass(frozen=True)
class RecorderSpec:
    """Picklable recorder description for process-pool ensemble members."""

    coefs: Coefs
    gamma_r: float = 1.0
    dt: float = 0.0

    def build(self):
        return make_recorder(self.coefs, gamma_r=self.gamma_r, dt=self.dt)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def diagnostics_csv(records) -> str:
    """Render records to the fixed-column CSV schema."""
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in records:
        buf.write(",".join(repr(float(v)) for v in r.row()) + "\n")
    return buf.getvalue()


def ensemble_statistics(trajectory_records) -> dict:
    """Per-time mean/variance/max of every diagnostic column over members.

    `trajectory_records` is a list (per member) of record lists sampled at
    identical times.  Returns {"t": times, "mean": array, "var": array,
    "max": array} with arrays shaped (n_times, n_columns - 1).
    """
    if not trajectory_records:
        raise ValueError("no trajectories")
    n_t = min(len(recs) for recs in trajectory_records)
    data = np.array([[r.row() for r in recs[:n_t]] for recs in trajectory_records])
    times = data[0, :, 0]
    body = data[:, :, 1:]
    return {
        "t": times,
        "columns": CSV_COLUMNS[1:],
        "mean": body.mean(axis=0),
        "var": body.var(axis=0, ddof=1) if data.shape[0] > 1 else np.zeros_like(body[0]),
        "max": body.max(axis=0),
    }


def statistics_csv(stats: dict) -> str:
    buf = io.StringIO()
    cols = ["t"]
    for name in stats["columns"]:
        cols.extend([f"mean_{name}", f"var_{name}", f"max_{name}"])
    buf.write(",".join(cols) + "\n")
    for i, t in enumerate(stats["t"]):
        vals = [t]
        for j in range(len(stats["columns"])):
            vals.extend([stats["mean"][i, j], stats["var"][i, j], stats["max"][i, j]])
        buf.write(",".join(repr(float(v)) for v in vals) + "\n")
    return buf.getvalue()


def energy_budget(trajectory) -> dict:
    """Per-term energy budget time series from logged step budgets.

    Accepts a Trajectory or its diagnostics list; raises if the run was
    made without budget logging.
    """
    records = getattr(trajectory, "diagnostics", trajectory)
    rows = [r for r in records if r.budget]
    if not rows:
        raise ValueError("trajectory carries no budget logs")
    out = {"t": np.array([r.t for r in rows])}
    for cname in BUDGET_COLUMNS:
        out[cname] = np.array([r.budget[cname] for r in rows])
    out["dH2"] = np.array([sum(r.budget[cn] for cn in BUDGET_COLUMNS) for r in rows])
    return out
