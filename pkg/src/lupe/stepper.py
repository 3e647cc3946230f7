"""Time integration: semi-implicit Euler--Maruyama and run orchestration.

One step of the Galerkin-truncated problem:

1. explicit Euler on every drift term except the stiff diffusion,
2. addition of the martingale increment evaluated at the left endpoint
   (Ito consistency),
3. exact spectral solve of (I + dt A)^{-1},
4. Leray projection restoring the rigid-lid constraint.

Brownian increments come from a counter-based generator keyed by
(seed, member, step); results are independent of member execution order
and restartable from any step without replaying history.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .fields import StateU, leray_project
from .closures import ClosureSpec, assemble_rhs
from .operators import Coefs, FilterKernel, ModelOps, implicit_diffusion_solve, inner_product
from .noise import NoiseModel, member_rng


class BlowUpError(RuntimeError):
    """Raised when the state leaves the finite range; carries partial data."""

    def __init__(self, step_index: int, t: float, trajectory=None):
        super().__init__(f"numerical blow-up at step {step_index}, t = {t:.6g}")
        self.step_index = step_index
        self.t = t
        self.trajectory = trajectory


@dataclass(frozen=True)
class SchemeSpec:
    """Time-stepping parameters (semi-implicit Euler--Maruyama only)."""

    dt: float
    t_end: float
    scheme: str = "euler_maruyama_semi_implicit"
    substeps_output: int = 1

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.scheme != "euler_maruyama_semi_implicit":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.substeps_output < 1:
            raise ValueError("substeps_output must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    """Output of a single run: times, thinned states, diagnostics, increments."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    brownian_log: list = field(default_factory=list)
    blew_up: bool = False


# ---------------------------------------------------------------------------
# Brownian increment sources
# ---------------------------------------------------------------------------

class CounterBrownian:
    """N(0, dt) increments per mode from the (seed, member, step) stream."""

    def __init__(self, seed: int, member: int, dt: float, n_modes: int):
        self.seed = seed
        self.member = member
        self.dt = dt
        self.n_modes = n_modes

    def increments(self, step_index: int) -> np.ndarray:
        rng = member_rng(self.seed, self.member, step_index)
        return rng.standard_normal(self.n_modes) * np.sqrt(self.dt)


class ReplayBrownian:
    """Increments taken from a precomputed (n_steps, n_modes) array."""

    def __init__(self, increments: np.ndarray):
        self.array = np.asarray(increments, dtype=float)

    def increments(self, step_index: int) -> np.ndarray:
        return self.array[step_index]


def coarsen_increments(fine: np.ndarray, factor: int) -> np.ndarray:
    """Sum fine increments over blocks: the same Brownian path at a larger dt."""
    n, k = fine.shape
    if n % factor:
        raise ValueError("refinement factor must divide the number of fine steps")
    return fine.reshape(n // factor, factor, k).sum(axis=1)


# ---------------------------------------------------------------------------
# single step
# ---------------------------------------------------------------------------

def step(state: StateU, ops: ModelOps, closure: ClosureSpec, K: FilterKernel,
         dt: float, dbeta: np.ndarray, step_index: int = 0, t: float = 0.0,
         want_budget: bool = False):
    """Advance one increment; returns (new_state, budget_dict | None)."""
    drift, mart, terms = assemble_rhs(closure, state, ops, K, dt, dbeta, implicit_A=True)
    Y = state + dt * drift + mart
    new_state = leray_project(implicit_diffusion_solve(Y, ops.c, dt))

    if new_state.has_nan():
        raise BlowUpError(step_index, t + dt)

    budget = None
    if want_budget:
        budget = _exact_budget(state, Y, new_state, drift, mart, terms, dt, ops.c)
    return new_state, budget


BUDGET_COLUMNS = (
    "budget_adv", "budget_cor", "budget_press", "budget_fsig", "budget_eb",
    "budget_diss", "budget_drift_quad", "budget_mart", "budget_qv",
    "budget_cross", "budget_resid",
)


def _exact_budget(U0: StateU, Y: StateU, U1: StateU, drift: StateU, mart: StateU,
                  terms: dict, dt: float, c: Coefs) -> dict:
    """Exact discrete decomposition of the H-energy increment.

    ||U1||^2 - ||U0||^2 =
        sum_i 2 dt (D_i, U0)      per-term drift work
      + dt^2 ||D||^2              explicit Euler quadratic term
      + 2 (M, U0) + ||M||^2       martingale fluctuation and realized QV
      + 2 dt (D, M)               drift/noise cross term
      + (||U1||^2 - ||Y||^2)      implicit dissipation + projection
    so the residual is rounding-level for every closure, deterministic or not.
    """
    b = {}
    for label in ("adv", "cor", "press", "fsig", "eb"):
        b[f"budget_{label}"] = 2.0 * dt * inner_product("H", terms[label], U0)
    b["budget_drift_quad"] = dt * dt * inner_product("H", drift, drift)
    b["budget_mart"] = 2.0 * inner_product("H", mart, U0)
    b["budget_qv"] = inner_product("H", mart, mart)
    b["budget_cross"] = 2.0 * dt * inner_product("H", drift, mart)
    nY = inner_product("H", Y, Y)
    n1 = inner_product("H", U1, U1)
    n0 = inner_product("H", U0, U0)
    b["budget_diss"] = n1 - nY
    total = sum(b.values())
    b["budget_resid"] = (n1 - n0) - total
    return b


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Problem:
    """Everything needed to march one member: model, closure, scheme, coefs."""

    model: NoiseModel
    closure: ClosureSpec
    scheme: SchemeSpec
    coefs: Coefs

    def model_ops(self) -> ModelOps:
        return ModelOps(self.model, self.coefs)


def run(problem: Problem, state0: StateU, seed: int, member: int = 0,
        record_fn=None, keep_states: bool = False, log_increments: bool = False,
        brownian=None, ops: ModelOps | None = None) -> Trajectory:
    """March a single member; deterministic given (seed, member).

    `record_fn(state, t, budget)` produces a diagnostics record at the
    configured output cadence (and at t = 0 with budget = None).  On blow-up
    the partial trajectory is attached to the raised error.
    """
    sch = problem.scheme
    ops = ops if ops is not None else problem.model_ops()
    K = problem.closure.kernel(state0.grid)
    source = brownian if brownian is not None else CounterBrownian(
        seed, member, sch.dt, problem.model.n_modes)

    state = leray_project(state0)
    traj = Trajectory()
    traj.times.append(0.0)
    if keep_states:
        traj.states.append(state)
    if record_fn is not None:
        traj.diagnostics.append(record_fn(state, 0.0, None))

    t = 0.0
    for n in range(sch.n_steps):
        dbeta = source.increments(n)
        if log_increments:
            traj.brownian_log.append(dbeta)
        want = record_fn is not None and (n + 1) % sch.substeps_output == 0
        try:
            state, budget = step(state, ops, problem.closure, K, sch.dt, dbeta,
                                 step_index=n, t=t, want_budget=want)
            t = (n + 1) * sch.dt
            if (n + 1) % sch.substeps_output == 0:
                traj.times.append(t)
                if keep_states:
                    traj.states.append(state)
                if record_fn is not None:
                    traj.diagnostics.append(record_fn(state, t, budget))
        except BlowUpError as err:
            traj.blew_up = True
            err.trajectory = traj
            raise
        except FloatingPointError as exc:
            # a non-finite monitored norm halts the run like a blow-up
            traj.blew_up = True
            err = BlowUpError(n, t)
            err.trajectory = traj
            raise err from exc
    if not keep_states:
        traj.states.append(state)
    return traj


def worker_count() -> int:
    """Worker cap: LUPE_THREADS if set, otherwise the hardware parallelism."""
    env = os.environ.get("LUPE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _member_task(args):
    problem, state0, seed, member, recorder_spec, keep_states = args
    record_fn = recorder_spec.build() if recorder_spec is not None else None
    try:
        return member, run(problem, state0, seed, member=member,
                           record_fn=record_fn, keep_states=keep_states), False
    except BlowUpError as err:
        return member, err.trajectory, True


def run_ensemble(problem: Problem, state0: StateU, seed: int, members: int,
                 record_fn, keep_states: bool = False):
    """Run `members` independent members; returns (trajectories, blowups).

    Member seeds derive from the master seed through the counter-based
    stream, so results do not depend on execution order or worker count.
    Members run on a process pool when LUPE_THREADS (or the hardware
    parallelism) exceeds one and the recorder is a picklable RecorderSpec.
    """
    if members < 1:
        raise ValueError("members must be >= 1")
    workers = min(worker_count(), members)
    recorder_spec = record_fn if hasattr(record_fn, "build") else None
    if workers > 1 and (record_fn is None or recorder_spec is not None):
        from concurrent.futures import ProcessPoolExecutor

        tasks = [(problem, state0, seed, m, recorder_spec, keep_states)
                 for m in range(members)]
        trajectories = {}
        blowups = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for member, traj, blew in pool.map(_member_task, tasks):
                trajectories[member] = traj
                if blew:
                    blowups.append(member)
        return [trajectories[m] for m in range(members)], sorted(blowups)

    if recorder_spec is not None:
        record_fn = recorder_spec.build()
    ops = problem.model_ops()
    trajectories = {}
    blowups = []
    for m in range(members):
        try:
            trajectories[m] = run(problem, state0, seed, member=m,
                                  record_fn=record_fn, keep_states=keep_states,
                                  ops=ops)
        except BlowUpError as err:
            blowups.append(m)
            trajectories[m] = err.trajectory
    return [trajectories[m] for m in range(members)], blowups


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------

def initial_state(grid, kind: str = "zero", component: str = "vx", nx_w: int = 1,
                  ny_w: int = 0, m: int = 1, amplitude: float = 1.0,
                  kmax: int = 2, mmax: int = 1, v_norm: float = 1.0,
                  seed: int = 0, coefs: Coefs | None = None) -> StateU:
    """Initial-condition library: zero, single mode, or random band-limited.

    Random states are filled up to (kmax, mmax), Leray-projected, tracer
    means removed, and rescaled to the prescribed V-norm.
    """
    from .grid import COS
    from .fields import ScalarField3D, from_phys

    if kind == "zero":
        return StateU.zeros(grid)

    if kind == "single_mode":
        X, Y, Z = grid.mesh_physical(quadrature=True)
        ones = np.ones((grid.nx, grid.ny, grid.nzq))
        kx = 2.0 * np.pi * nx_w / grid.lx
        ky = 2.0 * np.pi * ny_w / grid.ly
        vals = amplitude * np.cos(kx * X + ky * Y) * np.cos(m * np.pi * Z / grid.h) * ones
        fieldv = from_phys(grid, vals, COS)
        U = StateU.zeros(grid)
        setattr_map = {"vx": 0, "vy": 1, "t": 2, "s": 3}
        comps = list(U.fields())
        comps[setattr_map[component.lower()]] = fieldv
        U = StateU(*comps)
        U = leray_project(U)
        return _remove_tracer_means(U)

    if kind == "random":
        rng = np.random.default_rng(seed)
        cx, cy = grid.dealias_cutoff
        kmax_x = min(kmax, cx)
        kmax_y = min(kmax, cy)
        mmax = min(mmax, grid.nz - 1)
        comps = []
        for _ in range(4):
            coeffs = np.zeros(grid.spectral_shape(), dtype=complex)
            for ix in range(-kmax_x, kmax_x + 1):
                for iy in range(0, kmax_y + 1):
                    for mm in range(0, mmax + 1):
                        c = rng.standard_normal() + 1j * rng.standard_normal()
                        coeffs[ix, iy, mm] = c
            # restore reality: conjugate symmetry along the stored x axis at ky = 0
            for ix in range(1, kmax_x + 1):
                for mm in range(0, mmax + 1):
                    coeffs[-ix, 0, mm] = np.conj(coeffs[ix, 0, mm])
            coeffs[0, 0, :] = coeffs[0, 0, :].real
            coeffs *= grid.dealias_mask
            comps.append(ScalarField3D(grid, COS, coeffs))
        U = leray_project(StateU(*comps))
        U = _remove_tracer_means(U)
        nv = np.sqrt(inner_product("V", U, U, coefs))
        if nv > 0:
            U = U * (v_norm / nv)
        return U

    raise ValueError(f"unknown initial-condition kind {kind!r}")


def _remove_tracer_means(U: StateU) -> StateU:
    from .fields import ScalarField3D

    out = []
    for name, f in zip(StateU.components, U.fields()):
        if name in ("T", "S"):
            coeffs = f.coeffs.copy()
            coeffs[0, 0, 0] = 0.0
            out.append(ScalarField3D(f.grid, f.parity, coeffs))
        else:
            out.append(f)
    return StateU(*out)
