"""Pressure closures and right-hand-side assembly.

Five closures are supported:

* ``strong``            -- strong hydrostatic balance: buoyancy pressure only.
* ``filtered_k``        -- low-pass filtered vertical transport noise.
* ``approx_filtered_k`` -- same pressure, quasi-barotropic noise operators.
* ``eddy_visc``         -- unfiltered noise pressure plus (hyper)viscosity
                           acting on the vertical velocity (alpha > 0,
                           gamma_r > 2).
* ``energy_balanced``   -- Stratonovitch-corrected pressure and momentum
                           terms plus (hyper)viscosity (alpha > 0,
                           gamma_r > 1).

Pressure gradients are returned in tendency form: the value added to
d_t v already carries the minus sign from -(1/rho0) P grad_H p, so the
buoyancy part reads -g P grad_H int_z^0 (betaT T + betaS S) dz'.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import COS, SIN
from .fields import (
    ScalarField3D,
    StateU,
    dx,
    dy,
    dz,
    from_phys,
    leray_project,
    leray_project_velocity,
    to_phys,
    vertical_integral,
)
from .operators import (
    Coefs,
    FilterKernel,
    ModelOps,
    aK_apply,
    advection_B,
    coriolis,
    diffusion_A,
    diffusion_G,
    div_a_grad,
    drift_F,
    filter_apply,
    gaussian_filter,
    hyperlaplacian,
    strato_div_check_a,
    strato_div_hat_a,
    strato_div_hathat_a,
    vertical_velocity,
    _state_grads_phys,
)

STRONG = "strong"
FILTERED_K = "filtered_k"
APPROX_FILTERED_K = "approx_filtered_k"
EDDY_VISC = "eddy_visc"
ENERGY_BALANCED = "energy_balanced"

CLOSURE_KINDS = (STRONG, FILTERED_K, APPROX_FILTERED_K, EDDY_VISC, ENERGY_BALANCED)


@dataclass(frozen=True)
class ClosureSpec:
    """Which pressure closure to run, with its parameters."""

    kind: str
    ell: float = 0.0
    alpha: float = 0.0
    gamma_r: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in CLOSURE_KINDS:
            raise ValueError(f"unknown closure kind {self.kind!r}")
        if self.ell < 0:
            raise ValueError("filter length ell must be >= 0")
        if self.kind == EDDY_VISC:
            if self.alpha <= 0:
                raise ValueError("eddy_visc requires alpha > 0")
            if self.gamma_r <= 2:
                raise ValueError("eddy_visc requires gamma_r > 2")
        if self.kind == ENERGY_BALANCED:
            if self.alpha <= 0:
                raise ValueError("energy_balanced requires alpha > 0")
            if self.gamma_r <= 1:
                raise ValueError("energy_balanced requires gamma_r > 1")

    @property
    def hatted(self) -> bool:
        return self.kind == APPROX_FILTERED_K

    @property
    def filtered(self) -> bool:
        return self.kind in (FILTERED_K, APPROX_FILTERED_K)

    def kernel(self, grid) -> FilterKernel:
        ell = self.ell if self.filtered else 0.0
        return gaussian_filter(grid, ell)


def _buoyancy_gradient(state: StateU, c: Coefs):
    """-g grad_H int_z^0 (betaT T + betaS S) dz' in tendency form."""
    g = state.grid
    b = ScalarField3D(g, COS, c.betaT * state.T.coeffs + c.betaS * state.S.coeffs)
    integ = vertical_integral(b, COS)
    return (-c.g) * dx(integ), (-c.g) * dy(integ)


def _total_w(state: StateU, ops: ModelOps) -> ScalarField3D:
    """w(v*) + w_s, the vertical velocity entering the noise pressure."""
    w = vertical_velocity(state.vx, state.vy)
    if ops.has_drift:
        w = w + ops.ws
    return w


def pressure_gradient_bv(closure: ClosureSpec, state: StateU, ops: ModelOps,
                         K: FilterKernel, shared: dict | None = None):
    """Bounded-variation pressure gradient (tendency form, Leray-projected).

    Always carries the buoyancy term; the relaxed closures add their noise
    corrections integrated from the vertical momentum balance.
    """
    c = ops.c
    g = state.grid
    shared = shared if shared is not None else {}
    px, py = _buoyancy_gradient(state, c)

    if closure.kind != STRONG and (ops.model.n_modes or closure.alpha > 0):
        W = shared.get("W")
        if W is None:
            W = _total_w(state, ops)
        gradW = shared.get("gradW")
        if gradW is None:
            gradW = (dx(W), dy(W), dz(W))
        q = ScalarField3D.zeros(g, SIN)

        if closure.kind in (FILTERED_K, APPROX_FILTERED_K):
            fx, fy, fz = aK_apply(ops.model, K, gradW)
            q = q + 0.5 * (dx(fx) + dy(fy) + dz(fz))
            if ops.has_drift:
                us_dot = (ops.vs_phys[0] * to_phys(gradW[0])
                          + ops.vs_phys[1] * to_phys(gradW[1])
                          + to_phys(ops.ws) * to_phys(gradW[2]))
                q = q + filter_apply(K, from_phys(g, us_dot, SIN))
        elif closure.kind == EDDY_VISC:
            grv = tuple(to_phys(gw) for gw in gradW)
            q = q + 0.5 * div_a_grad(ops.model.a, W, grv)
            if ops.has_drift:
                us_dot = (ops.vs_phys[0] * grv[0] + ops.vs_phys[1] * grv[1]
                          + to_phys(ops.ws) * grv[2])
                q = q + from_phys(g, us_dot, SIN)
            wstar = shared.get("wstar")
            if wstar is None:
                wstar = vertical_velocity(state.vx, state.vy)
            q = q - closure.alpha * hyperlaplacian(wstar, closure.gamma_r)
        elif closure.kind == ENERGY_BALANCED:
            q = q + _energy_balanced_bv_integrand(closure, state, ops, shared)

        integ = vertical_integral(q, COS)
        px = px + dx(integ)
        py = py + dy(integ)

    return leray_project_velocity(px, py)


def _energy_balanced_bv_integrand(closure: ClosureSpec, state: StateU, ops: ModelOps,
                                  shared: dict) -> ScalarField3D:
    """Integrand of the energy-balanced pressure correction (sine projection).

    u_s . grad W + 1/2 div a_hat[grad V] + 1/2 div a_hathat[grad W]
      - alpha (-Lap)^gamma w(v*)
      + 1/2 sum_k (phi_k . grad dz pi_k + (phi_k . grad) Lap phi_k^z)
    with V = v* + v_s and W = w(v*) + w_s.
    """
    g = state.grid
    model, c = ops.model, ops.c
    W = shared["W"]
    gradW = shared["gradW"]
    grv = tuple(to_phys(gw) for gw in gradW)
    vals = np.zeros((g.nx, g.ny, g.nzq))

    if ops.has_drift:
        vals += (ops.vs_phys[0] * grv[0] + ops.vs_phys[1] * grv[1]
                 + to_phys(ops.ws) * grv[2])

    if model.n_modes:
        Vx = state.vx + ops.vs_x if ops.has_drift else state.vx
        Vy = state.vy + ops.vs_y if ops.has_drift else state.vy
        vals += 0.5 * strato_div_hat_a(model, Vx, Vy)
        vals += 0.5 * strato_div_hathat_a(model, W)
        # martingale-pressure covariation: dz pi_k = -(phi_k . grad W) - A phi_k^z
        _, lap_static = ops.eb_static()
        pi_vals = np.zeros_like(vals)
        for (pp, a_phiz) in zip(ops.phi_phys, ops.A_phiz):
            t = from_phys(g, pp[0] * grv[0] + pp[1] * grv[1] + pp[2] * grv[2], SIN)
            dzpi = -1.0 * t - a_phiz
            tx, ty, tz = to_phys(dx(dzpi)), to_phys(dy(dzpi)), to_phys(dz(dzpi))
            pi_vals += pp[0] * tx + pp[1] * ty + pp[2] * tz
        vals += 0.5 * (pi_vals + lap_static)

    q = from_phys(g, vals, SIN)
    wstar = shared.get("wstar")
    if wstar is None:
        wstar = vertical_velocity(state.vx, state.vy)
    return q - closure.alpha * hyperlaplacian(wstar, closure.gamma_r)


def martingale_pressure_basis(closure: ClosureSpec, state: StateU, ops: ModelOps,
                              K: FilterKernel, shared: dict | None = None) -> list:
    """pi_k = grad_H int_z^0 [ K*(phi_k . grad3 (w(v*) + w_s)) + A phi_k^z ] dz'
    per mode, as (px, py) field pairs (not yet Leray-projected).

    The filter acts only in the filtered closures; the eddy-viscosity and
    energy-balanced closures use the unfiltered transport term, the strong
    closure has no martingale pressure at all.
    """
    if closure.kind == STRONG:
        return []
    g = state.grid
    shared = shared if shared is not None else {}
    W = shared.get("W")
    if W is None:
        W = _total_w(state, ops)
    gradW = shared.get("gradW")
    if gradW is None:
        gradW = (dx(W), dy(W), dz(W))
    grv = tuple(to_phys(gw) for gw in gradW)
    use_filter = closure.filtered and not K.is_identity

    basis = []
    for pp, a_phiz in zip(ops.phi_phys, ops.A_phiz):
        t = from_phys(g, pp[0] * grv[0] + pp[1] * grv[1] + pp[2] * grv[2], SIN)
        if use_filter:
            t = filter_apply(K, t)
        integ = vertical_integral(t + a_phiz, COS)
        basis.append((dx(integ), dy(integ)))
    return basis


def pressure_gradient_martingale(closure: ClosureSpec, state: StateU, ops: ModelOps,
                                 K: FilterKernel, dbeta: np.ndarray,
                                 shared: dict | None = None):
    """-(1/rho0) P grad_H dp^sigma for one increment: -sum_k P grad_H pi_k dbeta_k."""
    g = state.grid
    if len(dbeta) != ops.model.n_modes:
        raise ValueError("increment does not match the noise model")
    px = ScalarField3D.zeros(g, COS)
    py = ScalarField3D.zeros(g, COS)
    for (bx, by), b in zip(martingale_pressure_basis(closure, state, ops, K, shared), dbeta):
        px = px - b * bx
        py = py - b * by
    return leray_project_velocity(px, py)


def assemble_rhs(closure: ClosureSpec, state: StateU, ops: ModelOps, K: FilterKernel,
                 dt: float, dbeta: np.ndarray, implicit_A: bool = False):
    """Drift tendency and martingale increment of the abstract problem.

    drift = -[A U* + B(U*) + Gamma U* + (1/rho0) P grad_H p + F_sigma(U*)]
            (+ energy-balanced corrections); the A term is omitted when the
            caller treats diffusion implicitly.
    mart  = G_sigma(U*) dW - (1/rho0) P grad_H dp^sigma.

    Returns (drift, mart, terms) where `terms` maps budget labels to the
    individual signed tendency/increment contributions.
    """
    g = state.grid
    c = ops.c
    grads = _state_grads_phys(state)
    phys = dict(grads)
    phys["vx*"] = to_phys(state.vx)
    phys["vy*"] = to_phys(state.vy)
    wstar = vertical_velocity(state.vx, state.vy)
    phys["w*"] = to_phys(wstar)

    shared = {"wstar": wstar}
    shared["W"] = wstar + ops.ws if ops.has_drift else wstar
    shared["gradW"] = (dx(shared["W"]), dy(shared["W"]), dz(shared["W"]))

    zeros = ScalarField3D.zeros(g, COS)
    terms: dict = {}

    adv = advection_B(state.vx, state.vy, state, phys)
    terms["adv"] = -1.0 * adv

    cx, cy = coriolis(state.vx, state.vy, c.f)
    cx, cy = leray_project_velocity(cx, cy)
    terms["cor"] = StateU(-1.0 * cx, -1.0 * cy, zeros, zeros)

    px, py = pressure_gradient_bv(closure, state, ops, K, shared)
    terms["press"] = StateU(px, py, zeros, zeros)

    fs = drift_F(ops, state, hatted=closure.hatted, grads=grads)
    terms["fsig"] = -1.0 * fs

    if closure.kind == ENERGY_BALANCED and ops.model.n_modes:
        ca_x, ca_y = strato_div_check_a(ops.model, shared["W"])
        (cs_x, cs_y), _ = ops.eb_static()
        ex = from_phys(g, 0.5 * (ca_x + cs_x), COS)
        ey = from_phys(g, 0.5 * (ca_y + cs_y), COS)
        ex, ey = leray_project_velocity(ex, ey)
        terms["eb"] = StateU(ex, ey, zeros, zeros)
    else:
        terms["eb"] = StateU(zeros, zeros, zeros, zeros)

    drift = terms["adv"] + terms["cor"] + terms["press"] + terms["fsig"] + terms["eb"]
    if not implicit_A:
        terms["diss"] = -1.0 * diffusion_A(state, c)
        drift = drift + terms["diss"]

    if ops.model.n_modes:
        gsig = diffusion_G(ops, state, dbeta, hatted=closure.hatted, grads=grads)
        mpx, mpy = pressure_gradient_martingale(closure, state, ops, K, dbeta, shared)
        mpress = StateU(mpx, mpy, zeros, zeros)
        terms["gsig"] = gsig
        terms["mpress"] = mpress
        mart = gsig + mpress
    else:
        mart = StateU(zeros, zeros, zeros, zeros)
        terms["gsig"] = mart
        terms["mpress"] = mart

    return drift, mart, terms
