"""Spatial operators of the abstract evolution problems.

Covers the anisotropic diffusion A, advection B, Coriolis rotation,
vertical-velocity reconstruction, barotropic/baroclinic and Leray-type
projectors, the low-pass filter and its filtered variance action a^K,
hyperviscosity, the noise drift/diffusion bundles F_sigma / G_sigma (and
their quasi-barotropic variants), and the Stratonovitch-correction
operators used by the energy-balanced closure.

Stratonovitch-correction chains are evaluated as exact values on the
quadrature grid (vertical antiderivatives are exact per mode, including
the z-linear profiles sourced by depth-mean content); a single Galerkin
projection happens where a result re-enters the spectral state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import COS, SIN, Grid
from .fields import (
    ScalarField3D,
    StateU,
    baroclinic_part,
    dx,
    dy,
    dz,
    from_phys,
    l2_inner,
    leray_project,
    mult_phys,
    surface_values,
    to_phys,
    vertical_average,
    vertical_integral,
    vertical_integral_values,
)
from .noise import BAROCLINIC, BAROTROPIC, NoiseModel


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coefs:
    """Viscosities, rotation, and equation-of-state constants."""

    mu_v: float = 1e-2
    nu_v: float = 1e-2
    mu_T: float = 1e-2
    nu_T: float = 1e-2
    mu_S: float = 1e-2
    nu_S: float = 1e-2
    f: float = 0.0
    g: float = 9.81
    rho0: float = 1000.0
    betaT: float = 2e-4
    betaS: float = 7e-4
    Tr: float = 0.0
    Sr: float = 0.0
    alphaT: float = 0.0

    def __post_init__(self) -> None:
        for name in ("mu_v", "nu_v", "mu_T", "nu_T", "mu_S", "nu_S"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.alphaT < 0:
            raise ValueError("alphaT must be >= 0")

    def visc(self, comp: str) -> tuple:
        if comp in ("vx", "vy"):
            return self.mu_v, self.nu_v
        if comp == "T":
            return self.mu_T, self.nu_T
        return self.mu_S, self.nu_S


# ---------------------------------------------------------------------------
# inner products on states
# ---------------------------------------------------------------------------

def _pair_spec(f: ScalarField3D, g: ScalarField3D, lam: np.ndarray) -> float:
    gr = f.grid
    wz = gr._tables["wz_cos" if f.parity == COS else "wz_sin"]
    return gr.volume * float(np.sum(gr._tables["wy"] * wz * lam * (f.coeffs * np.conj(g.coeffs)).real))


def inner_product(kind: str, U: StateU, Usharp: StateU, c: Coefs | None = None) -> float:
    """H / V / D(A) pairings of two states.

    V adds the Robin surface term (alphaT / nu_T) (T, T#)_{z=0} when
    alphaT > 0.  D(A) pairs the A-images and therefore needs coefficients;
    unit viscosities are used when none are given.
    """
    if U.grid is not Usharp.grid and not U.grid.compatible(Usharp.grid):
        raise ValueError("grid mismatch in inner_product")
    g = U.grid
    if kind == "H":
        return sum(l2_inner(a, b) for a, b in zip(U.fields(), Usharp.fields()))
    lam_grad = g.kh2 + g.kz.reshape(1, 1, -1) ** 2
    if kind == "V":
        total = sum(_pair_spec(a, b, lam_grad) for a, b in zip(U.fields(), Usharp.fields()))
        if c is not None and c.alphaT > 0:
            sv = surface_values(U.T) * surface_values(Usharp.T)
            area_w = (g.lx * g.ly) / (g.nx * g.ny)
            total += (c.alphaT / c.nu_T) * float(sv.sum() * area_w)
        return total
    if kind == "DA":
        cc = c if c is not None else Coefs(mu_v=1, nu_v=1, mu_T=1, nu_T=1, mu_S=1, nu_S=1)
        total = 0.0
        for name, a, b in zip(StateU.components, U.fields(), Usharp.fields()):
            mu, nu = cc.visc(name)
            lam = mu * g.kh2 + nu * g.kz.reshape(1, 1, -1) ** 2
            total += _pair_spec(a, b, lam**2)
        return total
    raise ValueError(f"unknown inner product kind {kind!r}")


def norm2(kind: str, U: StateU, c: Coefs | None = None) -> float:
    return inner_product(kind, U, U, c)


# ---------------------------------------------------------------------------
# basic operators
# ---------------------------------------------------------------------------

def vertical_velocity(vx: ScalarField3D, vy: ScalarField3D) -> ScalarField3D:
    """w(v) = int_z^0 div_H v dz' (sine parity).

    Exact when the rigid-lid constraint holds; depth-mean divergence maps
    to the projection of the literal -z profile otherwise.
    """
    return vertical_integral(dx(vx) + dy(vy), SIN)


def barotropic(f: ScalarField3D) -> ScalarField3D:
    return vertical_average(f)


def baroclinic(f: ScalarField3D) -> ScalarField3D:
    return baroclinic_part(f)


def coriolis(vx: ScalarField3D, vy: ScalarField3D, f: float):
    """Horizontal rotation f k x v: (a, b) -> f (-b, a)."""
    return (-f) * vy, f * vx


def diffusion_A(U: StateU, c: Coefs) -> StateU:
    """Anisotropic diffusion, exact spectral multiplier per component."""
    g = U.grid
    kz2 = g.kz.reshape(1, 1, -1) ** 2
    out = []
    for name, fld in zip(StateU.components, U.fields()):
        mu, nu = c.visc(name)
        out.append(ScalarField3D(g, fld.parity, fld.coeffs * (mu * g.kh2 + nu * kz2)))
    return StateU(*out)


def implicit_diffusion_solve(U: StateU, c: Coefs, dt: float) -> StateU:
    """(I + dt A)^{-1} U, exact in spectral space."""
    g = U.grid
    kz2 = g.kz.reshape(1, 1, -1) ** 2
    out = []
    for name, fld in zip(StateU.components, U.fields()):
        mu, nu = c.visc(name)
        out.append(ScalarField3D(g, fld.parity, fld.coeffs / (1.0 + dt * (mu * g.kh2 + nu * kz2))))
    return StateU(*out)


def advection_B(vstar_x: ScalarField3D, vstar_y: ScalarField3D, Q: StateU,
                phys: dict | None = None) -> StateU:
    """B(v*, Q) = (v* . grad_H) Q + w(v*) dz Q, dealiased and Leray-projected.

    `phys` may carry precomputed quadrature-grid values under keys
    "vx*", "vy*", "w*" and ("dx", comp) etc. to avoid re-transforming.
    """
    g = Q.grid
    phys = phys if phys is not None else {}
    vxp = phys.get("vx*")
    if vxp is None:
        vxp = to_phys(vstar_x)
    vyp = phys.get("vy*")
    if vyp is None:
        vyp = to_phys(vstar_y)
    wp = phys.get("w*")
    if wp is None:
        wp = to_phys(vertical_velocity(vstar_x, vstar_y))
    out = []
    for name, fld in zip(StateU.components, Q.fields()):
        gx = phys.get(("dx", name))
        if gx is None:
            gx = to_phys(dx(fld))
        gy = phys.get(("dy", name))
        if gy is None:
            gy = to_phys(dy(fld))
        gz = phys.get(("dz", name))
        if gz is None:
            gz = to_phys(dz(fld))
        out.append(mult_phys(g, vxp * gx + vyp * gy + wp * gz, COS))
    return leray_project(StateU(*out))


# ---------------------------------------------------------------------------
# filter kernel and filtered variance action
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterKernel:
    """Isotropic Gaussian low-pass multiplier m_K(k, m) in (0, 1]."""

    ell: float
    symbol: np.ndarray

    @property
    def is_identity(self) -> bool:
        return self.ell == 0.0


def gaussian_filter(grid: Grid, ell: float) -> FilterKernel:
    if ell < 0:
        raise ValueError("filter length must be >= 0")
    lam = grid.kh2 + grid.kz.reshape(1, 1, -1) ** 2
    symbol = np.exp(-0.5 * lam * ell * ell)
    return FilterKernel(ell=ell, symbol=symbol)


def filter_apply(K: FilterKernel, f: ScalarField3D) -> ScalarField3D:
    if K.is_identity:
        return f
    return ScalarField3D(f.grid, f.parity, f.coeffs * K.symbol)


def _filter_sq_phys(K: FilterKernel, f: ScalarField3D) -> np.ndarray:
    """Values of C_K^* C_K f = m_K^2 f (the kernel is self-adjoint)."""
    if K.is_identity:
        return to_phys(f)
    return to_phys(ScalarField3D(f.grid, f.parity, f.coeffs * K.symbol**2))


def aK_apply(model: NoiseModel, K: FilterKernel, gvec: tuple) -> tuple:
    """a^K g = sum_k phi_k C_K^* C_K (phi_k . g) for a 3-vector field g.

    Reduces to the pointwise matrix product a g when ell = 0.
    """
    grid = model.grid
    gx, gy, gz = gvec
    par = {"x": gx.parity, "y": gy.parity, "z": gz.parity}
    sp = _dot_parity(par)
    shape = (grid.nx, grid.ny, grid.nzq)
    acc = {"x": np.zeros(shape), "y": np.zeros(shape), "z": np.zeros(shape)}
    gxp, gyp, gzp = to_phys(gx), to_phys(gy), to_phys(gz)
    for mode in model.modes:
        pxp, pyp, pzp = to_phys(mode.phi_x), to_phys(mode.phi_y), to_phys(mode.phi_z)
        s = from_phys(grid, pxp * gxp + pyp * gyp + pzp * gzp, sp)
        sf = _filter_sq_phys(K, s)
        acc["x"] += pxp * sf
        acc["y"] += pyp * sf
        acc["z"] += pzp * sf
    return (
        from_phys(grid, acc["x"], par["x"]),
        from_phys(grid, acc["y"], par["y"]),
        from_phys(grid, acc["z"], par["z"]),
    )


def _dot_parity(par: dict) -> str:
    # phi carries (cos, cos, sin); the dot with (px, py, pz) is consistent
    # only if px == py and pz is the opposite parity
    if par["x"] != par["y"] or par["z"] == par["x"]:
        raise ValueError("inconsistent parities for a 3-vector contraction")
    return SIN if par["x"] == SIN else COS


def hyperlaplacian(f: ScalarField3D, gamma_r: float) -> ScalarField3D:
    """(-Laplace)^{gamma_r} as the spectral multiplier (|k_H|^2 + (m pi/h)^2)^gamma."""
    if gamma_r < 1:
        raise ValueError("gamma_r must be >= 1")
    g = f.grid
    lam = g.kh2 + g.kz.reshape(1, 1, -1) ** 2
    return ScalarField3D(g, f.parity, f.coeffs * lam**gamma_r)


# ---------------------------------------------------------------------------
# stochastic-diffusion contractions
# ---------------------------------------------------------------------------

def grad_phys(f: ScalarField3D) -> tuple:
    return to_phys(dx(f)), to_phys(dy(f)), to_phys(dz(f))


def div_a_grad(a: dict, q: ScalarField3D, grads: tuple | None = None) -> ScalarField3D:
    """div(a grad q) for the pointwise symmetric tensor a (dict of fields)."""
    g = q.grid
    qx, qy, qz = grads if grads is not None else grad_phys(q)
    axx, axy, axz = to_phys(a["xx"]), to_phys(a["xy"]), to_phys(a["xz"])
    ayy, ayz, azz = to_phys(a["yy"]), to_phys(a["yz"]), to_phys(a["zz"])
    fx = from_phys(g, axx * qx + axy * qy + axz * qz, q.parity)
    fy = from_phys(g, axy * qx + ayy * qy + ayz * qz, q.parity)
    fz = from_phys(g, axz * qx + ayz * qy + azz * qz, SIN if q.parity == COS else COS)
    return dx(fx) + dy(fy) + dz(fz)


def div_abar_grad(abar: dict, q: ScalarField3D) -> ScalarField3D:
    """div(abar grad q) for a z-independent 2x2 tensor acting on a barotropic field."""
    g = q.grid
    qx, qy = to_phys(dx(q)), to_phys(dy(q))
    axx, axy, ayy = to_phys(abar["xx"]), to_phys(abar["xy"]), to_phys(abar["yy"])
    fx = from_phys(g, axx * qx + axy * qy, q.parity)
    fy = from_phys(g, axy * qx + ayy * qy, q.parity)
    return dx(fx) + dy(fy)


# ---------------------------------------------------------------------------
# precomputed model-dependent pieces
# ---------------------------------------------------------------------------

class ModelOps:
    """Static per-(model, coefficients) operator data shared across steps."""

    def __init__(self, model: NoiseModel, c: Coefs):
        self.model = model
        self.c = c
        g = model.grid
        self.grid = g
        self.phi_phys = [
            (to_phys(m.phi_x), to_phys(m.phi_y), to_phys(m.phi_z)) for m in model.modes
        ]
        self.bt_mask = np.array([m.tag == BAROTROPIC for m in model.modes], dtype=bool)

        self.vs_x = model.us_x
        self.vs_y = model.us_y
        self.ws = vertical_velocity(model.us_x, model.us_y)
        self.vs_phys = (to_phys(self.vs_x), to_phys(self.vs_y))
        self.grad_vs = {
            "vx": grad_phys(self.vs_x),
            "vy": grad_phys(self.vs_y),
        }
        self.has_drift = any(
            np.abs(f.coeffs).max() > 0 for f in (self.vs_x, self.vs_y)
        )

        # additive noise responses (A + Gamma) phi^H and A phi^z per mode
        kz2 = g.kz.reshape(1, 1, -1) ** 2
        lam_v = c.mu_v * g.kh2 + c.nu_v * kz2
        self.AG_phi = []
        self.A_phiz = []
        for m in model.modes:
            ax = ScalarField3D(g, COS, m.phi_x.coeffs * lam_v)
            ay = ScalarField3D(g, COS, m.phi_y.coeffs * lam_v)
            gx, gy = coriolis(m.phi_x, m.phi_y, c.f)
            self.AG_phi.append((ax + gx, ay + gy))
            self.A_phiz.append(ScalarField3D(g, SIN, m.phi_z.coeffs * lam_v))

        # tag-split variance tensors for the quasi-barotropic operators
        self.a_bt = self._tensor_by_tag(BAROTROPIC)
        a_bc = self._tensor_by_tag(BAROCLINIC)
        self.abar_bc = {
            "xx": vertical_average(a_bc["xx"]),
            "xy": vertical_average(a_bc["xy"]),
            "yy": vertical_average(a_bc["yy"]),
        }
        self._eb_static = None

    def _tensor_by_tag(self, tag: str) -> dict:
        g = self.grid
        shape = (g.nx, g.ny, g.nzq)
        vals = {k: np.zeros(shape) for k in ("xx", "xy", "xz", "yy", "yz", "zz")}
        for mode, (px, py, pz) in zip(self.model.modes, self.phi_phys):
            if mode.tag != tag:
                continue
            vals["xx"] += px * px
            vals["xy"] += px * py
            vals["xz"] += px * pz
            vals["yy"] += py * py
            vals["yz"] += py * pz
            vals["zz"] += pz * pz
        parity = {"xx": COS, "xy": COS, "xz": SIN, "yy": COS, "yz": SIN, "zz": COS}
        return {k: from_phys(g, vals[k], parity[k]) for k in vals}

    def split_noise_values(self, dbeta: np.ndarray):
        """(sigma_BT dW, sigma_BC dW) value dicts for one increment."""
        g = self.grid
        shape = (g.nx, g.ny, g.nzq)
        bt = {k: np.zeros(shape) for k in ("x", "y", "z")}
        bc = {k: np.zeros(shape) for k in ("x", "y", "z")}
        for is_bt, b, (px, py, pz) in zip(self.bt_mask, dbeta, self.phi_phys):
            tgt = bt if is_bt else bc
            tgt["x"] += b * px
            tgt["y"] += b * py
            tgt["z"] += b * pz
        return bt, bc

    def eb_static(self):
        """Static energy-balanced pieces: C_sigma values and sum (phi.grad) lap phi^z."""
        if self._eb_static is None:
            cs = strato_c_sigma(self.model, self.c)
            gl = _phi_grad_lap_phiz(self.model)
            self._eb_static = (cs, gl)
        return self._eb_static


# ---------------------------------------------------------------------------
# noise drift and diffusion bundles
# ---------------------------------------------------------------------------

def _state_grads_phys(U: StateU) -> dict:
    phys = {}
    for name, fld in zip(StateU.components, U.fields()):
        phys[("dx", name)] = to_phys(dx(fld))
        phys[("dy", name)] = to_phys(dy(fld))
        phys[("dz", name)] = to_phys(dz(fld))
    return phys


def drift_F(ops: ModelOps, Ustar: StateU, hatted: bool = False,
            grads: dict | None = None) -> StateU:
    """F_sigma(U*) (or its quasi-barotropic variant with hatted=True).

    P[ B(U*, U_s) - 1/2 div(a grad U_s) + A U_s + Gamma U_s
       - 1/2 div(a grad U*) ],
    with the velocity stochastic diffusion split into a_BT acting on the
    full velocity and depth-averaged a_BC acting on its barotropic part
    in the hatted variant (same split applied to the U_s term).
    """
    model, c, g = ops.model, ops.c, ops.grid
    grads = grads if grads is not None else _state_grads_phys(Ustar)
    out = {name: ScalarField3D.zeros(g, COS) for name in StateU.components}

    if ops.has_drift:
        # B(U*, U_s): advection of the drift by the state velocity
        vxp = to_phys(Ustar.vx)
        vyp = to_phys(Ustar.vy)
        wp = to_phys(vertical_velocity(Ustar.vx, Ustar.vy))
        for name in ("vx", "vy"):
            gx, gy, gz = ops.grad_vs[name]
            out[name] = out[name] + mult_phys(g, vxp * gx + vyp * gy + wp * gz, COS)
        # A U_s + Gamma U_s
        kz2 = g.kz.reshape(1, 1, -1) ** 2
        lam_v = c.mu_v * g.kh2 + c.nu_v * kz2
        gx_c, gy_c = coriolis(ops.vs_x, ops.vs_y, c.f)
        out["vx"] = out["vx"] + ScalarField3D(g, COS, ops.vs_x.coeffs * lam_v) + gx_c
        out["vy"] = out["vy"] + ScalarField3D(g, COS, ops.vs_y.coeffs * lam_v) + gy_c
        # - 1/2 div(a grad U_s) with the tag split in the hatted variant
        for name, fld in (("vx", ops.vs_x), ("vy", ops.vs_y)):
            if hatted:
                term = div_a_grad(ops.a_bt, fld) + div_abar_grad(ops.abar_bc, vertical_average(fld))
            else:
                term = div_a_grad(model.a, fld)
            out[name] = out[name] - 0.5 * term

    # - 1/2 div(a grad U*)
    for name, fld in zip(StateU.components, Ustar.fields()):
        gr = (grads[("dx", name)], grads[("dy", name)], grads[("dz", name)])
        if hatted and name in ("vx", "vy"):
            term = div_a_grad(ops.a_bt, fld, gr) + div_abar_grad(ops.abar_bc, vertical_average(fld))
        else:
            term = div_a_grad(model.a, fld, gr)
        out[name] = out[name] - 0.5 * term

    return leray_project(StateU(out["vx"], out["vy"], out["T"], out["S"]))


def diffusion_G(ops: ModelOps, Ustar: StateU, dbeta: np.ndarray,
                hatted: bool = False, grads: dict | None = None,
                sigma_dw: dict | None = None) -> StateU:
    """G_sigma(U*) dW: multiplicative transport plus additive responses.

    P[ -(sigma dW . grad)(U* + U_s) - A(sigma^H dW) - Gamma(sigma^H dW) ];
    in the hatted variant the baroclinic noise transports only the
    barotropic velocity.
    """
    model, g = ops.model, ops.grid
    if len(dbeta) != len(model.modes):
        raise ValueError("increment does not match the noise model")
    grads = grads if grads is not None else _state_grads_phys(Ustar)
    if sigma_dw is None:
        from .noise import assemble_noise_field

        sigma_dw = assemble_noise_field(model, dbeta)

    out = {}
    if not hatted:
        for name in StateU.components:
            vals = (sigma_dw["x"] * grads[("dx", name)]
                    + sigma_dw["y"] * grads[("dy", name)]
                    + sigma_dw["z"] * grads[("dz", name)])
            out[name] = -1.0 * mult_phys(g, vals, COS)
    else:
        bt, bc = ops.split_noise_values(dbeta)
        for name in ("T", "S"):
            vals = (sigma_dw["x"] * grads[("dx", name)]
                    + sigma_dw["y"] * grads[("dy", name)]
                    + sigma_dw["z"] * grads[("dz", name)])
            out[name] = -1.0 * mult_phys(g, vals, COS)
        for name, fld in (("vx", Ustar.vx), ("vy", Ustar.vy)):
            vbar = vertical_average(fld)
            bx, by = to_phys(dx(vbar)), to_phys(dy(vbar))
            vals = (bt["x"] * grads[("dx", name)]
                    + bt["y"] * grads[("dy", name)]
                    + bt["z"] * grads[("dz", name)]
                    + bc["x"] * bx + bc["y"] * by)
            out[name] = -1.0 * mult_phys(g, vals, COS)

    # drift transport (sigma dW . grad) U_s
    if ops.has_drift:
        if not hatted:
            for name in ("vx", "vy"):
                gx, gy, gz = ops.grad_vs[name]
                vals = sigma_dw["x"] * gx + sigma_dw["y"] * gy + sigma_dw["z"] * gz
                out[name] = out[name] - mult_phys(g, vals, COS)
        else:
            bt, bc = ops.split_noise_values(dbeta)
            for name, fld in (("vx", ops.vs_x), ("vy", ops.vs_y)):
                gx, gy, gz = ops.grad_vs[name]
                vbar = vertical_average(fld)
                bx, by = to_phys(dx(vbar)), to_phys(dy(vbar))
                vals = (bt["x"] * gx + bt["y"] * gy + bt["z"] * gz
                        + bc["x"] * bx + bc["y"] * by)
                out[name] = out[name] - mult_phys(g, vals, COS)

    # additive responses -(A + Gamma)(sigma^H dW)
    for b, (agx, agy) in zip(dbeta, ops.AG_phi):
        out["vx"] = out["vx"] - b * agx
        out["vy"] = out["vy"] - b * agy

    return leray_project(StateU(out["vx"], out["vy"], out["T"], out["S"]))


# ---------------------------------------------------------------------------
# Stratonovitch-correction operators (energy-balanced closure)
# ---------------------------------------------------------------------------

def _dot_grad_values(phi_phys: tuple, fx: np.ndarray, fy: np.ndarray, fz: np.ndarray) -> np.ndarray:
    px, py, pz = phi_phys
    return px * fx + py * fy + pz * fz


def strato_check_a(model: NoiseModel, W: ScalarField3D) -> dict:
    """Values of a_check[grad3 W], a 2x3 matrix field:
    (i, j) entry = sum_k (grad_H int_z^0 (phi_k . grad3 W) dz')_i phi_k^j."""
    g = model.grid
    shape = (g.nx, g.ny, g.nzq)
    Wx, Wy, Wz = grad_phys(W)
    out = {(i, j): np.zeros(shape) for i in range(2) for j in range(3)}
    for mode in model.modes:
        pp = (to_phys(mode.phi_x), to_phys(mode.phi_y), to_phys(mode.phi_z))
        q = from_phys(g, _dot_grad_values(pp, Wx, Wy, Wz), SIN)
        s = vertical_integral(q, COS)  # exact: sine -> cosine
        for i, gi in enumerate((to_phys(dx(s)), to_phys(dy(s)))):
            for j in range(3):
                out[(i, j)] += gi * pp[j]
    return out


def strato_div_check_a(model: NoiseModel, W: ScalarField3D):
    """Values of div3 . a_check[grad3 W] (2-vector): sum_k (phi_k . grad3) g_k
    with g_k = grad_H int_z^0 (phi_k . grad3 W) dz'."""
    g = model.grid
    shape = (g.nx, g.ny, g.nzq)
    Wx, Wy, Wz = grad_phys(W)
    out_x = np.zeros(shape)
    out_y = np.zeros(shape)
    for mode in model.modes:
        pp = (to_phys(mode.phi_x), to_phys(mode.phi_y), to_phys(mode.phi_z))
        q = from_phys(g, _dot_grad_values(pp, Wx, Wy, Wz), SIN)
        s = vertical_integral(q, COS)  # exact: sine -> cosine
        for comp, out in ((dx(s), out_x), (dy(s), out_y)):
            cx, cy, cz = grad_phys(comp)
            out += _dot_grad_values(pp, cx, cy, cz)
    return out_x, out_y


def _hat_a_pieces(model: NoiseModel, Vx: ScalarField3D, Vy: ScalarField3D):
    """Per-mode inner chains of a_hat[grad3 V]: returns (s_vals, ds_vals)."""
    g = model.grid
    Vxx, Vxy, Vxz = grad_phys(Vx)
    Vyx, Vyy, Vyz = grad_phys(Vy)
    pieces = []
    for mode in model.modes:
        pp = (to_phys(mode.phi_x), to_phys(mode.phi_y), to_phys(mode.phi_z))
        tx = from_phys(g, _dot_grad_values(pp, Vxx, Vxy, Vxz), COS)
        ty = from_phys(g, _dot_grad_values(pp, Vyx, Vyy, Vyz), COS)
        integrand = dx(tx) + dy(ty)  # cosine, may carry depth-mean content
        s_vals = vertical_integral_values(integrand)
        sx_vals = vertical_integral_values(dx(integrand))
        sy_vals = vertical_integral_values(dy(integrand))
        sz_vals = -to_phys(integrand)
        pieces.append((pp, s_vals, sx_vals, sy_vals, sz_vals))
    return pieces


def strato_hat_a(model: NoiseModel, Vx: ScalarField3D, Vy: ScalarField3D):
    """Values of a_hat[grad3 V] (3-vector)."""
    g = model.grid
    shape = (g.nx, g.ny, g.nzq)
    out = [np.zeros(shape) for _ in range(3)]
    for pp, s_vals, *_ in _hat_a_pieces(model, Vx, Vy):
        for i in range(3):
            out[i] += pp[i] * s_vals
    return tuple(out)


def strato_div_hat_a(model: NoiseModel, Vx: ScalarField3D, Vy: ScalarField3D) -> np.ndarray:
    """Values of div3 . a_hat[grad3 V] = sum_k (phi_k . grad3) s_k."""
    g = model.grid
    out = np.zeros((g.nx, g.ny, g.nzq))
    for pp, _, sx, sy, sz in _hat_a_pieces(model, Vx, Vy):
        out += pp[0] * sx + pp[1] * sy + pp[2] * sz
    return out


def _hathat_pieces(model: NoiseModel, W: ScalarField3D):
    g = model.grid
    Wx, Wy, Wz = grad_phys(W)
    pieces = []
    for mode in model.modes:
        pp = (to_phys(mode.phi_x), to_phys(mode.phi_y), to_phys(mode.phi_z))
        q = from_phys(g, _dot_grad_values(pp, Wx, Wy, Wz), SIN)
        inner = vertical_integral(q, COS)  # exact
        lap = ScalarField3D(g, COS, inner.coeffs * (-g.kh2))
        d_vals = vertical_integral_values(lap)
        dx_vals = vertical_integral_values(dx(lap))
        dy_vals = vertical_integral_values(dy(lap))
        dz_vals = -to_phys(lap)
        pieces.append((pp, d_vals, dx_vals, dy_vals, dz_vals))
    return pieces


def strato_hathat_a(model: NoiseModel, W: ScalarField3D):
    """Values of a_hathat[grad3 W] = sum_k phi_k Lap_H int int (phi_k . grad3 W)."""
    g = model.grid
    shape = (g.nx, g.ny, g.nzq)
    out = [np.zeros(shape) for _ in range(3)]
    for pp, d_vals, *_ in _hathat_pieces(model, W):
        for i in range(3):
            out[i] += pp[i] * d_vals
    return tuple(out)


def strato_div_hathat_a(model: NoiseModel, W: ScalarField3D) -> np.ndarray:
    g = model.grid
    out = np.zeros((g.nx, g.ny, g.nzq))
    for pp, _, dxv, dyv, dzv in _hathat_pieces(model, W):
        out += pp[0] * dxv + pp[1] * dyv + pp[2] * dzv
    return out


def strato_c_sigma(model: NoiseModel, c: Coefs):
    """Values of C_sigma (2-vector), a state-independent noise functional."""
    g = model.grid
    shape = (g.nx, g.ny, g.nzq)
    out_x = np.zeros(shape)
    out_y = np.zeros(shape)
    kz2 = g.kz.reshape(1, 1, -1) ** 2
    lam_v = c.mu_v * g.kh2 + c.nu_v * kz2
    for mode in model.modes:
        pp = (to_phys(mode.phi_x), to_phys(mode.phi_y), to_phys(mode.phi_z))
        gx_c, gy_c = coriolis(mode.phi_x, mode.phi_y, c.f)
        rx = gx_c + ScalarField3D(g, COS, mode.phi_x.coeffs * lam_v)
        ry = gy_c + ScalarField3D(g, COS, mode.phi_y.coeffs * lam_v)
        # (phi_H . grad_H)(Gamma phi^H + A phi^H)
        out_x += pp[0] * to_phys(dx(rx)) + pp[1] * to_phys(dy(rx))
        out_y += pp[0] * to_phys(dx(ry)) + pp[1] * to_phys(dy(ry))
        # grad_H int_z^0 (phi . grad3)(w(Gamma phi^H) + A phi^z) dz'
        div_rot = dx(gx_c) + dy(gy_c)
        w_rot_vals = vertical_integral_values(div_rot)
        w_rot_dx = vertical_integral_values(dx(div_rot))
        w_rot_dy = vertical_integral_values(dy(div_rot))
        w_rot_dz = -to_phys(div_rot)
        a_phiz = ScalarField3D(g, SIN, mode.phi_z.coeffs * lam_v)
        ax, ay, az = grad_phys(a_phiz)
        integr = (pp[0] * (w_rot_dx + ax) + pp[1] * (w_rot_dy + ay)
                  + pp[2] * (w_rot_dz + az))
        sfield = from_phys(g, integr, SIN)
        s = vertical_integral(sfield, COS)
        out_x += to_phys(dx(s))
        out_y += to_phys(dy(s))
    return out_x, out_y


def _phi_grad_lap_phiz(model: NoiseModel) -> np.ndarray:
    """Values of sum_k (phi_k . grad3) Lap3 phi_k^z."""
    g = model.grid
    out = np.zeros((g.nx, g.ny, g.nzq))
    kz2 = g.kz.reshape(1, 1, -1) ** 2
    for mode in model.modes:
        pp = (to_phys(mode.phi_x), to_phys(mode.phi_y), to_phys(mode.phi_z))
        lap = ScalarField3D(g, SIN, mode.phi_z.coeffs * (-(g.kh2 + kz2)))
        lx, ly, lz = grad_phys(lap)
        out += _dot_grad_values(pp, lx, ly, lz)
    return out


def strato_correction_ops(model: NoiseModel, vx: ScalarField3D, vy: ScalarField3D,
                          w: ScalarField3D, c: Coefs):
    """The four Stratonovitch-correction operators as quadrature-grid values.

    Returns (check_a, hat_a, hathat_a, c_sigma): the 2x3 matrix field
    a_check[grad3 w], the 3-vectors a_hat[grad3 v] and a_hathat[grad3 w],
    and the state-independent 2-vector C_sigma.
    """
    return (
        strato_check_a(model, w),
        strato_hat_a(model, vx, vy),
        strato_hathat_a(model, w),
        strato_c_sigma(model, c),
    )
