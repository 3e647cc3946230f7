"""Finite-mode divergence-free transport noise.

The unresolved velocity is sigma dW = sum_k phi_k dbeta^k over a finite
family of smooth divergence-free modes.  Each mode is either barotropic
(z-independent horizontal part, zero vertical part) or baroclinic
(depth-mean-free horizontal part, vertical part reconstructed from the
continuity equation).  The model precomputes the variance tensor
a = sum_k phi_k phi_k^T and the induced drift u_s = 1/2 div(a).

Brownian increments are drawn from a counter-based generator keyed by
(seed, member, step) so ensemble members are order-independent and runs
are restartable without replaying history.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import COS, SIN, Grid
from .fields import (
    ScalarField3D,
    dx,
    dy,
    dz,
    from_phys,
    l2_norm2,
    grad_norm2,
    to_phys,
    vertical_integral,
)

BAROTROPIC = "bt"
BAROCLINIC = "bc"

_TENSOR_KEYS = ("xx", "xy", "xz", "yy", "yz", "zz")


@dataclass(frozen=True)
class ModeSpec:
    """One requested noise mode.

    tag : "bt" or "bc"
    nx_w, ny_w : integer horizontal wavenumber indices
    m : vertical mode index (0 for barotropic, >= 1 for baroclinic)
    amplitude : peak amplitude of the horizontal velocity
    theta : phase shift; for the (0, 0) barotropic mode it sets the
        direction (cos theta, sin theta) of the constant translation mode
    direction : "psi" builds the horizontal part from a stream function
        (zero horizontal divergence, zero vertical velocity); "x"/"y" build
        a unidirectional wave whose vertical velocity closes the divergence
    """

    tag: str
    nx_w: int
    ny_w: int
    m: int
    amplitude: float
    theta: float = 0.0
    direction: str = "psi"


@dataclass(frozen=True)
class NoiseMode:
    """A realized mode: horizontal pair + vertical component + tag."""

    spec: ModeSpec
    phi_x: ScalarField3D
    phi_y: ScalarField3D
    phi_z: ScalarField3D

    @property
    def tag(self) -> str:
        return self.spec.tag


@dataclass(frozen=True)
class NoiseModel:
    """Finite mode family with derived variance tensor and Ito-Stokes drift."""

    grid: Grid
    modes: tuple
    a: dict = field(repr=False)
    us_x: ScalarField3D = field(repr=False)
    us_y: ScalarField3D = field(repr=False)
    us_z: ScalarField3D = field(repr=False)
    seed_stream: int = 0

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def scaled(self, factor: float) -> "NoiseModel":
        """Model with every amplitude multiplied by `factor` (a scales by factor^2).

        A zero factor returns the empty model (the noise-free limit).
        """
        if factor == 0.0:
            return build_noise_model(self.grid, [], seed_stream=self.seed_stream)
        specs = [replace(m.spec, amplitude=m.spec.amplitude * factor) for m in self.modes]
        return build_noise_model(self.grid, specs, seed_stream=self.seed_stream)


def _phase_field(grid: Grid, nx_w: int, ny_w: int, theta: float, kind: str) -> np.ndarray:
    """cos/sin(k.x + theta) sampled on the quadrature grid (horizontal only)."""
    X, Y, _ = grid.mesh_physical(quadrature=True)
    arg = (2.0 * np.pi * nx_w / grid.lx) * X + (2.0 * np.pi * ny_w / grid.ly) * Y + theta
    fn = np.cos if kind == "cos" else np.sin
    return fn(arg) * np.ones((grid.nx, grid.ny, grid.nzq))


def _build_mode(grid: Grid, spec: ModeSpec) -> NoiseMode:
    cx, cy = grid.dealias_cutoff
    if abs(spec.nx_w) > cx or abs(spec.ny_w) > cy:
        raise ValueError(
            f"mode wavevector ({spec.nx_w}, {spec.ny_w}) is outside the dealiased band"
        )
    if spec.amplitude == 0.0:
        raise ValueError("zero-amplitude noise mode")

    zq = grid.zq.reshape(1, 1, -1)
    amp = spec.amplitude

    if spec.tag == BAROTROPIC:
        if spec.m != 0:
            raise ValueError("barotropic modes must have vertical index m = 0")
        if spec.nx_w == 0 and spec.ny_w == 0:
            px = amp * np.cos(spec.theta) * np.ones((grid.nx, grid.ny, grid.nzq))
            py = amp * np.sin(spec.theta) * np.ones((grid.nx, grid.ny, grid.nzq))
        else:
            kx = 2.0 * np.pi * spec.nx_w / grid.lx
            ky = 2.0 * np.pi * spec.ny_w / grid.ly
            kn = np.hypot(kx, ky)
            s = _phase_field(grid, spec.nx_w, spec.ny_w, spec.theta, "sin")
            # grad-perp of psi = amp * cos(k.x + theta) / |k|
            px = amp * (ky / kn) * s
            py = -amp * (kx / kn) * s
        phi_x = from_phys(grid, px, COS, dealias=False)
        phi_y = from_phys(grid, py, COS, dealias=False)
        phi_z = ScalarField3D.zeros(grid, SIN)
        return NoiseMode(spec, phi_x, phi_y, phi_z)

    if spec.tag != BAROCLINIC:
        raise ValueError(f"unknown mode tag {spec.tag!r}")
    if not 1 <= spec.m <= grid.nz - 1:
        raise ValueError("baroclinic modes need 1 <= m <= nz - 1")

    prof = np.cos(spec.m * np.pi * zq / grid.h)
    if spec.direction == "psi":
        if spec.nx_w == 0 and spec.ny_w == 0:
            raise ValueError("stream-function baroclinic mode needs a nonzero wavevector")
        kx = 2.0 * np.pi * spec.nx_w / grid.lx
        ky = 2.0 * np.pi * spec.ny_w / grid.ly
        kn = np.hypot(kx, ky)
        s = _phase_field(grid, spec.nx_w, spec.ny_w, spec.theta, "sin")
        px = amp * (ky / kn) * s * prof
        py = -amp * (kx / kn) * s * prof
    elif spec.direction in ("x", "y"):
        c = _phase_field(grid, spec.nx_w, spec.ny_w, spec.theta, "cos") * prof
        px = amp * c if spec.direction == "x" else np.zeros_like(c)
        py = amp * c if spec.direction == "y" else np.zeros_like(c)
    else:
        raise ValueError(f"unknown mode direction {spec.direction!r}")

    phi_x = from_phys(grid, px, COS, dealias=False)
    phi_y = from_phys(grid, py, COS, dealias=False)
    div_h = dx(phi_x) + dy(phi_y)
    phi_z = vertical_integral(div_h, SIN)  # w(phi_H): exact, m >= 1 content only
    return NoiseMode(spec, phi_x, phi_y, phi_z)


def _merge_duplicates(specs) -> list:
    merged: dict = {}
    order = []
    for s in specs:
        key = (s.tag, s.nx_w, s.ny_w, s.m, s.theta, s.direction)
        if key in merged:
            merged[key] = replace(merged[key], amplitude=merged[key].amplitude + s.amplitude)
        else:
            merged[key] = s
            order.append(key)
    return [merged[k] for k in order]


def build_noise_model(grid: Grid, specs, seed_stream: int = 0) -> NoiseModel:
    """Realize a finite mode family and precompute a and u_s."""
    specs = _merge_duplicates(specs)
    modes = tuple(_build_mode(grid, s) for s in specs)

    a = _variance_tensor(grid, modes)
    us_x, us_y, us_z = _ito_stokes_drift(a)
    return NoiseModel(grid=grid, modes=modes, a=a, us_x=us_x, us_y=us_y, us_z=us_z,
                      seed_stream=seed_stream)


def _variance_tensor(grid: Grid, modes) -> dict:
    comps = {}
    vals = {k: np.zeros((grid.nx, grid.ny, grid.nzq)) for k in _TENSOR_KEYS}
    for mode in modes:
        px, py, pz = to_phys(mode.phi_x), to_phys(mode.phi_y), to_phys(mode.phi_z)
        vals["xx"] += px * px
        vals["xy"] += px * py
        vals["xz"] += px * pz
        vals["yy"] += py * py
        vals["yz"] += py * pz
        vals["zz"] += pz * pz
    parity = {"xx": COS, "xy": COS, "xz": SIN, "yy": COS, "yz": SIN, "zz": COS}
    for k in _TENSOR_KEYS:
        comps[k] = from_phys(grid, vals[k], parity[k])
    return comps


def _ito_stokes_drift(a: dict):
    us_x = 0.5 * (dx(a["xx"]) + dy(a["xy"]) + dz(a["xz"])).coeffs
    us_y = 0.5 * (dx(a["xy"]) + dy(a["yy"]) + dz(a["yz"])).coeffs
    us_z = 0.5 * (dx(a["xz"]) + dy(a["yz"]) + dz(a["zz"])).coeffs
    g = a["xx"].grid
    return (
        ScalarField3D(g, COS, us_x),
        ScalarField3D(g, COS, us_y),
        ScalarField3D(g, SIN, us_z),
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def member_rng(seed: int, member: int, step: int) -> np.random.Generator:
    """Counter-based stream: same (seed, member, step) -> same draws."""
    bits = np.random.Philox(key=np.uint64(seed & (2**64 - 1)),
                            counter=[0, 0, member, step])
    return np.random.Generator(bits)


def sample_increment(model: NoiseModel, dt: float, rng: np.random.Generator):
    """Draw dbeta ~ N(0, dt) per mode and assemble sigma dW as values.

    Returns (sigma_dw, dbeta): sigma_dw is a dict with quadrature-grid
    value arrays under keys "x", "y", "z", dbeta the per-mode increments.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dbeta = rng.standard_normal(len(model.modes)) * np.sqrt(dt)
    return assemble_noise_field(model, dbeta), dbeta


def assemble_noise_field(model: NoiseModel, dbeta: np.ndarray) -> dict:
    g = model.grid
    shape = (g.nx, g.ny, g.nzq)
    out = {"x": np.zeros(shape), "y": np.zeros(shape), "z": np.zeros(shape)}
    for mode, b in zip(model.modes, dbeta):
        out["x"] += b * to_phys(mode.phi_x)
        out["y"] += b * to_phys(mode.phi_y)
        out["z"] += b * to_phys(mode.phi_z)
    return out


# ---------------------------------------------------------------------------
# structure queries
# ---------------------------------------------------------------------------

def split_bt_bc(model: NoiseModel):
    """Split into independent barotropic and baroclinic sub-models."""
    for m in model.modes:
        if m.tag not in (BAROTROPIC, BAROCLINIC):
            raise ValueError("untagged mode")
    bt = [m.spec for m in model.modes if m.tag == BAROTROPIC]
    bc = [m.spec for m in model.modes if m.tag == BAROCLINIC]
    return (
        build_noise_model(model.grid, bt, seed_stream=model.seed_stream),
        build_noise_model(model.grid, bc, seed_stream=model.seed_stream),
    )


def variance_tensor_at_nodes(model: NoiseModel) -> np.ndarray:
    """a as a (nx, ny, nzq, 3, 3) array of pointwise matrices."""
    g = model.grid
    out = np.empty((g.nx, g.ny, g.nzq, 3, 3))
    idx = {("x", "x"): "xx", ("x", "y"): "xy", ("x", "z"): "xz",
           ("y", "y"): "yy", ("y", "z"): "yz", ("z", "z"): "zz"}
    axes = ("x", "y", "z")
    for i, ai in enumerate(axes):
        for j, aj in enumerate(axes):
            key = idx.get((ai, aj)) or idx[(aj, ai)]
            out[..., i, j] = to_phys(model.a[key])
    return out


def check_parabolicity(model: NoiseModel) -> float:
    """max over nodes and unit directions of sum_k (phi_k . xi)^2 / |xi|^2.

    The supremum over xi is the largest eigenvalue of a(x); callers compare
    the returned maximum against their chosen bound chi.
    """
    if not model.modes:
        return 0.0
    a = variance_tensor_at_nodes(model)
    eig = np.linalg.eigvalsh(a)
    return float(eig[..., -1].max())


def mode_divergence(mode: NoiseMode) -> float:
    """Relative divergence ||div phi||_L2 / ||phi||_H1 of one mode."""
    div = dx(mode.phi_x) + dy(mode.phi_y) + dz(mode.phi_z)
    num = np.sqrt(l2_norm2(div))
    den = np.sqrt(sum(l2_norm2(p) + grad_norm2(p)
                      for p in (mode.phi_x, mode.phi_y, mode.phi_z)))
    return float(num / den) if den > 0 else 0.0
