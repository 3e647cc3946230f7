"""Scalar fields on the grid and the prognostic state vector.

A :class:`ScalarField3D` stores complex spectral coefficients with shape
(nx, ny//2 + 1, nz) plus a vertical parity tag.  Physical representations
on the quadrature grid are cached; fields are treated as immutable after
construction.

All nonlinear work happens through :func:`mult`, which multiplies physical
values on the quadrature grid, projects back onto the kept modes and
applies the horizontal dealias mask.
"""

from __future__ import annotations

import numpy as np

from .grid import COS, SIN, Grid


class ScalarField3D:
    """One scalar with dual physical/spectral representation."""

    __slots__ = ("grid", "parity", "coeffs", "_phys", "_samples")

    def __init__(self, grid: Grid, parity: str, coeffs: np.ndarray):
        if parity not in (COS, SIN):
            raise ValueError(f"unknown parity {parity!r}")
        if coeffs.shape != grid.spectral_shape():
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match grid "
                f"{grid.spectral_shape()}"
            )
        self.grid = grid
        self.parity = parity
        self.coeffs = coeffs
        self._phys = None
        self._samples = None

    # -- constructors ----------------------------------------------------
    @classmethod
    def zeros(cls, grid: Grid, parity: str = COS) -> "ScalarField3D":
        return cls(grid, parity, np.zeros(grid.spectral_shape(), dtype=complex))

    def copy(self) -> "ScalarField3D":
        return ScalarField3D(self.grid, self.parity, self.coeffs.copy())

    # -- arithmetic (spectral, parity-checked) ----------------------------
    def _check(self, other: "ScalarField3D") -> None:
        if self.parity != other.parity:
            raise ValueError("parity mismatch in field arithmetic")
        if self.grid is not other.grid and not self.grid.compatible(other.grid):
            raise ValueError("grid mismatch in field arithmetic")

    def __add__(self, other: "ScalarField3D") -> "ScalarField3D":
        self._check(other)
        return ScalarField3D(self.grid, self.parity, self.coeffs + other.coeffs)

    def __sub__(self, other: "ScalarField3D") -> "ScalarField3D":
        self._check(other)
        return ScalarField3D(self.grid, self.parity, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "ScalarField3D":
        return ScalarField3D(self.grid, self.parity, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField3D":
        return ScalarField3D(self.grid, self.parity, -self.coeffs)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def forward_transform(grid: Grid, samples: np.ndarray, parity: str = COS) -> ScalarField3D:
    """Physical samples on the (nx, ny, nz) sample grid -> spectral field.

    The samples are cached on the field, so a field built from file data
    writes back byte-identically.
    """
    if samples.shape != (grid.nx, grid.ny, grid.nz):
        raise ValueError(
            f"sample shape {samples.shape} does not match grid "
            f"({grid.nx}, {grid.ny}, {grid.nz})"
        )
    spec_h = np.fft.rfft2(samples, axes=(0, 1)) / (grid.nx * grid.ny)
    ana = grid._tables["ana_cos_s" if parity == COS else "ana_sin_s"]
    coeffs = spec_h @ ana.T
    out = ScalarField3D(grid, parity, coeffs)
    out._samples = np.array(samples, dtype=np.float64)
    return out


def inverse_transform(f: ScalarField3D) -> np.ndarray:
    """Spectral field -> physical samples on the (nx, ny, nz) sample grid."""
    if f._samples is not None:
        return f._samples
    g = f.grid
    syn = g._tables["syn_cos_s" if f.parity == COS else "syn_sin_s"]
    spec_h = f.coeffs @ syn.T
    return np.fft.irfft2(spec_h * (g.nx * g.ny), s=(g.nx, g.ny), axes=(0, 1))


def to_phys(f: ScalarField3D) -> np.ndarray:
    """Physical values on the quadrature grid (cached)."""
    if f._phys is None:
        g = f.grid
        syn = g._tables["syn_cos_q" if f.parity == COS else "syn_sin_q"]
        spec_h = f.coeffs @ syn.T
        f._phys = np.fft.irfft2(spec_h * (g.nx * g.ny), s=(g.nx, g.ny), axes=(0, 1))
    return f._phys


def from_phys(grid: Grid, values: np.ndarray, parity: str, dealias: bool = True) -> ScalarField3D:
    """Project quadrature-grid values onto the kept modes of one parity."""
    spec_h = np.fft.rfft2(values, axes=(0, 1)) / (grid.nx * grid.ny)
    ana = grid._tables["ana_cos_q" if parity == COS else "ana_sin_q"]
    coeffs = spec_h @ ana.T
    if dealias:
        coeffs *= grid.dealias_mask
    return ScalarField3D(grid, parity, coeffs)


def product_parity(pa: str, pb: str) -> str:
    return COS if pa == pb else SIN


def mult(a: ScalarField3D, b: ScalarField3D) -> ScalarField3D:
    """Dealiased pointwise product; output parity follows the parity algebra."""
    return from_phys(a.grid, to_phys(a) * to_phys(b), product_parity(a.parity, b.parity))


def mult_phys(grid: Grid, values: np.ndarray, parity: str) -> ScalarField3D:
    """Shorthand for projecting precomputed product values."""
    return from_phys(grid, values, parity)


# ---------------------------------------------------------------------------
# derivatives and vertical calculus
# ---------------------------------------------------------------------------

def dx(f: ScalarField3D) -> ScalarField3D:
    return ScalarField3D(f.grid, f.parity, f.coeffs * (1j * f.grid._tables["dkx"]))


def dy(f: ScalarField3D) -> ScalarField3D:
    return ScalarField3D(f.grid, f.parity, f.coeffs * (1j * f.grid._tables["dky"]))


def dz(f: ScalarField3D) -> ScalarField3D:
    """Vertical derivative; flips parity (cos -> sin carries a minus sign)."""
    kz = f.grid.kz
    if f.parity == COS:
        return ScalarField3D(f.grid, SIN, f.coeffs * (-kz))
    return ScalarField3D(f.grid, COS, f.coeffs * kz)


def derivative(f: ScalarField3D, axis: str) -> ScalarField3D:
    if axis == "x":
        return dx(f)
    if axis == "y":
        return dy(f)
    if axis == "z":
        return dz(f)
    raise ValueError(f"unknown axis {axis!r}")


def vertical_integral_values(f: ScalarField3D) -> np.ndarray:
    """Exact values of int_z^0 f dz' on the quadrature grid.

    Exact for every retained mode, including the z-linear profile produced
    by the m = 0 cosine mode.
    """
    g = f.grid
    vals = g._tables["cumint_cos_vals" if f.parity == COS else "cumint_sin_vals"]
    spec_h = f.coeffs @ vals.T
    return np.fft.irfft2(spec_h * (g.nx * g.ny), s=(g.nx, g.ny), axes=(0, 1))


def vertical_integral(f: ScalarField3D, out_parity: str) -> ScalarField3D:
    """int_z^0 f dz' as the exact L2 projection onto a parity basis.

    sine -> cosine is exact in-basis.  Cosine input is exact for m >= 1 and
    lands on the closed-form projection of the -z profile for the depth-mean
    mode (exercised by pressure integrands and rigid-lid-violating inputs).
    """
    g = f.grid
    if f.parity == SIN and out_parity == COS:
        return ScalarField3D(g, COS, f.coeffs @ g._tables["cumint_sin_coefs"].T)
    if f.parity == COS and out_parity == COS:
        return ScalarField3D(g, COS, f.coeffs @ g._tables["cumint_cos_to_cos"].T)
    if f.parity == COS and out_parity == SIN:
        return ScalarField3D(g, SIN, f.coeffs @ g._tables["cumint_cos_to_sin"].T)
    return from_phys(g, vertical_integral_values(f), out_parity, dealias=False)


def vertical_average(f: ScalarField3D) -> ScalarField3D:
    """Barotropic projector: depth mean replicated in z (cosine fields)."""
    if f.parity != COS:
        raise ValueError("vertical_average expects cosine parity")
    coeffs = np.zeros_like(f.coeffs)
    coeffs[:, :, 0] = f.coeffs[:, :, 0]
    return ScalarField3D(f.grid, COS, coeffs)


def baroclinic_part(f: ScalarField3D) -> ScalarField3D:
    if f.parity != COS:
        raise ValueError("baroclinic_part expects cosine parity")
    coeffs = f.coeffs.copy()
    coeffs[:, :, 0] = 0.0
    return ScalarField3D(f.grid, COS, coeffs)


def surface_values(f: ScalarField3D) -> np.ndarray:
    """Physical values at z = 0 (Robin boundary term support)."""
    g = f.grid
    if f.parity == COS:
        spec = f.coeffs.sum(axis=2)
    else:
        spec = np.zeros((g.nx, g.nyh), dtype=complex)
    return np.fft.irfft2(spec * (g.nx * g.ny), s=(g.nx, g.ny), axes=(0, 1))


# ---------------------------------------------------------------------------
# inner products
# ---------------------------------------------------------------------------

def l2_inner(f: ScalarField3D, g: ScalarField3D) -> float:
    """L2 inner product over the domain, evaluated as a spectral sum."""
    if f.parity != g.parity:
        raise ValueError("parity mismatch in l2_inner")
    gr = f.grid
    wz = gr._tables["wz_cos" if f.parity == COS else "wz_sin"]
    s = np.sum(gr._tables["wy"] * wz * (f.coeffs * np.conj(g.coeffs)).real)
    return gr.volume * s


def l2_norm2(f: ScalarField3D) -> float:
    return l2_inner(f, f)


def grad_norm2(f: ScalarField3D) -> float:
    """|grad f|^2 integrated over the domain (spectral sum)."""
    gr = f.grid
    wz = gr._tables["wz_cos" if f.parity == COS else "wz_sin"]
    lam = gr.kh2 + (gr.kz.reshape(1, 1, -1)) ** 2
    s = np.sum(gr._tables["wy"] * wz * lam * np.abs(f.coeffs) ** 2)
    return gr.volume * s


def quadrature_integral(grid: Grid, values: np.ndarray) -> float:
    """Integral of quadrature-grid values with the uniform weights."""
    w = grid.volume / (grid.nx * grid.ny * grid.nzq)
    return float(values.sum() * w)


# ---------------------------------------------------------------------------
# prognostic state
# ---------------------------------------------------------------------------

class StateU:
    """Prognostic state (vx, vy, T, S), all cosine parity."""

    __slots__ = ("vx", "vy", "T", "S")

    components = ("vx", "vy", "T", "S")

    def __init__(self, vx: ScalarField3D, vy: ScalarField3D, T: ScalarField3D, S: ScalarField3D):
        self.vx = vx
        self.vy = vy
        self.T = T
        self.S = S

    @property
    def grid(self) -> Grid:
        return self.vx.grid

    @classmethod
    def zeros(cls, grid: Grid) -> "StateU":
        return cls(*(ScalarField3D.zeros(grid) for _ in range(4)))

    def fields(self):
        return (self.vx, self.vy, self.T, self.S)

    def copy(self) -> "StateU":
        return StateU(*(f.copy() for f in self.fields()))

    def __add__(self, other: "StateU") -> "StateU":
        return StateU(*(a + b for a, b in zip(self.fields(), other.fields())))

    def __sub__(self, other: "StateU") -> "StateU":
        return StateU(*(a - b for a, b in zip(self.fields(), other.fields())))

    def __mul__(self, s: float) -> "StateU":
        return StateU(*(f * s for f in self.fields()))

    __rmul__ = __mul__

    def dealias(self) -> "StateU":
        out = []
        for f in self.fields():
            out.append(ScalarField3D(f.grid, f.parity, f.coeffs * f.grid.dealias_mask))
        return StateU(*out)

    def has_nan(self) -> bool:
        return any(not np.isfinite(f.coeffs).all() for f in self.fields())


def leray_project_velocity(vx: ScalarField3D, vy: ScalarField3D):
    """2D Leray projection of the barotropic mode; baroclinic part untouched.

    Removes the horizontal-gradient part of the depth-averaged velocity so
    that div_H of the barotropic mode vanishes; the k = 0 mode is left alone.
    """
    g = vx.grid
    kx = g.kx.reshape(-1, 1)
    ky = g.ky.reshape(1, -1)
    k2 = kx**2 + ky**2
    inv = np.zeros_like(k2)
    np.divide(1.0, k2, out=inv, where=k2 > 0)
    bx = vx.coeffs[:, :, 0]
    by = vy.coeffs[:, :, 0]
    div = kx * bx + ky * by  # (i k . v) / i
    cx = vx.coeffs.copy()
    cy = vy.coeffs.copy()
    cx[:, :, 0] = bx - kx * div * inv
    cy[:, :, 0] = by - ky * div * inv
    return ScalarField3D(g, COS, cx), ScalarField3D(g, COS, cy)


def leray_project(U: StateU) -> StateU:
    vx, vy = leray_project_velocity(U.vx, U.vy)
    return StateU(vx, vy, U.T, U.S)


def rigid_lid_divergence(U: StateU) -> float:
    """L2 norm of div_H of the depth-averaged velocity."""
    g = U.grid
    kx = g.kx.reshape(-1, 1)
    ky = g.ky.reshape(1, -1)
    div = 1j * (kx * U.vx.coeffs[:, :, 0] + ky * U.vy.coeffs[:, :, 0])
    wy = g._tables["wy"][:, :, 0]
    return float(np.sqrt(g.volume * np.sum(wy * np.abs(div) ** 2)))
