"""Discrete domain: periodic horizontal box times a rigid-lid vertical slab.

The domain is [0, Lx) x [0, Ly) x [-h, 0].  Horizontal directions use a
Fourier representation (numpy rfft2 layout, x on axis 0, y on axis 1).
The vertical direction uses cosine modes cos(m*pi*z/h) for quantities with
Neumann walls (velocity, tracers) and sine modes sin(m*pi*z/h) for
quantities vanishing at z = 0, -h (vertical velocity).

Two z-grids coexist: the *sample* grid with nz midpoint levels (user-facing,
snapshots, transform round trips) and a *quadrature* grid with 2*nz midpoint
levels on which all pointwise products and physical-space integrals are
evaluated.  The finer grid makes quadratic products exact Galerkin
projections and keeps triple-product pairings (advection anti-symmetry,
Parseval checks) exact to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COS = "cos"
SIN = "sin"


def _cos_table(z: np.ndarray, h: float, nmodes: int) -> np.ndarray:
    m = np.arange(nmodes)
    return np.cos(np.outer(z, m * np.pi / h))


def _sin_table(z: np.ndarray, h: float, nmodes: int) -> np.ndarray:
    m = np.arange(nmodes)
    tab = np.sin(np.outer(z, m * np.pi / h))
    tab[:, 0] = 0.0
    return tab


@dataclass(frozen=True)
class Grid:
    """Immutable grid description plus precomputed transform tables.

    Parameters
    ----------
    lx, ly : float
        Horizontal extents.
    h : float
        Depth; the vertical coordinate spans [-h, 0].
    nx, ny : int
        Horizontal mode counts (even, >= 4).
    nz : int
        Vertical mode count (>= 2).
    dealias_fraction : float
        Fraction of the Nyquist range kept in nonlinear products,
        in (0, 1]; 2/3 by default.
    """

    lx: float
    ly: float
    h: float
    nx: int
    ny: int
    nz: int
    dealias_fraction: float = 2.0 / 3.0

    # populated in __post_init__
    _tables: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.lx <= 0 or self.ly <= 0 or self.h <= 0:
            raise ValueError("domain extents must be positive")
        if self.nx < 4 or self.ny < 4 or self.nx % 2 or self.ny % 2:
            raise ValueError("nx, ny must be even and >= 4")
        if self.nz < 2:
            raise ValueError("nz must be >= 2")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must lie in (0, 1]")

        nx, ny, nz, h = self.nx, self.ny, self.nz, self.h
        nyh = ny // 2 + 1
        nzq = 2 * nz

        t: dict = {}
        t["x"] = np.arange(nx) * (self.lx / nx)
        t["y"] = np.arange(ny) * (self.ly / ny)
        # midpoint levels ordered from just below the lid down to the bottom
        t["z"] = -h * (np.arange(nz) + 0.5) / nz
        t["zq"] = -h * (np.arange(nzq) + 0.5) / nzq

        kx = 2.0 * np.pi * np.fft.fftfreq(nx, d=self.lx / nx)
        ky = 2.0 * np.pi * np.fft.rfftfreq(ny, d=self.ly / ny)
        t["kx"] = kx
        t["ky"] = ky
        # Nyquist modes are zeroed in derivatives (odd derivative undefined)
        dkx = kx.copy()
        dkx[nx // 2] = 0.0
        t["dkx"] = dkx.reshape(nx, 1, 1)
        t["dky"] = ky.reshape(1, nyh, 1)
        t["kh2"] = (kx.reshape(nx, 1, 1) ** 2 + ky.reshape(1, nyh, 1) ** 2)
        t["kz"] = np.arange(nz) * np.pi / h  # vertical mode rates m*pi/h

        cx = int(np.floor(self.dealias_fraction * (nx / 2)))
        cy = int(np.floor(self.dealias_fraction * (ny / 2)))
        nix = np.abs(np.fft.fftfreq(nx) * nx)
        niy = np.abs(np.fft.rfftfreq(ny) * ny)
        mask = (nix.reshape(nx, 1) <= cx) & (niy.reshape(1, nyh) <= cy)
        t["dealias_mask"] = mask.reshape(nx, nyh, 1)
        t["dealias_cutoff"] = (cx, cy)

        # synthesis tables on sample and quadrature grids
        t["syn_cos_s"] = _cos_table(t["z"], h, nz)
        t["syn_sin_s"] = _sin_table(t["z"], h, nz)
        t["syn_cos_q"] = _cos_table(t["zq"], h, nz)
        t["syn_sin_q"] = _sin_table(t["zq"], h, nz)

        # analysis = quadrature-exact projection onto the kept modes
        def analysis(syn: np.ndarray, npts: int, parity: str) -> np.ndarray:
            a = (2.0 / npts) * syn.T
            if parity == COS:
                a[0, :] = 1.0 / npts
            return a

        t["ana_cos_s"] = analysis(t["syn_cos_s"].copy(), nz, COS)
        t["ana_sin_s"] = np.linalg.pinv(t["syn_sin_s"])
        t["ana_cos_q"] = analysis(t["syn_cos_q"].copy(), nzq, COS)
        t["ana_sin_q"] = analysis(t["syn_sin_q"].copy(), nzq, SIN)

        # exact antiderivative values of each basis mode on the quadrature
        # grid: column m holds int_z^0 basis_m(z') dz' evaluated at zq
        m = np.arange(1, nz)
        vc = np.zeros((nzq, nz))
        vc[:, 0] = -t["zq"]
        vc[:, 1:] = -(h / (m * np.pi)) * np.sin(np.outer(t["zq"], m * np.pi / h))
        t["cumint_cos_vals"] = vc
        vs = np.zeros((nzq, nz))
        vs[:, 1:] = -(h / (m * np.pi)) * (1.0 - np.cos(np.outer(t["zq"], m * np.pi / h)))
        t["cumint_sin_vals"] = vs

        # in-basis cumulative integral of sine input (exact: sine -> cosine)
        ics = np.zeros((nz, nz))
        ics[0, 1:] = -h / (m * np.pi)
        ics[np.arange(1, nz), np.arange(1, nz)] = h / (m * np.pi)
        t["cumint_sin_coefs"] = ics

        # exact L2 projections needed by the cosine-input integral:
        # (sin_m, cos_n) pairings and the cosine/sine expansions of -z
        def int_sin(kk: int) -> float:
            if kk == 0:
                return 0.0
            return -np.sign(kk) * (h / (abs(kk) * np.pi)) * (1.0 - (-1.0) ** abs(kk))

        proj_sc = np.zeros((nz, nz))  # [n, m]: cos_n coefficients of sin_m
        for mm in range(1, nz):
            for n in range(nz):
                pair = 0.5 * (int_sin(mm + n) + int_sin(mm - n))
                proj_sc[n, mm] = pair * ((1.0 if n == 0 else 2.0) / h)
        neg_z_cos = np.zeros(nz)
        neg_z_cos[0] = h / 2.0
        for n in range(1, nz):
            neg_z_cos[n] = 0.0 if n % 2 == 0 else -4.0 * h / (n * n * np.pi * np.pi)
        neg_z_sin = np.zeros(nz)
        neg_z_sin[1:] = 2.0 * h * (-1.0) ** m / (m * np.pi)

        # cosine input -> exact projection of int_z^0 onto either parity
        icc = np.zeros((nz, nz))
        icc[:, 0] = neg_z_cos
        for mm in range(1, nz):
            icc[:, mm] = -(h / (mm * np.pi)) * proj_sc[:, mm]
        t["cumint_cos_to_cos"] = icc
        ics2 = np.zeros((nz, nz))
        ics2[:, 0] = neg_z_sin
        ics2[np.arange(1, nz), np.arange(1, nz)] += -(h / (m * np.pi))
        t["cumint_cos_to_sin"] = ics2

        # spectral inner-product weights
        wy = np.full(nyh, 2.0)
        wy[0] = 1.0
        if ny % 2 == 0:
            wy[-1] = 1.0
        t["wy"] = wy.reshape(1, nyh, 1)
        wz_cos = np.full(nz, 0.5)
        wz_cos[0] = 1.0
        t["wz_cos"] = wz_cos.reshape(1, 1, nz)
        t["wz_sin"] = np.full((1, 1, nz), 0.5)

        object.__setattr__(self, "_tables", t)

    # -- simple accessors ------------------------------------------------
    @property
    def nyh(self) -> int:
        return self.ny // 2 + 1

    @property
    def nzq(self) -> int:
        return 2 * self.nz

    @property
    def volume(self) -> float:
        return self.lx * self.ly * self.h

    @property
    def x(self) -> np.ndarray:
        return self._tables["x"]

    @property
    def y(self) -> np.ndarray:
        return self._tables["y"]

    @property
    def z(self) -> np.ndarray:
        return self._tables["z"]

    @property
    def zq(self) -> np.ndarray:
        return self._tables["zq"]

    @property
    def kx(self) -> np.ndarray:
        return self._tables["kx"]

    @property
    def ky(self) -> np.ndarray:
        return self._tables["ky"]

    @property
    def kh2(self) -> np.ndarray:
        return self._tables["kh2"]

    @property
    def kz(self) -> np.ndarray:
        return self._tables["kz"]

    @property
    def dealias_mask(self) -> np.ndarray:
        return self._tables["dealias_mask"]

    @property
    def dealias_cutoff(self) -> tuple:
        return self._tables["dealias_cutoff"]

    def quadrature_weights(self) -> np.ndarray:
        """Positive weights on the quadrature grid summing to the volume."""
        w = self.volume / (self.nx * self.ny * self.nzq)
        return np.full((self.nx, self.ny, self.nzq), w)

    def mesh_physical(self, quadrature: bool = False):
        """Return (X, Y, Z) broadcastable coordinate arrays."""
        z = self.zq if quadrature else self.z
        return (
            self.x.reshape(-1, 1, 1),
            self.y.reshape(1, -1, 1),
            z.reshape(1, 1, -1),
        )

    def spectral_shape(self) -> tuple:
        return (self.nx, self.nyh, self.nz)

    def compatible(self, other: "Grid") -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and self.nz == other.nz
            and np.isclose(self.lx, other.lx)
            and np.isclose(self.ly, other.ly)
            and np.isclose(self.h, other.h)
        )


def build_grid(
    lx: float,
    ly: float,
    h: float,
    nx: int,
    ny: int,
    nz: int,
    dealias_fraction: float = 2.0 / 3.0,
) -> Grid:
    """Construct a grid; rejects invalid mode counts and dealias fractions."""
    return Grid(lx=lx, ly=ly, h=h, nx=nx, ny=ny, nz=nz, dealias_fraction=dealias_fraction)
