"""Grid construction, transforms, derivatives, quadrature, inner products."""

import numpy as np
import pytest

from lupe.grid import COS, SIN, build_grid
from lupe import fields as F
from lupe.operators import Coefs, inner_product, norm2
from lupe.stepper import initial_state

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="module")
def grid8():
    return build_grid(TWO_PI, TWO_PI, 1.0, 8, 8, 4)


@pytest.fixture(scope="module")
def grid16():
    return build_grid(TWO_PI, TWO_PI, 1.0, 16, 16, 8)


from helpers import synth_at  # noqa: E402  (test-local helper)


class TestBuildGrid:
    def test_wavenumbers_2pi_box(self, grid8):
        assert sorted(grid8.kx) == list(range(-4, 4))

    def test_wavenumber_spacing_unit_box(self):
        g = build_grid(1.0, 1.0, 1.0, 8, 8, 4)
        assert np.isclose(sorted(g.kx)[5] - sorted(g.kx)[4], TWO_PI)

    def test_quadrature_weights_sum_to_volume(self, grid8):
        w = grid8.quadrature_weights()
        assert (w > 0).all()
        assert np.isclose(w.sum(), TWO_PI * TWO_PI * 1.0, rtol=1e-13)

    def test_rejects_odd_counts(self):
        with pytest.raises(ValueError):
            build_grid(TWO_PI, TWO_PI, 1.0, 7, 8, 4)
        with pytest.raises(ValueError):
            build_grid(TWO_PI, TWO_PI, 1.0, 8, 10, 1)

    def test_rejects_bad_dealias(self):
        with pytest.raises(ValueError):
            build_grid(TWO_PI, TWO_PI, 1.0, 8, 8, 4, dealias_fraction=0.0)
        with pytest.raises(ValueError):
            build_grid(TWO_PI, TWO_PI, 1.0, 8, 8, 4, dealias_fraction=1.2)

    def test_rejects_nonpositive_extent(self):
        with pytest.raises(ValueError):
            build_grid(-1.0, TWO_PI, 1.0, 8, 8, 4)


class TestTransforms:
    def test_zero_field(self, grid8):
        f = F.forward_transform(grid8, np.zeros((8, 8, 4)))
        assert np.abs(f.coeffs).max() == 0.0

    def test_single_mode_coefficients(self, grid8):
        X, Y, Z = grid8.mesh_physical()
        samp = (np.cos(X) * np.cos(np.pi * Z)) * np.ones((8, 8, 4))
        f = F.forward_transform(grid8, samp)
        nz = np.argwhere(np.abs(f.coeffs) > 1e-12)
        assert len(nz) == 2
        assert {tuple(r) for r in nz} == {(1, 0, 1), (7, 0, 1)}

    def test_round_trip(self, grid16):
        rng = np.random.default_rng(3)
        samp = rng.standard_normal((16, 16, 8))
        f = F.forward_transform(grid16, samp)
        f._samples = None  # force the synthesis path
        err = np.abs(F.inverse_transform(f) - samp).max()
        assert err < 1e-12

    def test_shape_mismatch_rejected(self, grid8):
        with pytest.raises(ValueError):
            F.forward_transform(grid8, np.zeros((8, 8, 5)))

    def test_parseval(self, grid16):
        U = initial_state(grid16, "random", kmax=4, mmax=5, v_norm=2.0, seed=5)
        phys = F.to_phys(U.vx)
        quad = F.quadrature_integral(grid16, phys**2)
        spec = F.l2_norm2(U.vx)
        assert abs(quad - spec) <= 1e-10 * abs(spec)


class TestDerivatives:
    def test_dx_cosine(self, grid8):
        X, Y, Z = grid8.mesh_physical()
        f = F.forward_transform(grid8, np.cos(X) * np.ones((8, 8, 4)))
        out = F.inverse_transform(F.dx(f))
        assert np.allclose(out, -np.sin(X) * np.ones((8, 8, 4)), atol=1e-13)

    def test_dz_vertical_mode(self, grid8):
        X, Y, Z = grid8.mesh_physical()
        m = 2
        f = F.forward_transform(grid8, np.cos(m * np.pi * Z) * np.ones((8, 8, 4)))
        out = F.dz(f)
        assert out.parity == SIN
        expect = -(m * np.pi) * np.sin(m * np.pi * Z) * np.ones((8, 8, 4))
        assert np.allclose(F.inverse_transform(out), expect, atol=1e-12)

    def test_dx_matches_finite_differences(self, grid8):
        # oracle: 4th-order central differences on an 8x refined x axis
        rng = np.random.default_rng(7)
        U = initial_state(grid8, "random", kmax=2, mmax=2, v_norm=1.0, seed=7)
        f = U.vx
        xs = grid8.x[:4]
        ys = grid8.y[1]
        zs = grid8.z[1]
        delta = grid8.lx / (8 * grid8.nx)
        fd = (-synth_at(f, xs + 2 * delta, ys, zs) + 8 * synth_at(f, xs + delta, ys, zs)
              - 8 * synth_at(f, xs - delta, ys, zs) + synth_at(f, xs - 2 * delta, ys, zs)
              ) / (12 * delta)
        exact = synth_at(F.dx(f), xs, ys, zs)
        assert np.abs(fd - exact).max() <= 1e-6 * max(1.0, np.abs(exact).max())

    def test_derivative_commutes_with_vertical_average(self, grid8):
        U = initial_state(grid8, "random", kmax=2, mmax=2, v_norm=1.0, seed=9)
        for axis in ("x", "y"):
            a = F.vertical_average(F.derivative(U.vx, axis))
            b = F.derivative(F.vertical_average(U.vx), axis)
            assert np.abs(a.coeffs - b.coeffs).max() < 1e-14

    def test_unknown_axis(self, grid8):
        with pytest.raises(ValueError):
            F.derivative(F.ScalarField3D.zeros(grid8), "q")


class TestInnerProducts:
    def test_zero_state(self, grid8):
        U = F.StateU.zeros(grid8)
        assert inner_product("H", U, U) == 0.0

    def test_cos_x_energy(self, grid8):
        # int cos^2(x) over the 2pi x 2pi x 1 box = 2 pi^2
        X, Y, Z = grid8.mesh_physical()
        vx = F.forward_transform(grid8, np.cos(X) * np.ones((8, 8, 4)))
        U = F.StateU(vx, *(F.ScalarField3D.zeros(grid8) for _ in range(3)))
        assert np.isclose(inner_product("H", U, U), 2 * np.pi**2, rtol=1e-12)

    def test_v_norm_nonnegative(self, grid8):
        for seed in range(100):
            U = initial_state(grid8, "random", kmax=2, mmax=2, v_norm=1.0, seed=seed)
            assert norm2("V", U) >= 0.0

    def test_bilinear_symmetric(self, grid8):
        U = initial_state(grid8, "random", kmax=2, mmax=2, v_norm=1.0, seed=1)
        Q = initial_state(grid8, "random", kmax=2, mmax=2, v_norm=1.0, seed=2)
        for kind in ("H", "V", "DA"):
            a = inner_product(kind, U, Q)
            b = inner_product(kind, Q, U)
            assert np.isclose(a, b, rtol=1e-12)
            two = inner_product(kind, U + U, Q)
            assert np.isclose(two, 2 * a, rtol=1e-12)

    def test_poincare_on_mean_free(self, grid8):
        g = grid8
        lam_min = min((TWO_PI / g.lx) ** 2, (np.pi / g.h) ** 2)
        for seed in range(20):
            U = initial_state(g, "random", kmax=2, mmax=2, v_norm=1.0, seed=seed)
            # remove the velocity mean modes so every component is mean-free
            for f in (U.vx, U.vy):
                f.coeffs[0, 0, 0] = 0.0
                f._phys = None
            assert inner_product("H", U, U) <= inner_product("V", U, U) / lam_min + 1e-12

    def test_grid_mismatch(self, grid8, grid16):
        with pytest.raises(ValueError):
            inner_product("H", F.StateU.zeros(grid8), F.StateU.zeros(grid16))

    def test_robin_surface_term(self, grid8):
        # V-norm picks up (alphaT/nuT) * int_{z=0} T^2 when alphaT > 0
        X, Y, Z = grid8.mesh_physical()
        T = F.forward_transform(grid8, (np.cos(X) * np.cos(np.pi * Z)) * np.ones((8, 8, 4)))
        z0 = F.StateU(F.ScalarField3D.zeros(grid8), F.ScalarField3D.zeros(grid8),
                      T, F.ScalarField3D.zeros(grid8))
        c0 = Coefs(alphaT=0.0)
        c1 = Coefs(alphaT=0.5, nu_T=0.25)
        base = inner_product("V", z0, z0, c0)
        with_robin = inner_product("V", z0, z0, c1)
        # surface values cos(x) cos(0): integral of cos^2 over the face = 2 pi^2
        assert np.isclose(with_robin - base, (0.5 / 0.25) * 2 * np.pi**2, rtol=1e-12)


class TestDealiasing:
    def test_product_matches_direct_convolution(self):
        """Pointwise product then projection equals the exact truncated
        convolution computed by an independent fine-grid oracle."""
        g = build_grid(TWO_PI, TWO_PI, 1.0, 8, 8, 4)
        rng = np.random.default_rng(11)

        def masked_2d_field(seed):
            rng = np.random.default_rng(seed)
            coeffs = np.zeros(g.spectral_shape(), dtype=complex)
            cx, cy = g.dealias_cutoff
            for ix in range(-cx, cx + 1):
                for iy in range(0, cy + 1):
                    coeffs[ix, iy, 0] = rng.standard_normal() + 1j * rng.standard_normal()
            for ix in range(1, cx + 1):
                coeffs[-ix, 0, 0] = np.conj(coeffs[ix, 0, 0])
            coeffs[0, 0, 0] = coeffs[0, 0, 0].real
            return F.ScalarField3D(g, COS, coeffs)

        a = masked_2d_field(1)
        b = masked_2d_field(2)
        prod = F.mult(a, b)

        # oracle: evaluate both factors on a 4x refined grid, multiply,
        # project exactly, truncate to the dealias mask
        n_f = 32
        xs = np.arange(n_f) * (g.lx / n_f)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        av = synth_at(a, X, Y, np.full_like(X, g.z[0]))
        bv = synth_at(b, X, Y, np.full_like(X, g.z[0]))
        spec = np.fft.rfft2(av * bv) / (n_f * n_f)
        oracle = np.zeros((g.nx, g.nyh), dtype=complex)
        for ix in range(-g.nx // 2, g.nx // 2):
            for iy in range(0, g.nyh):
                oracle[ix, iy] = spec[ix, iy]
        oracle *= g.dealias_mask[:, :, 0]
        assert np.abs(prod.coeffs[:, :, 0] - oracle).max() < 1e-12
        assert np.abs(prod.coeffs[:, :, 1:]).max() < 1e-12

    def test_state_stays_in_dealiased_band(self, grid16):
        U = initial_state(grid16, "random", kmax=5, mmax=3, v_norm=1.0, seed=3)
        outside = ~grid16.dealias_mask[:, :, 0]
        for f in U.fields():
            assert np.abs(f.coeffs[outside]).max() == 0.0
