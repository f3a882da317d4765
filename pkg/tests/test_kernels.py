import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schatten_lab.errors import InputError, ParameterError
from schatten_lab.kernels import (
    DiscretizedKernel,
    Grid,
    adjoint_kernel,
    build_convolution_kernel,
    build_lattice_kernel,
    build_riesz_kernel,
    build_torus_kernel,
    hilbert_schmidt_norm,
    interval_grid,
    kernel_from_text,
    kernel_to_text,
    lattice_grid,
    mixed_norm,
    riesz_constant,
    torus_grid,
)
from schatten_lab.spectral import schatten_norm, singular_values


class TestGrids:
    def test_torus_weights(self):
        g = torus_grid(8, 2)
        assert len(g) == 64
        np.testing.assert_allclose(g.weights, (2 * np.pi / 8) ** 2)

    def test_torus_too_small(self):
        with pytest.raises(ParameterError):
            torus_grid(3)

    def test_lattice_box(self):
        g = lattice_grid(3)
        np.testing.assert_array_equal(g.points[:, 0], np.arange(-3, 4))
        assert np.all(g.weights == 1)
        assert len(lattice_grid(4, half_open=True)) == 8

    def test_lattice_lexicographic_order(self):
        g = lattice_grid(1, 2)
        assert [tuple(p) for p in g.points[:3]] == [(-1, -1), (-1, 0), (-1, 1)]

    def test_interval_union_allocation(self):
        g = interval_grid([(2.0, 3.0), (0.0, 2.0)], 30)
        assert len(g) == 30
        assert g.weights.sum() == pytest.approx(3.0)
        assert np.all(np.diff(g.points[:, 0]) > 0)

    def test_overlap_rejected(self):
        with pytest.raises(InputError):
            interval_grid([(0, 1), (0.5, 2)], 10)

    def test_weights_positive(self):
        with pytest.raises(InputError):
            Grid("torus", 1, np.zeros((2, 1)), np.array([1.0, 0.0]), (2,))


class TestTorusKernels:
    def test_constant(self):
        K = build_torus_kernel(lambda x, y: 1.0 + 0 * (x - y), 4)
        np.testing.assert_array_equal(K.values, np.ones((4, 4)))
        np.testing.assert_allclose(K.row_grid.weights, np.pi / 2)

    def test_cosine_two_modes(self):
        K = build_torus_kernel(lambda x, y: np.cos(x - y), 64)
        s = singular_values(K.operator_matrix).values
        np.testing.assert_allclose(s[:2], np.pi, atol=1e-8)
        assert np.all(s[2:] < 1e-8)

    def test_hs_norm_converges(self):
        f = lambda x, y: np.exp(np.cos(x - y))
        norms = [hilbert_schmidt_norm(build_torus_kernel(f, n)) for n in (64, 128, 256)]
        assert abs(norms[2] - norms[1]) < 1e-8

    def test_non_finite_names_coordinates(self):
        with pytest.raises(InputError, match="x="):
            build_torus_kernel(lambda x, y: 1.0 / (x - y), 8)

    def test_two_dimensional_sampling(self):
        K = build_torus_kernel(lambda x, y: np.cos(x[..., 0] - y[..., 1]), 4, 2, 2)
        assert K.shape == (16, 16)


class TestLatticeKernels:
    def test_diagonal_spectrum(self):
        K = build_lattice_kernel(lambda k, l: np.where(k == l, (1.0 + np.abs(k)) ** -2, 0.0), 50)
        d = (1.0 + np.abs(np.arange(-50, 51))) ** -2
        np.testing.assert_allclose(singular_values(K.operator_matrix).values, np.sort(d)[::-1], atol=1e-15)

    def test_identity(self):
        K = build_lattice_kernel(lambda k, l: (k == l).astype(float), 7)
        np.testing.assert_allclose(singular_values(K.operator_matrix).values, 1.0)
        assert K.shape == (15, 15)

    def test_rank_one(self):
        K = build_lattice_kernel(lambda k, l: (1.0 + np.abs(k)) ** -2 * (1.0 + np.abs(l)) ** -2, 40)
        u = (1.0 + np.abs(np.arange(-40, 41))) ** -2
        s = singular_values(K.operator_matrix).values
        assert s[0] == pytest.approx(u @ u)
        assert np.all(s[1:] < 1e-12)


class TestConvolution:
    def test_single_mode(self):
        K, exact = build_convolution_kernel(np.array([1.0]))
        np.testing.assert_allclose(K.values, 1 / (2 * np.pi))
        s = singular_values(K.operator_matrix).values
        assert s[0] == pytest.approx(1.0)
        np.testing.assert_allclose(s[1:], 0, atol=1e-12)
        np.testing.assert_allclose(exact.values, [1, 0, 0, 0])

    def test_power_decay_oracle(self):
        k = np.arange(-64, 65)
        K, exact = build_convolution_kernel((1.0 + np.abs(k)) ** -2.0)
        assert np.isrealobj(K.values)
        np.testing.assert_allclose(singular_values(K.operator_matrix).values, exact.values, atol=1e-9)

    def test_phase_invariance(self):
        k = np.arange(-20, 21)
        K, exact = build_convolution_kernel(1j**k / (1.0 + np.abs(k)))
        expected = np.sort(1.0 / (1.0 + np.abs(k)))[::-1]
        np.testing.assert_allclose(exact.values, expected)
        np.testing.assert_allclose(singular_values(K.operator_matrix).values, expected, atol=1e-9)

    def test_explicit_frequencies(self):
        K, exact = build_convolution_kernel([0.5, 0.25], frequencies=[3, 5])
        s = singular_values(K.operator_matrix).values
        np.testing.assert_allclose(s[:2], [0.5, 0.25], atol=1e-12)

    def test_aliasing_rejected(self):
        with pytest.raises(ParameterError):
            build_convolution_kernel([1.0, 1.0], frequencies=[0, 4], M=4)

    def test_even_length_rejected(self):
        with pytest.raises(InputError):
            build_convolution_kernel([1.0, 2.0])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 40), st.integers(0, 2**31 - 1))
    def test_circulant_oracle_property(self, half, seed):
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(2 * half + 1) + 1j * rng.standard_normal(2 * half + 1)
        K, exact = build_convolution_kernel(c)
        s = singular_values(K.operator_matrix).values
        np.testing.assert_allclose(s, exact.values[: len(s)], atol=1e-9)


class TestRiesz:
    def test_constant(self):
        assert riesz_constant(0.5, 1) == pytest.approx(0.3989, abs=1e-4)

    def test_positive_and_symmetric(self):
        K = build_riesz_kernel(0.5, [(0.0, 1.0)], 256)
        A = K.operator_matrix
        np.testing.assert_array_equal(A, A.T)
        ev = np.linalg.eigvalsh(A)
        assert ev.min() >= -1e-10 * np.abs(ev).max()

    def test_decay_exponent(self):
        from schatten_lab.spectral import fit_tail_exponent

        s = singular_values(build_riesz_kernel(0.5, [(0.0, 1.0)], 256).operator_matrix)
        assert fit_tail_exponent(s, 10, 100).exponent == pytest.approx(0.5, rel=0.1)

    def test_refinement(self):
        s128 = singular_values(build_riesz_kernel(0.5, [(0, 1)], 128).operator_matrix).values[:10]
        s256 = singular_values(build_riesz_kernel(0.5, [(0, 1)], 256).operator_matrix).values[:10]
        assert np.max(np.abs(s256 / s128 - 1)) < 0.02

    def test_diagonal_cell_average(self):
        K = build_riesz_kernel(0.3, [(0.0, 1.0)], 10)
        h = 0.1
        c = riesz_constant(0.3, 1)
        avg = c * (2 / 0.3) * (h / 2) ** 0.3 / h
        np.testing.assert_allclose(np.diag(K.values), avg)

    def test_union_of_intervals(self):
        K = build_riesz_kernel(0.5, [(0.0, 1.0), (2.0, 2.5)], 90)
        assert np.linalg.eigvalsh(K.operator_matrix).min() > -1e-10

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(ParameterError):
            build_riesz_kernel(alpha, [(0, 1)], 16)

    def test_overlap(self):
        with pytest.raises(InputError):
            build_riesz_kernel(0.5, [(0, 1), (0.9, 2)], 16)


class TestNorms:
    def test_constant_hs(self):
        K = build_torus_kernel(lambda x, y: np.ones(np.broadcast_shapes(x.shape, y.shape)), 17)
        assert hilbert_schmidt_norm(K) == pytest.approx(2 * np.pi)

    def test_lattice_diagonal_hs(self):
        R = 1000
        g = lattice_grid(R)
        d = 1.0 / (1.0 + np.abs(g.points[:, 0]))
        K = DiscretizedKernel(g, g, np.diag(d))
        direct = 1.0 + 2.0 * sum(1.0 / (1 + k) ** 2 for k in range(1, R + 1))
        assert hilbert_schmidt_norm(K) ** 2 == pytest.approx(direct, rel=1e-12)
        assert direct == pytest.approx(np.pi**2 / 3 - 1, abs=2e-3)

    def test_hs_equals_s2(self, rng):
        g = interval_grid([(0, 1), (2, 4)], 20)
        K = DiscretizedKernel(g, torus_grid(6), rng.standard_normal((20, 6)))
        assert hilbert_schmidt_norm(K) == pytest.approx(
            schatten_norm(singular_values(K.operator_matrix), 2), abs=1e-10
        )

    def test_mixed_collapses(self, rng):
        g = torus_grid(12)
        K = DiscretizedKernel(g, g, rng.standard_normal((12, 12)))
        assert mixed_norm(K, 2, 2) == pytest.approx(hilbert_schmidt_norm(K), abs=1e-12)

    def test_mixed_separable(self, rng):
        g = interval_grid([(0, 2)], 16)
        u, v = rng.standard_normal((2, 16))
        K = DiscretizedKernel(g, g, np.outer(u, v))
        h = g.weights[0]
        norm_u = (h * np.sum(np.abs(u) ** 3)) ** (1 / 3)
        norm_v = (h * np.sum(np.abs(v) ** 1.5)) ** (1 / 1.5)
        assert mixed_norm(K, 3, 1.5) == pytest.approx(norm_u * norm_v)

    def test_mixed_constant(self):
        K = build_torus_kernel(lambda x, y: np.ones(np.broadcast_shapes(x.shape, y.shape)), 8)
        assert mixed_norm(K, 1, 2) == pytest.approx(2 * np.pi * math.sqrt(2 * np.pi))

    def test_mixed_bad_exponent(self):
        g = torus_grid(4)
        with pytest.raises(ParameterError):
            mixed_norm(DiscretizedKernel(g, g, np.eye(4)), 0.5, 2)


class TestAdjoint:
    def test_symmetric(self, rng):
        g = torus_grid(5)
        A = rng.standard_normal((5, 5))
        K = DiscretizedKernel(g, g, A + A.T)
        np.testing.assert_array_equal(adjoint_kernel(K).values, K.values)

    def test_transpose(self):
        i, j = np.meshgrid(np.arange(3), np.arange(4), indexing="ij")
        K = DiscretizedKernel(lattice_grid(1), interval_grid([(0, 1)], 4), (i + 2 * j).astype(float))
        Ks = adjoint_kernel(K)
        np.testing.assert_array_equal(Ks.values, K.values.T)
        assert Ks.row_grid is K.col_grid

    def test_involution(self, rng):
        g = torus_grid(6)
        K = DiscretizedKernel(g, g, rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
        np.testing.assert_array_equal(adjoint_kernel(adjoint_kernel(K)).values, K.values)

    def test_spectrum_matches(self, rng):
        K = DiscretizedKernel(interval_grid([(0, 3)], 9), torus_grid(7), rng.standard_normal((9, 7)))
        np.testing.assert_allclose(
            singular_values(adjoint_kernel(K).operator_matrix).values,
            singular_values(K.operator_matrix).values,
            atol=1e-10,
        )


class TestSerialization:
    @pytest.mark.parametrize("cplx", [False, True])
    def test_round_trip(self, rng, cplx):
        vals = rng.standard_normal((7, 5))
        if cplx:
            vals = vals + 1j * rng.standard_normal((7, 5))
        K = DiscretizedKernel(lattice_grid(3), interval_grid([(0, 1), (2, 3)], 5), vals)
        back = kernel_from_text(kernel_to_text(K))
        np.testing.assert_array_equal(back.values, K.values)
        assert back.row_grid.same_as(K.row_grid) and back.col_grid.same_as(K.col_grid)

    def test_torus_header(self):
        K = build_torus_kernel(lambda x, y: np.cos(x - y), 4)
        text = kernel_to_text(K)
        assert "row.kind=torus" in text and "row.N=4" in text
        assert kernel_from_text(text).row_grid.same_as(K.row_grid)

    def test_missing_values(self):
        with pytest.raises(InputError):
            kernel_from_text("row.kind=torus\n")
