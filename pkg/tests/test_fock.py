from __future__ import annotations

import math

import numpy as np
import pytest

from fockgabor.core_num import DomainError, LogComplex, QuadratureSpec
from fockgabor.fock import (
    FockFunction,
    GaborAtom,
    KernelSpec,
    UnsupportedMethodError,
    bargmann_function,
    bargmann_gabor,
    bargmann_numeric,
    gabor_atom_l2_norm,
    gabor_l2_inner,
    gabor_window,
    inner_product,
    inner_product_with_error,
    kernel_combination,
    kernel_function,
    kernel_sum_norm,
    kernel_weighted_eval,
    norm,
    polynomial_times_kernel,
)

PI = math.pi


class TestKernelEval:
    def test_at_center_zero(self):
        assert kernel_weighted_eval(KernelSpec(0.0), 0.0).to_complex() == 1.0

    def test_constant_kernel_profile(self):
        rng = np.random.default_rng(0)
        z = rng.uniform(-3, 3, 50) + 1j * rng.uniform(-3, 3, 50)
        out = kernel_weighted_eval(KernelSpec(0.0), z)
        assert np.allclose(np.asarray(out.log_mag), -PI * np.abs(z) ** 2 / 2)
        assert np.all(np.asarray(out.phase) == 0.0)

    def test_derived_value_at_rotated_point(self):
        # oracle: direct evaluation of exp(pi conj(lam) z - pi|lam|^2/2 - pi|z|^2/2)
        lam, z = 1.0, 1j
        want = np.exp(PI * np.conjugate(lam) * z - PI / 2 - PI / 2)
        got = kernel_weighted_eval(KernelSpec(lam), z).to_complex()
        assert got == pytest.approx(want, abs=1e-15)
        assert got.real == pytest.approx(-math.exp(-PI), abs=1e-15)

    def test_unnormalized_adds_log_norm(self):
        lam = 2.0 + 1j
        a = kernel_weighted_eval(KernelSpec(lam, normalized=True), 0.3)
        b = kernel_weighted_eval(KernelSpec(lam, normalized=False), 0.3)
        assert b.log_mag - a.log_mag == pytest.approx(PI * abs(lam) ** 2 / 2)


class TestInnerProduct:
    def test_normalized_kernel_self_product(self):
        for lam in (0.0, 1.5 - 0.5j, 3.0j):
            f = kernel_function(KernelSpec(lam))
            assert inner_product(f, f, "closed_form") == pytest.approx(1.0)

    def test_euler_identity_pair(self):
        k1 = kernel_function(KernelSpec(1.0, normalized=False))
        ki = kernel_function(KernelSpec(1j, normalized=False))
        assert inner_product(k1, ki, "closed_form") == pytest.approx(-1.0, abs=1e-12)

    def test_closed_form_vs_quadrature_on_sigma_pair(self, cfg):
        from fockgabor.corpus import sigma0_function

        s0 = sigma0_function(cfg)
        u = kernel_function(KernelSpec(2.0 + 1j))
        closed = inner_product(s0, u, "closed_form")
        quad, err = inner_product_with_error(s0, u)
        assert abs(closed - quad) <= max(1e-6, 10 * err)

    def test_closed_form_requires_a_decomposition(self, cfg):
        from fockgabor.corpus import sigma0_function

        s0 = sigma0_function(cfg)
        with pytest.raises(UnsupportedMethodError):
            inner_product(s0, s0, "closed_form")

    def test_hermitian_symmetry(self):
        f = kernel_combination([(1.0, 0.5), (0.5j, -1j)], "a")
        g = kernel_combination([(0.25, 1.0 + 1j)], "b")
        assert inner_product(f, g, "closed_form") == pytest.approx(
            np.conjugate(inner_product(g, f, "closed_form")))

    def test_normalized_pair_magnitude_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            lam = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            mu = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            v = inner_product(kernel_function(KernelSpec(lam)),
                              kernel_function(KernelSpec(mu)), "closed_form")
            assert abs(v) == pytest.approx(math.exp(-PI * abs(lam - mu) ** 2 / 2),
                                           rel=1e-10)


class TestNorm:
    def test_constant(self):
        assert norm(kernel_function(KernelSpec(0.0))) == pytest.approx(1.0, abs=1e-9)

    def test_unnormalized_kernel_norm(self):
        f = kernel_function(KernelSpec(1.0, normalized=False))
        assert norm(f) == pytest.approx(math.exp(PI / 2), rel=1e-9)

    def test_difference_of_identical_kernels(self):
        f = kernel_combination([(1.0, 0.5 + 0.5j), (-1.0, 0.5 + 0.5j)], "zero")
        assert norm(f) <= 1e-7

    def test_kernel_sum_norm_closed_form(self):
        terms = [(1.0, 1.0), (0.5j, 1.0 + 1j), (-0.25, -2.0)]
        f = kernel_combination(terms, "combo")
        assert kernel_sum_norm(terms) == pytest.approx(norm(f), rel=1e-9)

    def test_monomial_norm(self):
        # ||z||^2 = integral |z|^2 e^{-pi |z|^2} = 1/pi
        f = polynomial_times_kernel((0.0,), 0.0, label="z")
        assert norm(f) == pytest.approx(1.0 / math.sqrt(PI), rel=1e-8)


class TestReproducing:
    def test_reproducing_property_over_corpus(self, cfg):
        from fockgabor.corpus import build_corpus

        members = build_corpus(cfg)[:6]
        rng = np.random.default_rng(2)
        for f in members:
            for _ in range(5):
                lam = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
                k = kernel_function(KernelSpec(lam, normalized=False))
                val, err = inner_product_with_error(f, k)
                want = f.weighted_at(lam).scaled(PI * abs(lam) ** 2 / 2).to_complex()
                assert abs(val - want) <= max(err, 1e-9)


class TestGabor:
    def test_atom_l2_norm(self):
        for atom in (GaborAtom(0, 0), GaborAtom(0.3, -1.2), GaborAtom(-2, 0.7)):
            assert gabor_atom_l2_norm(atom) == pytest.approx(2 ** -0.25, abs=1e-10)

    def test_gabor_images_are_normalized_kernels(self):
        assert bargmann_gabor(GaborAtom(0, 0)).kernel_terms == ((1.0, 0.0 + 0.0j),)
        assert bargmann_gabor(GaborAtom(1, 0)).kernel_terms == ((1.0, 1.0 + 0.0j),)
        assert bargmann_gabor(GaborAtom(0, 1)).kernel_terms == ((1.0, -1.0j),)

    def test_numeric_transform_of_plain_gaussian(self):
        got = bargmann_numeric(gabor_window(GaborAtom(0, 0)), 0.0).to_complex()
        assert got == pytest.approx(2 ** -0.25, abs=1e-10)

    def test_numeric_matches_closed_form_after_normalization(self):
        atom = GaborAtom(1, 0)
        got = bargmann_numeric(gabor_window(atom), 1.0).to_complex()
        want = bargmann_gabor(atom).weighted_at(1.0).to_complex() * 2 ** -0.25
        assert abs(got - want) <= 1e-8

    def test_numeric_vs_closed_on_grid(self):
        atom = GaborAtom(-0.5, 0.75)
        closed = bargmann_gabor(atom)
        rng = np.random.default_rng(3)
        for _ in range(20):
            z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            got = bargmann_numeric(gabor_window(atom), z).to_complex()
            want = closed.weighted_at(z).to_complex() * 2 ** -0.25
            assert abs(got - want) <= 1e-6

    def test_unitarity_pair(self):
        f = bargmann_function(GaborAtom(0, 0))
        g = bargmann_function(GaborAtom(1, 1))
        fock_side, _ = inner_product_with_error(f, g, QuadratureSpec(8.0, 0.1))
        time_side = gabor_l2_inner(GaborAtom(0, 0), GaborAtom(1, 1))
        assert abs(fock_side - time_side) <= 1e-6

    def test_numeric_transform_domain_checks(self):
        with pytest.raises(DomainError):
            bargmann_numeric(gabor_window(GaborAtom(0, 0)), 25.0)
        with pytest.raises(DomainError):
            # explicit interval too short for the integrand's spread
            bargmann_numeric(gabor_window(GaborAtom(0, 0)), 0.0, half_width=0.8)

    def test_cocycle_for_mixed_shift(self):
        # both integral forms of the transform produce exp(i*pi*x*y) times
        # the bare kernel; spot-check the closed form against the numeric one
        atom = GaborAtom(1.0, 0.5)
        got = bargmann_numeric(gabor_window(atom), 0.3 - 0.2j).to_complex()
        want = bargmann_gabor(atom).weighted_at(0.3 - 0.2j).to_complex() * 2 ** -0.25
        assert abs(got - want) <= 1e-9


def test_value_at_unweights_in_log_space():
    f = kernel_function(KernelSpec(2.0))
    # f(2) = exp(pi*4) / ||k_2|| = exp(2 pi)
    assert f.value_at(2.0) == pytest.approx(math.exp(2 * PI), rel=1e-12)
