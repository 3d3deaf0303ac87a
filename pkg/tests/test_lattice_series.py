from __future__ import annotations

import math

import numpy as np
import pytest

from fockgabor.core_num import DomainError, QuadratureSpec
from fockgabor.fock import (
    KernelSpec,
    kernel_combination,
    kernel_function,
    kernel_weighted_eval,
    polynomial_times_kernel,
)
from fockgabor.lattice_series import (
    LatticeCoefficients,
    biorthogonal_function,
    check_cl3,
    coeff_a,
    coeff_b,
    coeff_b_many,
    interpolation_identity,
    interpolation_residue_gap,
    make_deflated_quotient,
    shifted_lattice_generator,
    three_point_identity,
    two_sided_identity,
)
from fockgabor.weierstrass import LatticeIndex, lattice_points_in_radius

PI = math.pi

CL3_RATIO_MAX_GOLDEN = 1.6702375        # radius-16 quadrature + analytic tail
CL3_NORM_AT_ONE_GOLDEN = 1.3905640
B_SIGMA3_AT_2PLUSI_GOLDEN = -0.0106761  # half-step/doubled-radius checked


def vanishing_combo(mu: complex, l: complex, m: complex):
    """A two-kernel combination with an exact zero at mu."""
    t = (kernel_weighted_eval(KernelSpec(l), mu)
         / kernel_weighted_eval(KernelSpec(m), mu)).to_complex()
    return kernel_combination([(1.0, l), (-t, m)], f"pair-vanishing-at-{mu:g}")


class TestCoeffA:
    def test_unit_at_own_center(self):
        for v in (LatticeIndex(1, 0), LatticeIndex(2, -1), LatticeIndex(-3, 2)):
            f = kernel_function(KernelSpec(v.value))
            assert coeff_a(f, v) == pytest.approx(1.0, abs=1e-14)

    def test_sigma0_data_vanishes_on_the_punctured_lattice(self, cfg):
        from fockgabor.corpus import sigma0_function

        s0 = sigma0_function(cfg)
        for w in (LatticeIndex(1, 0), LatticeIndex(0, 2), LatticeIndex(-2, -2)):
            assert coeff_a(s0, w) == 0.0

    def test_kernel_at_neighbor(self):
        f = kernel_function(KernelSpec(1.0))
        got = coeff_a(f, LatticeIndex(1, 1))
        assert abs(got) == pytest.approx(math.exp(-PI / 2), rel=1e-12)
        assert got.real == pytest.approx(-math.exp(-PI / 2), rel=1e-12)

    def test_square_summability_tail(self, cfg):
        from fockgabor.corpus import build_corpus

        members = build_corpus(cfg)[:4]
        for f in members:
            table = {w: coeff_a(f, w) for w in lattice_points_in_radius(12.0)}
            coeffs = LatticeCoefficients(table, "a", f.label, 12.0)
            sums = dict()
            for r, s in coeffs.radial_partial_sums():
                sums[round(r, 6)] = s
            total_10 = max(s for r, s in coeffs.radial_partial_sums() if r <= 10.0)
            total_12 = coeffs.radial_partial_sums()[-1][1]
            assert total_12 - total_10 < 1e-6


class TestBiorthogonality:
    def test_unit_diagonal(self, cfg):
        v = LatticeIndex(2, 1)
        f = kernel_function(KernelSpec(v.value))
        assert coeff_b(f, v, cfg=cfg) == pytest.approx(1.0, abs=1e-6)

    def test_off_diagonal_zero(self, cfg):
        f = kernel_function(KernelSpec(2.0 + 1j))
        for w in (LatticeIndex(1, 0), LatticeIndex(-1, 2)):
            assert abs(coeff_b(f, w, cfg=cfg)) <= 1e-6

    def test_batched_biorthogonality_window(self, cfg):
        v = LatticeIndex(1, -1)
        f = kernel_function(KernelSpec(v.value))
        out = coeff_b_many(f, lattice_points_in_radius(4.0), cfg=cfg)
        for w, val in out.items():
            want = 1.0 if (w.m, w.n) == (v.m, v.n) else 0.0
            assert abs(val - want) <= 1e-6

    def test_biorthogonal_norm_profile(self, cfg):
        # ||e_w|| = ||k_w||/|sigma0'(w)| * ||sigma0/(.-w)|| ~ log^{1/2}(1+|w|)
        e1 = biorthogonal_function(LatticeIndex(1, 0), cfg)
        from fockgabor.fock import inner_product_with_error

        nrm_sq, _ = inner_product_with_error(
            e1, e1, QuadratureSpec(truncation_radius=16.0, step=0.05))
        assert nrm_sq.real == pytest.approx(CL3_NORM_AT_ONE_GOLDEN**2, rel=2e-2)

    def test_golden_b_of_sigma3(self, cfg):
        from fockgabor.construction import sigma3_function

        b = coeff_b(sigma3_function(cfg), LatticeIndex(2, 1), cfg=cfg)
        assert b.real == pytest.approx(B_SIGMA3_AT_2PLUSI_GOLDEN, abs=2e-6)
        assert abs(b.imag) <= 1e-6
        assert abs(b) ** 2 <= math.log(1.0 + abs(2 + 1j))


class TestCl3:
    def test_window_guard(self, cfg):
        with pytest.raises(DomainError):
            check_cl3(2.0, cfg)

    def test_norms_positive_finite(self, cfg):
        rep = check_cl3(4.0, cfg)
        assert all(0 < v < math.inf for v in rep["norms"].values())

    def test_golden_ratio_max(self, cfg):
        rep = check_cl3(8.0, cfg)
        assert rep["ratio_max"] == pytest.approx(CL3_RATIO_MAX_GOLDEN, abs=1e-3)
        assert rep["norms"][LatticeIndex(1, 0)] == pytest.approx(
            CL3_NORM_AT_ONE_GOLDEN, abs=1e-3)

    def test_norm_decays_along_the_axis(self, cfg):
        rep = check_cl3(8.0, cfg)
        assert rep["norms"][LatticeIndex(8, 0)] < rep["norms"][LatticeIndex(1, 0)]


class TestThreePoint:
    def test_kernel_collapse_case(self, cfg):
        a = 0.3 + 0.2j
        G = shifted_lattice_generator(a, cfg)
        F = kernel_function(KernelSpec(2.0 + 1j))
        rep = three_point_identity(G, (a, a + 1, a + 1j), F, trunc=12.0,
                                   cfg=cfg, tolerance=1e-5)
        assert rep.ok and rep.gap <= 1e-5
        # symbolic collapse oracle: the lattice sum is the single w = 2+i term
        wv = 2.0 + 1j
        single = (G.whole.weighted_at(wv).to_complex()
                  / ((wv - a) * (wv - a - 1) * (wv - a - 1j)))
        assert abs(rep.rhs - single) <= 1e-6

    def test_vanishing_window_data(self, cfg):
        # a kernel far outside the truncation window has b_w ~ 0 throughout it
        a = 0.3 + 0.2j
        G = shifted_lattice_generator(a, cfg)
        F = kernel_function(KernelSpec(9.0 + 9.0j))
        rep = three_point_identity(G, (a, a + 1, a + 1j), F, trunc=6.0,
                                   cfg=cfg, tolerance=1e-3)
        assert abs(rep.rhs) <= 1e-6
        assert abs(rep.lhs) <= 5e-4

    def test_distinctness_guard(self, cfg):
        a = 0.3 + 0.2j
        G = shifted_lattice_generator(a, cfg)
        F = kernel_function(KernelSpec(1.0))
        with pytest.raises(DomainError):
            three_point_identity(G, (a, a, a + 1j), F, 8.0, cfg=cfg)

    def test_gap_does_not_grow_under_refinement(self, cfg):
        a = 0.3 + 0.2j
        G = shifted_lattice_generator(a, cfg)
        F = kernel_combination([(0.8, 1.0 - 1j), (0.2j, -2.0)], "mix")
        coarse = three_point_identity(G, (a, a + 1, a + 1j), F, trunc=12.0,
                                      cfg=cfg)
        fine = three_point_identity(
            G, (a, a + 1, a + 1j), F, trunc=16.0,
            spec=QuadratureSpec(truncation_radius=9.0, step=0.025), cfg=cfg)
        assert fine.gap <= coarse.gap + 1e-9


class TestTwoSided:
    def test_kernel_first_argument(self, cfg):
        F1 = kernel_function(KernelSpec(1.0 + 1j))
        F2 = vanishing_combo(2.5 + 0.5j, 0.5 + 0.5j, 1.5 - 0.5j)
        rep = two_sided_identity(F1, F2, 0.5 + 1.5j, 2.5 + 0.5j, trunc=12.0,
                                 cfg=cfg, tolerance=1e-5)
        assert rep.ok and rep.gap <= 1e-5

    def test_requires_vanishing_at_mu(self, cfg):
        F1 = kernel_function(KernelSpec(1.0))
        F2 = kernel_function(KernelSpec(0.5))
        with pytest.raises(DomainError):
            two_sided_identity(F1, F2, 0.5 + 1.5j, 2.5 + 0.5j, 8.0, cfg=cfg)

    def test_general_pair(self, cfg):
        F1 = kernel_combination([(0.7, 0.5), (0.3, -0.5 + 1j)], "f1")
        mu = 1.5 + 0.5j
        F2 = vanishing_combo(mu, -0.5 - 0.5j, 0.5 + 1.5j)
        rep = two_sided_identity(F1, F2, -0.5 + 0.5j, mu, trunc=12.0,
                                 cfg=cfg, tolerance=1e-4)
        assert rep.ok

    def test_real_pair_produces_real_sum(self, cfg):
        # real-on-the-line data keeps the lattice sum conjugation-symmetric
        F1 = kernel_function(KernelSpec(1.5))
        mu = 2.5
        F2 = vanishing_combo(mu, 0.5, -0.5)
        rep = two_sided_identity(F1, F2, 10.5, mu, trunc=10.0, cfg=cfg,
                                 tolerance=1e-4)
        assert abs(rep.lhs.imag) <= 1e-6
        assert rep.ok

    def test_far_real_point_first_term_asymptotic(self, cfg):
        # at z = 10.5 the first Cauchy term is within ~20% of <F2, F1>/z
        F1 = kernel_function(KernelSpec(1.5))
        mu = 2.5
        F2 = vanishing_combo(mu, 0.5, -0.5)
        rep = two_sided_identity(F1, F2, 10.5, mu, trunc=10.0, cfg=cfg,
                                 tolerance=1e-4)
        from fockgabor.fock import inner_product

        lead = inner_product(F2, F1, "closed_form") / 10.5
        assert abs(rep.details["cauchy_main"] - lead) <= 0.2 * abs(lead)


class TestInterpolation:
    L3, L4 = 0.25 + 0.5j, -0.75 + 0.25j

    def h2(self):
        return polynomial_times_kernel((self.L3, self.L4), 2.0 + 1j, "H2")

    def test_gap_small_at_half_cell_point(self, cfg):
        rep = interpolation_identity(self.h2(), self.L3, self.L4, 0.5 + 0.5j,
                                     trunc=12.0, cfg=cfg, tolerance=1e-4)
        assert rep.ok and rep.gap <= 1e-6

    def test_gap_does_not_grow_with_truncation(self, cfg):
        r12 = interpolation_identity(self.h2(), self.L3, self.L4, 0.5 + 0.5j,
                                     trunc=12.0, cfg=cfg)
        r16 = interpolation_identity(self.h2(), self.L3, self.L4, 0.5 + 0.5j,
                                     trunc=16.0, cfg=cfg)
        assert r16.gap <= r12.gap + 1e-9

    def test_residue_matching_at_w0(self, cfg):
        gap = interpolation_residue_gap(self.h2(), self.L3, self.L4,
                                        LatticeIndex(1, 0), cfg)
        assert gap <= 1e-6

    def test_exact_zero_sum_for_sigma0_data(self, cfg):
        # sigma0 vanishes on the punctured lattice, so every a_w term is an
        # exact zero and the truncated sum collapses to 0 (the pointwise
        # ratio side is outside this degenerate input's hypotheses)
        from fockgabor.corpus import sigma0_function

        s0 = sigma0_function(cfg)
        rep = interpolation_identity(s0, 1.0 + 0j, 2.0 + 0j, 0.5 + 0.5j,
                                     trunc=8.0, cfg=cfg, tolerance=math.inf)
        assert rep.lhs == 0.0

    def test_near_lattice_z_rejected(self, cfg):
        with pytest.raises(DomainError):
            interpolation_identity(self.h2(), self.L3, self.L4, 3.01 + 2.0j,
                                   trunc=8.0, cfg=cfg)

    def test_vanishing_precondition_enforced(self, cfg):
        bad = kernel_function(KernelSpec(1.0 + 1j))
        with pytest.raises(DomainError):
            interpolation_identity(bad, self.L3, self.L4, 0.5 + 0.5j,
                                   trunc=8.0, cfg=cfg)


def test_deflated_quotient_matches_plain_division_far_from_mu(cfg):
    mu = 1.5 + 0.5j
    F2 = vanishing_combo(mu, -0.5 - 0.5j, 0.5 + 1.5j)
    q = make_deflated_quotient(F2, mu)
    z = 4.0 - 2.0j
    want = F2.weighted_at(z).to_complex() / (z - mu)
    assert q.weighted_at(z).to_complex() == pytest.approx(want, rel=1e-12)
    # near mu the divided difference stays finite and smooth
    near = q.weighted_at(mu + 1e-6).to_complex()
    assert np.isfinite(near) and abs(near) < 10.0
