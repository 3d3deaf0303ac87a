from __future__ import annotations

import math

import numpy as np
import pytest

from fockgabor.construction import (
    ConstructionError,
    ConstructionParams,
    QTooSmallError,
    assemble_and_solve,
    bump_main_term,
    build_annihilator,
    build_products,
    build_profile,
    choose_vs,
    find_betas,
    orthogonality_rows,
    real_weighted,
    scan_zone_zeros,
    sigma3_function,
    verify_properties,
)
from fockgabor.core_num import DomainError, QuadratureSpec
from fockgabor.fock import (
    FockFunction,
    KernelSpec,
    inner_product_with_error,
    kernel_combination,
    kernel_sum_norm,
)

PI = math.pi


class TestParams:
    def test_doubling_levels(self):
        p = ConstructionParams(q=8, levels=3)
        assert p.u_values() == [8.0, 16.0, 32.0]

    def test_default_radius_covers_features(self):
        p = ConstructionParams(q=8, levels=3)
        assert p.quad_radius >= 32 + 2 * math.sqrt(32) + 8

    def test_radius_floor_enforced(self):
        with pytest.raises(DomainError):
            ConstructionParams(q=8, levels=3, quad_radius=20.0)

    def test_scale_floor(self):
        with pytest.raises(DomainError):
            ConstructionParams(q=3)


class TestProfile:
    def test_weighted_value_at_first_level(self, cfg):
        F = build_profile(ConstructionParams(q=8, levels=3), cfg)
        got = F.weighted_at(8.0).to_complex()
        want = 8 ** -0.5 * (1.0 - math.exp(-PI / 2))
        assert abs(got - want) <= 0.01

    def test_small_at_the_bump_midpoint(self, cfg):
        F = build_profile(ConstructionParams(q=8, levels=3), cfg)
        assert abs(F.weighted_at(8.5).to_complex()) <= 0.05

    def test_far_field_decay(self, cfg):
        F = build_profile(ConstructionParams(q=8, levels=3), cfg)
        assert abs(F.weighted_at(20j).to_complex()) <= 1e-6

    def test_real_on_the_line(self, cfg):
        F = build_profile(ConstructionParams(q=8, levels=3), cfg)
        xs = np.linspace(-20, 40, 50)
        vals = real_weighted(F, xs)         # raises if any phase is off-axis
        assert np.isfinite(vals).all()

    def test_decomposition_consistency(self, cfg):
        from fockgabor.fock import kernel_weighted_eval
        from fockgabor.weierstrass import sigma3_weighted

        F = build_profile(ConstructionParams(q=8, levels=2), cfg)
        rng = np.random.default_rng(10)
        z = rng.uniform(-5, 20, 100) + 1j * rng.uniform(-4, 4, 100)
        direct = sigma3_weighted(z, cfg).to_complex()
        for c, lam in F.kernel_terms:
            direct = direct + c * kernel_weighted_eval(KernelSpec(lam), z).to_complex()
        got = F.weighted(z).to_complex()
        scale = np.maximum(np.abs(direct), 1e-12)
        assert np.max(np.abs(got - direct) / scale) <= 1e-10


class TestRoots:
    def test_symmetric_pair_has_exact_half_offset(self):
        # pure two-bump profile: the root sits at u + 1/2 by symmetry
        u = 12.0
        pair = kernel_combination([(u ** -0.5, u), (-(u ** -0.5), u + 1.0)], "pair")
        lo, hi = u + 1.0 / 3.0, u + 2.0 / 3.0
        flo = pair.weighted_at(lo).to_complex().real
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fm = pair.weighted_at(mid).to_complex().real
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        assert abs(mid - u - 0.5) <= 1e-6

    def test_betas_in_window_and_tending_to_half(self, built):
        for b in built.betas:
            assert 1.0 / 3.0 < b < 2.0 / 3.0
        assert abs(built.betas[2] - 0.5) < abs(built.betas[0] - 0.5)

    def test_beta_residual_below_root_tolerance(self, built, cfg):
        for u, b in zip(built.params.u_values(), built.betas):
            w = built.F.weighted_at(u + b)
            resid = 0.0 if np.isneginf(w.log_mag) else math.exp(w.log_mag)
            assert resid <= built.params.tol_root


class TestZeroScan:
    def test_no_count_mismatches(self, built):
        assert built.scan.count_mismatches == []

    def test_zeros_polished_to_tolerance(self, built):
        for lam in built.lambda2[:10]:
            w = built.F.weighted_at(complex(lam))
            resid = 0.0 if np.isneginf(w.log_mag) else math.exp(w.log_mag)
            assert resid <= built.params.tol_root

    def test_zero_set_is_conjugation_symmetric(self, built):
        zs = built.lambda2
        for z in zs:
            assert np.min(np.abs(zs - np.conjugate(z))) <= 1e-5

    def test_margins_and_separations(self, built):
        from fockgabor.weierstrass import dist_to_lattice

        pts = built.lambda2
        assert np.min(dist_to_lattice(pts)) >= built.params.lattice_margin
        everything = list(pts) + [complex(v) for v in built.vs]
        for i in range(len(everything)):
            for j in range(i + 1, len(everything)):
                assert abs(everything[i] - everything[j]) >= 0.04


class TestChoice:
    def test_perfect_square_scale_nudges_off_the_lattice(self, cfg):
        # u1 = 9 puts the unperturbed candidate at 9 - 3 = 6, a lattice point
        params = ConstructionParams(q=9, levels=1)
        F = build_profile(params, cfg)
        betas = find_betas(F, params)
        vs = choose_vs(F, betas, params)
        assert abs(vs[0] - 6.0) >= 0.05
        assert abs(vs[0] - 6.0) <= 0.06 + 1e-12

    def test_default_scale_choice(self, built):
        assert built.vs[0] == pytest.approx(8 - math.sqrt(8), abs=0.06)
        for v, u in zip(built.vs, built.params.u_values()):
            assert abs(v - (u - math.sqrt(u))) <= 1.0


class TestProducts:
    def test_products_are_one_at_origin(self, built):
        assert built.bundle.s_values(0.0) == pytest.approx(1.0)
        assert built.bundle.g1_values(0.0) == pytest.approx(1.0)

    def test_ratio_bounds_measured(self, built):
        lo, hi = built.bundle.ratio_panel["plain_off_disks"]
        assert 0 < lo <= hi < math.inf
        lo2, hi2 = built.bundle.ratio_panel["compensated_on_disks"]
        assert 0 < lo2 <= hi2 < math.inf

    def test_g2_deflation_is_smooth_through_the_root(self, built):
        r = built.bundle.roots_s[0]
        vals = built.bundle.G2.weighted(np.array([r - 0.015, r - 0.005, r,
                                                  r + 0.005, r + 0.015])).to_complex()
        assert np.isfinite(vals).all()
        # second difference stays at curvature scale: no jump across the patch
        assert abs(vals[0] - 2 * vals[2] + vals[4]) <= 0.05

    def test_weighted_g_lower_bound_on_bump_disks(self, built):
        # |W_G| >= c * u^{-1/2} at the bump cores, the completeness driver
        for u in built.params.u_values():
            z = u + 0.25 * np.exp(2j * PI * np.arange(8) / 8.0)
            vals = np.exp(np.asarray(built.bundle.G.weighted(z).log_mag))
            assert vals.min() >= 0.02 * u ** -0.5

    def test_overlap_guard(self, cfg):
        params = ConstructionParams(q=8, levels=2)
        F = build_profile(params, cfg)
        betas = find_betas(F, params)
        with pytest.raises(ConstructionError):
            build_products(F, betas, [8 + betas[0] - 0.05, 12.05], params)


class TestSolve:
    def test_degenerate_single_level(self, cfg):
        params = ConstructionParams(q=8, levels=1)
        F = build_profile(params, cfg)
        betas = find_betas(F, params)
        vs = choose_vs(F, betas, params)
        bundle = build_products(F, betas, vs, params)
        rep = assemble_and_solve(bundle, params, cfg)
        assert rep.ds[0] == pytest.approx(rep.gammas[0])  # 1x1 system: d = gamma
        assert rep.xi.shape == (1, 1) and rep.xi[0, 0] == 1.0

    def test_full_solve_panel(self, built):
        rep = built.solve
        assert rep.dominance_margin > 0
        assert all(-1 < d < 1 for d in rep.ds)
        assert all(s > 0 for s in rep.diag_scaling)
        assert rep.cross_bound < 20.0
        assert rep.sigma3_bound < 2.0

    def test_diagonal_of_xi_is_one(self, built):
        assert np.allclose(np.diag(built.solve.xi), 1.0)


class TestAnnihilator:
    def test_zero_coefficients_give_sigma3(self, cfg):
        params = ConstructionParams(q=8, levels=2)
        H = build_annihilator([0.0, 0.0], params, cfg)
        s3 = sigma3_function(cfg)
        z = np.array([0.3 + 0.2j, 5.0 + 1j, -2.0])
        assert np.allclose(H.weighted(z).to_complex(), s3.weighted(z).to_complex())

    def test_perturbation_norm_bounded_by_triangle_inequality(self, built):
        h_pert = kernel_sum_norm(built.H.kernel_terms)
        bound = sum(abs(d) * u ** (-1.0 / 3.0)
                    for d, u in zip(built.ds, built.params.u_values()))
        assert h_pert <= bound + 1e-12


class TestProperties:
    def test_full_panel(self, built, cfg):
        rep = verify_properties(built, cfg)
        assert rep.status["p2"] and rep.p2_residual <= 2 * built.params.tol_root
        assert rep.status["p3"] and max(rep.p3_residuals) <= 1e-6
        assert rep.status["p4_imag"] and abs(rep.p4_value.imag) <= 1e-6
        assert rep.status["p4_nonzero"]
        assert rep.p4_value.real >= 0.5 * rep.sigma3_norm_sq
        assert rep.status["p4_closed_consistent"]
        assert rep.status["g_norms_finite"] and rep.status["f_lower_positive"]
        assert rep.ok

    def test_sensitivity_of_p3_to_d_perturbation(self, built, cfg):
        # <g_1, H + eps*u1^{-1/3} nk_{u1}> moves by eps*u1^{-1/3}*<g_1, nk_{u1}>
        params = built.params
        eps = 0.1
        ds = list(built.ds)
        ds[0] += eps
        h_pert = build_annihilator(ds, params, cfg)
        g1 = built.bundle.g_at(built.vs[0])
        val, err = inner_product_with_error(g1, h_pert, params.quad_spec())
        u1 = params.u_values()[0]
        predicted = eps * u1 ** (-1.0 / 3.0) * g1.weighted_at(complex(u1)).to_complex().real
        assert abs(val.real - predicted) <= 1e-4 * abs(predicted) + 1e-8

    def test_fo3_panel_scaled_remainder_settles(self, built):
        top = built.params.u_values()[-1]
        assert built.fo3_panel[top]["scaled_by_u4"] <= 10.0


class TestOrthogonalityRows:
    def test_rows_small_against_control(self, built, cfg):
        rows = orthogonality_rows(built, n_max=1, cfg=cfg)
        main = [r for r in rows if not r["control"]]
        control = [r for r in rows if r["control"]][0]
        for r in main:
            assert abs(r["value"]) <= 5e-6
        assert abs(control["value"]) > 10.0 * max(abs(r["value"]) for r in main)

    def test_linearity_in_the_annihilator(self, built, cfg):
        # doubling the function in the second slot doubles the pairing
        g2 = built.bundle.G2
        spec = built.params.quad_spec()
        v1, _ = inner_product_with_error(g2, built.H, spec)
        doubled = _scale_function(built.H, 2.0)
        v2, _ = inner_product_with_error(g2, doubled, spec)
        assert abs(v2 - 2.0 * v1) <= 1e-10 * max(1.0, abs(v1))


def _scale_function(f: FockFunction, factor: float) -> FockFunction:
    import numpy as _np

    from fockgabor.core_num import LogComplex

    lg = math.log(factor)

    def weighted(z):
        base = f.weighted(z)
        return LogComplex(_np.asarray(base.log_mag) + lg, _np.asarray(base.phase))

    return FockFunction(label=f"{factor}*{f.label}", weighted=weighted,
                        feature_radius=f.feature_radius,
                        gaussian_tail=f.gaussian_tail)


def test_three_point_identity_with_built_system(built, cfg):
    # dividing G by its three Lambda1 factors leaves a constant times G2, and
    # H annihilates that pairing; both identity sides sit near zero together
    import numpy as _np

    from fockgabor.core_num import LogComplex
    from fockgabor.lattice_series import DivisibleFunction, three_point_identity

    bundle = built.bundle
    const = 1.0
    for v in built.vs:
        const *= -1.0 / v
    shift = LogComplex.from_complex(complex(const))

    def quotient(roots):
        def weighted(z):
            base = bundle.G2.weighted(z)
            return LogComplex(_np.asarray(base.log_mag) + shift.log_mag,
                              _np.asarray(base.phase) + shift.phase)

        return FockFunction(label="G/(three factors)", weighted=weighted,
                            feature_radius=bundle.F.feature_radius,
                            gaussian_tail=False)

    G = DivisibleFunction(whole=bundle.G, quotient=quotient)
    rep = three_point_identity(G, tuple(complex(v) for v in built.vs), built.H,
                               trunc=12.0, cfg=cfg, tolerance=1e-4)
    assert abs(rep.lhs) <= 1e-4
    assert rep.gap <= 1e-4


def test_no_sign_change_raises_q_too_small(cfg):
    # an artificial profile with one bump only (no sign change in the window)
    params = ConstructionParams(q=8, levels=1)
    lone = kernel_combination([(1.0, 8.0)], "lone-bump")
    with pytest.raises(QTooSmallError):
        find_betas(lone, params)
