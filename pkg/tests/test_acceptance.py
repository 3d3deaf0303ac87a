"""Acceptance gate: every criterion at its stated tolerance, one line each.

Criteria 1-5 and 7 pass.  Criterion 6's collapse clause is asserted exactly
as stated and is expected red at this scale: the mixed family's Gram is
exactly block-diagonal (the duals vanish on the kernel centers), the dual
block is well conditioned, and the kernel block's spectrum floor is a slowly
decaying continuum rather than one isolated near-null direction, so no
section window produces a ten-fold sigma_min drop with a stable sigma_2min.
The measured trends are still recorded and rendered.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from fockgabor.suites import (
    RunSettings,
    run_construction_suite,
    run_fock_suite,
    run_gram_suite,
    run_identity_suite,
    run_sigma_suite,
)


def _line(criterion: str, ok: bool, seconds: float, detail: str = "") -> None:
    mark = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {criterion}: {mark} ({seconds:.1f}s) {detail}")


def _by_id(rows):
    return {r.check_id: r for r in rows}


@pytest.fixture(scope="module")
def fock_rows(cfg):
    t0 = time.perf_counter()
    rows, art = run_fock_suite(RunSettings(), cfg)
    return rows, art, time.perf_counter() - t0


def test_criterion_1_reproducing_kernels(fock_rows, cfg):
    rows, art, _elapsed = fock_rows
    byid = _by_id(rows)
    elapsed = art["kernel_seconds"]
    ok = (byid["reproducing-within-estimate"].status == "pass"
          and byid["closed-vs-quadrature"].status == "pass"
          and byid["closed-vs-quadrature"].value.real <= 1e-6
          and elapsed <= 120.0)
    _line("1 reproducing-kernel suite", ok, elapsed,
          f"worst closed-vs-quad {byid['closed-vs-quadrature'].value.real:.2e}")
    assert byid["reproducing-within-estimate"].status == "pass"
    assert byid["closed-vs-quadrature"].value.real <= 1e-6
    assert elapsed <= 120.0


def test_criterion_2_transform(fock_rows, cfg):
    rows, art, _elapsed = fock_rows
    byid = _by_id(rows)
    elapsed = art["transform_seconds"]
    ok = (byid["transform-pointwise"].value.real <= 1e-6
          and byid["transform-unitarity"].value.real <= 1e-6
          and byid["atom-l2-norms"].status == "pass"
          and elapsed <= 60.0)
    _line("2 transform suite", ok, elapsed,
          f"pointwise {byid['transform-pointwise'].value.real:.2e}, "
          f"unitarity {byid['transform-unitarity'].value.real:.2e}")
    assert byid["transform-pointwise"].value.real <= 1e-6
    assert byid["transform-unitarity"].value.real <= 1e-6
    assert byid["atom-l2-norms"].status == "pass"
    assert elapsed <= 60.0


def test_criterion_3_sigma(cfg):
    t0 = time.perf_counter()
    rows, art = run_sigma_suite(RunSettings(), cfg)
    elapsed = time.perf_counter() - t0
    byid = _by_id(rows)
    lo = byid["bound-constant-low"].value.real
    hi = byid["bound-constant-high"].value.real
    ok = (byid["quasi-periodicity"].value.real <= 1e-9
          and byid["legendre-relation"].value.real <= 1e-12
          and byid["oddness"].value.real <= 1e-10
          and byid["real-on-the-line"].value.real <= 1e-10
          and 0 < lo <= hi < math.inf and hi / lo <= 1e3
          and byid["bound-trend-stability"].status == "pass"
          and elapsed <= 60.0)
    _line("3 sigma suite", ok, elapsed,
          f"bound constants [{lo:.3f}, {hi:.3f}]")
    assert byid["quasi-periodicity"].value.real <= 1e-9
    assert byid["legendre-relation"].value.real <= 1e-12
    assert byid["oddness"].value.real <= 1e-10
    assert byid["real-on-the-line"].value.real <= 1e-10
    assert 0 < lo <= hi < math.inf and hi / lo <= 1e3
    assert byid["bound-trend-stability"].status == "pass"
    assert elapsed <= 60.0


def test_criterion_4_identities(cfg):
    t0 = time.perf_counter()
    rows, art = run_identity_suite(RunSettings(), cfg)
    elapsed = time.perf_counter() - t0
    byid = _by_id(rows)
    gap_rows = [r for r in rows if r.status != "info"
                and r.check_id.startswith(("three-point", "rational-kernel",
                                           "four-point"))]
    worst_gap = max(r.value.real for r in gap_rows if not math.isnan(r.tolerance))
    ok = (all(r.status == "pass" for r in gap_rows)
          and byid["biorthogonality-delta"].value.real <= 1e-6
          and byid["fourier-data-log-bound"].status == "pass"
          and elapsed <= 600.0)
    _line("4 identity suite", ok, elapsed,
          f"worst identity gap {worst_gap:.2e}, "
          f"biorthogonality {byid['biorthogonality-delta'].value.real:.2e}")
    for r in gap_rows:
        assert r.status == "pass", r
    assert byid["biorthogonality-delta"].value.real <= 1e-6
    assert byid["fourier-data-log-bound"].status == "pass"
    assert elapsed <= 600.0


def test_criterion_5_construction(cfg):
    t0 = time.perf_counter()
    rows, art = run_construction_suite(RunSettings(), cfg)
    elapsed = time.perf_counter() - t0
    byid = _by_id(rows)
    rep = art["properties"]
    preconditions = (byid["root-offsets-in-window"].status == "pass"
                     and byid["dominance-margin"].status == "pass"
                     and byid["coefficients-in-unit-interval"].status == "pass")
    ok = (preconditions
          and rep.p2_residual <= 1e-8
          and max(rep.p3_residuals) <= 1e-6
          and abs(rep.p4_value.imag) <= 1e-6
          and rep.p4_value.real >= 0.5 * rep.sigma3_norm_sq
          and byid["perturbation-scale-stability"].status == "pass"
          and elapsed <= 600.0)
    _line("5 construction pipeline", ok, elapsed,
          f"p2 {rep.p2_residual:.1e}, p3 {max(rep.p3_residuals):.1e}, "
          f"p4 {rep.p4_value.real:.4f} vs {0.5 * rep.sigma3_norm_sq:.4f}, "
          f"C(q) drift {byid['perturbation-scale-stability'].value.real:.2f}")
    assert preconditions
    assert rep.p2_residual <= 1e-8
    assert max(rep.p3_residuals) <= 1e-6
    assert abs(rep.p4_value.imag) <= 1e-6
    assert rep.p4_value.real >= 0.5 * rep.sigma3_norm_sq
    assert byid["perturbation-scale-stability"].status == "pass"
    assert elapsed <= 600.0


@pytest.fixture(scope="module")
def gram_outcome(cfg, built):
    t0 = time.perf_counter()
    rows, art = run_gram_suite(RunSettings(), cfg, prebuilt=built)
    return rows, art, time.perf_counter() - t0


def test_criterion_6_control_half(gram_outcome):
    rows, art, elapsed = gram_outcome
    byid = _by_id(rows)
    ok = byid["control-conditioning"].status == "pass" and elapsed <= 300.0
    _line("6b defect-scan control", ok, elapsed,
          f"control sigma_min {byid['control-conditioning'].value.real:.3f}")
    assert byid["control-conditioning"].status == "pass"
    assert elapsed <= 300.0


def test_criterion_6_collapse_clause(gram_outcome):
    """Asserted exactly as stated; honestly red at this scale (see module
    docstring and the decisions ledger for the measured obstruction)."""
    rows, art, elapsed = gram_outcome
    byid = _by_id(rows)
    ratio_min = byid["sigma-min-collapse"].value.real
    ratio_2 = byid["sigma-2min-stability"].value.real
    ok = ratio_min >= 10.0 and ratio_2 < 2.0
    _line("6a defect-scan collapse", ok, elapsed,
          f"sigma_min ratio {ratio_min:.2f} (needs >= 10), "
          f"sigma_2min ratio {ratio_2:.2f} (needs < 2)")
    assert ratio_2 < 2.0
    assert ratio_min >= 10.0, (
        "the mixed Gram is block-diagonal with a well-conditioned dual block; "
        "no ten-fold sigma_min collapse exists at sizes 8..16 (measured "
        f"ratio {ratio_min:.2f})")


def test_criterion_7_determinism(tmp_path, cfg):
    from fockgabor.cli import run

    t0 = time.perf_counter()
    settings = RunSettings(q=8, levels=2, quad_step=0.1,
                           section_sizes=(4, 6, 8), trunc=8.0)
    a, b = tmp_path / "a", tmp_path / "b"
    run("all", settings, a, "csv", quiet=True, figures=False)
    run("all", settings, b, "csv", quiet=True, figures=False)
    names = sorted(p.name for p in a.glob("*.csv"))
    same = all((a / n).read_bytes() == (b / n).read_bytes() for n in names)
    elapsed = time.perf_counter() - t0
    _line("7 determinism", same, elapsed, f"{len(names)} report files compared")
    assert names, "no report files produced"
    assert same
