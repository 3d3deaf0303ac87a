r"""Lattice expansions against the normalized kernels nk_w, w in Z0 = Z \ {0}.

The system {nk_w} over the punctured square lattice is complete and minimal
with generating function sigma0 = sigma/z, and its biorthogonal family is

    e_w = (||k_w|| / sigma0'(w)) * sigma0 / (. - w).

Two coefficient streams attach to every F in the space:

    a_w = F(w) / ||k_w||           (Lagrange interpolation data; an l^2 sequence)
    b_w = <e_w, F>                 (Fourier data; |b_w|^2 grows at most like log |w|)

Neither formal series need converge, but three exact identities tie truncated
versions of them to plane integrals, and those are what this module checks:

  * the three-point identity
        <G/((.-l1)(.-l2)(.-l3)), F> =
            sum over w of G(w) b_w / ((w-l1)(w-l2)(w-l3) ||k_w||);
  * the two-sided rational identity: for F2(mu) = 0,
        sum a_w b_w [1/(z-w) + 1/(w-mu)] =
            Cauchy(conj(F1) F2)(z)
            - (F2(z)/sigma0(z)) * Cauchy(conj(F1) sigma0)(z)
            + <F2/(.-mu), F1>,
    with Cauchy(P)(z) = integral of P(xi)/(z-xi) dm2(xi) over weighted data;
  * the four-point interpolation identity
        sum a_w ||k_w|| / (sigma0'(w)(z-w)(l3-w)(l4-w)) =
            H2(z) / (sigma0(z)(z-l3)(z-l4)),
    valid for H2 vanishing at l3, l4.

The Cauchy integrals handle the 1/(z-xi) singularity by subtracting
P(z) * exp(-pi*|xi-z|^2), whose own Cauchy integral vanishes identically by
circular symmetry; the subtracted integrand is bounded, so plain midpoint
quadrature applies with no excluded disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core_num import (
    DomainError,
    LogComplex,
    QuadratureSpec,
    integrate_plane,
    log_sum,
)
from .fock import FockFunction, inner_product_with_error
from .weierstrass import (
    LatticeIndex,
    SigmaConfig,
    default_config,
    lattice_points_in_radius,
    sigma0_prime_at_lattice,
    sigma0_weighted,
    sigma_weighted,
)

PI = math.pi


@dataclass(frozen=True)
class LatticeCoefficients:
    """A truncated coefficient table (kind 'a' or 'b') for one function."""

    entries: dict
    kind: str
    source_label: str
    truncation_radius: float

    def radial_partial_sums(self) -> list[tuple[float, float]]:
        """Nondecreasing partial sums of |coeff|^2 by lattice radius."""
        items = sorted(self.entries.items(), key=lambda kv: (abs(kv[0].value), kv[0].m, kv[0].n))
        out, acc = [], 0.0
        for w, c in items:
            acc += abs(c) ** 2
            out.append((abs(w.value), acc))
        return out

    def log_bound_constant(self) -> float:
        """Measured sup of |b_w|^2 / log(1 + |w|) over the table."""
        best = 0.0
        for w, c in self.entries.items():
            best = max(best, abs(c) ** 2 / math.log(1.0 + abs(w.value)))
        return best


def coeff_a(F: FockFunction, w: LatticeIndex) -> complex:
    """a_w = F(w)/||k_w||, which is exactly the weighted evaluation at w."""
    return F.weighted_at(w.value).to_complex()


def biorthogonal_function(w: LatticeIndex, cfg: SigmaConfig | None = None,
                          prime_step: float = 1e-5) -> FockFunction:
    """The biorthogonal element (||k_w||/sigma0'(w)) * sigma0/(. - w).

    The quotient sigma0/(z - w) is evaluated through the lattice reduction, so
    the zero of sigma0 at w cancels analytically; no deflation window is
    needed.  The overall scale ||k_w||/sigma0'(w) is formed in the log domain
    (its magnitude is about |w| even though both factors overflow).
    """
    cfg = cfg or default_config()
    w.require_nonzero()
    wv = w.value
    prime = sigma0_prime_at_lattice(w, cfg, step=prime_step)
    scale = LogComplex(PI * abs(wv) ** 2 / 2.0, 0.0) / prime.scaled(PI * abs(wv) ** 2 / 2.0)

    def weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        m = np.round(z.real)
        n = np.round(z.imag)
        at_w = (m == wv.real) & (n == wv.imag)
        # off the w cell: plain quotient of the weighted sigma0
        denom = np.where(at_w, 1.0, z - wv)
        base = sigma0_weighted(z, cfg)
        d = LogComplex.from_complex(denom)
        lm = np.asarray(base.log_mag) - np.asarray(d.log_mag)
        ph = np.asarray(base.phase) - np.asarray(d.phase)
        if np.any(at_w):
            # inside the w cell: sigma(z)/(z(z-w)) with the (z-w) factor
            # cancelled against the reduction of sigma
            from .weierstrass import _deflated_parts

            _z0, _w, _at, lm_def, ph_def = _deflated_parts(z, cfg)
            dz = LogComplex.from_complex(z)
            lm = np.where(at_w, lm_def - np.asarray(dz.log_mag), lm)
            ph = np.where(at_w, ph_def - np.asarray(dz.phase), ph)
        return LogComplex(lm + scale.log_mag, ph + scale.phase)

    return FockFunction(
        label=f"biorth[{wv:g}]",
        weighted=weighted,
        feature_radius=abs(wv),
        gaussian_tail=False,
        growth_tag="polynomial",
    )


def coeff_b(F: FockFunction, w: LatticeIndex, spec: QuadratureSpec | None = None,
            cfg: SigmaConfig | None = None) -> complex:
    """b_w = <e_w, F> by quadrature; cross-checked against the reproducing
    closed form when F decomposes over kernels."""
    cfg = cfg or default_config()
    e_w = biorthogonal_function(w, cfg)
    val, err = inner_product_with_error(e_w, F, spec)
    if F.is_pure_kernel_sum():
        closed = 0.0 + 0.0j
        for c, lam in F.kernel_terms:
            closed += np.conjugate(c) * np.conjugate(e_w.weighted_at(lam).to_complex())
        closed = np.conjugate(closed)
        if abs(val - closed) > 50.0 * err + 1e-9:
            from .core_num import NumericalFailure

            raise NumericalFailure(
                f"coeff_b quadrature {val} disagrees with closed form {closed} at w={w}"
            )
    return val


def _dense_grid(spec: QuadratureSpec) -> np.ndarray:
    from .core_num import _axis_nodes

    xs = _axis_nodes(spec.truncation_radius, spec.step)
    return xs[None, :] + 1j * xs[:, None]


def coeff_b_many(F: FockFunction, ws: Sequence[LatticeIndex],
                 spec: QuadratureSpec | None = None,
                 cfg: SigmaConfig | None = None) -> dict:
    """Batched b_w over many lattice points sharing one quadrature grid.

    The sigma0 grid and the F grid are each evaluated once; every w then costs
    a single Cauchy-factor multiply.  (Memory note: the grid is materialized
    densely, about 16 bytes per node.)
    """
    cfg = cfg or default_config()
    if spec is None:
        floor = 8.0 if F.gaussian_tail else 14.0
        rad = max(floor, F.feature_radius + 6.0)
        spec = QuadratureSpec(truncation_radius=rad, step=0.05)
    Z = _dense_grid(spec)
    base = sigma0_weighted(Z, cfg)
    base_c = base.to_complex()
    f_c = np.conjugate(F.weighted(Z).to_complex())
    h2 = spec.step**2
    out = {}
    for w in ws:
        w.require_nonzero()
        wv = w.value
        prime = sigma0_prime_at_lattice(w, cfg)
        scale = (LogComplex(PI * abs(wv) ** 2 / 2.0, 0.0)
                 / prime.scaled(PI * abs(wv) ** 2 / 2.0)).to_complex()
        vals = base_c / (Z - wv)
        out[w] = complex(scale * np.sum(vals * f_c) * h2)
    return out


def check_cl3(w_max: float, cfg: SigmaConfig | None = None,
              step: float = 0.05) -> dict:
    """Norms ||sigma0/(. - w)|| for all w in Z0 with |w| <= w_max.

    The integrand decays only like |z|^{-4}, so the quadrature square is
    completed with the analytic tail
        ubar2 * pi/|w|^2 * log(R^2/(R^2 - |w|^2)),
    where ubar2 is the cell mean of |sigma0(z) z e^{-pi|z|^2/2}|^2 -- accurate
    to a few parts in 1e3, which is what the recorded ratio constants carry.
    Returns a report dict with per-w norms and the growth ratio
    ||.|| * |w| / sqrt(log(1 + |w|)).
    """
    if w_max < 4:
        raise DomainError("w_max must be >= 4")
    cfg = cfg or default_config()
    rad = float(w_max + 8.0)
    spec = QuadratureSpec(truncation_radius=rad, step=step)
    Z = _dense_grid(spec)
    s0 = sigma0_weighted(Z, cfg)
    mag2 = np.exp(2.0 * np.asarray(s0.log_mag))
    h2 = spec.step**2
    # cell mean of u^2 = |sigma(z)|^2 e^{-pi|z|^2} over the fundamental cell
    xs = np.linspace(-0.5, 0.5, 201)[:-1] + 1.0 / 400.0
    cell = xs[None, :] + 1j * xs[:, None]
    u2 = np.exp(2.0 * np.asarray(sigma_weighted(cell, cfg).log_mag))
    ubar2 = float(np.mean(u2))
    norms = {}
    ratios = {}
    for w in lattice_points_in_radius(w_max):
        wv = w.value
        quad = float(np.sum(mag2 / np.abs(Z - wv) ** 2) * h2)
        tail = ubar2 * PI / abs(wv) ** 2 * math.log(rad**2 / (rad**2 - abs(wv) ** 2))
        nrm = math.sqrt(quad + tail)
        norms[w] = nrm
        ratios[w] = nrm * abs(wv) / math.sqrt(math.log(1.0 + abs(wv)))
    return {
        "norms": norms,
        "ratios": ratios,
        "ratio_max": max(ratios.values()),
        "ubar2": ubar2,
        "radius": rad,
    }


# ---------------------------------------------------------------------------
# Deflated quotients and Cauchy integrals
# ---------------------------------------------------------------------------

def make_deflated_quotient(F: FockFunction, mu: complex, window: float = 1e-2,
                           label: str | None = None) -> FockFunction:
    """F/(. - mu) for F vanishing at mu, via the divided difference
    [F(z) - F(mu)]/(z - mu) inside ``window`` (stable against the cancelling
    zero) and plain division outside."""
    mu = complex(mu)
    w_mu = F.weighted_at(mu)

    def weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        d = z - mu
        near = np.abs(d) < window
        safe = np.where(np.abs(d) < 1e-300, 1.0, d)
        base = F.weighted(z)
        lmb = np.asarray(base.log_mag)
        phb = np.asarray(base.phase)
        # F(mu) re-weighted to each z: W(mu) * exp(pi(|mu|^2 - |z|^2)/2)
        shift = PI * (abs(mu) ** 2 - np.abs(z) ** 2) / 2.0
        from .core_num import log_sum_axis

        lms = np.stack([lmb, np.broadcast_to(w_mu.log_mag + shift, lmb.shape)])
        phs = np.stack([phb, np.broadcast_to(
            np.full_like(lmb, w_mu.phase + PI), phb.shape)])
        dd = log_sum_axis(lms, phs, axis=0)
        dv = LogComplex.from_complex(safe)
        lm_near = np.asarray(dd.log_mag) - np.asarray(dv.log_mag)
        ph_near = np.asarray(dd.phase) - np.asarray(dv.phase)
        lm_far = lmb - np.asarray(dv.log_mag)
        ph_far = phb - np.asarray(dv.phase)
        return LogComplex(np.where(near, lm_near, lm_far),
                          np.where(near, ph_near, ph_far))

    return FockFunction(
        label=label or f"({F.label})/(z-{mu:g})",
        weighted=weighted,
        feature_radius=F.feature_radius,
        gaussian_tail=F.gaussian_tail,
    )


def cauchy_transform(product_vals: Callable[[np.ndarray], np.ndarray], z0: complex,
                     spec: QuadratureSpec) -> tuple[complex, float]:
    """integral of P(xi)/(z0 - xi) dm2(xi) for a bounded weighted product P.

    Subtracts P(z0) exp(-pi*|xi - z0|^2), whose Cauchy integral is exactly
    zero by symmetry, leaving a bounded integrand.
    """
    z0 = complex(z0)
    p0 = complex(product_vals(np.asarray([z0], dtype=complex))[0])

    def integrand(z: np.ndarray) -> LogComplex:
        d = z0 - z
        p = product_vals(z) - p0 * np.exp(-PI * np.abs(d) ** 2)
        tiny = np.abs(d) < 1e-12
        vals = np.where(tiny, 0.0, p / np.where(tiny, 1.0, d))
        return LogComplex.from_complex(vals)

    return integrate_plane(integrand, spec)


# ---------------------------------------------------------------------------
# Identity checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivisibleFunction:
    """A function together with a stable way to divide out simple zeros."""

    whole: FockFunction
    quotient: Callable[[tuple[complex, ...]], FockFunction]


@dataclass(frozen=True)
class IdentityReport:
    lhs: complex
    rhs: complex
    gap: float
    tolerance: float
    tail_estimate: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.gap <= self.tolerance


def shifted_lattice_generator(a: complex, cfg: SigmaConfig | None = None) -> DivisibleFunction:
    """Generating function of the kernel system over the shifted lattice Z + a:

        G_a(z) = sigma(z - a) * exp(pi * conj(a) z - pi |a|^2 / 2),

    whose weighted evaluation collapses to W_sigma(z - a) times the unimodular
    factor exp(i*pi*Im(conj(a) z)).  Division by root factors is delegated to
    the reduction-deflated sigma quotient, so quotients stay exact near their
    roots.  Used as a clean synthetic test bed for the identity checks
    (all of Z + a avoids the lattice when a does).
    """
    cfg = cfg or default_config()
    a = complex(a)
    from .weierstrass import dist_to_lattice, sigma_divided_weighted

    if dist_to_lattice(a) < 0.04:
        raise DomainError("shift must stay off the lattice")

    def twist(z: np.ndarray) -> np.ndarray:
        return PI * (a.real * np.asarray(z).imag - a.imag * np.asarray(z).real)

    def weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        base = sigma_weighted(z - a, cfg)
        return LogComplex(np.asarray(base.log_mag), np.asarray(base.phase) + twist(z))

    whole = FockFunction(
        label=f"latgen[{a:g}]",
        weighted=weighted,
        feature_radius=abs(a) + 1.0,
        gaussian_tail=False,
        growth_tag="polynomial",
    )

    def quotient(roots: tuple) -> FockFunction:
        lat_roots = tuple(complex(r) - a for r in roots)

        def qweighted(z: np.ndarray) -> LogComplex:
            z = np.asarray(z, dtype=complex)
            base = sigma_divided_weighted(z - a, lat_roots, cfg)
            return LogComplex(np.asarray(base.log_mag), np.asarray(base.phase) + twist(z))

        return FockFunction(
            label=f"latgen[{a:g}]/roots",
            weighted=qweighted,
            feature_radius=abs(a) + 1.0,
            gaussian_tail=False,
            growth_tag="polynomial",
        )

    return DivisibleFunction(whole=whole, quotient=quotient)


def _lattice_window(trunc: float) -> list[LatticeIndex]:
    return lattice_points_in_radius(trunc)


def three_point_identity(G: DivisibleFunction, lams: tuple[complex, complex, complex],
                         F: FockFunction, trunc: float,
                         spec: QuadratureSpec | None = None,
                         cfg: SigmaConfig | None = None,
                         tolerance: float = 1e-4) -> IdentityReport:
    """Check <G/((.-l1)(.-l2)(.-l3)), F> against its lattice-sum form."""
    cfg = cfg or default_config()
    l1, l2, l3 = (complex(l) for l in lams)
    if min(abs(l1 - l2), abs(l1 - l3), abs(l2 - l3)) < 1e-9:
        raise DomainError("the three points must be distinct")
    quot = G.quotient((l1, l2, l3))
    lhs, lhs_err = inner_product_with_error(quot, F, spec)
    ws = _lattice_window(trunc)
    b = coeff_b_many(F, ws, cfg=cfg)
    rhs = 0.0 + 0.0j
    ring_peak = 0.0
    for w in ws:
        wv = w.value
        term = (G.whole.weighted_at(wv).to_complex() * b[w]
                / ((wv - l1) * (wv - l2) * (wv - l3)))
        rhs += term
        if abs(wv) > trunc - 1.5:
            ring_peak = max(ring_peak, abs(term))
    tail = ring_peak * 2.0 * math.pi * trunc * 2.0
    gap = abs(lhs - rhs)
    return IdentityReport(lhs=complex(lhs), rhs=complex(rhs), gap=gap,
                          tolerance=tolerance, tail_estimate=tail,
                          details={"lhs_err": lhs_err})


def two_sided_identity(F1: FockFunction, F2: FockFunction, z: complex, mu: complex,
                       trunc: float, spec: QuadratureSpec | None = None,
                       cfg: SigmaConfig | None = None,
                       tolerance: float = 1e-4) -> IdentityReport:
    """Check the rational-kernel identity tying a_w (from F2) and b_w (from F1)
    to two Cauchy transforms and a deflated inner product; needs F2(mu) = 0."""
    cfg = cfg or default_config()
    z = complex(z)
    mu = complex(mu)
    w2mu = F2.weighted_at(mu)
    if not np.isneginf(w2mu.log_mag) and math.exp(w2mu.log_mag) > 1e-8:
        raise DomainError(f"F2 must vanish at mu (weighted residual {math.exp(w2mu.log_mag):.2e})")
    ws = _lattice_window(trunc)
    b = coeff_b_many(F1, ws, cfg=cfg)
    lhs = 0.0 + 0.0j
    ring_peak = 0.0
    for w in ws:
        wv = w.value
        a_w = F2.weighted_at(wv).to_complex()
        term = a_w * b[w] * (1.0 / (z - wv) + 1.0 / (wv - mu))
        lhs += term
        if abs(wv) > trunc - 1.5:
            ring_peak = max(ring_peak, abs(term))
    if spec is None:
        radii = [fn.feature_radius for fn in (F1, F2) if fn.gaussian_tail]
        rad = max(8.0, abs(z) + 4.0, (min(radii) + 6.0) if radii else 14.0)
        spec = QuadratureSpec(truncation_radius=rad, step=0.05)

    def p_main(zz: np.ndarray) -> np.ndarray:
        return (np.conjugate(F1.weighted(zz).to_complex())
                * F2.weighted(zz).to_complex())

    def p_sigma(zz: np.ndarray) -> np.ndarray:
        return (np.conjugate(F1.weighted(zz).to_complex())
                * sigma0_weighted(zz, cfg).to_complex())

    i_main, e_main = cauchy_transform(p_main, z, spec)
    i_sigma, e_sigma = cauchy_transform(p_sigma, z, spec)
    ratio = (F2.weighted_at(z) / sigma0_weighted(z, cfg)).to_complex()
    t3, e3 = inner_product_with_error(make_deflated_quotient(F2, mu), F1, spec)
    rhs = i_main - ratio * i_sigma + t3
    gap = abs(lhs - rhs)
    tail = ring_peak * 2.0 * math.pi * trunc * 2.0
    return IdentityReport(lhs=complex(lhs), rhs=complex(rhs), gap=gap,
                          tolerance=tolerance, tail_estimate=tail,
                          details={"cauchy_main": i_main, "cauchy_sigma": i_sigma,
                                   "deflated_term": t3,
                                   "errs": (e_main, e_sigma, e3)})


def interpolation_identity(H2: FockFunction, l3: complex, l4: complex, z: complex,
                           trunc: float, cfg: SigmaConfig | None = None,
                           tolerance: float = 1e-4) -> IdentityReport:
    """Check the four-point interpolation identity at z (no quadrature at all:
    a truncated lattice sum against a pointwise weighted ratio)."""
    cfg = cfg or default_config()
    l3, l4, z = complex(l3), complex(l4), complex(z)
    if abs(l3 - l4) < 1e-9:
        raise DomainError("interpolation points must be distinct")
    from .weierstrass import dist_to_lattice

    if dist_to_lattice(z) < 0.05 and abs(z) > 0.5:
        raise DomainError("z too close to the lattice: conditioning degrades")
    for l in (l3, l4):
        resid = H2.weighted_at(l)
        if not np.isneginf(resid.log_mag) and math.exp(resid.log_mag) > 1e-6:
            raise DomainError(f"H2 must vanish at {l} (residual {math.exp(resid.log_mag):.2e})")
    lhs = 0.0 + 0.0j
    ring_peak = 0.0
    for w in _lattice_window(trunc):
        lhs_term = _e2_term(H2, w, l3, l4, z, cfg)
        lhs += lhs_term
        if abs(w.value) > trunc - 1.5:
            ring_peak = max(ring_peak, abs(lhs_term))
    num = H2.weighted_at(z)
    den = sigma0_weighted(z, cfg)
    rhs = (num / den).to_complex() / ((z - l3) * (z - l4))
    gap = abs(lhs - rhs)
    tail = ring_peak * 2.0 * math.pi * trunc * 2.0
    return IdentityReport(lhs=complex(lhs), rhs=complex(rhs), gap=gap,
                          tolerance=tolerance, tail_estimate=tail)


def _e2_term(H2: FockFunction, w: LatticeIndex, l3: complex, l4: complex,
             z: complex, cfg: SigmaConfig) -> complex:
    """One summand a_w ||k_w|| / (sigma0'(w)(z-w)(l3-w)(l4-w)); the ratio
    ||k_w||/sigma0'(w) is assembled in log form (magnitude about |w|)."""
    wv = w.value
    a_wl = H2.weighted_at(wv)
    if np.isneginf(a_wl.log_mag):
        return 0.0 + 0.0j  # exact-zero data; avoids 0/0 when a root sits on w
    prime = sigma0_prime_at_lattice(w, cfg)
    scale = (LogComplex(PI * abs(wv) ** 2 / 2.0, 0.0)
             / prime.scaled(PI * abs(wv) ** 2 / 2.0)).to_complex()
    return a_wl.to_complex() * scale / ((z - wv) * (l3 - wv) * (l4 - wv))


def interpolation_residue_gap(H2: FockFunction, l3: complex, l4: complex,
                              w0: LatticeIndex, cfg: SigmaConfig | None = None,
                              circle_radius: float = 0.1, samples: int = 16) -> float:
    """|residue mismatch| of the two sides of the interpolation identity at a
    lattice pole w0: the lattice-sum residue is its w0 coefficient, the ratio
    side is averaged over a small circle."""
    cfg = cfg or default_config()
    wv = w0.value
    coeff = _e2_term(H2, w0, l3, l4, 1.0 + wv, cfg) * ((1.0 + wv) - wv)
    acc = 0.0 + 0.0j
    for k in range(samples):
        zz = wv + circle_radius * np.exp(2j * PI * (k + 0.5) / samples)
        num = H2.weighted_at(zz)
        den = sigma0_weighted(zz, cfg)
        val = (num / den).to_complex() / ((zz - l3) * (zz - l4))
        acc += val * (zz - wv)
    return abs(coeff - acc / samples)
