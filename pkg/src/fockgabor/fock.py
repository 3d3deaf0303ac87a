"""The classical Fock space: kernels, inner products, Bargmann transform.

The space is the entire functions f with

    ||f||^2 = integral of |f(z)|^2 exp(-pi*|z|^2) dm2(z) < infinity,

with reproducing kernel k_lam(z) = exp(pi * conj(lam) * z), so that
f(lam) = <f, k_lam> and ||k_lam|| = exp(pi*|lam|^2/2).  Because the norms of
kernels overflow floats almost immediately, nothing in this module ever
materializes an unweighted value at large |z|: the only public evaluation is
the *weighted* one,

    W_f(z) = f(z) * exp(-pi*|z|^2/2),

carried as a :class:`LogComplex`.  For the normalized kernel
nk_lam = k_lam/||k_lam|| the weighted evaluation has the closed form

    W(z) = exp(-pi*|z - lam|^2/2) * exp(i*pi*Im(conj(lam)*z)),

which is the implementation contract used throughout.

Gabor side: the normalized time-frequency shifts of the Gaussian window
gamma(s) = exp(-pi*s^2) map to normalized kernels,
2^{1/4} * B(shift by (u, v)) = nk_{u - iv}.  Note the conjugated center: a
positive frequency shift v lands the kernel at u - iv.  Expansions elsewhere
in the package are stated against nk_w (unit kernels); the unnormalized k_w
versions differ by exp(pi*|w|^2/2) and both entry points are provided, since
either convention is defensible and the conjugations differ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core_num import (
    DomainError,
    LogComplex,
    NumericalFailure,
    QuadratureSpec,
    integrate_plane,
    log_sum_axis,
    wrap_phase,
)

PI = math.pi


class UnsupportedMethodError(ValueError):
    """Closed-form evaluation requested for a pair that does not support it."""


@dataclass(frozen=True)
class KernelSpec:
    """A reproducing kernel, normalized or not, centered at ``center``."""

    center: complex
    normalized: bool = True

    @property
    def log_norm(self) -> float:
        """log ||k_center|| = pi*|center|^2/2, exact in log form."""
        return PI * abs(self.center) ** 2 / 2.0


def kernel_weighted_eval(spec: KernelSpec, z) -> LogComplex:
    """Weighted kernel evaluation; exact in log form for any center.

    For a normalized kernel the value is
    exp(-pi*|z-lam|^2/2) * exp(i*pi*Im(conj(lam) z)); the unnormalized kernel
    adds pi*|lam|^2/2 to the log magnitude.
    """
    z = np.asarray(z, dtype=complex)
    lam = complex(spec.center)
    log_mag = -PI * np.abs(z - lam) ** 2 / 2.0
    if not spec.normalized:
        log_mag = log_mag + spec.log_norm
    phase = PI * (lam.real * z.imag - lam.imag * z.real)
    out = LogComplex(log_mag, phase)
    if z.ndim == 0:
        return LogComplex(float(np.asarray(out.log_mag)), float(np.asarray(out.phase)))
    return out


@dataclass(frozen=True)
class FockFunction:
    """A member of the space, exposed through its weighted evaluation.

    ``kernel_terms`` (when not None) assert that the function equals
    sigma3_coeff * sigma3 + sum of c * nk_center over the listed
    (c, center) pairs -- i.e. the decomposition is complete, which is what
    licenses closed-form inner products.  ``feature_radius`` bounds the region
    beyond which |W| decays like a Gaussian when ``gaussian_tail`` is set;
    quadrature specs are auto-sized from it.
    """

    label: str
    weighted: Callable[[np.ndarray], LogComplex]
    kernel_terms: tuple[tuple[complex, complex], ...] | None = None
    sigma3_coeff: complex = 0.0
    known_zeros: tuple[complex, ...] = ()
    feature_radius: float = 0.0
    gaussian_tail: bool = True
    growth_tag: str = "fock"

    def weighted_at(self, z) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        out = self.weighted(z)
        if z.ndim == 0:
            return LogComplex(float(np.asarray(out.log_mag)), float(np.asarray(out.phase)))
        return out

    def value_at(self, z) -> complex:
        """Unweighted value f(z); only safe while pi*|z|^2/2 fits a float exponent."""
        w = self.weighted_at(z)
        return w.scaled(PI * abs(complex(z)) ** 2 / 2.0).to_complex()

    def is_pure_kernel_sum(self) -> bool:
        return self.kernel_terms is not None and self.sigma3_coeff == 0

    def __repr__(self) -> str:  # keep reprs short in reports
        return f"FockFunction({self.label!r})"


def kernel_function(spec: KernelSpec, label: str | None = None) -> FockFunction:
    lam = complex(spec.center)
    if label is None:
        tag = "nk" if spec.normalized else "k"
        label = f"{tag}[{lam:g}]"
    coeff = 1.0 if spec.normalized else math.exp(spec.log_norm) if spec.log_norm < 700 else None
    if coeff is None:
        raise DomainError("unnormalized kernel norm overflows; use the normalized form")
    return FockFunction(
        label=label,
        weighted=lambda z, s=spec: kernel_weighted_eval(s, z),
        kernel_terms=((coeff, lam),),
        feature_radius=abs(lam),
    )


def kernel_combination(terms: Sequence[tuple[complex, complex]], label: str) -> FockFunction:
    """Finite sum of normalized kernels: sum of c * nk_center."""
    terms = tuple((complex(c), complex(lam)) for c, lam in terms)

    def weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        lms = np.empty((len(terms),) + z.shape)
        phs = np.empty_like(lms)
        for i, (c, lam) in enumerate(terms):
            base = kernel_weighted_eval(KernelSpec(lam), z)
            lc = LogComplex.from_complex(c)
            lms[i] = np.asarray(base.log_mag) + lc.log_mag
            phs[i] = np.asarray(base.phase) + lc.phase
        return log_sum_axis(lms, phs, axis=0)

    return FockFunction(
        label=label,
        weighted=weighted,
        kernel_terms=terms,
        feature_radius=max((abs(lam) for _, lam in terms), default=0.0),
    )


def kernel_sum_norm(terms: Sequence[tuple[complex, complex]]) -> float:
    """Exact norm of sum of c * nk_center via the closed-form Gram
    <nk_lam, nk_mu> = exp(-pi*|lam-mu|^2/2) * exp(i*pi*Im(mu conj(lam)))."""
    terms = [(complex(c), complex(lam)) for c, lam in terms]
    acc = 0.0
    for ci, li in terms:
        for cj, lj in terms:
            g = kernel_weighted_eval(KernelSpec(lj), li)  # <nk_li, nk_lj>... see below
            acc += (ci * np.conjugate(cj) * np.conjugate(g.to_complex())).real
    return math.sqrt(max(acc, 0.0))


def polynomial_times_kernel(roots: Sequence[complex], center: complex,
                            label: str | None = None,
                            coeff: complex = 1.0) -> FockFunction:
    """coeff * prod(z - r) * nk_center: polynomial multiples of a normalized
    kernel (still in the space; no kernel decomposition attached)."""
    roots = tuple(complex(r) for r in roots)
    center = complex(center)
    lc = LogComplex.from_complex(complex(coeff))

    def weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        base = kernel_weighted_eval(KernelSpec(center), z)
        poly = np.ones_like(z)
        for r in roots:
            poly = poly * (z - r)
        p = LogComplex.from_complex(poly)
        return LogComplex(np.asarray(base.log_mag) + np.asarray(p.log_mag) + lc.log_mag,
                          np.asarray(base.phase) + np.asarray(p.phase) + lc.phase)

    return FockFunction(
        label=label or f"poly{roots}*nk[{center:g}]",
        weighted=weighted,
        known_zeros=roots,
        feature_radius=abs(center) + 2.0 + math.sqrt(len(roots)),
    )


def _pair_spec(f: FockFunction, g: FockFunction, step: float = 0.05) -> QuadratureSpec:
    """Region rule for a pair: the product of the two weighted factors decays
    like the factor with the smaller Gaussian-tail radius, the other factor
    being uniformly bounded by its norm."""
    radii = [fn.feature_radius for fn in (f, g) if fn.gaussian_tail]
    if radii:
        rad = max(8.0, min(radii) + 6.0)
    else:
        rad = max(8.0, f.feature_radius + 6.0, g.feature_radius + 12.0)
    return QuadratureSpec(truncation_radius=rad, step=step)


def inner_product_with_error(f: FockFunction, g: FockFunction,
                             spec: QuadratureSpec | None = None) -> tuple[complex, float]:
    """Quadrature inner product <f, g> with its error estimate."""
    if spec is None:
        spec = _pair_spec(f, g)

    def integrand(z: np.ndarray) -> LogComplex:
        return f.weighted(z) * g.weighted(z).conjugate()

    return integrate_plane(integrand, spec)


def inner_product(f: FockFunction, g: FockFunction, method: str = "quadrature",
                  spec: QuadratureSpec | None = None) -> complex:
    """Inner product <f, g>, linear in f and conjugate-linear in g.

    ``closed_form`` expands by sesquilinearity through whichever argument is a
    pure kernel combination, using <f, nk_lam> = W_f(lam); it raises
    :class:`UnsupportedMethodError` when neither argument decomposes that way.
    ``quadrature`` integrates W_f * conj(W_g) over the plane.
    """
    if method == "closed_form":
        if g.is_pure_kernel_sum():
            acc = 0.0 + 0.0j
            for c, lam in g.kernel_terms:
                acc += np.conjugate(c) * f.weighted_at(lam).to_complex()
            return complex(acc)
        if f.is_pure_kernel_sum():
            acc = 0.0 + 0.0j
            for c, lam in f.kernel_terms:
                acc += c * np.conjugate(g.weighted_at(lam).to_complex())
            return complex(acc)
        raise UnsupportedMethodError(
            f"closed_form needs a pure kernel decomposition on one side "
            f"({f.label!r} vs {g.label!r})"
        )
    if method == "quadrature":
        return inner_product_with_error(f, g, spec)[0]
    raise DomainError(f"unknown method {method!r}")


def norm(f: FockFunction, spec: QuadratureSpec | None = None) -> float:
    """Quadrature norm ||f||; cross-checked against exp(pi*|lam|^2/2) when f
    is a single kernel."""
    val, err = inner_product_with_error(f, f, spec)
    if val.real < -max(10.0 * err, 1e-12):
        raise NumericalFailure(f"norm^2 of {f.label!r} came out negative: {val}")
    out = math.sqrt(max(val.real, 0.0))
    if f.kernel_terms is not None and len(f.kernel_terms) == 1 and f.sigma3_coeff == 0:
        c, _lam = f.kernel_terms[0]
        expected = abs(c)
        if abs(out - expected) > max(1e-6 * expected, 20.0 * err):
            raise NumericalFailure(
                f"kernel norm mismatch for {f.label!r}: {out} vs closed form {expected}"
            )
    return out


# ---------------------------------------------------------------------------
# Bargmann transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaborAtom:
    """Time-frequency shift of the Gaussian window: (shift x, modulation y)."""

    x: float
    y: float

    @property
    def kernel_center(self) -> complex:
        # conjugated: the image of the (x, y) shift is the kernel at x - iy
        return complex(self.x, -self.y)

    @property
    def cocycle(self) -> complex:
        """The unimodular factor exp(i*pi*x*y) carried by the transform image.

        Completing the square in either integral form of the transform gives
        2^{1/4} B(shift) = exp(i*pi*x*y) * nk at the conjugated center; the
        bare-kernel statement is exact only when x*y = 0.
        """
        return complex(np.exp(1j * PI * self.x * self.y))


def gabor_window(atom: GaborAtom) -> Callable[[np.ndarray], np.ndarray]:
    """The time-side function t -> exp(2*pi*i*y*t) * exp(-pi*(t-x)^2)."""

    def f(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(2j * PI * atom.y * t) * np.exp(-PI * (t - atom.x) ** 2)

    return f


def gabor_atom_l2_norm(atom: GaborAtom, half_width: float = 10.0, step: float = 1e-3) -> float:
    """L2 norm of the shifted Gaussian window (2^{-1/4} for every atom)."""
    t = np.arange(-half_width, half_width, step) + step / 2.0 + atom.x
    vals = np.abs(gabor_window(atom)(t)) ** 2
    return math.sqrt(float(vals.sum() * step))


def bargmann_gabor(atom: GaborAtom) -> FockFunction:
    """Closed-form transform image 2^{1/4} * B(atom): the atom's cocycle
    phase times the normalized kernel at the conjugated center, with the
    kernel decomposition populated."""
    return kernel_combination([(atom.cocycle, atom.kernel_center)],
                              label=f"B[{atom.x:g},{atom.y:g}]")


def bargmann_numeric(window: Callable[[np.ndarray], np.ndarray], z,
                     half_width: float | None = None, step: float = 0.01,
                     tail_tol: float = 1e-12) -> LogComplex:
    """Weighted transform value (Bf)(z) * exp(-pi*|z|^2/2) by 1-D quadrature.

    Uses the entire-integrand form
    2^{1/4} * integral of f(t) exp(-pi t^2 + 2 pi t z) dt * exp(-pi z^2/2),
    assembled in the log domain so the exp(2 pi t z) factor never overflows.
    The window must decay at least like a Gaussian beyond the sampled
    interval; a tail estimate above ``tail_tol`` (relative to the peak sample)
    raises :class:`DomainError`.
    """
    z = complex(z)
    if abs(z) > 20.0:
        raise DomainError("bargmann_numeric is restricted to |z| <= 20")
    x, y = z.real, z.imag
    T = half_width if half_width is not None else max(8.0, abs(x) + 6.0)
    t = np.arange(-T, T, step) + step / 2.0
    fvals = np.asarray(window(t), dtype=complex)
    with np.errstate(divide="ignore"):
        f_lm = np.log(np.abs(fvals))
    f_ph = np.angle(fvals)
    # log of f(t) * exp(-pi t^2 + 2 pi t z)
    lm = f_lm - PI * t**2 + 2.0 * PI * t * x
    ph = f_ph + 2.0 * PI * t * y
    peak = float(np.max(lm))
    edge = max(float(lm[0]), float(lm[-1]))
    if math.isfinite(edge) and edge - peak > math.log(tail_tol):
        raise DomainError(
            f"sampling interval [-{T}, {T}] too short: edge/peak magnitude "
            f"ratio {math.exp(edge - peak):.2e} exceeds {tail_tol:.0e}"
        )
    total = log_sum_axis(lm[None, :], ph[None, :], axis=1)
    total = log_sum_axis(np.asarray(total.log_mag)[None], np.asarray(total.phase)[None], axis=0)
    # constant factor: step * 2^{1/4} * exp(-pi z^2/2) * exp(-pi |z|^2/2)
    #   log magnitude: -(pi/2)(x^2 - y^2) - (pi/2)(x^2 + y^2) = -pi x^2
    #   phase: -pi x y
    const_lm = math.log(step) + 0.25 * math.log(2.0) - PI * x * x
    const_ph = -PI * x * y
    lm_all = float(np.asarray(total.log_mag)) + const_lm
    ph_all = float(np.asarray(total.phase)) + const_ph
    return LogComplex(lm_all, ph_all)


def bargmann_function(atom: GaborAtom, label: str | None = None,
                      step: float = 0.01) -> FockFunction:
    """Transform image of a Gabor atom evaluated by numeric quadrature
    (no closed form attached; used to test unitarity independently).

    Evaluation batches blocks of z against a shared t-grid so plane
    quadratures over these functions stay tractable."""
    window = gabor_window(atom)

    def weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        lms = np.empty(flat.shape)
        phs = np.empty(flat.shape)
        block = 512
        for i0 in range(0, flat.size, block):
            zz = flat[i0:i0 + block]
            x, y = zz.real, zz.imag
            T = max(8.0, float(np.max(np.abs(x)) if zz.size else 0.0) + 6.0)
            t = np.arange(-T, T, step) + step / 2.0
            fvals = np.asarray(window(t), dtype=complex)
            with np.errstate(divide="ignore"):
                f_lm = np.log(np.abs(fvals))
            f_ph = np.angle(fvals)
            lm = f_lm[None, :] - PI * t[None, :] ** 2 + 2.0 * PI * t[None, :] * x[:, None]
            ph = f_ph[None, :] + 2.0 * PI * t[None, :] * y[:, None]
            total = log_sum_axis(lm, ph, axis=1)
            const_lm = math.log(step) + 0.25 * math.log(2.0) - PI * x * x
            const_ph = -PI * x * y
            lms[i0:i0 + block] = np.asarray(total.log_mag) + const_lm
            phs[i0:i0 + block] = np.asarray(total.phase) + const_ph
        return LogComplex(lms.reshape(z.shape), phs.reshape(z.shape))

    return FockFunction(
        label=label or f"Bnum[{atom.x:g},{atom.y:g}]",
        weighted=weighted,
        feature_radius=abs(atom.kernel_center),
    )


def gabor_l2_inner(a: GaborAtom, b: GaborAtom, half_width: float = 12.0,
                   step: float = 1e-3) -> complex:
    """L2(R) inner product of two Gabor atoms by midpoint quadrature."""
    mid = (a.x + b.x) / 2.0
    t = np.arange(-half_width, half_width, step) + step / 2.0 + mid
    vals = gabor_window(a)(t) * np.conjugate(gabor_window(b)(t))
    return complex(vals.sum() * step)
