r"""Weierstrass sigma function for the square lattice Z = Z + iZ.

The sigma function is the canonical product

    sigma(z) = z * prod over lattice points w != 0 of
               (1 - z/w) * exp(z/w + z^2/(2 w^2)),

odd, real on the real axis, with simple zeros exactly on the lattice and the
two-sided weighted bound  |sigma(z)| =~ dist(z, Z) * exp(pi*|z|^2/2).

Evaluation strategy.  Inside the fundamental square the log of the entire,
zero-free function sigma(z)/z has the rapidly convergent expansion

    log(sigma(z)/z) = - sum_{j>=1} (S_{4j} / (4j)) * z^{4j},

where S_{4j} is the lattice power sum over w^{-4j} (odd powers and powers not
divisible by 4 vanish by the symmetries of the lattice).  The coefficients are
frozen at startup: S_{4j} for j >= 2 from the truncated lattice sums (their
tails are below 1e-13 at the default radius), and S_4 from its exponentially
convergent modular series, cross-checked against the truncated sum.  Points
outside the fundamental square are reduced by quasi-periodicity,

    sigma(z + w) = eps(w) * sigma(z) * exp(eta(w) * (z + w/2)),
    eta(m + in)  = m*eta_1 + n*eta_i,

with the happy consequence that the *weighted* value transforms by a
unimodular factor only:

    sigma(z) e^{-pi|z|^2/2} = eps(w) * sigma(z0) e^{-pi|z0|^2/2}
                              * exp(i*pi*Im(conj(w) z0)),     z = z0 + w.

The quasi-period constants are derived, not assumed: eta_1 = 2 * (d/dz log
sigma)(1/2) evaluated from the same frozen series, verified against the
Legendre relation eta_1*i - eta_i = 2*pi*i and against a direct
quotient-of-truncated-products solve.  (For this lattice both come out at
pi and -i*pi to near machine precision.)

The direct truncated product is kept as a cross-check path; it is far too
slow for quadrature-scale work and its plain truncation error (~1e-6 at
radius 200) would also poison the derived constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core_num import DomainError, LogComplex, NumericalFailure, wrap_phase

PI = math.pi


@dataclass(frozen=True)
class LatticeIndex:
    """A Gaussian integer w = m + i n."""

    m: int
    n: int

    @property
    def value(self) -> complex:
        return complex(self.m, self.n)

    def require_nonzero(self) -> "LatticeIndex":
        if self.m == 0 and self.n == 0:
            raise DomainError("lattice index must be nonzero here")
        return self


def lattice_points_in_radius(radius: float, include_origin: bool = False) -> list[LatticeIndex]:
    """All lattice indices with |w| <= radius, sorted by (|w|^2, m, n)."""
    r = int(math.floor(radius))
    out = []
    for m in range(-r, r + 1):
        for n in range(-r, r + 1):
            if m * m + n * n <= radius * radius:
                if m == 0 and n == 0 and not include_origin:
                    continue
                out.append(LatticeIndex(m, n))
    out.sort(key=lambda w: (w.m * w.m + w.n * w.n, w.m, w.n))
    return out


def dist_to_lattice(z) -> float | np.ndarray:
    """Euclidean distance to the nearest Gaussian integer (<= sqrt(2)/2)."""
    z = np.asarray(z, dtype=complex)
    w = np.round(z.real) + 1j * np.round(z.imag)
    d = np.abs(z - w)
    if z.ndim == 0:
        return float(d)
    return d


def _divisor_cube_sums(count: int) -> np.ndarray:
    sums = np.zeros(count + 1)
    for d in range(1, count + 1):
        for mult in range(d, count + 1, d):
            sums[mult] += d**3
    return sums


def _s4_modular() -> float:
    """The weight-4 lattice sum over w^{-4} from its modular q-series
    (pi^4/45) * (1 + 240 * sum sigma_3(n) q^n) at q = exp(-2*pi);
    converges to well below 1e-30 with a few dozen terms."""
    q = math.exp(-2.0 * PI)
    sig3 = _divisor_cube_sums(40)
    acc = 0.0
    for n_ in range(1, 41):
        acc += sig3[n_] * q**n_
    return (PI**4 / 45.0) * (1.0 + 240.0 * acc)


@dataclass(frozen=True)
class SigmaConfig:
    """Frozen sigma evaluation data.

    ``series_coeffs[j]`` holds the power sum S_{4(j+1)} entering
    log(sigma/z); ``eta1``/``eta_i`` are the derived quasi-period constants
    (Legendre-verified to 1e-12 at startup); ``product_truncation_radius`` is
    the lattice radius the cross-check product path uses.
    """

    product_truncation_radius: float
    series_coeffs: tuple[float, ...]
    eta1: complex
    eta_i: complex
    use_reduction: bool = True

    @property
    def lattice_values(self) -> np.ndarray:
        return _lattice_values(self.product_truncation_radius)


@lru_cache(maxsize=4)
def _lattice_values(radius: float) -> np.ndarray:
    pts = lattice_points_in_radius(radius)
    return np.array([p.value for p in pts], dtype=complex)


def _series_log_sigma0(z, coeffs: tuple[float, ...]):
    """log(sigma(z)/z) for |z| < 1 via the frozen power-sum series (Horner)."""
    z = np.asarray(z, dtype=complex)
    zeta = z**4
    acc = np.zeros_like(zeta)
    for j in range(len(coeffs), 0, -1):
        acc = acc * zeta - coeffs[j - 1] / (4.0 * j)
    return acc * zeta


def _sigma_by_product(z: complex, cfg: SigmaConfig) -> complex:
    """Direct truncated canonical product (cross-check path; pairs (w, -w)
    are multiplied together by summing logs over the symmetric point set)."""
    z = complex(z)
    if z == 0:
        return 0.0 + 0.0j
    lat = cfg.lattice_values
    u = z / lat
    terms = np.log1p(-u) + u + 0.5 * u * u
    return z * complex(np.exp(np.sum(terms)))


@lru_cache(maxsize=4)
def sigma_config(product_truncation_radius: float = 200.0, series_terms: int = 30,
                 use_reduction: bool = True) -> SigmaConfig:
    """Build and verify the frozen sigma data (one-time startup cost).

    Derivations and their checks:
      * S_4 from the modular series, compared against the truncated lattice
        sum (agreement within the documented truncation fluctuation 1e-3);
      * eta_1 = 2 * [1/z + d/dz log(sigma/z)] at z = 1/2 from the series,
        eta_i likewise at z = i/2;
      * Legendre relation eta_1*i - eta_i*1 = 2*pi*i to 1e-12;
      * quotient solve log(-sigma(5/4)/sigma(1/4))/(3/4) on the raw product,
        matching eta_1 within the product's own truncation error budget.
    """
    lat = _lattice_values(product_truncation_radius)
    inv4 = lat**-4.0
    coeffs = []
    power = inv4.copy()
    for j in range(1, series_terms + 1):
        if j > 1:
            power = power * inv4
        coeffs.append(float(np.sum(power).real))
    s4_exact = _s4_modular()
    if abs(s4_exact - coeffs[0]) > 1e-3:
        raise NumericalFailure(
            f"weight-4 lattice sum mismatch: series {s4_exact} vs truncated {coeffs[0]}"
        )
    coeffs[0] = s4_exact
    coeffs = tuple(coeffs)

    def zeta_like(z: complex) -> complex:
        zeta4 = z**4
        acc = 0.0j
        for j in range(len(coeffs), 0, -1):
            acc = acc * zeta4 - coeffs[j - 1]
        return 1.0 / z + acc * z**3

    eta1 = 2.0 * zeta_like(0.5)
    eta_i = 2.0 * zeta_like(0.5j)
    legendre = eta1 * 1j - eta_i - 2j * PI
    if abs(legendre) > 1e-12:
        raise NumericalFailure(f"Legendre relation residual {abs(legendre):.3e} > 1e-12")

    cfg = SigmaConfig(
        product_truncation_radius=product_truncation_radius,
        series_coeffs=coeffs,
        eta1=eta1,
        eta_i=eta_i,
        use_reduction=use_reduction,
    )
    ratio = -_sigma_by_product(1.25, cfg) / _sigma_by_product(0.25, cfg)
    eta1_solve = complex(np.log(ratio)) / 0.75
    if abs(eta1_solve - eta1) > 5e-3:
        raise NumericalFailure(
            f"quotient solve for eta_1 ({eta1_solve}) disagrees with series ({eta1})"
        )
    return cfg


def default_config() -> SigmaConfig:
    return sigma_config()


def _reduce(z: np.ndarray):
    """Split z = z0 + w with w the nearest lattice point; returns
    (z0, w, sign_exponent) where the quasi-period sign is (-1)^sign_exponent."""
    m = np.round(z.real)
    n = np.round(z.imag)
    w = m + 1j * n
    z0 = z - w
    sign = np.mod(m + n + m * n, 2.0)
    return z0, w, sign


def sigma_weighted(z, cfg: SigmaConfig | None = None) -> LogComplex:
    """sigma(z) * exp(-pi*|z|^2/2) in log form.

    Exact zeros at lattice arguments are short-circuited; the phase at real
    arguments is exactly 0 or pi because the series coefficients are real and
    the reduction multiplier is exactly unimodular with sign +-1 there.
    """
    cfg = cfg or default_config()
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if cfg.use_reduction:
        z0, w, sign = _reduce(z)
    else:
        z0, w, sign = z, np.zeros_like(z), np.zeros(z.shape)
        if np.any(np.abs(z0) > 0.9):
            raise DomainError("use_reduction=False is only valid near the origin")
    log_s0 = _series_log_sigma0(z0, cfg.series_coeffs)
    at_zero = z0 == 0
    safe_z0 = np.where(at_zero, 1.0, z0)
    log_sigma = np.log(safe_z0) + log_s0
    lm = np.where(at_zero, -np.inf, log_sigma.real - PI * np.abs(z0) ** 2 / 2.0)
    corr = PI * (w.real * z0.imag - w.imag * z0.real)  # pi * Im(conj(w) z0)
    ph = log_sigma.imag + corr + PI * sign
    out = LogComplex(lm, ph)
    if scalar:
        return LogComplex(float(np.asarray(out.log_mag)[0]), float(np.asarray(out.phase)[0]))
    return out


def _divide_linear(val: LogComplex, z: np.ndarray, a: complex) -> LogComplex:
    """val / (z - a) in log form (caller guarantees z != a)."""
    d = LogComplex.from_complex(np.asarray(z, dtype=complex) - a)
    return LogComplex(np.asarray(val.log_mag) - np.asarray(d.log_mag),
                      np.asarray(val.phase) - np.asarray(d.phase))


def _deflated_parts(z: np.ndarray, cfg: SigmaConfig):
    """Shared evaluation core: returns (z0, w, at_lattice, lm_def, ph_def)
    where (lm_def, ph_def) is the log form of the *deflated* weighted value
    sigma(z)/(z - w) * exp(-pi*|z|^2/2), finite everywhere."""
    z0, w, sign = _reduce(z)
    log_s0 = _series_log_sigma0(z0, cfg.series_coeffs)
    corr = PI * (w.real * z0.imag - w.imag * z0.real)  # pi * Im(conj(w) z0)
    lm_def = log_s0.real - PI * (z0.real**2 + z0.imag**2) / 2.0
    ph_def = log_s0.imag + corr + PI * sign
    return z0, w, z0 == 0, lm_def, ph_def


def sigma0_weighted(z, cfg: SigmaConfig | None = None) -> LogComplex:
    """(sigma(z)/z) * exp(-pi*|z|^2/2); the removable point at 0 is evaluated
    through the deflated series directly, never by division."""
    cfg = cfg or default_config()
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    z0, w, at_lattice, lm_def, ph_def = _deflated_parts(z, cfg)
    near_origin = w == 0
    # away from the origin cell: sigma0 = [sigma/(z-w)] * (z - w) / z
    ratio = np.where(near_origin, 1.0, z0) / np.where(near_origin, 1.0, z)
    with np.errstate(divide="ignore"):
        lm = lm_def + np.log(np.abs(ratio))
    ph = ph_def + np.angle(ratio)
    lm = np.where(at_lattice & ~near_origin, -np.inf, lm)
    out = LogComplex(lm, ph)
    if scalar:
        return LogComplex(float(np.asarray(out.log_mag)[0]), float(np.asarray(out.phase)[0]))
    return out


#: sigma with the zeros at 0, 1, 2, 3 removed; these four points divide out.
SIGMA3_REMOVED = (0.0 + 0.0j, 1.0 + 0.0j, 2.0 + 0.0j, 3.0 + 0.0j)


def sigma3_weighted(z, cfg: SigmaConfig | None = None) -> LogComplex:
    """sigma(z) / (z (z-1) (z-2) (z-3)) * exp(-pi*|z|^2/2).

    Within the half-cell around each removed zero the local sigma factor is
    cancelled analytically against the reduction (divided out before it is
    ever formed), so no precision is lost near 0, 1, 2, 3.  Lattice points
    other than those four remain exact zeros.
    """
    cfg = cfg or default_config()
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    z0, w, at_lattice, lm_def, ph_def = _deflated_parts(z, cfg)
    removed = (w.imag == 0.0) & (w.real >= 0.0) & (w.real <= 3.0)
    # numerator factor: (z - w) unless w is one of the removed zeros, in which
    # case that linear factor cancels against the matching denominator factor
    numer = np.where(removed, 1.0, z0)
    denom = np.ones_like(z)
    for a in SIGMA3_REMOVED:
        denom = denom * np.where(removed & (w == a), 1.0, z - a)
    ratio = numer / denom
    with np.errstate(divide="ignore"):
        lm = lm_def + np.log(np.abs(ratio))
    ph = ph_def + np.angle(ratio)
    lm = np.where(at_lattice & ~removed, -np.inf, lm)
    out = LogComplex(lm, ph)
    if scalar:
        return LogComplex(float(np.asarray(out.log_mag)[0]), float(np.asarray(out.phase)[0]))
    return out


def sigma_divided_weighted(z, roots: tuple, cfg: SigmaConfig | None = None) -> LogComplex:
    """sigma(z)/prod(z - r) * exp(-pi*|z|^2/2) for lattice roots r.

    Each root's linear factor is cancelled analytically inside its own cell
    (the generalization of the sigma3 evaluation to an arbitrary finite set of
    removed lattice zeros)."""
    cfg = cfg or default_config()
    roots = tuple(complex(r) for r in roots)
    for r in roots:
        if r != complex(round(r.real), round(r.imag)):
            raise DomainError(f"root {r} is not a lattice point")
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    z0, w, at_lattice, lm_def, ph_def = _deflated_parts(z, cfg)
    removed = np.zeros(z.shape, dtype=bool)
    for r in roots:
        removed |= w == r
    numer = np.where(removed, 1.0, z0)
    denom = np.ones_like(z)
    for r in roots:
        denom = denom * np.where(removed & (w == r), 1.0, z - r)
    ratio = numer / denom
    with np.errstate(divide="ignore"):
        lm = lm_def + np.log(np.abs(ratio))
    ph = ph_def + np.angle(ratio)
    lm = np.where(at_lattice & ~removed, -np.inf, lm)
    out = LogComplex(lm, ph)
    if scalar:
        return LogComplex(float(np.asarray(out.log_mag)[0]), float(np.asarray(out.phase)[0]))
    return out


_memo_slot: list = [None, None, None]


def sigma3_weighted_memo(z, cfg: SigmaConfig) -> LogComplex:
    """One-slot memo over the exact array object last evaluated.

    Quadrature integrands often need sigma3 for two functions on the same
    node chunk (e.g. both factors of an inner product contain it); the slot
    holds a strong reference to the key array, so its id cannot be recycled
    while the entry is alive.
    """
    if _memo_slot[0] is z and _memo_slot[1] is cfg:
        return _memo_slot[2]
    out = sigma3_weighted(z, cfg)
    _memo_slot[0] = z
    _memo_slot[1] = cfg
    _memo_slot[2] = out
    return out


def sigma0_prime_at_lattice(w: LatticeIndex, cfg: SigmaConfig | None = None,
                            step: float = 1e-5) -> LogComplex:
    """(d/dz sigma0)(w) * exp(-pi*|w|^2/2) by central difference of the
    weighted sigma0, with the two samples re-weighted to the common point w
    before differencing."""
    cfg = cfg or default_config()
    w.require_nonzero()
    wv = w.value
    plus = sigma0_weighted(wv + step, cfg)
    minus = sigma0_weighted(wv - step, cfg)
    # sigma0(w +- d) e^{-pi|w|^2/2} = W(w +- d) * exp(pi(|w +- d|^2 - |w|^2)/2)
    adj_p = PI * (2.0 * step * wv.real + step * step) / 2.0
    adj_m = PI * (-2.0 * step * wv.real + step * step) / 2.0
    from .core_num import log_sum

    diff = log_sum([plus.scaled(adj_p), -(minus.scaled(adj_m))])
    return diff.scaled(-math.log(2.0 * step))


def sigma0_prime_exact(w: LatticeIndex, cfg: SigmaConfig | None = None) -> LogComplex:
    """Closed form from the reduction: sigma0'(w) = eps(w) e^{pi|w|^2/2} / w,
    so the weighted value is eps(w)/w.  Used as the oracle for the central
    difference path."""
    w.require_nonzero()
    wv = w.value
    sign = (w.m + w.n + w.m * w.n) % 2
    base = LogComplex.from_complex(1.0 / wv)
    return base if sign == 0 else -base


def check_sigma_bound(sample_count: int, cfg: SigmaConfig | None = None,
                      radius: float = 10.0, seed: int = 20260808) -> tuple[float, float]:
    """Sweep the ratio |sigma(z)| e^{-pi|z|^2/2} / dist(z, Z) over random
    points with |z| <= radius; returns (c_low, c_high)."""
    if sample_count < 100:
        raise DomainError("sample_count must be >= 100")
    cfg = cfg or default_config()
    rng = np.random.default_rng(seed)
    pts = []
    # deterministic deep-cell points first: the ratio attains its minimum at
    # the centers of the lattice cells, so containment checks at those points
    # hold by construction
    k = int(radius) - 1
    for m in range(-k, k):
        for n in range(-k, k):
            deep = complex(m + 0.5, n + 0.5)
            if abs(deep) <= radius:
                pts.append(deep)
    while len(pts) < sample_count:
        cand = (rng.uniform(-radius, radius, size=4 * sample_count)
                + 1j * rng.uniform(-radius, radius, size=4 * sample_count))
        cand = cand[np.abs(cand) <= radius]
        cand = cand[dist_to_lattice(cand) > 1e-3]
        pts.extend(cand.tolist())
    z = np.array(pts[:max(sample_count, len(pts))], dtype=complex)
    w = sigma_weighted(z, cfg)
    ratio = np.exp(np.asarray(w.log_mag)) / dist_to_lattice(z)
    return float(ratio.min()), float(ratio.max())


def quasi_period_residual(z, cfg: SigmaConfig, direction: complex = 1.0 + 0.0j) -> float:
    """Relative residual of sigma(z + omega) = -sigma(z) * exp(eta (z + omega/2))
    for omega in {1, i}, computed entirely in weighted/log form."""
    z = complex(z)
    omega = complex(direction)
    if omega == 1.0:
        eta = cfg.eta1
    elif omega == 1j:
        eta = cfg.eta_i
    else:
        raise DomainError("direction must be 1 or i")
    lhs = sigma_weighted(z + omega, cfg)
    # weighted form of -sigma(z) e^{eta(z + omega/2)}:
    #   -W(z) * exp(eta(z + omega/2) + pi(|z|^2 - |z + omega|^2)/2)
    expo = eta * (z + omega / 2.0) + PI * (abs(z) ** 2 - abs(z + omega) ** 2) / 2.0
    rhs = (-sigma_weighted(z, cfg)).scaled(expo.real).rotated(expo.imag)
    from .core_num import log_sum

    gap = log_sum([lhs, -rhs])
    if np.isneginf(gap.log_mag):
        return 0.0
    return math.exp(gap.log_mag - float(np.asarray(lhs.log_mag)))
