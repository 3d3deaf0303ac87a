r"""A complete minimal kernel system whose mixed system has a defect.

The pipeline builds, at a chosen scale Q and depth N (levels u_n = 2^{n-1} Q):

    F  = sigma3 + sum over n of u_n^{-1/2} (nk_{u_n} - nk_{u_n + 1}),
    S  = prod (1 - z/(u_n + beta_n))     with F(u_n + beta_n) = 0,
    G1 = prod (1 - z/v_n),               v_n near u_n - sqrt(u_n), real,
    G2 = F/S,  G = G1 G2,  g_lam = G/(. - lam),
    H  = sigma3 + sum over n of d_n u_n^{-1/3} nk_{u_n},

with the d_n solved from a diagonally dominant linear system so that
H is orthogonal to every g at the points v_n.  The point sets are
Lambda1 = {v_n} and Lambda2 = the remaining zeros of F; H then annihilates
{nk_lam : lam in Lambda2} (zeros of F) and {g_lam : lam in Lambda1} while
<F, H> stays away from zero, which is the whole point of the construction.

On the real axis near u = u_n the weighted profile is two Gaussian bumps of
opposite sign,

    F(z) e^{-pi|z|^2/2} ~ u^{-1/2} (e^{-pi|z-u|^2/2}
                          - e^{-pi|z-u-1|^2/2 + i pi Im z}) e^{i pi u Im z},

so each level has a real zero u_n + beta_n with beta_n in (1/3, 2/3) tending
to 1/2, plus displaced complex zeros where the bump pair hands over to the
sigma3 background.  Those displaced zeros (at least 0.04 away from the
lattice) are what the windowed Lambda2 collects; far from the bumps the
zeros of F coincide with lattice points to machine precision and carry no
usable margin, so they are excluded from the windowed set (they are still
zeros of F, and the zero scan reports both tallies).

Everything is deterministic: sampling grids derive from the parameters, the
zero scan uses argument-principle counts per unit cell with a fixed offset,
and any count/polish mismatch is surfaced in the diagnostics instead of
being silently accepted.
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
)
from .fock import (
    FockFunction,
    KernelSpec,
    inner_product_with_error,
    kernel_sum_norm,
    kernel_weighted_eval,
)
from .weierstrass import (
    SigmaConfig,
    default_config,
    dist_to_lattice,
    sigma3_weighted_memo,
)

PI = math.pi


class ConstructionError(RuntimeError):
    """The pipeline could not complete with the given parameters."""


class QTooSmallError(ConstructionError):
    """A precondition that holds for large Q failed; advise increasing Q."""


@dataclass(frozen=True)
class ConstructionParams:
    q: int = 8
    levels: int = 3
    tol_root: float = 1e-10
    tol_solve: float = 1e-8
    quad_step: float = 0.05
    quad_radius: float | None = None
    trunc: float = 12.0
    lattice_margin: float = 0.04

    def __post_init__(self):
        if self.q < 4:
            raise DomainError("q must be >= 4")
        if self.levels < 1:
            raise DomainError("levels must be >= 1")
        if not (0 < self.tol_root < 1e-4 and 0 < self.tol_solve < 1e-2):
            raise DomainError("tolerances out of range")
        needed = self.u_values()[-1] + 2.0 * math.sqrt(self.u_values()[-1]) + 8.0
        if self.quad_radius is None:
            object.__setattr__(self, "quad_radius", float(math.ceil(needed)))
        elif self.quad_radius < needed:
            raise DomainError(
                f"quad_radius {self.quad_radius} < {needed}: the quadrature must "
                "see all construction features"
            )

    def u_values(self) -> list[float]:
        return [float(2 ** (n - 1) * self.q) for n in range(1, self.levels + 1)]

    def quad_spec(self) -> QuadratureSpec:
        return QuadratureSpec(truncation_radius=float(self.quad_radius), step=self.quad_step)


def build_profile(params: ConstructionParams, cfg: SigmaConfig | None = None) -> FockFunction:
    """F = sigma3 + sum of u_n^{-1/2}(nk_{u_n} - nk_{u_n+1}), with its kernel
    decomposition attached (sigma3 coefficient 1)."""
    cfg = cfg or default_config()
    us = params.u_values()
    terms = []
    for u in us:
        terms.append((u**-0.5, complex(u)))
        terms.append((-(u**-0.5), complex(u + 1.0)))
    terms = tuple(terms)

    def weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        parts_lm = np.empty((len(terms) + 1,) + z.shape)
        parts_ph = np.empty_like(parts_lm)
        s3 = sigma3_weighted_memo(z, cfg)
        parts_lm[0] = np.asarray(s3.log_mag)
        parts_ph[0] = np.asarray(s3.phase)
        for i, (c, lam) in enumerate(terms, start=1):
            k = kernel_weighted_eval(KernelSpec(lam), z)
            lc = LogComplex.from_complex(c)
            parts_lm[i] = np.asarray(k.log_mag) + lc.log_mag
            parts_ph[i] = np.asarray(k.phase) + lc.phase
        return log_sum_axis(parts_lm, parts_ph, axis=0)

    return FockFunction(
        label=f"F[q={params.q},n={params.levels}]",
        weighted=weighted,
        kernel_terms=terms,
        sigma3_coeff=1.0,
        feature_radius=us[-1] + 1.0,
        gaussian_tail=False,
        growth_tag="polynomial",
    )


def bump_main_term(params: ConstructionParams, u: float, z) -> np.ndarray:
    """The two-bump local form of the weighted F near level u (its remainder
    is O(u^-4) plus cross-level terms)."""
    z = np.asarray(z, dtype=complex)
    a = np.exp(-PI * np.abs(z - u) ** 2 / 2.0)
    b = np.exp(-PI * np.abs(z - u - 1.0) ** 2 / 2.0 + 1j * PI * z.imag)
    return u**-0.5 * (a - b) * np.exp(1j * PI * u * z.imag)


def fo3_remainder_panel(F: FockFunction, params: ConstructionParams,
                        samples_per_level: int = 120) -> dict:
    """Measured max |W_F - main term| over each bump disk, scaled by u^4.

    Points inside another level's bump disk are excluded from the scaled
    figure (at small Q adjacent disks overlap and the local form only speaks
    away from the other levels); the raw maximum is reported alongside.
    """
    us = params.u_values()
    out = {}
    for u in us:
        rr = 2.0 * math.sqrt(u)
        k = np.arange(samples_per_level)
        rad = rr * np.sqrt((k + 0.5) / samples_per_level)
        ang = 2.0 * PI * k * 0.6180339887498949  # golden-angle spiral, deterministic
        z = u + rad * np.exp(1j * ang)
        w = F.weighted(z).to_complex()
        rem = np.abs(w - bump_main_term(params, u, z))
        clear = np.ones(z.shape, dtype=bool)
        for v in us:
            if v != u:
                clear &= np.abs(z - v) > 2.0 * math.sqrt(v) + 1.0
        scaled = float(rem[clear].max() * u**4) if np.any(clear) else math.nan
        out[u] = {"max_remainder": float(rem.max()),
                  "max_remainder_clear": float(rem[clear].max()) if np.any(clear) else math.nan,
                  "scaled_by_u4": scaled}
    return out


def real_weighted(F: FockFunction, x) -> np.ndarray:
    """Weighted values along the real axis as real numbers (F is real there;
    the imaginary part is checked to be exactly zero by phase)."""
    vals = F.weighted(np.asarray(x, dtype=complex))
    ph = np.asarray(vals.phase)
    if not np.all((ph == 0.0) | (ph == PI) | np.isneginf(np.asarray(vals.log_mag))):
        raise NumericalFailure("profile is not real on the real axis")
    return np.exp(np.asarray(vals.log_mag)) * np.where(ph == 0.0, 1.0, -1.0)


def find_betas(F: FockFunction, params: ConstructionParams) -> list[float]:
    """Bisection roots beta_n of the weighted F in (u_n + 1/3, u_n + 2/3)."""
    betas = []
    for u in params.u_values():
        lo, hi = u + 1.0 / 3.0, u + 2.0 / 3.0
        flo, fhi = (float(real_weighted(F, np.array([t]))[0]) for t in (lo, hi))
        if flo == 0.0:
            betas.append(lo - u)
            continue
        if flo * fhi >= 0.0:
            raise QTooSmallError(
                f"no sign change of F on (u+1/3, u+2/3) at u={u}; increase q"
            )
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = float(real_weighted(F, np.array([mid]))[0])
            if abs(fm) <= params.tol_root or hi - lo < 1e-15:
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        betas.append(mid - u)
    for b in betas:
        if not (1.0 / 3.0 < b < 2.0 / 3.0):
            raise QTooSmallError(f"root offset {b} escaped (1/3, 2/3); increase q")
    return betas


# ---------------------------------------------------------------------------
# Zero scan (argument principle + log-derivative polish)
# ---------------------------------------------------------------------------

def _dlog(F: FockFunction, z: np.ndarray, h) -> np.ndarray:
    """F'/F from central differences of log W along the real direction,
    corrected by the weight: F'/F = D_x log W + pi * Re z."""
    h = np.asarray(h)
    zp = F.weighted(z + h)
    zm = F.weighted(z - h)
    dlm = (np.asarray(zp.log_mag) - np.asarray(zm.log_mag)) / (2.0 * h)
    dph = np.asarray(zp.phase) - np.asarray(zm.phase)
    dph = (np.mod(dph + PI, 2.0 * PI) - PI) / (2.0 * h)
    return dlm + 1j * dph + PI * z.real


def _newton_polish(F: FockFunction, seeds: np.ndarray, tol: float,
                   iters: int = 60, gauge: np.ndarray | complex = 0.0) -> np.ndarray:
    """Log-derivative Newton toward simple zeros of F, vectorized over seeds.

    Two safeguards make this usable on the bump zones: the finite-difference step
    shrinks with the Newton step (a fixed step h flattens the measured
    derivative as soon as |z - zero| < h and stalls around residual
    |W'| * h), and the supplied ``gauge`` (typically pi * conj(local center))
    is subtracted from the log derivative.  Without the gauge the local
    exponential background -- pi*conj(lam) from a dominant kernel, or
    zeta(z) ~ pi*conj(z) from the sigma factor -- shrinks the attraction
    basin to about 1/(pi |z|)."""
    z = np.asarray(seeds, dtype=complex).copy()
    gauge = np.broadcast_to(np.asarray(gauge, dtype=complex), z.shape)
    h = np.full(z.shape, 1e-4)
    log_tol = math.log(tol)
    for _ in range(iters):
        w = F.weighted(z)
        lm = np.asarray(w.log_mag)
        done = np.isneginf(lm) | (lm <= log_tol)
        if np.all(done):
            break
        d = _dlog(F, z, h) - gauge
        bad = done | (np.abs(d) < 1e-14)
        stepv = np.where(bad, 0.0, 1.0 / np.where(bad, 1.0, d))
        big = np.abs(stepv) > 0.45
        stepv = np.where(big, 0.45 * stepv / np.where(big, np.abs(stepv), 1.0), stepv)
        z = z - stepv
        h = np.clip(np.abs(stepv) / 4.0, 1e-11, 1e-4)
        h = np.where(np.abs(stepv) == 0.0, 1e-11, h)
    return z


@dataclass
class ZeroScanDiagnostics:
    cells_scanned: int = 0
    zeros_found: int = 0
    zeros_kept: int = 0
    count_mismatches: list = field(default_factory=list)


_CELL_OFFSET = 0.0123 + 0.0171j


def _cell_ring(centers: np.ndarray, half: float, n: int) -> np.ndarray:
    """Boundary samples (counterclockwise) of the squares around ``centers``,
    shape (len(centers), 4n)."""
    s = np.arange(n)
    edge = -half + 2.0 * half * (s + 0.5) / n
    ring = np.concatenate([
        edge - 1j * half,            # bottom, left to right
        half + 1j * edge,            # right, bottom to top
        edge[::-1] + 1j * half,      # top, right to left
        -half + 1j * edge[::-1],     # left, top to bottom
    ])
    return centers[:, None] + ring[None, :]


def _winding_batch(F: FockFunction, centers: np.ndarray, half: float,
                   n: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Argument-principle counts for many squares at once; returns the counts
    and a flag marking cells whose count is unreliable at this sampling."""
    rings = _cell_ring(centers, half, n)
    flat = rings.ravel()
    ph = np.empty(flat.shape)
    chunk = 2_000_000
    for i in range(0, flat.size, chunk):
        ph[i:i + chunk] = np.asarray(F.weighted(flat[i:i + chunk]).phase)
    ph = ph.reshape(rings.shape)
    d = np.diff(np.concatenate([ph, ph[:, :1]], axis=1), axis=1)
    d = np.mod(d + PI, 2.0 * PI) - PI
    total = d.sum(axis=1) / (2.0 * PI)
    counts = np.round(total).astype(int)
    shaky = (np.abs(total - counts) > 0.01) | (np.max(np.abs(d), axis=1) > 2.6)
    return counts, shaky


def _winding_count(F: FockFunction, center: complex, half: float,
                   samples: int = 200, max_samples: int = 3200) -> int:
    """Single-square count with adaptive densification (the positive weight
    cannot change the winding of the phase)."""
    n = samples
    while True:
        counts, shaky = _winding_batch(F, np.asarray([center], dtype=complex), half, n)
        if not shaky[0] or n >= max_samples:
            return int(counts[0])
        n *= 2


def scan_zone_zeros(F: FockFunction, params: ConstructionParams,
                    exclude: Sequence[complex] = (),
                    extra_cells: Sequence[complex] = ()) -> tuple[np.ndarray, ZeroScanDiagnostics]:
    """Materialize the displaced zeros of F inside the bump zones.

    Scans unit cells covering each square around u_n + 1/2 of half-width
    2*sqrt(u_n) + 2.5, counts zeros per cell by the argument principle (whole
    boundary batch in one evaluation), polishes them with the adaptive Newton
    iteration, and keeps the zeros at least ``lattice_margin`` away from the
    lattice; the rest coincide with lattice points to machine precision and
    carry no usable margin.  ``exclude`` drops the real roots u_n + beta_n.
    Count/polish disagreements are retried with a dense seed grid and then
    surfaced in the diagnostics.
    """
    diag = ZeroScanDiagnostics()
    cells = set()
    for u in params.u_values():
        w = 2.0 * math.sqrt(u) + 2.5
        for m in range(int(math.floor(u + 0.5 - w)), int(math.ceil(u + 0.5 + w)) + 1):
            for n in range(int(math.floor(-w)), int(math.ceil(w)) + 1):
                if abs(m - u - 0.5) <= w and abs(n) <= w:
                    cells.add((m, n))
    for c in extra_cells:
        cells.add((int(round(c.real)), int(round(c.imag))))
    centers = np.array([complex(m, n) + _CELL_OFFSET for (m, n) in sorted(cells)])
    diag.cells_scanned = len(centers)
    counts, shaky = _winding_batch(F, centers, 0.5)
    for i in np.nonzero(shaky)[0]:
        counts[i] = _winding_count(F, complex(centers[i]), 0.5, samples=400)
    zeros: list[complex] = []
    hot = centers[counts > 0]
    hot_counts = counts[counts > 0]
    if hot.size:
        # quadtree refinement by winding count alone, level-synchronous so all
        # ring evaluations batch; stops at squares small enough for the gauged
        # Newton basin
        boxes = [(complex(c), 0.5, int(k), complex(c)) for c, k in zip(hot, hot_counts)]
        half = 0.5
        while half > 0.035:
            quarters = np.array([-0.5 - 0.5j, 0.5 - 0.5j, -0.5 + 0.5j, 0.5 + 0.5j])
            subc = np.concatenate([[b[0] + q * half for q in quarters] for b in boxes])
            subcounts, subshaky = _winding_batch(F, subc, half / 2.0, n=120)
            for i in np.nonzero(subshaky)[0]:
                subcounts[i] = _winding_count(F, complex(subc[i]), half / 2.0, samples=240)
            new_boxes = []
            for j, b in enumerate(boxes):
                got = int(subcounts[4 * j:4 * j + 4].sum())
                if got != b[2]:
                    # a zero is sitting on a child boundary; nudge the split
                    jit = 0.003 + 0.002j
                    sc = np.array([b[0] + jit + q * half for q in quarters])
                    cts, shk = _winding_batch(F, sc, half / 2.0, n=240)
                    if int(cts.sum()) == b[2]:
                        for q_i in range(4):
                            if cts[q_i] > 0:
                                new_boxes.append((complex(sc[q_i]), half / 2.0,
                                                  int(cts[q_i]), b[3]))
                        continue
                    diag.count_mismatches.append(
                        {"cell": b[3], "expected": b[2], "at_half": half, "children": got})
                for q_i in range(4):
                    if subcounts[4 * j + q_i] > 0:
                        new_boxes.append((complex(subc[4 * j + q_i]), half / 2.0,
                                          int(subcounts[4 * j + q_i]), b[3]))
            boxes = new_boxes
            half /= 2.0
        seeds = np.array([b[0] for b in boxes])
        gauges = PI * np.conj(seeds)
        polished = _newton_polish(F, seeds, tol=params.tol_root * 1e-2, gauge=gauges)
        per_parent: dict = {}
        for b, z in zip(boxes, polished):
            zc = complex(z)
            resid = F.weighted_at(zc)
            ok = np.isneginf(resid.log_mag) or resid.log_mag <= math.log(params.tol_root)
            near = abs(zc - b[0]) <= 4.0 * b[1]
            per_parent.setdefault(b[3], []).append((b, zc if (ok and near) else None))
        for parent, items in per_parent.items():
            expected = sum(b[2] for b, _ in items)
            got = [z for _, z in items if z is not None]
            uniq: list[complex] = []
            for z in got:
                if all(abs(z - f) > 1e-6 for f in uniq):
                    uniq.append(z)
            zeros.extend(uniq)
            if len(uniq) != expected:
                diag.count_mismatches.append(
                    {"cell": parent, "expected": expected, "polished": len(uniq)})
    diag.zeros_found = len(zeros)
    out: list[complex] = []
    for z in sorted(zeros, key=lambda t: (abs(t), t.real, t.imag)):
        if any(abs(z - e) < 1e-6 for e in exclude):
            continue
        if dist_to_lattice(z) < params.lattice_margin:
            continue
        if any(abs(z - f) < 1e-6 for f in out):
            continue
        out.append(z)
    out.sort(key=lambda t: (abs(t), t.real, t.imag))
    diag.zeros_kept = len(out)
    return np.array(out, dtype=complex), diag


def _accept_cell_zeros(F: FockFunction, center: complex, half: float,
                       polished: np.ndarray, params: ConstructionParams) -> list[complex]:
    found: list[complex] = []
    for z in polished:
        z = complex(z)
        if abs(z.real - center.real) > half + 1e-9 or abs(z.imag - center.imag) > half + 1e-9:
            continue
        resid = F.weighted_at(z)
        if not np.isneginf(resid.log_mag) and resid.log_mag > math.log(params.tol_root):
            continue
        if all(abs(z - f) > 1e-6 for f in found):
            found.append(z)
    return found


def choose_vs(F: FockFunction, betas: Sequence[float], params: ConstructionParams) -> list[float]:
    """v_n = u_n - sqrt(u_n), nudged in 0.01 steps to clear every computed
    zero of F nearby and the lattice by at least 0.05, staying inside the
    unit disk around the unperturbed point."""
    vs = []
    for u, beta in zip(params.u_values(), betas):
        target = u - math.sqrt(u)
        local, _diag = scan_zone_zeros(
            F, params, exclude=[u + beta],
            extra_cells=[complex(math.floor(target) + k, 0) for k in (-1, 0, 1, 2)],
        )
        near = [z for z in local.tolist() if abs(z - target) < 2.0]
        # zeros indistinguishable from lattice points are blocked by the
        # lattice margin itself
        chosen = None
        for k in range(0, 101):
            for sgn in ((1,) if k == 0 else (1, -1)):
                cand = target + sgn * 0.01 * k
                if abs(cand - target) >= 1.0:
                    continue
                if dist_to_lattice(cand) < 0.05:
                    continue
                if any(abs(cand - z) < 0.05 for z in near):
                    continue
                chosen = cand
                break
            if chosen is not None:
                break
        if chosen is None:
            raise ConstructionError(f"no admissible v near {target} after 100 nudges")
        vs.append(float(chosen))
    return vs


# ---------------------------------------------------------------------------
# Products, the linear solve, and H
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductBundle:
    roots_s: tuple[float, ...]       # u_n + beta_n
    roots_g1: tuple[float, ...]      # v_n
    F: FockFunction
    G2: FockFunction
    G: FockFunction
    ratio_panel: dict

    def s_values(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for r in self.roots_s:
            out = out * (1.0 - z / r)
        return out

    def g1_values(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for r in self.roots_g1:
            out = out * (1.0 - z / r)
        return out

    def g_at(self, lam: complex, label: str | None = None) -> FockFunction:
        """g_lam = G/(. - lam) for lam among the v_n (exact factor removal)
        or in Lambda2 (divided difference through F's zero)."""
        lam = complex(lam)
        for n, v in enumerate(self.roots_g1):
            if abs(lam - v) < 1e-12:
                return self._g_at_v(n, label)
        return self._g_at_zero_of_f(lam, label)

    def _g_at_v(self, n: int, label: str | None) -> FockFunction:
        v = self.roots_g1[n]
        others = tuple(r for i, r in enumerate(self.roots_g1) if i != n)

        def weighted(z: np.ndarray) -> LogComplex:
            z = np.asarray(z, dtype=complex)
            base = self.G2.weighted(z)
            poly = np.full_like(z, -1.0 / v)
            for r in others:
                poly = poly * (1.0 - z / r)
            p = LogComplex.from_complex(poly)
            return LogComplex(np.asarray(base.log_mag) + np.asarray(p.log_mag),
                              np.asarray(base.phase) + np.asarray(p.phase))

        return FockFunction(label=label or f"g[v={v:g}]", weighted=weighted,
                            feature_radius=self.F.feature_radius,
                            known_zeros=others,
                            gaussian_tail=False, growth_tag="polynomial")

    def _g_at_zero_of_f(self, lam: complex, label: str | None) -> FockFunction:
        from .lattice_series import make_deflated_quotient

        dd = make_deflated_quotient(self.F, lam, window=1e-2)

        def weighted(z: np.ndarray) -> LogComplex:
            z = np.asarray(z, dtype=complex)
            base = dd.weighted(z)
            poly = self.g1_values(z) / self.s_values(z)
            p = LogComplex.from_complex(poly)
            return LogComplex(np.asarray(base.log_mag) + np.asarray(p.log_mag),
                              np.asarray(base.phase) + np.asarray(p.phase))

        return FockFunction(label=label or f"g[{lam:g}]", weighted=weighted,
                            feature_radius=self.F.feature_radius,
                            gaussian_tail=False, growth_tag="polynomial")


def build_products(F: FockFunction, betas: Sequence[float], vs: Sequence[float],
                   params: ConstructionParams) -> ProductBundle:
    """Assemble S, G1, G2 = F/S (with divided differences through the S
    roots), G = G1 G2, and measure the lacunary-ratio panel."""
    us = params.u_values()
    roots_s = tuple(u + b for u, b in zip(us, betas))
    roots_g1 = tuple(float(v) for v in vs)
    for rs in roots_s:
        for v in roots_g1:
            if abs(rs - v) < 0.1:
                raise ConstructionError(
                    f"deflation windows overlap: S root {rs} too near v {v}"
                )

    def s_log(z: np.ndarray, skip: int | None = None) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for i, r in enumerate(roots_s):
            if i == skip:
                continue
            out = out * (1.0 - z / r)
        return LogComplex.from_complex(out)

    f_weighted = F.weighted
    w_at_roots = [F.weighted_at(complex(r)) for r in roots_s]

    def g2_weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        base = f_weighted(z)
        lm = np.asarray(base.log_mag)
        ph = np.asarray(base.phase)
        s_all = s_log(z)
        out_lm = lm - np.asarray(s_all.log_mag)
        out_ph = ph - np.asarray(s_all.phase)
        for i, r in enumerate(roots_s):
            near = np.abs(z - r) < 1e-2
            if not np.any(near):
                continue
            # divided difference [F(z)-F(r)]/(z-r), with F(r) re-weighted
            shift = PI * (r * r - np.abs(z) ** 2) / 2.0
            wr = w_at_roots[i]
            lms = np.stack([lm, np.broadcast_to(wr.log_mag + shift, lm.shape)])
            phs = np.stack([ph, np.full_like(ph, wr.phase + PI)])
            dd = log_sum_axis(lms, phs, axis=0)
            dz = z - r
            # exactly at the root the difference quotient needs its limit;
            # a 1e-6 offset recovers F'(r) to ~1e-6 relative
            at_root = np.abs(dz) < 1e-9
            if np.any(at_root):
                zoff = np.where(at_root, r + 1e-6, z)
                return g2_weighted(zoff)
            dv = LogComplex.from_complex(dz)
            s_rest = s_log(z, skip=i)
            # the skipped factor is (1 - z/r) = -(z - r)/r
            lm_near = (np.asarray(dd.log_mag) - np.asarray(dv.log_mag)
                       - np.asarray(s_rest.log_mag) + math.log(r))
            ph_near = (np.asarray(dd.phase) - np.asarray(dv.phase)
                       - np.asarray(s_rest.phase) + PI)
            out_lm = np.where(near, lm_near, out_lm)
            out_ph = np.where(near, ph_near, out_ph)
        return LogComplex(out_lm, out_ph)

    G2 = FockFunction(label="G2", weighted=g2_weighted,
                      feature_radius=F.feature_radius,
                      gaussian_tail=False, growth_tag="polynomial")

    def g_weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        base = g2_weighted(z)
        poly = np.ones_like(z)
        for r in roots_g1:
            poly = poly * (1.0 - z / r)
        p = LogComplex.from_complex(poly)
        return LogComplex(np.asarray(base.log_mag) + np.asarray(p.log_mag),
                          np.asarray(base.phase) + np.asarray(p.phase))

    G = FockFunction(label="G", weighted=g_weighted,
                     feature_radius=F.feature_radius,
                     gaussian_tail=False, growth_tag="polynomial")

    bundle = ProductBundle(roots_s=roots_s, roots_g1=roots_g1, F=F, G2=G2, G=G,
                           ratio_panel={})
    panel = _ratio_panel(bundle, params)
    return ProductBundle(roots_s=roots_s, roots_g1=roots_g1, F=F, G2=G2, G=G,
                         ratio_panel=panel)


def _ratio_panel(bundle: ProductBundle, params: ConstructionParams) -> dict:
    """Measured constants for |G1/S| off the bump disks and for the
    compensated ratio |G1/S| * |(z - u - beta)/(z - v)| on them."""
    us = params.u_values()
    on_vals = []
    for u, rs, v in zip(us, bundle.roots_s, bundle.roots_g1):
        rr = 2.0 * math.sqrt(u)
        k = np.arange(80)
        z = u + rr * np.sqrt((k + 0.5) / 80.0) * np.exp(2j * PI * k * 0.618033988749895)
        z = z[np.abs(z - v) > 0.2]
        ratio = np.abs(bundle.g1_values(z) / bundle.s_values(z))
        comp = ratio * np.abs((z - rs) / (z - v))
        on_vals.extend(comp.tolist())
    xs = np.linspace(-params.quad_radius * 0.9, params.quad_radius * 0.9, 160)
    z_off = (xs[None, :] + 1j * xs[:, None]).ravel()
    keep = np.ones(z_off.shape, dtype=bool)
    for u in us:
        keep &= np.abs(z_off - u) > 2.0 * math.sqrt(u)
    z_off = z_off[keep]
    off_ratio = np.abs(bundle.g1_values(z_off) / bundle.s_values(z_off))
    return {
        "compensated_on_disks": (float(np.min(on_vals)), float(np.max(on_vals))),
        "plain_off_disks": (float(np.min(off_ratio)), float(np.max(off_ratio))),
    }


@dataclass(frozen=True)
class SolveReport:
    ds: tuple[float, ...]
    gammas: tuple[float, ...]
    xi: np.ndarray
    dominance_margin: float
    diag_scaling: tuple[float, ...]      # u_n^{1/2} |<g_n, nk_{u_n}>|
    cross_bound: float                   # max |<g_n, nk_{u_m}>| * max(u_m, u_n)
    sigma3_bound: float                  # max |<g_n, sigma3>| * |v_n|
    gamma_errs: tuple[float, ...]


def assemble_and_solve(bundle: ProductBundle, params: ConstructionParams,
                       cfg: SigmaConfig | None = None,
                       sigma3_fn: FockFunction | None = None) -> SolveReport:
    """Build the normalized level-coupling system and solve for the d_n.

    Kernel pairings <g_n, nk_{u_m}> are pure weighted evaluations by the
    reproducing property; only the sigma3 pairings need quadrature.  Rows are
    normalized so the diagonal entries are 1; strict diagonal dominance and
    d_n in (-1, 1) are required, otherwise the scale is declared too small.
    """
    cfg = cfg or default_config()
    if sigma3_fn is None:
        sigma3_fn = sigma3_function(cfg)
    us = params.u_values()
    N = len(us)
    gs = [bundle.g_at(v) for v in bundle.roots_g1]
    pair = np.zeros((N, N))
    for n in range(N):
        for m in range(N):
            val = gs[n].weighted_at(complex(us[m])).to_complex()
            if abs(val.imag) > 1e-10 * max(abs(val), 1e-30):
                raise NumericalFailure(f"<g_{n}, nk_u{m}> unexpectedly complex: {val}")
            pair[n, m] = val.real
    gam_raw = np.zeros(N)
    gam_err = []
    # the weighted sigma3 decays only polynomially and the g's carry O(1)
    # mass on the bump disks, so these pairings need the full window
    spec = params.quad_spec()
    for n in range(N):
        val, err = inner_product_with_error(gs[n], sigma3_fn, spec)
        gam_raw[n] = val.real
        gam_err.append(err)
    c = np.array([us[n] ** (-1.0 / 3.0) * pair[n, n] for n in range(N)])
    if np.any(c == 0.0):
        raise QTooSmallError("vanishing diagonal pairing; increase q")
    xi = np.zeros((N, N))
    for n in range(N):
        for m in range(N):
            xi[m, n] = us[m] ** (-1.0 / 3.0) * pair[n, m] / c[n]
    gam = np.array([-gam_raw[n] / c[n] for n in range(N)])
    off = np.abs(xi.T) - np.diag(np.diag(np.abs(xi.T)))
    row_sums = off.sum(axis=1)
    margin = float(1.0 - row_sums.max())
    if margin <= 0.0:
        raise QTooSmallError(
            f"diagonal dominance fails (max off-row sum {row_sums.max():.3f}); increase q"
        )
    ds = np.linalg.solve(xi.T, gam)
    if np.any(np.abs(ds) >= 1.0):
        raise QTooSmallError(f"solved d values escape (-1, 1): {ds}; increase q")
    scaling = tuple(float(math.sqrt(us[n]) * abs(pair[n, n])) for n in range(N))
    cross = 0.0
    for n in range(N):
        for m in range(N):
            if m != n:
                cross = max(cross, abs(pair[n, m]) * max(us[m], us[n]))
    s3_bound = max(abs(gam_raw[n]) * abs(bundle.roots_g1[n]) for n in range(N))
    return SolveReport(ds=tuple(float(d) for d in ds),
                       gammas=tuple(float(g) for g in gam),
                       xi=xi, dominance_margin=margin,
                       diag_scaling=scaling, cross_bound=float(cross),
                       sigma3_bound=float(s3_bound),
                       gamma_errs=tuple(gam_err))


def sigma3_function(cfg: SigmaConfig | None = None) -> FockFunction:
    cfg = cfg or default_config()
    return FockFunction(
        label="sigma3",
        weighted=lambda z: sigma3_weighted_memo(np.asarray(z, dtype=complex), cfg),
        kernel_terms=(),
        sigma3_coeff=1.0,
        known_zeros=(),
        feature_radius=3.0,
        gaussian_tail=False,
        growth_tag="polynomial",
    )


def build_annihilator(ds: Sequence[float], params: ConstructionParams,
                      cfg: SigmaConfig | None = None) -> FockFunction:
    """H = sigma3 + sum of d_n u_n^{-1/3} nk_{u_n} (kernel decomposition
    attached; reduces to sigma3 exactly when all d vanish)."""
    cfg = cfg or default_config()
    us = params.u_values()
    terms = tuple((float(d) * u ** (-1.0 / 3.0), complex(u)) for d, u in zip(ds, us))
    terms = tuple((c, lam) for c, lam in terms if c != 0.0)
    s3 = sigma3_function(cfg)
    if not terms:
        return FockFunction(label="H", weighted=s3.weighted, kernel_terms=(),
                            sigma3_coeff=1.0, feature_radius=3.0,
                            gaussian_tail=False, growth_tag="polynomial")

    def weighted(z: np.ndarray) -> LogComplex:
        z = np.asarray(z, dtype=complex)
        parts_lm = np.empty((len(terms) + 1,) + z.shape)
        parts_ph = np.empty_like(parts_lm)
        base = sigma3_weighted_memo(z, cfg)
        parts_lm[0] = np.asarray(base.log_mag)
        parts_ph[0] = np.asarray(base.phase)
        for i, (cc, lam) in enumerate(terms, start=1):
            k = kernel_weighted_eval(KernelSpec(lam), z)
            lc = LogComplex.from_complex(cc)
            parts_lm[i] = np.asarray(k.log_mag) + lc.log_mag
            parts_ph[i] = np.asarray(k.phase) + lc.phase
        return log_sum_axis(parts_lm, parts_ph, axis=0)

    return FockFunction(label="H", weighted=weighted, kernel_terms=terms,
                        sigma3_coeff=1.0, feature_radius=us[-1] + 1.0,
                        gaussian_tail=False, growth_tag="polynomial")


# ---------------------------------------------------------------------------
# Orchestration and verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstructionResult:
    params: ConstructionParams
    F: FockFunction
    H: FockFunction
    betas: tuple[float, ...]
    vs: tuple[float, ...]
    ds: tuple[float, ...]
    lambda2: np.ndarray
    bundle: ProductBundle
    solve: SolveReport
    scan: ZeroScanDiagnostics
    fo3_panel: dict

    @property
    def lambda1(self) -> np.ndarray:
        return np.array(self.vs, dtype=complex)


def build_construction(params: ConstructionParams,
                       cfg: SigmaConfig | None = None) -> ConstructionResult:
    cfg = cfg or default_config()
    F = build_profile(params, cfg)
    betas = find_betas(F, params)
    vs = choose_vs(F, betas, params)
    bundle = build_products(F, betas, vs, params)
    solve = assemble_and_solve(bundle, params, cfg)
    H = build_annihilator(solve.ds, params, cfg)
    exclude = [u + b for u, b in zip(params.u_values(), betas)]
    lambda2, scan = scan_zone_zeros(F, params, exclude=exclude)
    _check_separations(vs, lambda2, exclude, params)
    fo3 = fo3_remainder_panel(F, params)
    return ConstructionResult(params=params, F=F, H=H,
                              betas=tuple(betas), vs=tuple(vs),
                              ds=solve.ds, lambda2=lambda2, bundle=bundle,
                              solve=solve, scan=scan, fo3_panel=fo3)


def _check_separations(vs, lambda2, s_roots, params) -> None:
    margin = params.lattice_margin
    pts = list(map(complex, vs)) + list(map(complex, s_roots)) + [complex(u) for u in params.u_values()]
    all_pts = pts + list(map(complex, lambda2.tolist()))
    for i in range(len(all_pts)):
        for j in range(i + 1, len(all_pts)):
            if abs(all_pts[i] - all_pts[j]) < margin:
                raise ConstructionError(
                    f"separation violated: {all_pts[i]} vs {all_pts[j]}"
                )
    for p in list(map(complex, vs)) + list(map(complex, lambda2.tolist())):
        if dist_to_lattice(p) < margin:
            raise ConstructionError(f"point {p} too close to the lattice")


@dataclass(frozen=True)
class PropertyReport:
    p2_residual: float
    p2_count: int
    p3_residuals: tuple[float, ...]
    p3_tolerance: float
    p4_value: complex
    p4_imag_tol: float
    sigma3_norm_sq: float
    p4_gap: float                 # |<F,H> - ||sigma3||^2|
    perturbation_norms: tuple[float, float]   # ||F - sigma3||, ||H - sigma3||
    c_of_q: float                 # (||F-s3|| + ||H-s3||) * q^{1/3}
    g_upper: float                # measured sup |W_G| / (1 + |z|)
    f_lower: float                # measured inf |W_F| (1 + |z|)^4 off the exceptional set
    g_norms: dict
    status: dict

    @property
    def ok(self) -> bool:
        return all(self.status.values())


def verify_properties(result: ConstructionResult,
                      cfg: SigmaConfig | None = None) -> PropertyReport:
    """Check the annihilation and nondegeneracy panel for the built system."""
    cfg = cfg or default_config()
    params = result.params
    us = params.u_values()
    spec = params.quad_spec()
    s3 = sigma3_function(cfg)

    # P2: F vanishes on the sampled windowed zero set
    sample = result.lambda2
    if len(sample) > 20:
        idx = np.linspace(0, len(sample) - 1, 20).round().astype(int)
        sample = sample[idx]
    p2 = 0.0
    for lam in sample:
        w = result.F.weighted_at(complex(lam))
        if not np.isneginf(w.log_mag):
            p2 = max(p2, math.exp(w.log_mag))

    # one batched grid pass covers P3, P4 and every g-norm
    from .core_num import paired_integrals

    evals = {"H": result.H.weighted, "F": result.F.weighted}
    pairs = [("F", "H")]
    for i, v in enumerate(result.vs):
        name = f"g{i}"
        evals[name] = result.bundle.g_at(v).weighted
        pairs += [(name, "H"), (name, name)]
    lam_sample = result.lambda2[:: max(1, len(result.lambda2) // 5)][:5]
    for j, lam in enumerate(lam_sample):
        name = f"gz{j}"
        evals[name] = result.bundle.g_at(complex(lam)).weighted
        pairs.append((name, name))
    batch = paired_integrals(evals, pairs, spec)

    # P3: <g_{v_n}, H> by full quadrature
    p3 = []
    p3_tol = params.tol_solve
    for i in range(len(result.vs)):
        val, err = batch[(f"g{i}", "H")]
        p3.append(abs(val))
        p3_tol = max(p3_tol, params.tol_solve + 10.0 * err)

    # P4: <F, H> against ||sigma3||^2
    s3_sq, s3_err = inner_product_with_error(s3, s3,
                                             QuadratureSpec(20.0, params.quad_step))
    fh, fh_err = batch[("F", "H")]
    fh_closed = s3_sq.real + _kernel_cross_term(result, params)
    p4_gap = abs(fh - s3_sq.real)
    f_pert = kernel_sum_norm(result.F.kernel_terms)
    h_pert = kernel_sum_norm(result.H.kernel_terms)
    c_of_q = (f_pert + h_pert) * params.q ** (1.0 / 3.0)

    # evidence for completeness/minimality: growth envelope of G, the lower
    # envelope of F off the exceptional set, and finiteness of the g norms
    g_upper, f_lower = _envelope_panel(result, params)
    g_norms = {}
    for i, v in enumerate(result.vs):
        g_norms[complex(v)] = float(math.sqrt(max(batch[(f"g{i}", f"g{i}")][0].real, 0.0)))
    for j, lam in enumerate(lam_sample):
        g_norms[complex(lam)] = float(math.sqrt(max(batch[(f"gz{j}", f"gz{j}")][0].real, 0.0)))

    status = {
        "p2": p2 <= 2.0 * params.tol_root,
        "p3": max(p3) <= p3_tol,
        "p4_imag": abs(fh.imag) <= 1e-6,
        "p4_nonzero": fh.real >= 0.5 * s3_sq.real,
        "p4_closed_consistent": abs(fh - fh_closed) <= 100.0 * (fh_err + s3_err) + 1e-8,
        "g_norms_finite": all(math.isfinite(v) and v > 0 for v in g_norms.values()),
        "f_lower_positive": f_lower > 0.0,
    }
    return PropertyReport(
        p2_residual=p2, p2_count=len(sample),
        p3_residuals=tuple(p3), p3_tolerance=p3_tol,
        p4_value=fh, p4_imag_tol=1e-6,
        sigma3_norm_sq=float(s3_sq.real), p4_gap=float(p4_gap),
        perturbation_norms=(f_pert, h_pert), c_of_q=float(c_of_q),
        g_upper=g_upper, f_lower=f_lower, g_norms=g_norms, status=status,
    )


def _kernel_cross_term(result: ConstructionResult, params: ConstructionParams) -> float:
    """Closed-form kernel part of <F, H>: sigma3 is orthogonal to every
    kernel centered on the lattice (it vanishes there), so only the bump
    pairs against the H kernels survive."""
    acc = 0.0
    for cf, lf in result.F.kernel_terms:
        for ch, lh in result.H.kernel_terms:
            g = kernel_weighted_eval(KernelSpec(lh), lf).to_complex()
            acc += (cf * np.conjugate(ch) * np.conjugate(g)).real
    return acc


def _envelope_panel(result: ConstructionResult, params: ConstructionParams) -> tuple[float, float]:
    rng = np.random.default_rng(params.q * 1000 + params.levels)
    R = params.quad_radius * 0.85
    z = rng.uniform(-R, R, 4000) + 1j * rng.uniform(-R, R, 4000)
    keep = np.abs(z) <= R
    z = z[keep]
    wg = np.exp(np.asarray(result.bundle.G.weighted(z).log_mag))
    g_upper = float(np.max(wg / (1.0 + np.abs(z))))
    mask = dist_to_lattice(z) >= 0.1
    for u in params.u_values():
        mask &= np.abs(z - u) > 2.0 * math.sqrt(u)
    zf = z[mask]
    wf = np.exp(np.asarray(result.F.weighted(zf).log_mag))
    f_lower = float(np.min(wf * (1.0 + np.abs(zf)) ** 4))
    return g_upper, f_lower


def orthogonality_rows(result: ConstructionResult, n_max: int = 2,
                       k_cut: int | None = None,
                       cfg: SigmaConfig | None = None) -> list[dict]:
    """|<z^n G1/p_k G2, H>| rows: for k = N the prefactor G1/p_k is 1 and the
    rows measure |<z^n G2, H>| directly against the quadrature floor, plus a
    sigma3 control row which is *not* expected to be small."""
    cfg = cfg or default_config()
    params = result.params
    if n_max > 4:
        raise DomainError("n_max <= 4")
    N = params.levels
    k_cut = N if k_cut is None else k_cut
    spec = params.quad_spec()
    rows = []
    extra = tuple(result.vs[k_cut:])

    def make_fn(power: int) -> FockFunction:
        def weighted(z: np.ndarray) -> LogComplex:
            z = np.asarray(z, dtype=complex)
            base = result.bundle.G2.weighted(z)
            poly = z**power if power else np.ones_like(z)
            for v in extra:
                poly = poly * (1.0 - z / v)
            p = LogComplex.from_complex(poly)
            return LogComplex(np.asarray(base.log_mag) + np.asarray(p.log_mag),
                              np.asarray(base.phase) + np.asarray(p.phase))
        return FockFunction(label=f"z^{power}*G1/p_{k_cut}*G2", weighted=weighted,
                            feature_radius=result.F.feature_radius,
                            gaussian_tail=False, growth_tag="polynomial")

    for power in range(n_max + 1):
        fn = make_fn(power)
        val, err = inner_product_with_error(fn, result.H, spec)
        rows.append({"n": power, "k": k_cut, "value": val, "err": err,
                     "control": False})
    control, cerr = inner_product_with_error(make_fn(0), sigma3_function(cfg), spec)
    rows.append({"n": 0, "k": k_cut, "value": control, "err": cerr,
                 "control": True})
    return rows
