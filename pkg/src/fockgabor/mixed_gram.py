"""Finite-section Gram/SVD experiments on mixed kernel-biorthogonal systems.

A mixed system replaces the kernels over one part of the point set by the
biorthogonal elements g_lam = G/(. - lam): here the vectors are

    {nk_lam : lam in Lambda2}  union  {g_lam/||g_lam|| : lam in Lambda1},

ordered by increasing |lam| across both families.  Finite sections cannot
certify the dimension of an orthogonal complement; the scan reports the trend
of the two smallest singular values across growing sections, which for the
defective construction shows one collapsing direction (sigma_min falling
toward the quadrature floor) while the rest of the spectrum stays put
(sigma_2min roughly stable) -- the finite-section shadow of a defect of
exactly one.

Gram entries are exact wherever a reproducing evaluation exists: kernel vs
kernel in closed form, g vs kernel by evaluating g at the kernel center
(zero, in fact, whenever the center lies in Lambda2, because G vanishes
there); only g vs g needs quadrature.  Quadrature entries are computed in
both orders, averaged into an exactly Hermitian matrix, and the asymmetry is
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_num import DomainError, QuadratureSpec, paired_integrals
from .fock import FockFunction, KernelSpec, kernel_function, kernel_weighted_eval
from .weierstrass import dist_to_lattice

PI = math.pi


@dataclass(frozen=True)
class MixedSystemSpec:
    """An ordered mixed family ready for sectioning.

    ``kinds[i]`` is "kernel" or "dual"; ``points[i]`` the underlying lambda;
    ``vectors[i]`` the normalized member.  ``gram`` holds the full Hermitian
    Gram matrix of the family and ``gram_asymmetry`` the worst deviation
    between the two evaluation orders of its quadrature entries.
    """

    lambda1: tuple[complex, ...]
    lambda2: tuple[complex, ...]
    points: tuple[complex, ...]
    kinds: tuple[str, ...]
    vectors: tuple[FockFunction, ...]
    section_sizes: tuple[int, ...]
    gram: np.ndarray
    gram_asymmetry: float
    dual_norms: dict


@dataclass(frozen=True)
class GramReport:
    section_size: int
    singular_values: np.ndarray
    sigma_min: float
    sigma_2min: float
    null_vector: np.ndarray
    conditioning: float


def build_mixed_system(lambda1, duals, lambda2, section_sizes,
                       quad: QuadratureSpec, margin: float = 0.04) -> MixedSystemSpec:
    """Assemble and order the mixed family and compute its full Gram matrix.

    ``duals`` maps each Lambda1 point to its (unnormalized) biorthogonal-type
    FockFunction; kernels over Lambda2 are generated here.  Points of the two
    families must be disjoint and off the lattice by ``margin``.
    """
    lambda1 = tuple(complex(l) for l in lambda1)
    lambda2 = tuple(complex(l) for l in lambda2)
    for l in lambda1:
        for m in lambda2:
            if abs(l - m) < margin:
                raise DomainError(f"Lambda1 point {l} collides with Lambda2 point {m}")
    for p in lambda1 + lambda2:
        if dist_to_lattice(p) < margin:
            raise DomainError(f"mixed-system point {p} is within {margin} of the lattice")

    entries = [(lam, "kernel", kernel_function(KernelSpec(lam))) for lam in lambda2]
    entries += [(lam, "dual", duals[lam]) for lam in lambda1]
    entries.sort(key=lambda t: (abs(t[0]), t[0].real, t[0].imag))
    points = tuple(e[0] for e in entries)
    kinds = tuple(e[1] for e in entries)
    raw = [e[2] for e in entries]

    # quadrature pass: every dual-dual pairing in both orders, plus norms
    dual_idx = [i for i, k in enumerate(kinds) if k == "dual"]
    evals = {f"d{i}": raw[i].weighted for i in dual_idx}
    pairs = []
    for a in dual_idx:
        for b in dual_idx:
            pairs.append((f"d{a}", f"d{b}"))
    batch = paired_integrals(evals, pairs, quad) if dual_idx else {}
    norms = {}
    for i in dual_idx:
        nsq = batch[(f"d{i}", f"d{i}")][0].real
        if not (nsq > 0 and math.isfinite(nsq)):
            raise DomainError(f"dual vector at {points[i]} has unusable norm^2 {nsq}")
        norms[points[i]] = math.sqrt(nsq)

    n = len(raw)
    gram = np.zeros((n, n), dtype=complex)
    asym = 0.0
    for i in range(n):
        for j in range(n):
            if kinds[i] == "kernel" and kinds[j] == "kernel":
                if i == j:
                    gram[i, j] = 1.0
                else:
                    gram[i, j] = np.conjugate(
                        kernel_weighted_eval(KernelSpec(points[j]), points[i]).to_complex()
                    )
            elif kinds[i] == "dual" and kinds[j] == "kernel":
                # <g/||g||, nk_mu> = W_g(mu)/||g||
                gram[i, j] = raw[i].weighted_at(points[j]).to_complex() / norms[points[i]]
            elif kinds[i] == "kernel" and kinds[j] == "dual":
                gram[i, j] = np.conjugate(
                    raw[j].weighted_at(points[i]).to_complex()) / norms[points[j]]
            else:
                val = batch[(f"d{i}", f"d{j}")][0]
                gram[i, j] = val / (norms[points[i]] * norms[points[j]])
    asym = float(np.max(np.abs(gram - gram.conj().T)))
    gram = (gram + gram.conj().T) / 2.0

    vectors = []
    for i, f in enumerate(raw):
        if kinds[i] == "dual":
            scale = 1.0 / norms[points[i]]
            vectors.append(_scaled(f, scale))
        else:
            vectors.append(f)
    return MixedSystemSpec(
        lambda1=lambda1, lambda2=lambda2, points=points, kinds=kinds,
        vectors=tuple(vectors), section_sizes=tuple(int(s) for s in section_sizes),
        gram=gram, gram_asymmetry=asym, dual_norms=norms,
    )


def _scaled(f: FockFunction, scale: float) -> FockFunction:
    from .core_num import LogComplex

    lg = math.log(scale)

    def weighted(z):
        base = f.weighted(z)
        return LogComplex(np.asarray(base.log_mag) + lg, np.asarray(base.phase))

    return FockFunction(label=f.label + "/norm", weighted=weighted,
                        feature_radius=f.feature_radius,
                        gaussian_tail=f.gaussian_tail)


def gram_matrix(system: MixedSystemSpec, size: int) -> np.ndarray:
    """Leading Hermitian section of the family Gram matrix."""
    if size > len(system.vectors):
        raise DomainError(f"section size {size} exceeds family size {len(system.vectors)}")
    return system.gram[:size, :size]


def section_report(system: MixedSystemSpec, size: int) -> GramReport:
    g = gram_matrix(system, size)
    _u, s, vh = np.linalg.svd(g)
    # with G_ij = <v_i, v_j>, ||sum c_i v_i||^2 = c^T G conj(c): the minimal
    # combination's coefficients are the conjugate of G's smallest eigenvector
    null = vh[-1, :]
    null = null / np.linalg.norm(null)
    return GramReport(
        section_size=size,
        singular_values=s,
        sigma_min=float(s[-1]),
        sigma_2min=float(s[-2]) if size >= 2 else float(s[-1]),
        null_vector=null,
        conditioning=float(s[0] / s[-1]) if s[-1] > 0 else math.inf,
    )


def defect_scan(system: MixedSystemSpec) -> list[GramReport]:
    """Singular-value trends across the configured section sizes."""
    sizes = list(system.section_sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DomainError("section_sizes must be strictly increasing")
    return [section_report(system, s) for s in sizes]


def null_vector_correlation(system: MixedSystemSpec, report: GramReport,
                            candidate: FockFunction,
                            quad: QuadratureSpec | None = None) -> float:
    """|<u, candidate>| / (||u|| ||candidate||) for the section combination u
    built from the null-vector coefficients.  Near 1 means the numerical null
    direction points at the candidate annihilator."""
    c = report.null_vector
    size = report.section_size
    g = gram_matrix(system, size)
    u_norm_sq = float(np.real(c @ g @ np.conjugate(c)))
    if u_norm_sq <= 0:
        u_norm_sq = max(u_norm_sq, 1e-30)
    from .fock import inner_product_with_error

    acc = 0.0 + 0.0j
    cand_norm_sq, _ = inner_product_with_error(candidate, candidate, quad)
    if cand_norm_sq.real <= 1e-24:
        raise DomainError("candidate has vanishing norm")
    for i in range(size):
        vi = system.vectors[i]
        if system.kinds[i] == "kernel" and candidate.gaussian_tail:
            ip = np.conjugate(candidate.weighted_at(system.points[i]).to_complex())
        else:
            ip, _ = inner_product_with_error(vi, candidate, quad)
        acc += c[i] * ip
    return float(abs(acc) / math.sqrt(u_norm_sq * cand_norm_sq.real))


def control_kernel_system(spacing: float = 2.0, count: int = 16,
                          section_sizes=(8, 12, 16)) -> MixedSystemSpec:
    """Pure kernel family at well-separated points (Gershgorin keeps every
    section's sigma_min near 1): the non-defective control."""
    pts = []
    k = 0
    # spiral over a coarse off-lattice grid
    side = int(math.ceil(math.sqrt(count)))
    for i in range(side):
        for j in range(side):
            if len(pts) < count:
                pts.append(complex(i * spacing + 0.4371, j * spacing + 0.3663))
    lambda2 = tuple(pts)
    entries = sorted(lambda2, key=lambda t: (abs(t), t.real, t.imag))
    n = len(entries)
    gram = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            gram[i, j] = (1.0 if i == j else np.conjugate(
                kernel_weighted_eval(KernelSpec(entries[j]), entries[i]).to_complex()))
    gram = (gram + gram.conj().T) / 2.0
    vectors = tuple(kernel_function(KernelSpec(p)) for p in entries)
    return MixedSystemSpec(
        lambda1=(), lambda2=tuple(entries), points=tuple(entries),
        kinds=("kernel",) * n, vectors=vectors,
        section_sizes=tuple(section_sizes), gram=gram, gram_asymmetry=0.0,
        dual_norms={},
    )


def mixed_system_from_construction(result, quad: QuadratureSpec | None = None,
                                   max_kernels: int = 13,
                                   section_sizes=(8, 12, 16)) -> MixedSystemSpec:
    """The defective partition of the built system: Lambda1 = {v_n} with
    their g duals, Lambda2 = the windowed displaced zeros of F (nearest
    ``max_kernels`` by modulus)."""
    quad = quad or result.params.quad_spec()
    lambda2 = tuple(complex(z) for z in result.lambda2[:max_kernels])
    lambda1 = tuple(complex(v) for v in result.vs)
    duals = {complex(v): result.bundle.g_at(v) for v in result.vs}
    return build_mixed_system(lambda1, duals, lambda2, section_sizes, quad,
                              margin=result.params.lattice_margin)
