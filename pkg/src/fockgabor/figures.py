"""Figure rendering for the report path.

Each suite gets one or two PNG panels summarizing its artifact data, written
alongside the delimited reports.  Figures avoid any run metadata (no
timestamps, fixed Software tag) so repeated runs produce identical bytes.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(dpi=110, metadata={"Software": "fockgabor"})


def _save(fig, path: Path) -> None:
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_suite_figures(name: str, rows, artifacts: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if name == "verify-fock":
        _fock_figure(artifacts, out_dir / "verify-fock_reproducing.png")
    elif name == "verify-sigma":
        _sigma_figure(artifacts, out_dir / "verify-sigma_bound.png")
    elif name == "check-identities":
        _identity_figure(artifacts, out_dir / "check-identities_norms.png")
    elif name == "build-counterexample":
        _construction_figure(artifacts, out_dir / "build-counterexample_profile.png")
    elif name == "gram-defect":
        _gram_figure(artifacts, out_dir / "gram-defect_trend.png")


def _fock_figure(artifacts: dict, path: Path) -> None:
    errs = np.sort(artifacts["reproducing_errors"])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(1, errs.size + 1), np.maximum(errs, 1e-18), ".", ms=3)
    ax.set_xlabel("check index (sorted)")
    ax.set_ylabel("|quadrature - pointwise|")
    ax.set_title("Reproducing-evaluation agreement across the corpus")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def _sigma_figure(artifacts: dict, path: Path) -> None:
    from .weierstrass import default_config, dist_to_lattice, sigma_weighted

    cfg = default_config()
    xs = np.linspace(-3, 3, 481)
    Z = xs[None, :] + 1j * xs[:, None]
    ratio = np.exp(np.asarray(sigma_weighted(Z, cfg).log_mag))
    d = dist_to_lattice(Z)
    ratio = np.where(d > 1e-9, ratio / np.maximum(d, 1e-9), np.nan)
    fig, ax = plt.subplots(figsize=(5.4, 4.4))
    im = ax.imshow(ratio, origin="lower", extent=(-3, 3, -3, 3),
                   vmin=0.0, vmax=1.1, cmap="viridis")
    fig.colorbar(im, ax=ax, label="|sigma| weighted / dist to lattice")
    ax.set_title("Two-sided bound ratio over the plane")
    fig.tight_layout()
    _save(fig, path)


def _identity_figure(artifacts: dict, path: Path) -> None:
    cl3 = artifacts["cl3"]
    ws = sorted(cl3["norms"], key=lambda w: (abs(w.value), w.m, w.n))
    r = np.array([abs(w.value) for w in ws])
    n = np.array([cl3["norms"][w] for w in ws])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(r, n, ".", ms=4, label="measured norm")
    rr = np.linspace(1, r.max(), 200)
    scale = n[0] * r[0] / math.sqrt(math.log(2.0))
    ax.plot(rr, scale * np.sqrt(np.log(1 + rr)) / rr, "-", lw=1,
            label="log^(1/2)(1+r)/r shape")
    ax.set_xlabel("|w|")
    ax.set_ylabel("norm of the deflated generator at w")
    ax.set_title("Coefficient-functional norms across the lattice")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def _construction_figure(artifacts: dict, path: Path) -> None:
    result = artifacts["result"]
    from .construction import real_weighted

    fig, axes = plt.subplots(1, len(result.params.u_values()), figsize=(11, 3.4),
                             sharey=False)
    axes = np.atleast_1d(axes)
    for ax, (u, beta) in zip(axes, zip(result.params.u_values(), result.betas)):
        xs = np.linspace(u - 3.0, u + 4.0, 400)
        ax.plot(xs, real_weighted(result.F, xs), lw=1)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.axvline(u + beta, color="r", ls="--", lw=1, label="root")
        ax.set_title(f"level at {u:g}")
        ax.set_xlabel("Re z")
    axes[0].set_ylabel("weighted profile on the line")
    axes[0].legend()
    fig.tight_layout()
    _save(fig, path)


def _gram_figure(artifacts: dict, path: Path) -> None:
    reports = artifacts["reports"]
    control = artifacts["control"]
    sizes = [r.section_size for r in reports]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(sizes, [r.sigma_min for r in reports], "o-", label="sigma_min (mixed)")
    ax.semilogy(sizes, [r.sigma_2min for r in reports], "s-", label="sigma_2min (mixed)")
    ax.semilogy([r.section_size for r in control], [r.sigma_min for r in control],
                "^--", label="sigma_min (control)")
    ax.set_xlabel("section size")
    ax.set_ylabel("singular value")
    ax.set_title("Finite-section spectra of the mixed system")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
