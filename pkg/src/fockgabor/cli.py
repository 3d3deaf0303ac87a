"""Batch driver: config ingestion, suite orchestration, report emission.

Usage:

    fockgabor <command> --config <file> [--out <dir>] [--format csv|json]
              [--quiet] [--no-figures]

with command one of verify-fock, verify-sigma, check-identities,
build-counterexample, gram-defect, or all.  The config file is flat
``key = value`` text (``#`` comments allowed); unknown keys are rejected with
a line-anchored diagnostic.  Schema:

    q              integer >= 4        construction scale (default 8)
    levels         integer >= 1        construction depth (default 3)
    tol_root       float               root residual target (default 1e-10)
    tol_solve      float               coefficient residual target (default 1e-8)
    quad_radius    float               quadrature half-width override
    quad_step      float               quadrature step (default 0.05)
    trunc          float               lattice-sum truncation radius (default 12)
    section_sizes  comma-separated     Gram section sizes (default 8,12,16)

Every run writes one report file per suite plus ``summary.<fmt>`` into the
output directory, echoing the resolved settings in a header row so runs are
self-describing.  Reports are byte-stable across identical runs.  Exit code 0
when no row failed, 1 when any row failed, 2 on configuration or runtime
errors.  Figures (PNG, one or two per suite) are rendered next to the reports
unless --no-figures is passed; they carry no timestamps, so they are also
reproducible.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

from .suites import SUITES, ReportRow, RunSettings

COMMANDS = ("verify-fock", "verify-sigma", "check-identities",
            "build-counterexample", "gram-defect", "all")


class ConfigError(ValueError):
    pass


_INT_KEYS = {"q", "levels"}
_FLOAT_KEYS = {"tol_root", "tol_solve", "quad_radius", "quad_step", "trunc"}
_LIST_KEYS = {"section_sizes"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _LIST_KEYS


def parse_config(path: str | Path | None) -> RunSettings:
    """Strict flat key-value parsing; unknown keys and malformed values are
    rejected with the offending line number."""
    if path is None:
        return RunSettings()
    text = Path(path).read_text()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            else:
                values[key] = tuple(int(s) for s in val.split(",") if s.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    settings = RunSettings(**values)
    validate_settings(settings)
    return settings


def validate_settings(settings: RunSettings) -> None:
    """Check every numeric override against module preconditions before any
    computation starts."""
    if settings.q < 4:
        raise ConfigError("q must be >= 4")
    if settings.levels < 1:
        raise ConfigError("levels must be >= 1")
    if not (0 < settings.tol_root < 1e-4):
        raise ConfigError("tol_root out of range (0, 1e-4)")
    if not (0 < settings.tol_solve < 1e-2):
        raise ConfigError("tol_solve out of range (0, 1e-2)")
    if not (0 < settings.quad_step <= 0.2):
        raise ConfigError("quad_step out of range (0, 0.2]")
    if settings.trunc < 4:
        raise ConfigError("trunc must be >= 4")
    if len(settings.section_sizes) < 2 or any(
            b <= a for a, b in zip(settings.section_sizes, settings.section_sizes[1:])):
        raise ConfigError("section_sizes must be strictly increasing, length >= 2")
    if settings.section_sizes[0] < 1:
        raise ConfigError("section sizes must be positive")
    if settings.quad_radius is not None:
        needed = (2 ** (settings.levels - 1) * settings.q)
        needed = needed + 2 * math.sqrt(needed) + 8
        if settings.quad_radius < needed:
            raise ConfigError(
                f"quad_radius must be >= {needed:.1f} for q={settings.q}, "
                f"levels={settings.levels}")


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return format(float(x), ".17g")


def settings_rows(settings: RunSettings, suite: str) -> list[ReportRow]:
    """Echo the resolved settings into the report so runs are self-describing."""
    rows = []
    for f in dc_fields(RunSettings):
        v = getattr(settings, f.name)
        if v is None:
            continue
        if f.name == "section_sizes":
            for i, s in enumerate(v):
                rows.append(ReportRow.info(suite, f"config-section-size-{i}",
                                           "run-configuration", s))
        else:
            rows.append(ReportRow.info(suite, f"config-{f.name}",
                                       "run-configuration", v))
    return rows


def emit_report(rows: list[ReportRow], fmt: str, path: Path) -> None:
    """Write rows as CSV (columns: suite, check_id, paper_anchor, value_re,
    value_im, tolerance, status) or the JSON mirror, with 17 significant
    digits and byte-stable output."""
    if not rows:
        raise ConfigError("refusing to emit an empty report")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with path.open("w", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["suite", "check_id", "paper_anchor", "value_re",
                             "value_im", "tolerance", "status"])
            for r in rows:
                writer.writerow([r.suite, r.check_id, r.anchor,
                                 _fmt(r.value.real), _fmt(r.value.imag),
                                 _fmt(r.tolerance), r.status])
    elif fmt == "json":
        payload = [
            {"suite": r.suite, "check_id": r.check_id, "paper_anchor": r.anchor,
             "value_re": _fmt(r.value.real), "value_im": _fmt(r.value.imag),
             "tolerance": _fmt(r.tolerance), "status": r.status}
            for r in rows
        ]
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    else:
        raise ConfigError(f"unknown format {fmt!r}")


def run(command: str, settings: RunSettings, out_dir: Path, fmt: str = "csv",
        quiet: bool = False, figures: bool = True) -> int:
    """Execute the selected suite(s); returns the process exit code."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    names = list(SUITES) if command == "all" else [command]
    all_rows: list[ReportRow] = []
    artifacts = {}
    for name in names:
        rows, art = SUITES[name](settings)
        rows = settings_rows(settings, name) + rows
        artifacts[name] = art
        emit_report(rows, fmt, out_dir / f"{name}.{fmt}")
        if figures:
            from . import figures as figmod

            figmod.render_suite_figures(name, rows, art, out_dir)
        all_rows.extend(rows)
        if not quiet:
            for r in rows:
                if r.status != "info":
                    print(f"[{r.suite}] {r.check_id}: {r.status}"
                          f" (value {r.value.real:.6g}, tol {r.tolerance:.2g})")
    emit_report(all_rows, fmt, out_dir / f"summary.{fmt}")
    failed = [r for r in all_rows if r.status == "fail"]
    if not quiet:
        print(f"{len(all_rows)} rows, {len(failed)} failing")
        for r in failed:
            print(f"FAIL [{r.suite}] {r.check_id}: value {r.value.real:.6g} "
                  f"vs tolerance {r.tolerance:.3g}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fockgabor",
        description="Verification suites for Gaussian Gabor / Fock-space numerics.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, default=None,
                   help="flat key = value settings file")
    p.add_argument("--out", type=Path, default=Path("reports"),
                   help="output directory (default ./reports)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering PNG figures next to the reports")
    return p


def main(argv: list[str] | None = None) -> None:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        settings = parse_config(ns.config)
        code = run(ns.command, settings, ns.out, ns.format,
                   quiet=ns.quiet, figures=not ns.no_figures)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        sys.exit(2)
    except Exception as exc:  # runtime failure inside a suite
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
    sys.exit(code)


if __name__ == "__main__":
    main()
