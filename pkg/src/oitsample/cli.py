"""Batch command-line front end: build, sample, validate, export.

Commands are deterministic given their effective configuration (seeds
included).  Exit codes: 0 success, 1 usage or configuration error,
2 numerical failure, 3 validation failure.

Configuration is plain ``key=value`` text; a ``--config`` file supplies
values that explicit flags override.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import fileio
from .densities import make_density
from .errors import (
    InvalidInputError,
    NumericalBlowupError,
    OrientationLossError,
)
from .geodesic import Density, normalize, set_dynamic_range
from .grid import PeriodicGrid, ScalarField
from .sampler import SampleBatch, sample_target
from .transport import TransportConfig, build_transport_map
from .validate import (
    chi_squared_gof,
    expected_bin_mass,
    histogram,
    rejection_sample_oracle,
    two_sample_chi_squared,
)

SIGNIFICANCE = 0.01


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of one command; round-trips through key=value text."""

    density: str | None = None
    ratio: float | None = None
    grid: int = 256
    steps: int = 100
    seed: int = 0
    n: int = 100_000
    bins: int = 32
    out: str | None = None
    map: str | None = None
    samples: str | None = None
    format: str = "csv"
    workers: int = 1

    def to_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if value is not None:
                lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


_INT_KEYS = {"grid", "steps", "seed", "n", "bins", "workers"}
_FLOAT_KEYS = {"ratio"}
_STR_KEYS = {"density", "out", "map", "samples", "format"}


def parse_config_text(text: str) -> dict:
    """Parse key=value lines (# comments allowed) into typed values."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise UsageError(f"config line {lineno}: expected key=value, got {raw!r}")
        if key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        elif key in _STR_KEYS:
            values[key] = value
        else:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
    return values


def _effective_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file {path} does not exist")
        try:
            cfg = replace(cfg, **parse_config_text(path.read_text()))
        except (ValueError, TypeError) as exc:
            raise UsageError(f"bad config file {path}: {exc}") from exc
    overrides = {
        f.name: getattr(args, f.name)
        for f in fields(RunConfig)
        if getattr(args, f.name, None) is not None
    }
    return replace(cfg, **overrides)


def _resolve_density(cfg: RunConfig, grid: PeriodicGrid) -> tuple[Density, str]:
    """Named registry density or OITF scalar file; returns (density, identifier)."""
    if not cfg.density:
        raise UsageError("a density (built-in name or OITF file) is required")
    spec = cfg.density
    if spec.endswith(".oitf") or Path(spec).is_file():
        field = fileio.read_field_oitf(spec)
        if not isinstance(field, ScalarField):
            raise InvalidInputError(f"{spec}: expected a scalar OITF field")
        if field.grid != grid:
            raise InvalidInputError(
                f"{spec}: field grid {field.grid.shape} does not match requested {grid.shape}"
            )
        raw = set_dynamic_range(field, cfg.ratio) if cfg.ratio is not None else field
        return normalize(raw), Path(spec).name
    ident = spec if cfg.ratio is None else f"{spec}@ratio={cfg.ratio}"
    return make_density(spec, grid, cfg.ratio), ident


# ---------------------------------------------------------------------------
# commands


def cmd_build(cfg: RunConfig) -> int:
    if not cfg.out:
        raise UsageError("build requires --out for the map file")
    if cfg.steps < 1:
        raise UsageError(f"step count must be >= 1, got {cfg.steps}")
    grid = PeriodicGrid(cfg.grid, cfg.grid)
    target, ident = _resolve_density(cfg, grid)
    t0 = time.perf_counter()
    result = build_transport_map(target, TransportConfig(steps=cfg.steps, grid=grid))
    elapsed = time.perf_counter() - t0
    fileio.write_map_oitm(cfg.out, result, ident)
    print(f"density: {ident}")
    print(f"angle: {result.angle:.6f}")
    print(f"residual: {result.residual:.6e}")
    print(f"min_jacobian: {result.min_jacobian.min():.6f}")
    print(f"wall_time_s: {elapsed:.2f}")
    print(f"map: {cfg.out}")
    return 0


def cmd_sample(cfg: RunConfig) -> int:
    if not cfg.map:
        raise UsageError("sample requires --map")
    if not cfg.out:
        raise UsageError("sample requires --out")
    if cfg.n < 0:
        raise UsageError(f"sample count must be nonnegative, got {cfg.n}")
    if cfg.format not in ("csv", "oitf"):
        raise UsageError(f"format must be csv or oitf, got {cfg.format!r}")
    mapping, _meta = fileio.read_map_oitm(cfg.map)
    t0 = time.perf_counter()
    batch = sample_target(mapping, cfg.n, cfg.seed, workers=cfg.workers)
    sample_time = time.perf_counter() - t0
    if cfg.format == "oitf":
        fileio.write_samples_oitf(cfg.out, batch)
    else:
        fileio.write_samples_csv(cfg.out, batch)
    rate = cfg.n / sample_time if sample_time > 0 else float("inf")
    print(f"samples: {cfg.n}")
    print(f"sampling_time_s: {sample_time:.3f}")
    print(f"throughput_per_s: {rate:.3e}")
    print(f"out: {cfg.out}")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    if not cfg.map:
        raise UsageError("validate requires --map")
    if cfg.bins < 1:
        raise UsageError("need at least one bin per axis")
    mapping, meta = fileio.read_map_oitm(cfg.map)
    grid = mapping.grid
    if grid.n_x % cfg.bins or grid.n_y % cfg.bins:
        raise UsageError(
            f"map grid {grid.n_x}x{grid.n_y} is not a multiple of {cfg.bins} bins"
        )
    target, ident = _resolve_density(cfg, grid)

    batch = sample_target(mapping, cfg.n, cfg.seed, workers=cfg.workers)
    hist = histogram(batch, cfg.bins, cfg.bins)
    mass = expected_bin_mass(target, cfg.bins, cfg.bins)
    gof_stat, gof_dof, gof_p = chi_squared_gof(hist, mass)

    oracle = rejection_sample_oracle(target, cfg.n, cfg.seed)
    oracle_hist = histogram(oracle, cfg.bins, cfg.bins)
    ts_stat, ts_dof, ts_p = two_sample_chi_squared(hist, oracle_hist)

    passed = gof_p > SIGNIFICANCE and ts_p > SIGNIFICANCE
    report_lines = [
        f"map: {cfg.map}",
        f"density: {ident}",
        f"samples: {cfg.n}",
        f"seed: {cfg.seed}",
        f"bins: {cfg.bins}x{cfg.bins}",
        f"map_residual: {meta.residual:.6e}",
        f"gof_statistic: {gof_stat:.6f}",
        f"gof_dof: {gof_dof}",
        f"gof_p_value: {gof_p:.6g}",
        f"two_sample_statistic: {ts_stat:.6f}",
        f"two_sample_dof: {ts_dof}",
        f"two_sample_p_value: {ts_p:.6g}",
        f"significance: {SIGNIFICANCE}",
        f"result: {'pass' if passed else 'fail'}",
    ]
    report = "\n".join(report_lines) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(report)
    sys.stdout.write(report)
    if cfg.samples:  # optional per-bin table
        with open(cfg.samples, "w", newline="\n") as fh:
            fh.write("bin_x,bin_y,observed,expected,oracle\n")
            expected = (cfg.n * mass).reshape(cfg.bins, cfg.bins)
            for i in range(cfg.bins):
                for j in range(cfg.bins):
                    fh.write(
                        f"{i},{j},{hist.counts[i, j]},{expected[i, j]:.6f},"
                        f"{oracle_hist.counts[i, j]}\n"
                    )
    return 0 if passed else 3


def cmd_export(cfg: RunConfig) -> int:
    if not cfg.out:
        raise UsageError("export requires --out")
    chosen = [k for k in ("map", "density", "samples") if getattr(cfg, k)]
    if len(chosen) != 1:
        raise UsageError("export needs exactly one of --map, --density, --samples")
    kind = chosen[0]
    if kind == "map":
        mapping, _meta = fileio.read_map_oitm(cfg.map)
        fileio.write_warp_mesh_csv(cfg.out, mapping, stride=4)
        print(f"mesh: {cfg.out}")
    elif kind == "density":
        grid = PeriodicGrid(cfg.grid, cfg.grid)
        target, _ident = _resolve_density(cfg, grid)
        fileio.write_heatmap_pgm(cfg.out, target.field)
        print(f"heatmap: {cfg.out}")
    else:
        pts = fileio.read_samples_csv(cfg.samples)
        keep = pts[: cfg.n] if cfg.n else pts
        fileio.write_samples_csv(cfg.out, SampleBatch(keep, seed=0))
        print(f"scatter: {cfg.out} ({len(keep)} points)")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 for usage problems, not argparse's 2
        raise UsageError(message)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value config file; flags override it")
    sub.add_argument("--density", help="built-in density name (optionally name:param) or OITF file")
    sub.add_argument("--ratio", type=float, help="shift density to this max/min ratio")
    sub.add_argument("--grid", type=int, help="grid nodes per axis (default 256)")
    sub.add_argument("--steps", type=int, help="time steps K (default 100)")
    sub.add_argument("--seed", type=int, help="RNG seed (default 0)")
    sub.add_argument("--n", type=int, help="sample count (default 100000)")
    sub.add_argument("--bins", type=int, help="validation bins per axis (default 32)")
    sub.add_argument("--out", help="output path")
    sub.add_argument("--map", help="OITM map file")
    sub.add_argument("--samples", help="sample CSV (export input / validate per-bin output)")
    sub.add_argument("--format", choices=("csv", "oitf"), help="sample output format")
    sub.add_argument("--workers", type=int, help="worker threads for sampling (default 1)")


def build_parser() -> _Parser:
    parser = _Parser(prog="oitsample",
                     description="Draw seeded random samples from a density on the "
                                 "flat torus through a measure-transport warp.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("build", "construct a transport map and save it as OITM"),
        ("sample", "draw samples through a prebuilt map"),
        ("validate", "chi-squared checks of map samples against the target"),
        ("export", "figure-ready artifacts: heatmap PGM, warp-mesh CSV, scatter CSV"),
    ):
        _add_common(subs.add_parser(name, help=doc))
    return parser


_COMMANDS = {
    "build": cmd_build,
    "sample": cmd_sample,
    "validate": cmd_validate,
    "export": cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _effective_config(args)
        return _COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OrientationLossError, NumericalBlowupError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
