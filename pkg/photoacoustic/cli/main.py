#!/usr/bin/env python3
"""
Photoacoustic reconstruction command line.

    python -m photoacoustic.cli.main synth  --config run.cfg --out data/obs
    python -m photoacoustic.cli.main recon  data/obs --method exterior3d --out data/rec --truth data/obs.truth
    python -m photoacoustic.cli.main compare data/rec data/obs.truth
    python -m photoacoustic.cli.main selftest

Exit status: 0 success, 2 usage, 3 numerical/domain, 4 file problems.
"""

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from photoacoustic import __version__
from photoacoustic.calculations.forward import CauchyField, FieldEvaluator, synthesize_observation
from photoacoustic.calculations.harmonics import BoundaryObservation, Mode, grid_for
from photoacoustic.calculations.recon2d import reconstruct_iterative_2d
from photoacoustic.calculations.recon3d import (
    PoleData,
    ResidueSeriesParams,
    reconstruct_exterior,
    reconstruct_interior_residue,
    reconstruct_interior_volterra,
    target_ball,
)
from photoacoustic.calculations.xcheck import FRBackprojector, reconstruct_halftime
from photoacoustic.cli.config import load_config, serialize_config
from photoacoustic.cli.fileio import (
    field_csv,
    observation_csv,
    read_field,
    read_observation,
    sibling,
    stem_of,
    write_field,
    write_json,
    write_observation,
    write_report,
)
from photoacoustic.cli.metrics import compare
from photoacoustic.cli.phantoms import phantom_evaluator, sample_phantom
from photoacoustic.cli.selftest import cmd_selftest
from photoacoustic.errors import DataInsufficiencyError, FileFormatError, PhotoacousticError, UsageError
from photoacoustic.models import METHODS_2D, METHODS_3D, ReconConfig, RunReport

logger = logging.getLogger("photoacoustic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photoacoustic", description="Photoacoustic initial-data reconstruction")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--workers", type=int, help="threads for per-mode work (default: all cores)")
    common.add_argument("--csv", action="store_true", help="also write a CSV export")
    noise = common.add_mutually_exclusive_group()
    noise.add_argument("--verbose", "-v", action="store_true")
    noise.add_argument("--quiet", "-q", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[common], help="synthesize boundary data from a phantom or field file")
    synth.add_argument("--phantom", help="zero, bump, c2bump, multibump or harmonic")
    synth.add_argument("--component", choices=("a", "b"), help="which datum carries the phantom")
    synth.add_argument("--field", help="field file to use instead of a phantom")
    synth.add_argument("--seed", type=int, help="seed for the randomized phantoms")
    synth.add_argument("--out", default="observation", help="output stem")

    recon = sub.add_parser("recon", parents=[common], help="reconstruct (a, b) from boundary data")
    recon.add_argument("observation", nargs="?", help="observation file (not used by interior3d-residue)")
    recon.add_argument("--method", choices=sorted(set(METHODS_3D) | set(METHODS_2D)))
    recon.add_argument("--which", choices=("a_zero", "b_zero"), help="vanishing datum for halftime")
    recon.add_argument("--poles", help="pole-form reversed data for interior3d-residue (JSON)")
    recon.add_argument("--truth", help="ground-truth field file; adds metrics to the report")
    recon.add_argument("--out", default="reconstruction", help="output stem")

    cmp = sub.add_parser("compare", help="relative L2 / Linf errors of a field against a reference")
    cmp.add_argument("field")
    cmp.add_argument("reference")
    cmp.add_argument("--json", action="store_true", help="print a flat JSON record only")

    sub.add_parser("selftest", help="fast invariant checks of every module")
    return parser


def configure_logging(args: argparse.Namespace):
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    logging.captureWarnings(True)


def _config(args: argparse.Namespace, extra: Optional[List[str]] = None) -> ReconConfig:
    overrides = list(extra or [])
    if args.workers is not None:
        overrides.append(f"run.workers = {args.workers}")
    if args.quiet:
        overrides.append("run.progress = false")
    for name in ("phantom", "component", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            overrides.append(f"phantom.{'name' if name == 'phantom' else name} = {value}")
    if getattr(args, "method", None):
        overrides.append(f"recon.method = {args.method}")
    overrides.extend(args.set)
    return load_config(args.config, overrides)


def _record_warnings(caught: List[warnings.WarningMessage], notes: List[str]):
    for w in caught:
        text = f"{w.category.__name__}: {w.message}"
        notes.append(text)
        print(f"⚠️  {text}")


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _config(args)
    dim, nmax = cfg.grid.dimension, cfg.recon.nmax
    print(f"🔄 Synthesizing {dim}D boundary data (nmax={nmax}, dt={cfg.grid.dt:g}, T={cfg.grid.T:g})")
    print("=" * 50)
    if args.field:
        truth_source = read_field(args.field)
        if truth_source.dimension != dim:
            raise UsageError(f"field file is {truth_source.dimension}D, config is {dim}D")
        evaluator = FieldEvaluator.from_field(truth_source, nmax)
        truth = evaluator.sample_on(target_ball(cfg))
        provenance = f"synth field={Path(args.field).name}"
    else:
        evaluator = phantom_evaluator(cfg)
        truth = sample_phantom(cfg.phantom, target_ball(cfg))
        provenance = f"synth phantom={cfg.phantom.name} component={cfg.phantom.component} seed={cfg.phantom.seed}"

    grid = grid_for(dim, nmax, cfg.n_theta, cfg.n_phi)
    obs = synthesize_observation(
        truth, grid, cfg.grid.T, cfg.grid.dt, h_t=cfg.h_t, mean_order=cfg.quad.mean,
        psi_order=cfg.quad.psi, workers=cfg.workers, evaluator=evaluator,
    )
    obs.provenance = provenance
    stem = stem_of(args.out)
    json_path, _ = write_observation(obs, stem)
    print(f"💾 Observation: {json_path} ({obs.grid.n_nodes} nodes x {obs.n_times} times)")
    truth_path, _ = write_field(truth, sibling(stem, ".truth"), provenance=provenance)
    print(f"💾 Ground truth: {truth_path}")
    write_json(sibling(stem, ".phantom.json"), {
        "dimension": dim,
        "phantom": cfg.phantom.model_dump(),
        "source": args.field or "phantom",
        "config": serialize_config(cfg).splitlines(),
    })
    if args.csv:
        print(f"💾 CSV: {observation_csv(obs, stem)}")
    print("✅ SYNTHESIS COMPLETE!")
    return 0


def read_poles(path: str) -> Dict[Mode, PoleData]:
    """{"modes": [{"n": 0, "m": 0, "poles": [[re, im], ...], "residues": [[re, im], ...]}, ...]}"""
    try:
        document = json.loads(Path(path).read_text())
        table = {}
        for entry in document["modes"]:
            poles = [complex(re, im) for re, im in entry["poles"]]
            residues = [complex(re, im) for re, im in entry["residues"]]
            table[(int(entry["n"]), int(entry["m"]))] = PoleData(np.array(poles), np.array(residues))
        return table
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FileFormatError(f"{path}: not a pole table ({type(e).__name__}: {e})")


def _halftime_which(args: argparse.Namespace, cfg: ReconConfig) -> str:
    """--which, else the phantom sidecar written by synth, else the config's phantom component"""
    if args.which:
        return args.which
    component = cfg.phantom.component
    sidecar = sibling(stem_of(args.observation), ".phantom.json")
    if sidecar.exists():
        component = json.loads(sidecar.read_text())["phantom"]["component"]
    return "a_zero" if component == "b" else "b_zero"


def _reconstruct(method: str, obs: Optional[BoundaryObservation], cfg: ReconConfig, args: argparse.Namespace,
                 diagnostics: dict) -> CauchyField:
    if method == "exterior3d":
        return reconstruct_exterior(obs, cfg, diagnostics)
    if method == "interior3d-volterra":
        return reconstruct_interior_volterra(obs, cfg)
    if method == "interior3d-residue":
        params = ResidueSeriesParams(cfg.recon.residue_terms, cfg.tol.residue_tail)
        return reconstruct_interior_residue(read_poles(args.poles), params, cfg, diagnostics)
    if method == "halftime":
        which = _halftime_which(args, cfg)
        if obs.T < 1.0 - 1e-9:
            raise DataInsufficiencyError(f"halftime needs data on [0, 1], observation ends at {obs.T}")
        # only [0, 1] enters the reconstruction; the rest of the record feeds the consistency check
        return reconstruct_halftime(obs, which, cfg)
    if method == "fr-xcheck":
        ball = target_ball(cfg)
        b = FRBackprojector(obs).at_points(ball.points().reshape(-1, 3)).reshape(ball.shape)
        return CauchyField(ball, np.zeros(ball.shape), b)
    if method == "exterior2d":
        return reconstruct_iterative_2d(obs, cfg.grid.T, 1, cfg, diagnostics)
    return reconstruct_iterative_2d(obs, cfg.grid.T, cfg.recon.n_iter, cfg, diagnostics)


def cmd_recon(args: argparse.Namespace) -> int:
    obs = None
    extra = []
    if args.observation:
        obs = read_observation(args.observation)
        if args.config is None:
            extra.append(f"grid.dimension = {obs.dimension}")
    cfg = _config(args, extra)
    method = cfg.recon.method
    if method == "interior3d-residue":
        if not args.poles:
            raise UsageError("interior3d-residue takes analytic pole-form data (--poles); numeric observations go through interior3d-volterra")
    elif obs is None:
        raise UsageError(f"method {method} needs an observation file")
    elif obs.dimension != cfg.grid.dimension:
        raise UsageError(f"observation is {obs.dimension}D but the config is {cfg.grid.dimension}D")

    print(f"🔄 Reconstructing with {method} ({cfg.grid.dimension}D, nmax={cfg.recon.nmax})")
    print("=" * 50)
    diagnostics: dict = {}
    notes: List[str] = []
    started = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        field = _reconstruct(method, obs, cfg, args, diagnostics)
    _record_warnings(caught, notes)
    elapsed = time.perf_counter() - started

    stem = stem_of(args.out)
    source = Path(args.observation).name if args.observation else Path(args.poles).name
    json_path, _ = write_field(field, stem, provenance=f"recon method={method} input={source}")
    print(f"💾 Field: {json_path}")
    report = RunReport(
        method=method,
        dimension=cfg.grid.dimension,
        nmax=cfg.recon.nmax,
        T=obs.T if obs is not None else 2.0,
        dt=obs.dt if obs is not None else 0.0,
        timings={"total": elapsed, **diagnostics.get("timings", {})},
        mode_residuals=diagnostics.get("mode_residuals", {}),
        iteration_norms=diagnostics.get("iteration_norms", []),
        notes=notes,
    )
    if report.iteration_norms:
        print("📊 Correction norms: " + ", ".join(f"{x:.3e}" for x in report.iteration_norms))
    if args.truth:
        report.metrics = compare(field, read_field(args.truth))
        _print_metrics(report.metrics)
    print(f"💾 Report: {write_report(report, stem)}")
    if args.csv:
        print(f"💾 CSV: {field_csv(field, stem)}")
    print(f"✅ RECONSTRUCTION COMPLETE! ({elapsed:.1f}s)")
    return 0


def _print_metrics(metrics: Dict[str, float]):
    for name in ("a", "b"):
        print(f"📊 {name}: relative L2 = {metrics[f'{name}_rel_l2']:.4e}, relative Linf = {metrics[f'{name}_rel_linf']:.4e}")


def cmd_compare(args: argparse.Namespace) -> int:
    metrics = compare(read_field(args.field), read_field(args.reference))
    if args.json:
        print(json.dumps(metrics, sort_keys=True))
        return 0
    print(f"📊 {Path(args.field).name} vs {Path(args.reference).name}")
    print("=" * 50)
    _print_metrics(metrics)
    return 0


COMMANDS = {"synth": cmd_synth, "recon": cmd_recon, "compare": cmd_compare}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse, dispatch and map errors to exit statuses"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args)
    logger.debug(f"photoacoustic {__version__}: {args.command}")
    try:
        if args.command == "selftest":
            return cmd_selftest()
        return COMMANDS[args.command](args)
    except PhotoacousticError as e:
        print(e.one_line(), file=sys.stderr)
        return e.exit_status
    except OSError as e:
        print(f"error code=IO message={e}", file=sys.stderr)
        return 4
    except ValueError as e:
        print(f"error code=INVALID_INPUT message={e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
