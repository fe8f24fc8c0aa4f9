#!/usr/bin/env python3
"""
Acceptance Report
Runs the round-trip reconstructions at full resolution and writes a JSON/CSV summary
"""

import json
import logging
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

from photoacoustic.calculations.forward import synthesize_observation
from photoacoustic.calculations.harmonics import analyze, grid_for
from photoacoustic.calculations.recon2d import reconstruct_iterative_2d
from photoacoustic.calculations.recon3d import (
    reconstruct_exterior,
    reconstruct_interior_volterra,
    solve_exterior,
    target_ball,
    time_reverse_points,
)
from photoacoustic.calculations.xcheck import FRBackprojector, reconstruct_halftime
from photoacoustic.cli.config import load_config
from photoacoustic.cli.metrics import relative_l2
from photoacoustic.cli.phantoms import phantom_evaluator, sample_phantom


class AcceptanceRunner:
    def __init__(self, output_dir="acceptance"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(exist_ok=True)
        self.rows = []

    def phantom_run(self, cfg):
        """Synthesized observation and ground truth for the configured phantom"""
        grid = grid_for(cfg.grid.dimension, cfg.recon.nmax, cfg.n_theta, cfg.n_phi)
        obs = synthesize_observation(
            None, grid, cfg.grid.T, cfg.grid.dt, h_t=cfg.h_t, mean_order=cfg.quad.mean,
            psi_order=cfg.quad.psi, workers=cfg.workers, evaluator=phantom_evaluator(cfg),
        )
        return obs, sample_phantom(cfg.phantom, target_ball(cfg))

    def record(self, case, description, error, limit):
        passed = bool(error <= limit)
        self.rows.append({"case": case, "description": description, "error": float(error), "limit": limit, "passed": passed})
        print(f"{'✅' if passed else '❌'} {case}: {description} error={error:.4e} (limit {limit:g})")

    def run_3d_bump(self):
        print("\n🔄 3D off-center bump (exterior and interior)")
        cfg = load_config(None, ["run.progress = false"])
        obs, truth = self.phantom_run(cfg)
        weights = truth.ball.weights()
        exterior = reconstruct_exterior(obs, cfg)
        interior = reconstruct_interior_volterra(obs, cfg)
        self.record("A1", "exterior round trip, relative L2 of a", relative_l2(exterior.a, truth.a, weights), 0.10)
        self.record("A2", "interior round trip, relative L2 of a", relative_l2(interior.a, truth.a, weights), 0.10)
        self.record("A2", "interior vs exterior, relative L2", relative_l2(interior.a, exterior.a, weights), 0.05)

        x = np.array([[0.3, 0.0, 0.0]])
        full = solve_exterior(analyze(obs, cfg.recon.nmax), cfg.grid.T, cfg)
        short = solve_exterior(analyze(obs.truncated(1.3), cfg.recon.nmax), 1.3, cfg, full_ball=False)
        a_full, _ = time_reverse_points(full, x, cfg)
        a_short, _ = time_reverse_points(short, x, cfg)
        self.record("A8", "T = 1.3 vs full T at |x| = 0.3", abs(a_short[0] - a_full[0]) / abs(a_full[0]), 0.02)

    def run_2d_bump(self):
        print("\n🔄 2D off-center bump (3 iterations, T = 6)")
        cfg = load_config(None, ["grid.dimension = 2", "run.progress = false"])
        obs, truth = self.phantom_run(cfg)
        diagnostics = {}
        field = reconstruct_iterative_2d(obs, cfg.grid.T, cfg.recon.n_iter, cfg, diagnostics)
        norms = diagnostics["iteration_norms"]
        print(f"📊 Correction norms: {', '.join(f'{x:.3e}' for x in norms)}")
        self.record("A3", "iterative 2D, relative L2 of a", relative_l2(field.a, truth.a, truth.ball.weights()), 0.15)
        decreasing = all(n1 > n2 for n1, n2 in zip(norms, norms[1:]))
        self.record("A3", "correction norms decrease", 0.0 if decreasing else 1.0, 0.0)

    def run_rate(self):
        print("\n🔄 3D band-limited rate, a = 0 (half-time and backprojection)")
        cfg = load_config(None, [
            "grid.dt = 0.005", "recon.nmax = 6", "phantom.name = harmonic",
            "phantom.component = b", "phantom.band = 3", "phantom.seed = 11", "run.progress = false",
        ])
        obs, truth = self.phantom_run(cfg)
        weights = truth.ball.weights()
        half = reconstruct_halftime(obs.truncated(1.0), "a_zero", cfg, check=False)
        self.record("A6", "half-time b, relative L2", relative_l2(half.b, truth.b, weights), 0.10)

        inner = truth.ball.radii <= 0.5
        points = truth.ball.points()[:, inner].reshape(-1, 3)
        fr = FRBackprojector(obs.truncated(1.5)).at_points(points)
        exterior = reconstruct_exterior(obs, cfg)
        w_inner = weights[:, inner].ravel()
        self.record("A7", "backprojection vs truth (|x| <= 0.5)", relative_l2(fr, truth.b[:, inner].ravel(), w_inner), 0.10)
        self.record("A7", "backprojection vs exterior b", relative_l2(fr, exterior.b[:, inner].ravel(), w_inner), 0.10)

    def save_report(self, duration):
        summary = {
            "generated": datetime.now().isoformat(timespec="seconds"),
            "duration_seconds": duration.total_seconds(),
            "passed": sum(row["passed"] for row in self.rows),
            "total": len(self.rows),
            "cases": self.rows,
        }
        with open(self.output_dir / "acceptance_report.json", "w") as f:
            json.dump(summary, f, indent=2)
        pd.DataFrame(self.rows).to_csv(self.output_dir / "acceptance_report.csv", index=False)
        print(f"💾 Report saved to {self.output_dir / 'acceptance_report.json'}")

    def run_all(self):
        start_time = datetime.now()
        print("🔄 Running acceptance cases")
        print("=" * 50)
        self.run_3d_bump()
        self.run_2d_bump()
        self.run_rate()
        duration = datetime.now() - start_time
        self.save_report(duration)

        failed = [row for row in self.rows if not row["passed"]]
        print("\n" + "=" * 50)
        if failed:
            print(f"❌ {len(failed)} of {len(self.rows)} checks failed")
        else:
            print("✅ ALL ACCEPTANCE CHECKS PASSED!")
        print("=" * 50)
        print(f"Processing time: {duration}")
        return not failed


def main():
    """Main function."""
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    runner = AcceptanceRunner()
    raise SystemExit(0 if runner.run_all() else 1)


if __name__ == "__main__":
    main()
