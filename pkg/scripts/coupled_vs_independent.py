#!/usr/bin/env python3
"""Example run: coupled (E, nu) descent vs. independently updated Lame fields.

The material optimizer exposes (log E, nu, log viscosity) as its free
coordinates and re-derives (lambda, mu) from the closed forms after every
update, so each iterate is a physically consistent record.  The obvious
alternative is to descend on (log lambda, log mu) directly and let the two
fields move independently.  This script runs both on the same recovery
problem — same scene, same reference trajectory, same loss, same central
differences, same step size and budget — and writes a side-by-side trace.

The independent arm constructs its material records directly (bypassing the
validated constructors, which reject decoupled fields) so the record's
(E, nu) stay frozen at their initial values while lambda and mu move; the
"coupling residual" column measures how far the record drifts from any
self-consistent material.

Usage:
    python3 scripts/coupled_vs_independent.py [--iters N] [--out PATH.md]
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from mocomp.materials import (
    NU_MAX,
    NU_MIN,
    MaterialParams,
    PartMaterialMap,
    elastic_from_lame,
    lame_from_elastic,
)
from mocomp.mpm import simulate
from mocomp.optimize import (
    OptimizableParams,
    OptimizeConfig,
    optimize_materials,
    reference_matching,
    simulate_for_params,
    trajectory_loss,
)
from mocomp.particles import ParticleSet
from mocomp.scene import Boundary, Scene

E_TRUE = 5e3
NU_TRUE = 0.25
VISCOSITY = 0.5
DENSITY = 400.0
SETTINGS = OptimizeConfig(iters=25, step_size=5e3, sim_steps=60, sim_dt=2e-3, frame_stride=10)


def build_scene(young_modulus: float) -> Scene:
    """A 1,000-particle block settling onto a sticky floor under gravity."""
    h = 1.0 / 16.0
    lo = np.array([0.35, 0.35, 2.2 * h])
    side = np.linspace(0.0, 0.15, 10)
    grid_pts = np.stack(np.meshgrid(side, side, side, indexing="ij"), axis=-1).reshape(-1, 3)
    positions = grid_pts + lo
    step = 0.15 / 9.0
    particles = ParticleSet.at_rest(
        positions, mass=DENSITY * step**3, volume0=step**3, part=0
    )
    material = MaterialParams.from_elastic(
        young_modulus, NU_TRUE, viscosity=VISCOSITY, density=DENSITY
    )
    scene = Scene(
        particles=particles,
        materials=PartMaterialMap(entries={0: material}),
        grid_dims=(16, 16, 16),
        grid_spacing=h,
        gravity=(0.0, 0.0, -5.0),
        boundary=Boundary(floor="sticky", walls="none"),
        external_forces=(),
    )
    scene.validate()
    return scene


def run_coupled(scene: Scene, objective, settings: OptimizeConfig) -> list[dict]:
    """Package optimizer: (log E, nu) free, Lame fields re-derived each step."""
    trace: list[dict] = []

    def record(iterate: int, params: OptimizableParams, loss: float) -> None:
        m = params.apply(scene.materials).get(0)
        lam_ref, mu_ref = lame_from_elastic(m.young_modulus, m.poisson_ratio)
        residual = max(
            abs(m.lame_lambda - lam_ref) / max(abs(lam_ref), 1e-30),
            abs(m.lame_mu - mu_ref) / mu_ref,
        )
        trace.append(
            {
                "iter": iterate,
                "loss": loss,
                "E": m.young_modulus,
                "nu": m.poisson_ratio,
                "lam": m.lame_lambda,
                "mu": m.lame_mu,
                "residual": residual,
                "admissible": True,
            }
        )

    init = OptimizableParams.from_materials(scene.materials, (0,))
    optimize_materials(scene, objective, init, settings, callback=record)
    return trace


def run_independent(scene: Scene, objective, settings: OptimizeConfig) -> tuple[list[dict], str]:
    """Descent on (log lambda, log mu) with no re-coupling between them.

    The record's (E, nu) fields are left at their initial values, exactly
    what happens when the Lame pair is treated as the source of truth and
    nothing maintains the elastic view.  Returns the trace and a final
    status string ("completed" or the failure diagnostic).
    """
    base = scene.materials.get(0)
    log_lam = np.log(base.lame_lambda)
    log_mu = np.log(base.lame_mu)
    eps = settings.eps_log

    def decoupled(log_l: float, log_m: float) -> MaterialParams:
        return MaterialParams(
            young_modulus=base.young_modulus,
            poisson_ratio=base.poisson_ratio,
            lame_lambda=float(np.exp(log_l)),
            lame_mu=float(np.exp(log_m)),
            viscosity=base.viscosity,
            density=base.density,
        )

    def evaluate(log_l: float, log_m: float) -> float:
        materials = PartMaterialMap(entries={0: decoupled(log_l, log_m)})
        traj = simulate(
            replace(scene, materials=materials),
            steps=settings.sim_steps,
            dt=settings.sim_dt,
            frame_stride=settings.frame_stride,
        )
        if traj.failure is not None:
            raise RuntimeError(traj.failure)
        return objective.evaluate(traj)

    trace: list[dict] = []

    def record(iterate: int, loss: float) -> None:
        m = decoupled(log_lam, log_mu)
        lam_ref, mu_ref = lame_from_elastic(m.young_modulus, m.poisson_ratio)
        residual = max(
            abs(m.lame_lambda - lam_ref) / max(abs(lam_ref), 1e-30),
            abs(m.lame_mu - mu_ref) / mu_ref,
        )
        E_implied, nu_implied = elastic_from_lame(m.lame_lambda, m.lame_mu)
        trace.append(
            {
                "iter": iterate,
                "loss": loss,
                "E": E_implied,
                "nu": nu_implied,
                "lam": m.lame_lambda,
                "mu": m.lame_mu,
                "residual": residual,
                "admissible": NU_MIN < nu_implied < NU_MAX,
            }
        )

    try:
        record(0, evaluate(log_lam, log_mu))
        for iterate in range(1, settings.iters + 1):
            g_lam = (
                evaluate(log_lam + eps, log_mu) - evaluate(log_lam - eps, log_mu)
            ) / (2.0 * eps)
            g_mu = (
                evaluate(log_lam, log_mu + eps) - evaluate(log_lam, log_mu - eps)
            ) / (2.0 * eps)
            log_lam -= settings.step_size * g_lam
            log_mu -= settings.step_size * g_mu
            record(iterate, evaluate(log_lam, log_mu))
    except RuntimeError as exc:
        return trace, f"aborted at iterate {len(trace)}: {exc}"
    return trace, "completed"


def smoothness(losses: list[float]) -> tuple[int, float]:
    """(number of loss increases, total variation / initial loss)."""
    diffs = np.diff(np.asarray(losses))
    return int((diffs > 0).sum()), float(np.abs(diffs).sum() / losses[0])


def format_trace(trace: list[dict]) -> list[str]:
    lines = ["| iter | loss | E | nu | lambda | mu | coupling residual | admissible |"]
    lines.append("|---:|---:|---:|---:|---:|---:|---:|:---|")
    for row in trace:
        lines.append(
            f"| {row['iter']} | {row['loss']:.3e} | {row['E']:.0f} | {row['nu']:.4f} "
            f"| {row['lam']:.0f} | {row['mu']:.0f} | {row['residual']:.2e} "
            f"| {'yes' if row['admissible'] else 'NO'} |"
        )
    return lines


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iters", type=int, default=SETTINGS.iters)
    parser.add_argument(
        "--out",
        type=Path,
        default=Path(__file__).resolve().parent.parent / "docs" / "coupled_vs_independent.md",
    )
    args = parser.parse_args(argv)
    settings = replace(SETTINGS, iters=args.iters)

    truth = OptimizableParams.from_materials(build_scene(E_TRUE).materials, (0,))
    reference = simulate_for_params(build_scene(E_TRUE), truth, settings)
    objective = reference_matching(reference)
    start = build_scene(E_TRUE / 2.0)

    print(f"target: E = {E_TRUE:.0f}, nu = {NU_TRUE}; both arms start at E = {E_TRUE / 2:.0f}")
    print(f"running coupled arm ({settings.iters} iterations)...", flush=True)
    coupled = run_coupled(start, objective, settings)
    print(f"running independent arm ({settings.iters} iterations)...", flush=True)
    independent, independent_status = run_independent(start, objective, settings)

    c_up, c_tv = smoothness([r["loss"] for r in coupled])
    i_up, i_tv = smoothness([r["loss"] for r in independent])
    c_final, i_final = coupled[-1], independent[-1]
    lam_true, mu_true = lame_from_elastic(E_TRUE, NU_TRUE)

    report: list[str] = []
    report.append("# Coupled elastic descent vs. independent Lame descent\n")
    report.append(
        "One part, 1,000 particles, settling under gravity on a sticky floor. "
        f"Reference trajectory generated at E = {E_TRUE:.0f}, nu = {NU_TRUE} "
        f"(lambda = mu = {lam_true:.0f}); both arms start from a 2x "
        f"mis-initialization (E = {E_TRUE / 2:.0f}) and take {settings.iters} "
        f"fixed-size gradient steps (step {settings.step_size:.0f}, central "
        "differences, mean squared position error against the reference).\n"
    )
    report.append(
        "**Coupled arm** (the package optimizer): free coordinates are "
        "(log E, nu, log viscosity); lambda and mu are re-derived from the "
        "closed forms after every update, so the coupling residual is zero at "
        "machine precision for every iterate and Poisson's ratio is projected "
        "into its admissible interval.\n"
    )
    report.append(
        "**Independent arm**: free coordinates are (log lambda, log mu) with "
        "nothing maintaining the elastic view; records are built directly, "
        "bypassing the validated constructors that would reject them.\n"
    )
    report.append("## Coupled trace\n")
    report.extend(format_trace(coupled))
    report.append("\n## Independent trace\n")
    report.extend(format_trace(independent))
    report.append(f"\nIndependent arm status: {independent_status}\n")
    report.append("## Summary\n")
    report.append("| | coupled | independent |")
    report.append("|:---|---:|---:|")
    report.append(
        f"| final loss | {c_final['loss']:.3e} | {i_final['loss']:.3e} |"
    )
    report.append(
        f"| final E (target {E_TRUE:.0f}) | {c_final['E']:.0f} | {i_final['E']:.0f} |"
    )
    report.append(
        f"| final nu (target {NU_TRUE}) | {c_final['nu']:.4f} | {i_final['nu']:.4f} |"
    )
    report.append(
        f"| loss increases over {settings.iters} steps | {c_up} | {i_up} |"
    )
    report.append(
        f"| loss total variation / initial loss | {c_tv:.3f} | {i_tv:.3f} |"
    )
    report.append(
        f"| max coupling residual | {max(r['residual'] for r in coupled):.2e} "
        f"| {max(r['residual'] for r in independent):.2e} |"
    )
    report.append(
        f"| every iterate admissible | {'yes' if all(r['admissible'] for r in coupled) else 'NO'} "
        f"| {'yes' if all(r['admissible'] for r in independent) else 'NO'} |"
    )
    report.append("\n## Observations\n")
    nu_peak = max(r["nu"] for r in coupled)
    report.append(
        f"- Both arms cut the loss by more than two orders of magnitude and "
        f"recover E within ~5% (coupled {c_final['E']:.0f}, independent "
        f"{i_final['E']:.0f}, target {E_TRUE:.0f})."
    )
    report.append(
        f"- The coupled arm lands near the true constitutive pair "
        f"(nu = {c_final['nu']:.3f} vs. target {NU_TRUE}); the independent arm "
        f"matches the trajectory almost as well but at a different material "
        f"point (nu implied {i_final['nu']:.3f}) — the short-horizon position "
        f"loss under-determines the pair, and nothing ties the iterate to the "
        f"elastic manifold."
    )
    report.append(
        f"- Every coupled iterate is a valid material record by construction: "
        f"coupling residual 0 throughout, and the early large step on nu "
        f"(peak {nu_peak:.4f}) was caught by the admissible-interval "
        f"projection and recovered.  The independent records end with a "
        f"coupling residual of {max(r['residual'] for r in independent):.2f}: "
        f"their stored (E, nu) still claim the initialization while the Lame "
        f"fields describe something else, so any consumer reading the "
        f"elastic view gets stale values.  Staying inside the invertible "
        f"(lambda, mu) region is accidental rather than enforced."
    )
    report.append(
        f"- Loss-curve shape on this scene: {c_up} increases (total variation "
        f"{c_tv:.2f}x the initial loss) for the coupled arm — the nu "
        f"projection transient — vs. {i_up} increases ({i_tv:.2f}x) for the "
        f"independent arm.  The coupled arm's raw descent is not smoother "
        f"here; its advantage shows up as iterate validity and constitutive "
        f"identifiability, not as a prettier curve."
    )
    report.append("")

    text = "\n".join(report)
    print()
    print(text)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text)
    print(f"written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
