"""Command-line entry point: gap, relax, modes, kcompact, invariants, sweep.

Every artifact embeds the resolved configuration and seed; re-running a config
byte-reproduces the CSV/JSON payloads.  Exit codes: 0 success, 1 validation
failure, 2 solver failure, 3 failed invariant.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import evolution as ev
from . import linearized as lin
from . import spectral as spec
from .errors import ConfigError, LandauMixError, NoExponentialWindow, SolverNoConvergence
from .fields import DistributionField
from .grid import build_grid, gram_matrices
from .invariants import run_invariants
from .ioutil import (config_hash, export_matrix_market, fmt_float, write_csv, write_json)
from .mixture import EquilibriumMoments, maxwellian_field
from .runconfig import RunConfig, load_config, sweep_points

COMMANDS = ("gap", "relax", "modes", "kcompact", "invariants", "sweep")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_INVARIANT = 3


def provenance(run: RunConfig) -> dict:
    return {"config": run.as_dict(), "seed": run.seed,
            "mixture_hash": config_hash(run.mixture), "version": __version__}


def _log(run: RunConfig, message: str) -> None:
    os.makedirs(run.output_dir, exist_ok=True)
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(os.path.join(run.output_dir, "run.log"), "a") as fh:
        fh.write(f"{stamp} {message}\n")
    print(message)


def cmd_gap(run: RunConfig, export_matrices: bool = False) -> int:
    blk = run.block("gap")
    grid = build_grid(run.grid)
    grams = gram_matrices(grid, run.mixture)
    negL = lin.assemble_negL(blk.get("selector", "full"), run.mixture, grid)
    kind = "full" if blk.get("selector", "full") != "mono" else "mono"
    kb = lin.kernel_basis(kind, run.mixture, grid)
    rep = spec.spectral_gap(negL.matrix, grams, kb, grid, method=blk["method"],
                            seed=run.seed)
    certified = spec.certify_gap(negL.matrix, grams.l2, kb, grid, rep.gap_l2,
                                 n_samples=int(blk["certify_samples"]), seed=run.seed)
    out = {
        "gap_l2": rep.gap_l2, "gap_h": rep.gap_h,
        "nullspace_dim": rep.nullspace_dim,
        "residuals": rep.residuals, "lower_equivalence": rep.lower_equivalence,
        "method": rep.method, "certified": certified,
        "provenance": provenance(run),
    }
    write_json(os.path.join(run.output_dir, "gap_report.json"), out)
    if export_matrices:
        export_matrix_market(os.path.join(run.output_dir, f"negL_{negL.tag}.mtx"),
                             negL.matrix, negL.tag, run.mixture, run.grid)
        export_matrix_market(os.path.join(run.output_dir, "gram_h.mtx"),
                             grams.h_norm, "gram_h", run.mixture, run.grid)
    _log(run, f"gap: l2 {fmt_float(rep.gap_l2)} h {fmt_float(rep.gap_h)} "
              f"dim {rep.nullspace_dim} certified {certified}")
    return EXIT_OK if certified else EXIT_INVARIANT


def _relax_initial(run: RunConfig, grid) -> DistributionField:
    blk = run.block("relax")
    cfg = run.mixture
    recipe = blk["recipe"]
    if recipe == "drift_split":
        u0 = float(blk["drift"])
        vals = maxwellian_field(cfg, EquilibriumMoments(
            tuple(cfg.densities), (u0, 0.0, 0.0), cfg.kT), grid).values.copy()
        flip = maxwellian_field(cfg, EquilibriumMoments(
            tuple(cfg.densities), (-u0, 0.0, 0.0), cfg.kT), grid).values
        for i in range(1, cfg.n_species, 2):
            vals[i] = flip[i]
        return DistributionField(vals, "density")
    if recipe == "perturbation":
        eps = float(blk["epsilon"])
        M = maxwellian_field(cfg, EquilibriumMoments(
            tuple(cfg.densities), cfg.drift, cfg.kT), grid)
        f = spec.random_perturbations(cfg, grid, 1, run.seed)[0]
        vals = M.values + eps * np.sqrt(M.values) * f.reshape(cfg.n_species, -1)
        return DistributionField(np.maximum(vals, 0.0), "density")
    raise ConfigError(f"unknown relax recipe {recipe!r}")


def cmd_relax(run: RunConfig, export_matrices: bool = False) -> int:
    blk = run.block("relax")
    grid = build_grid(run.grid)
    F0 = _relax_initial(run, grid)
    series, fit = ev.run_relaxation(
        F0, float(blk["t_end"]), run.mixture, grid, dt=blk.get("dt"),
        record_every=int(blk["record_every"]), dt_safety=float(blk["dt_safety"]))
    cols = {"time": series.times}
    cols.update(series.records)
    write_csv(os.path.join(run.output_dir, "relax_series.csv"), cols,
              comments=[f"mixture={config_hash(run.mixture)} seed={run.seed}"])
    out = {"fit": {"rate": fit.rate, "prefactor": fit.prefactor, "window": list(fit.window),
                   "residual": fit.residual, "accepted": fit.accepted},
           "provenance": provenance(run)}
    write_json(os.path.join(run.output_dir, "relax_fit.json"), out)
    _log(run, f"relax: rate {fmt_float(fit.rate)} accepted {fit.accepted}")
    return EXIT_OK


def cmd_modes(run: RunConfig, export_matrices: bool = False) -> int:
    blk = run.block("modes")
    grid = build_grid(run.grid)
    cfg = run.mixture
    negL = lin.assemble_negL("full", cfg, grid).matrix
    f0 = float(blk["f0_scale"]) * spec.random_perturbations(cfg, grid, 1, run.seed)[0]
    results, tau = ev.run_linear_modes(
        blk["k_list"], f0, float(blk["t_end"]), cfg, grid, negL=negL,
        n_steps=int(blk["n_steps"]), record_every=int(blk["record_every"]))
    summary = {"tau_global": tau, "modes": {}, "provenance": provenance(run)}
    all_ok = True
    for k, (series, fit) in results.items():
        write_csv(os.path.join(run.output_dir, f"mode_k{k}.csv"),
                  {"time": series.times, **series.records},
                  comments=[f"k={k} mixture={config_hash(cfg)} seed={run.seed}"])
        summary["modes"][str(k)] = {"rate": fit.rate, "residual": fit.residual,
                                    "accepted": fit.accepted, "window": list(fit.window)}
        all_ok &= fit.accepted
    write_json(os.path.join(run.output_dir, "modes_summary.json"), summary)
    _log(run, f"modes: tau_global {fmt_float(tau)} all_accepted {all_ok}")
    return EXIT_OK if all_ok else EXIT_INVARIANT


def cmd_kcompact(run: RunConfig, export_matrices: bool = False) -> int:
    blk = run.block("kcompact")
    grid = build_grid(run.grid)
    result = spec.k_compactness_decay(run.mixture, grid, blk["cutoffs"])
    ns = [row[0] for row in result["table"]]
    norms = [row[1] for row in result["table"]]
    counts = [row[2] for row in result["table"]]
    write_csv(os.path.join(run.output_dir, "kcompact.csv"),
              {"cutoff_index": np.array(ns, dtype=float),
               "norm": np.array(norms), "masked_pairs": np.array(counts, dtype=float)},
              comments=[f"mixture={config_hash(run.mixture)} seed={run.seed}"])
    write_json(os.path.join(run.output_dir, "kcompact.json"),
               {"slope": result["slope"], "table": result["table"],
                "provenance": provenance(run)})
    mono = all(a >= b for a, b in zip(norms, norms[1:]))
    _log(run, f"kcompact: slope {fmt_float(result['slope'])} monotone {mono}")
    return EXIT_OK if mono else EXIT_INVARIANT


def cmd_invariants(run: RunConfig, export_matrices: bool = False) -> int:
    blk = run.block("invariants")
    grid = build_grid(run.grid)
    results = run_invariants(run.mixture, grid, seed=run.seed,
                             samples=int(blk["samples"]))
    write_json(os.path.join(run.output_dir, "invariants.json"),
               {"results": results, "provenance": provenance(run)})
    width = max(len(r["name"]) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        failed += 0 if r["passed"] else 1
        _log(run, f"{r['name']:<{width}}  {status}  {r['tolerance']}")
    _log(run, f"invariants: {len(results) - failed}/{len(results)} passed")
    return EXIT_OK if failed == 0 else EXIT_INVARIANT


def _sweep_one(args):
    label, cfg, gspec, seed = args
    grid = build_grid(gspec)
    grams = gram_matrices(grid, cfg)
    negL = lin.assemble_negL("full", cfg, grid)
    kb = lin.kernel_basis("full", cfg, grid)
    rep = spec.spectral_gap(negL.matrix, grams, kb, grid, seed=seed)
    return {"label": label, "gamma": cfg.gamma, "n_species": cfg.n_species,
            "mass_max": float(cfg.masses.max()), "gap_l2": rep.gap_l2,
            "gap_h": rep.gap_h, "nullspace_dim": rep.nullspace_dim,
            "radius": gspec.radius, "points_per_axis": gspec.points_per_axis}


def cmd_sweep(run: RunConfig, export_matrices: bool = False) -> int:
    points = [(label, cfg, gspec, run.seed) for label, cfg, gspec in sweep_points(run)]
    if run.threads > 1:
        with ProcessPoolExecutor(max_workers=run.threads) as pool:
            rows = list(pool.map(_sweep_one, points))
    else:
        rows = [_sweep_one(p) for p in points]
    cols = {
        "gamma": np.array([r["gamma"] for r in rows]),
        "n_species": np.array([r["n_species"] for r in rows], dtype=float),
        "mass_max": np.array([r["mass_max"] for r in rows]),
        "gap_l2": np.array([r["gap_l2"] for r in rows]),
        "gap_h": np.array([r["gap_h"] for r in rows]),
        "nullspace_dim": np.array([r["nullspace_dim"] for r in rows], dtype=float),
    }
    write_csv(os.path.join(run.output_dir, "sweep_summary.csv"), cols,
              comments=[f"seed={run.seed}"])
    write_json(os.path.join(run.output_dir, "sweep_summary.json"),
               {"points": rows, "provenance": provenance(run)})
    ok = all(r["gap_l2"] > 0 and r["gap_h"] > 0 for r in rows)
    expected_dims = all(r["nullspace_dim"] == r["n_species"] + 4 for r in rows)
    _log(run, f"sweep: {len(rows)} points, gaps positive {ok}, dims ok {expected_dims}")
    return EXIT_OK if (ok and expected_dims) else EXIT_INVARIANT


HANDLERS = {
    "gap": cmd_gap, "relax": cmd_relax, "modes": cmd_modes,
    "kcompact": cmd_kcompact, "invariants": cmd_invariants, "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="landaumix",
                                description="Velocity-space toolkit for the "
                                            "multi-species Landau system")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--output", default=None, help="output directory (overrides config)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker pool size (default from ${'{'}LANDAUMIX_THREADS{'}'})")
    p.add_argument("--export-matrices", action="store_true",
                   help="also write Matrix Market exports where applicable")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = load_config(args.config, seed=args.seed, output_dir=args.output,
                          threads=args.threads)
    except (ConfigError, LandauMixError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(run.output_dir, exist_ok=True)
    try:
        return HANDLERS[args.command](run, export_matrices=args.export_matrices)
    except (SolverNoConvergence, NoExponentialWindow) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
